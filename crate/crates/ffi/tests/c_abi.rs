use std::ffi::{CStr, CString};
use std::ptr;

use mpopf_ffi::*;

fn load(name: &str) -> *mut MpopfNetwork {
    let name = CString::new(name).unwrap();
    let mut net = ptr::null_mut();
    assert_eq!(
        unsafe { mpopf_network_load(name.as_ptr(), &mut net) },
        MpopfStatus::Ok
    );
    net
}

fn last_error() -> String {
    let p = mpopf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn dispatch_and_projection_round_trip() {
    let net = load("toy3");
    let (mut n_g, mut n_e, mut n_d) = (0, 0, 0);
    assert_eq!(
        unsafe { mpopf_network_dims(net, &mut n_g, &mut n_e, &mut n_d, ptr::null_mut()) },
        MpopfStatus::Ok
    );
    assert_eq!((n_g, n_e, n_d), (2, 1, 1));

    let demand = [60.0, 95.0, 70.0];
    let mut problem = ptr::null_mut();
    assert_eq!(
        unsafe { mpopf_problem_new(net, demand.as_ptr(), 3, &mut problem) },
        MpopfStatus::Ok
    );
    let n = unsafe { mpopf_problem_dim(problem) };
    assert_eq!(n, 12);

    let mut x = vec![0.0; n];
    let mut cost = 0.0;
    assert_eq!(
        unsafe { mpopf_dispatch(problem, x.as_mut_ptr(), n, &mut cost) },
        MpopfStatus::Ok
    );
    let total: f64 = (0..3)
        .map(|t| x[4 * t] + x[4 * t + 1] - x[4 * t + 2] + x[4 * t + 3])
        .sum();
    assert!((total - 225.0).abs() < 1e-6);
    assert!(cost > 0.0);

    // projecting the optimum returns it and the Jacobian kills balance moves
    let mut proj = ptr::null_mut();
    assert_eq!(
        unsafe { mpopf_project(problem, x.as_ptr(), n, &mut proj) },
        MpopfStatus::Ok
    );
    let mut px = vec![0.0; n];
    assert_eq!(
        unsafe { mpopf_projection_x(proj, px.as_mut_ptr(), n) },
        MpopfStatus::Ok
    );
    for (a, b) in px.iter().zip(&x) {
        assert!((a - b).abs() < 1e-6);
    }
    let mut g = vec![0.0; n];
    let mut gz = vec![0.0; n];
    g[0] = 1.0;
    assert_eq!(
        unsafe { mpopf_projection_vjp(proj, g.as_ptr(), gz.as_mut_ptr(), n) },
        MpopfStatus::Ok
    );
    assert!(gz.iter().all(|v| v.is_finite()));

    unsafe {
        mpopf_projection_free(proj);
        mpopf_problem_free(problem);
        mpopf_network_free(net);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut net = ptr::null_mut();
    let missing = CString::new("/no/such/case.toml").unwrap();
    assert_eq!(
        unsafe { mpopf_network_load(missing.as_ptr(), &mut net) },
        MpopfStatus::Io
    );
    assert!(last_error().contains("/no/such/case.toml"));
    assert!(net.is_null());
    assert_eq!(
        unsafe { mpopf_network_load(ptr::null(), &mut net) },
        MpopfStatus::NullPointer
    );

    let net = load("toy3");
    let mut problem = ptr::null_mut();
    let huge = [500.0, 500.0];
    assert_eq!(
        unsafe { mpopf_problem_new(net, huge.as_ptr(), 2, &mut problem) },
        MpopfStatus::Ok
    );
    let mut x = vec![0.0; 8];
    assert_eq!(
        unsafe { mpopf_dispatch(problem, x.as_mut_ptr(), 8, ptr::null_mut()) },
        MpopfStatus::Infeasible
    );
    assert_eq!(
        unsafe { mpopf_dispatch(problem, x.as_mut_ptr(), 3, ptr::null_mut()) },
        MpopfStatus::Dimension
    );
    let negative = [-1.0, 5.0];
    let mut bad = ptr::null_mut();
    assert_eq!(
        unsafe { mpopf_problem_new(net, negative.as_ptr(), 2, &mut bad) },
        MpopfStatus::InvalidArgument
    );
    assert_eq!(unsafe { mpopf_problem_dim(ptr::null()) }, 0);
    let mut ok = ptr::null_mut();
    assert_eq!(
        unsafe { mpopf_problem_new(net, [10.0].as_ptr(), 1, &mut ok) },
        MpopfStatus::Ok
    );
    assert!(mpopf_last_error().is_null());
    unsafe {
        mpopf_problem_free(ok);
        mpopf_problem_free(problem);
        mpopf_network_free(net);
        mpopf_network_free(ptr::null_mut());
    }
}

#[test]
fn model_inference_through_checkpoint() {
    use mpopf::experiments::{generate_dataset, DatasetSpec};
    use mpopf::grid::{builtin_case, Network};
    use mpopf::training::{train, TrainConfig, TrainingData};

    let rust_net = Network::new(builtin_case("toy3").unwrap()).unwrap();
    let spec = DatasetSpec {
        k: 8,
        horizon: 4,
        ..Default::default()
    };
    let (ds, _) = generate_dataset(&spec, &rust_net, 1).unwrap();
    let cfg = TrainConfig {
        max_epochs: 1,
        ..Default::default()
    };
    let data = TrainingData {
        net: &rust_net,
        scenarios: &ds.scenarios,
        labels: None,
    };
    let out = train(&data, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    out.checkpoint(&rust_net, &cfg).save(&path).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { mpopf_model_load(c_path.as_ptr(), &mut model) },
        MpopfStatus::Ok
    );
    let net = load("toy3");
    let demand: Vec<f64> = ds.scenarios[0].flatten();
    let mut x = vec![0.0; 16];
    let mut cost = 0.0;
    let status = unsafe {
        mpopf_model_infer(
            model,
            net,
            demand.as_ptr(),
            4,
            x.as_mut_ptr(),
            16,
            &mut cost,
        )
    };
    assert_eq!(status, MpopfStatus::Ok);
    let expected = out
        .model
        .infer(
            &rust_net,
            &ds.scenarios[0],
            &mut mpopf::solver::InteriorPointSolver::default(),
        )
        .unwrap();
    assert_eq!(x, expected.x);
    assert_eq!(cost, expected.cost);

    let other = load("toy_storage");
    let status = unsafe {
        mpopf_model_infer(
            model,
            other,
            demand.as_ptr(),
            4,
            x.as_mut_ptr(),
            16,
            ptr::null_mut(),
        )
    };
    assert_eq!(status, MpopfStatus::Checkpoint);
    unsafe {
        mpopf_model_free(model);
        mpopf_network_free(net);
        mpopf_network_free(other);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mpopf.h")).unwrap();
    for name in [
        "mpopf_last_error",
        "mpopf_version",
        "mpopf_network_load",
        "mpopf_network_dims",
        "mpopf_problem_new",
        "mpopf_dispatch",
        "mpopf_project",
        "mpopf_projection_vjp",
        "mpopf_model_load",
        "mpopf_model_infer",
        "MPOPF_STATUS_INFEASIBLE",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    // the header must stand alone as C
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/include/mpopf.h");
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", path])
        .output()
    {
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let v = unsafe { CStr::from_ptr(mpopf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
