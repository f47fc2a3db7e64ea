use sha2::{Digest, Sha256};

use super::*;
use crate::formulation::{check_schedule, FormulationOptions};
use crate::grid::{builtin_case, Network};

fn toy() -> Network {
    Network::new(builtin_case("toy3").unwrap()).unwrap()
}

fn spec(k: usize, noise: f64, scale: f64) -> DatasetSpec {
    DatasetSpec {
        k,
        horizon: 24,
        noise,
        load_scale: scale,
        seed: 3,
    }
}

#[test]
fn parallel_map_preserves_order() {
    let items: Vec<usize> = (0..37).collect();
    for jobs in [1, 2, 5, 64] {
        let out = parallel_map(&items, jobs, |i, v| i * 100 + v);
        assert_eq!(out, (0..37).map(|i| i * 101).collect::<Vec<_>>());
    }
}

#[test]
fn noiseless_samples_equal_scaled_base() {
    let net = toy();
    let (ds, _) = generate_dataset(&spec(3, 0.0, 1.025), &net, 1).unwrap();
    let shape = base_load_shape(24);
    for sc in &ds.scenarios {
        for (t, s) in shape.iter().enumerate() {
            assert_eq!(sc.p_d[(0, t)], 90.0 * s * 1.0 * 1.025);
        }
    }
}

#[test]
fn load_scale_is_multiplicative_per_sample() {
    let net = toy();
    let (a, _) = generate_dataset(&spec(10, 0.1, 1.0), &net, 1).unwrap();
    let (b, _) = generate_dataset(&spec(10, 0.1, 1.05), &net, 2).unwrap();
    for (x, y) in a.scenarios.iter().zip(&b.scenarios) {
        for t in 0..24 {
            assert!((y.total(t) - 1.05 * x.total(t)).abs() <= 1e-12 * y.total(t));
        }
    }
}

#[test]
fn generation_is_reproducible_and_hash_stable() {
    let net = toy();
    let (a, _) = generate_dataset(&spec(100, 0.1, 1.0), &net, 1).unwrap();
    let (b, _) = generate_dataset(&spec(100, 0.1, 1.0), &net, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        a.manifest.demand_sha256,
        "15206a9acb3f7197ff6f6b2b75e303a02160704b103d68bf17f0c72bd2bffd71"
    );
}

#[test]
fn dataset_round_trips_through_files() {
    let net = toy();
    let (ds, labels) = generate_dataset(&spec(4, 0.1, 1.0), &net, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    ds.write(dir.path(), &net).unwrap();
    let back = Dataset::read(dir.path()).unwrap();
    assert_eq!(back, ds);
    back.check_case(&net).unwrap();
    let other = Network::new(builtin_case("toy_storage").unwrap()).unwrap();
    assert!(back.check_case(&other).is_err());

    let path = dir.path().join("labels.csv");
    write_labels(&path, &labels).unwrap();
    assert_eq!(read_labels(&path).unwrap(), labels);

    let csv = dir.path().join("demand.csv");
    let text = std::fs::read_to_string(&csv)
        .unwrap()
        .replace("scenario", "scenari0");
    std::fs::write(&csv, text).unwrap();
    assert!(Dataset::read(dir.path()).is_err());
    let digest = hex::encode(Sha256::digest(b""));
    assert_ne!(digest, ds.manifest.demand_sha256);
}

#[test]
fn labels_are_feasible_and_beat_a_heuristic() {
    let net = toy();
    let (ds, labels) = generate_dataset(&spec(5, 0.1, 1.0), &net, 1).unwrap();
    for (sc, label) in ds.scenarios.iter().zip(&labels) {
        let report =
            check_schedule(&net, sc, &label.x_star, FormulationOptions::default()).unwrap();
        assert!(report.max_residual() <= 1e-6, "{report:?}");
        assert!(label.kkt_residual <= 1e-8);
        // heuristic: cheap unit up to its line limit, expensive unit covers the rest, storage idle
        let heuristic: f64 = (0..24)
            .map(|t| {
                let cheap = (sc.total(t) - 5.0).min(80.0);
                10.0 * cheap + 30.0 * (sc.total(t) - cheap)
            })
            .sum();
        assert!(label.cost <= heuristic + 1e-6);
    }
    let relabeled = label_dataset(&net, &ds.scenarios, 2).unwrap();
    assert_eq!(relabeled, labels);
}

#[test]
fn capacity_shortfall_is_reported() {
    let net = toy();
    let err = generate_dataset(&spec(1, 0.0, 2.5), &net, 1).unwrap_err();
    assert!(err.to_string().contains("no feasible demand draw"), "{err}");
    assert!(spec(0, 0.1, 1.0).validate().is_err());
    assert!(spec(1, 0.1, -1.0).validate().is_err());
}

#[test]
fn exact_labels_score_zero() {
    let net = toy();
    let (ds, labels) = generate_dataset(&spec(6, 0.1, 1.0), &net, 1).unwrap();
    let outputs: Vec<Vec<f64>> = labels.iter().map(|l| l.x_star.clone()).collect();
    let r = evaluate(&net, "exact", 1.0, &ds.scenarios, &outputs, &labels, true).unwrap();
    assert_eq!(r.mae_pu, 0.0);
    assert!(r.gap_pct.abs() <= 1e-9);
    assert_eq!(r.ramp_violations, 0);
    assert_eq!(r.hourly.len(), 24);
    assert!(evaluate(
        &net,
        "exact",
        1.0,
        &ds.scenarios,
        &outputs[..5],
        &labels,
        true
    )
    .is_err());

    let dir = tempfile::tempdir().unwrap();
    write_reports(dir.path(), std::slice::from_ref(&r)).unwrap();
    let first = std::fs::read(dir.path().join("accuracy.csv")).unwrap();
    write_reports(dir.path(), &[r]).unwrap();
    assert_eq!(
        first,
        std::fs::read(dir.path().join("accuracy.csv")).unwrap()
    );
    let table = std::fs::read_to_string(dir.path().join("ramp_violations.csv")).unwrap();
    assert!(table.contains("0 / 6"));
}

#[test]
fn ramp_excursions_are_counted() {
    let net = toy();
    let (ds, labels) = generate_dataset(&spec(2, 0.0, 1.0), &net, 1).unwrap();
    let mut outputs: Vec<Vec<f64>> = labels.iter().map(|l| l.x_star.clone()).collect();
    let lay = crate::formulation::DecisionLayout::new(2, 1, 24);
    // cheap unit jumps by more than its 30 MW ramp, expensive unit compensates
    outputs[1][lay.gen(5, 0)] += 35.0;
    outputs[1][lay.gen(5, 1)] -= 35.0;
    let r = evaluate(
        &net,
        "perturbed",
        1.0,
        &ds.scenarios,
        &outputs,
        &labels,
        true,
    )
    .unwrap();
    assert_eq!(r.ramp_violations, 1);
    assert!(r.mae_pu > 0.0);
}

#[test]
fn split_is_seeded_partition() {
    let [a, b, c] = split_indices(500, [0.5, 0.3, 0.2], 1).unwrap();
    assert_eq!((a.len(), b.len(), c.len()), (250, 150, 100));
    let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
    all.sort();
    assert_eq!(all, (0..500).collect::<Vec<_>>());
    assert_eq!(split_indices(500, [0.5, 0.3, 0.2], 1).unwrap()[0], a);
    assert_ne!(split_indices(500, [0.5, 0.3, 0.2], 2).unwrap()[0], a);
    assert!(split_indices(10, [0.5, 0.3, 0.3], 1).is_err());
}
