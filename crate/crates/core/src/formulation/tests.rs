use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grid::{builtin_case, EssSpec, GeneratorSpec, LineSpec, LoadSpec};

fn two_bus_case() -> GridCase {
    GridCase {
        name: "two".into(),
        base_mva: 100.0,
        n_b: 2,
        slack_bus: 0,
        generators: vec![GeneratorSpec {
            bus: 0,
            p_min: 5.0,
            p_max: 100.0,
            ramp_up: 30.0,
            ramp_down: 20.0,
            cost: vec![10.0],
        }],
        lines: vec![LineSpec {
            from_bus: 0,
            to_bus: 1,
            reactance: 0.1,
            flow_limit: 50.0,
        }],
        loads: vec![LoadSpec {
            bus: 1,
            nominal_mw: 40.0,
        }],
        ess_units: vec![EssSpec {
            bus: 1,
            p_ch_max: 10.0,
            p_dis_max: 15.0,
            eta_ch: 0.9,
            eta_dis: 0.8,
            e_min: 4.0,
            e_max: 40.0,
            e_init_frac: 0.5,
        }],
    }
}

fn demand_row(values: &[f64]) -> DemandScenario {
    DemandScenario::new(DMatrix::from_row_slice(1, values.len(), values)).unwrap()
}

#[test]
fn hand_enumerated_two_bus_system() {
    let net = Network::new(two_bus_case()).unwrap();
    let qp = QpData::build(
        &net,
        &demand_row(&[30.0, 45.0]),
        FormulationOptions::default(),
    )
    .unwrap();
    let (a, c) = (0.9, 1.0 / 0.8);
    #[rustfmt::skip]
    let g_expected = DMatrix::from_row_slice(22, 6, &[
        // generation upper / lower
        1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, -1.0, 0.0, 0.0,
        // charge upper / lower
        0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        0.0, -1.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, -1.0, 0.0,
        // discharge upper / lower
        0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, -1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, -1.0,
        // ramp up / down
        -1.0, 0.0, 0.0, 1.0, 0.0, 0.0,
        1.0, 0.0, 0.0, -1.0, 0.0, 0.0,
        // SoC upper / lower
        0.0, a, -c, 0.0, 0.0, 0.0,
        0.0, a, -c, 0.0, a, -c,
        0.0, -a, c, 0.0, 0.0, 0.0,
        0.0, -a, c, 0.0, -a, c,
        // line 0->1 carries ch - dis + demand
        0.0, 1.0, -1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 1.0, -1.0,
        0.0, -1.0, 1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, -1.0, 1.0,
    ]);
    let h_expected = vec![
        100.0, 100.0, -5.0, -5.0, 10.0, 10.0, 0.0, 0.0, 15.0, 15.0, 0.0, 0.0, 30.0, 20.0, 20.0,
        20.0, 16.0, 16.0, 20.0, 5.0, 80.0, 95.0,
    ];
    let g = qp.g_mat.to_dense();
    assert!((&g - &g_expected).abs().max() < 1e-15, "G differs:\n{g}");
    for (h, e) in qp.h_vec.iter().zip(&h_expected) {
        assert!((h - e).abs() < 1e-12, "{:?}", qp.h_vec);
    }
    #[rustfmt::skip]
    let a_expected = DMatrix::from_row_slice(3, 6, &[
        1.0, -1.0, 1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0, -1.0, 1.0,
        0.0, a, -c, 0.0, a, -c,
    ]);
    assert!((qp.a_mat.to_dense() - a_expected).abs().max() < 1e-15);
    assert_eq!(qp.b_vec, vec![30.0, 45.0, 0.0]);
    assert_eq!(qp.q(), inequality_count(&net.case, 2));
}

#[test]
fn balance_rhs_is_total_demand() {
    let mut case = two_bus_case();
    case.lines[0].flow_limit = 1e3;
    let (_, b, labels) = build_equalities(
        &case,
        &demand_row(&[10.0, 20.0]),
        FormulationOptions::default(),
    )
    .unwrap();
    assert_eq!(b, vec![10.0, 20.0, 0.0]);
    assert_eq!(labels[1].family, ConstraintFamily::TerminalSoc);
}

#[test]
fn toy3_equality_row_count() {
    let case = builtin_case("toy3").unwrap();
    let demand = DemandScenario::new(DMatrix::from_element(1, 3, 50.0)).unwrap();
    let (a, b, _) = build_equalities(&case, &demand, FormulationOptions::default()).unwrap();
    assert_eq!(a.nrows(), 3 + case.n_e());
    assert_eq!(b.len(), 4);
}

#[test]
fn case39_dimensions() {
    let net = Network::new(builtin_case("case39").unwrap()).unwrap();
    let demand = DemandScenario::new(DMatrix::from_element(net.case.n_d(), 24, 100.0)).unwrap();
    let qp = QpData::build(&net, &demand, FormulationOptions::default()).unwrap();
    assert_eq!(qp.n(), 12 * 24);
    assert_eq!(qp.q(), 2 * 12 * 24 + 2 * 10 * 23 + 2 * 24 + 2 * 46 * 24);
    assert_eq!(qp.n_eq(), 25);
}

#[test]
fn labels_partition_rows() {
    let net = Network::new(builtin_case("toy3").unwrap()).unwrap();
    let demand = DemandScenario::new(DMatrix::from_element(1, 4, 60.0)).unwrap();
    let qp = QpData::build(&net, &demand, FormulationOptions::default()).unwrap();
    for (labels, total) in [(&qp.ineq_labels, qp.q()), (&qp.eq_labels, qp.n_eq())] {
        let mut next = 0;
        for l in labels.iter() {
            assert_eq!(l.rows.start, next);
            next = l.rows.end;
        }
        assert_eq!(next, total);
    }
}

#[test]
fn without_storage_reduces_to_generator_problem() {
    let mut case = builtin_case("toy3").unwrap();
    case.ess_units.clear();
    let net = Network::new(case).unwrap();
    let demand = DemandScenario::new(DMatrix::from_element(1, 3, 60.0)).unwrap();
    let qp = QpData::build(&net, &demand, FormulationOptions::default()).unwrap();
    let ones = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]);
    assert_eq!(
        qp.a_mat.to_dense(),
        SparseMatrix::identity(3).kron(&ones).to_dense()
    );
    for fam in [
        ConstraintFamily::SocUpper,
        ConstraintFamily::ChargeUpper,
        ConstraintFamily::DischargeLower,
    ] {
        assert!(qp.ineq_rows(fam).is_empty());
    }
}

#[test]
fn ramp_rows_vanish_on_constant_schedule() {
    let net = Network::new(builtin_case("toy3").unwrap()).unwrap();
    let demand = DemandScenario::new(DMatrix::from_element(1, 5, 60.0)).unwrap();
    let qp = QpData::build(&net, &demand, FormulationOptions::default()).unwrap();
    let layout = qp.layout;
    let x = layout
        .vectorize(&DMatrix::from_fn(layout.p(), 5, |i, _| 3.0 + i as f64))
        .unwrap();
    let gx = qp.g_mat.mul_vec(&x);
    for fam in [ConstraintFamily::RampUp, ConstraintFamily::RampDown] {
        for r in qp.ineq_rows(fam) {
            assert_eq!(gx[r], 0.0);
        }
    }
}

#[test]
fn zero_decision_only_violates_generator_minimums() {
    let net = Network::new(builtin_case("toy3").unwrap()).unwrap();
    let demand = DemandScenario::new(DMatrix::zeros(1, 3)).unwrap();
    let qp = QpData::build(&net, &demand, FormulationOptions::default()).unwrap();
    let gx = qp.g_mat.mul_vec(&vec![0.0; qp.n()]);
    for (row, (g, h)) in gx.iter().zip(&qp.h_vec).enumerate() {
        let slack = h - g;
        let fam = qp.family_of_ineq(row);
        if slack < 0.0 {
            assert_eq!(fam, ConstraintFamily::GenLower);
        } else if slack == 0.0 {
            assert!(
                matches!(
                    fam,
                    ConstraintFamily::GenLower
                        | ConstraintFamily::ChargeLower
                        | ConstraintFamily::DischargeLower
                ),
                "{fam:?}"
            );
        }
    }
}

/// Residual `G x - h` of every row, computed straight from the dispatch
/// model in the documented family order.
fn direct_residuals(net: &Network, demand: &DemandScenario, x: &[f64]) -> Vec<f64> {
    let case = &net.case;
    let t_len = demand.horizon();
    let lay = DecisionLayout::new(case.n_g(), case.n_e(), t_len);
    let mut r = Vec::new();
    let gens = &case.generators;
    let ess = &case.ess_units;
    for t in 0..t_len {
        for (g, gen) in gens.iter().enumerate() {
            r.push(x[lay.gen(t, g)] - gen.p_max);
        }
    }
    for t in 0..t_len {
        for (g, gen) in gens.iter().enumerate() {
            r.push(gen.p_min - x[lay.gen(t, g)]);
        }
    }
    for t in 0..t_len {
        for (e, u) in ess.iter().enumerate() {
            r.push(x[lay.ch(t, e)] - u.p_ch_max);
        }
    }
    for t in 0..t_len {
        for e in 0..ess.len() {
            r.push(-x[lay.ch(t, e)]);
        }
    }
    for t in 0..t_len {
        for (e, u) in ess.iter().enumerate() {
            r.push(x[lay.dis(t, e)] - u.p_dis_max);
        }
    }
    for t in 0..t_len {
        for e in 0..ess.len() {
            r.push(-x[lay.dis(t, e)]);
        }
    }
    for t in 1..t_len {
        for (g, gen) in gens.iter().enumerate() {
            r.push(x[lay.gen(t, g)] - x[lay.gen(t - 1, g)] - gen.ramp_up);
        }
    }
    for t in 1..t_len {
        for (g, gen) in gens.iter().enumerate() {
            r.push(x[lay.gen(t - 1, g)] - x[lay.gen(t, g)] - gen.ramp_down);
        }
    }
    let mut soc = vec![vec![0.0; ess.len()]; t_len];
    for (e, u) in ess.iter().enumerate() {
        let mut level = u.e_init();
        for (t, row) in soc.iter_mut().enumerate() {
            level += u.eta_ch * x[lay.ch(t, e)] - x[lay.dis(t, e)] / u.eta_dis;
            row[e] = level;
        }
    }
    for row in &soc {
        for (e, u) in ess.iter().enumerate() {
            r.push(row[e] - u.e_max);
        }
    }
    for row in &soc {
        for (e, u) in ess.iter().enumerate() {
            r.push(u.e_min - row[e]);
        }
    }
    let mut flows = Vec::new();
    for t in 0..t_len {
        let mut inj = vec![0.0; case.n_b];
        for (g, gen) in gens.iter().enumerate() {
            inj[gen.bus] += x[lay.gen(t, g)];
        }
        for (e, u) in ess.iter().enumerate() {
            inj[u.bus] += x[lay.dis(t, e)] - x[lay.ch(t, e)];
        }
        for (d, load) in case.loads.iter().enumerate() {
            inj[load.bus] -= demand.p_d[(d, t)];
        }
        flows.push(net.gsf.flows(&inj));
    }
    for f in &flows {
        for (l, line) in case.lines.iter().enumerate() {
            r.push(f[l] - line.flow_limit);
        }
    }
    for f in &flows {
        for (l, line) in case.lines.iter().enumerate() {
            r.push(-f[l] - line.flow_limit);
        }
    }
    r
}

#[test]
fn assembled_matrix_matches_direct_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, horizon) in [("toy3", 4), ("case39", 3)] {
        let net = Network::new(builtin_case(name).unwrap()).unwrap();
        let p_d = DMatrix::from_fn(net.case.n_d(), horizon, |d, _| {
            net.case.loads[d].nominal_mw * rng.random_range(0.5..1.0)
        });
        let demand = DemandScenario::new(p_d).unwrap();
        let qp = QpData::build(&net, &demand, FormulationOptions::default()).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..qp.n())
                .map(|_| rng.random_range(-200.0..1200.0))
                .collect();
            let gx = qp.g_mat.mul_vec(&x);
            let direct = direct_residuals(&net, &demand, &x);
            assert_eq!(direct.len(), qp.q());
            let worst = gx
                .iter()
                .zip(&qp.h_vec)
                .zip(&direct)
                .map(|((g, h), d)| (g - h - d).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-10 * 1e3, "{name}: {worst}");
        }
    }
}

#[test]
fn soc_trajectory_examples() {
    let mut case = two_bus_case();
    case.ess_units[0].e_max = 200.0;
    case.ess_units[0].e_min = 0.0;
    let layout = DecisionLayout::new(1, 1, 3);
    let idle = vec![0.0; layout.len()];
    let e = soc_trajectory(&case, &layout, &idle).unwrap();
    assert!(e.iter().all(|&v| v == 100.0));

    let mut x = idle.clone();
    x[layout.ch(0, 0)] = 10.0;
    let e = soc_trajectory(&case, &layout, &x).unwrap();
    assert!((e[(0, 0)] - 109.0).abs() < 1e-12);
    assert!((e[(0, 2)] - 109.0).abs() < 1e-12);
}

#[test]
fn dump_lists_labels_and_triplets() {
    let net = Network::new(two_bus_case()).unwrap();
    let qp = QpData::build(
        &net,
        &demand_row(&[30.0, 45.0]),
        FormulationOptions::default(),
    )
    .unwrap();
    let mut buf = Vec::new();
    qp.write_dump(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("%%qpdata n=6 p=3 horizon=2 n_eq=3 q=22"));
    assert!(text.contains("%label ineq ramp_up 12 13"));
    assert!(text.contains("%matrix G 22 6"));
}
