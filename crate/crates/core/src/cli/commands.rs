use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use mpopf::experiments::{
    evaluate, generate_dataset, label_dataset, parallel_map, read_labels, split_indices,
    write_labels, write_reports, Dataset, DatasetSpec, EvalReport, Label,
};
use mpopf::formulation::{
    check_schedule, cost_vector, soc_trajectory, DecisionLayout, DemandScenario,
    FormulationOptions, QpData,
};
use mpopf::grid::{resolve_case, Network};
use mpopf::solver::{
    check_kkt, ConvexProgram, InteriorPointSolver, SolveResult, LP_REGULARIZATION,
};
use mpopf::training::{train, Checkpoint, TrainConfig, TrainingData};
use mpopf::{Error, Result};

use super::manifest::{new_run_dir, utc_now, version, RunManifest};
use super::settings::{EvalSettings, GenDataSettings, SolveSettings, TrainSettings};
use super::Resolved;

const LABELS_FILE: &str = "labels.csv";

struct Outcome {
    seed: u64,
    net: Network,
    outputs: Vec<PathBuf>,
    details: Value,
}

pub fn execute(resolved: &Resolved, out_root: &Path, run_dir: Option<&Path>) -> Result<()> {
    let started = utc_now();
    let seed = match resolved {
        Resolved::GenData(s) => s.seed,
        Resolved::Train(s) => s.seed,
        Resolved::Eval(s) => s.seed.unwrap_or(0),
        Resolved::Solve(_) => 0,
    };
    let dir = match run_dir {
        Some(d) => d.to_path_buf(),
        None => new_run_dir(out_root, resolved.name(), seed)?,
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::Output(format!("{}: {e}", dir.display())))?;
    info!("writing to {}", dir.display());
    let (config, outcome) = match resolved {
        Resolved::GenData(s) => (to_value(s)?, gen_data(s, &dir)?),
        Resolved::Solve(s) => (to_value(s)?, solve(s, &dir)?),
        Resolved::Train(s) => (to_value(s)?, train_cmd(s, &dir)?),
        Resolved::Eval(s) => (to_value(s)?, eval(s, &dir)?),
    };
    let manifest = RunManifest {
        subcommand: resolved.name().into(),
        version: version(),
        config,
        seed: outcome.seed,
        case_name: outcome.net.case.name.clone(),
        case_fingerprint: outcome.net.case.fingerprint(),
        outputs: outcome
            .outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        started_utc: started,
        finished_utc: utc_now(),
        details: outcome.details,
    };
    let path = manifest.save(&dir)?;
    println!("run manifest: {}", path.display());
    Ok(())
}

fn to_value(v: &impl serde::Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Output(e.to_string()))
}

fn network(case: &str) -> Result<Network> {
    Network::new(resolve_case(case)?)
}

fn split(v: &[f64]) -> Result<[f64; 3]> {
    v.try_into()
        .map_err(|_| Error::Config(format!("split needs three ratios, got {}", v.len())))
}

fn require<'a>(v: &'a Option<String>, what: &str) -> Result<&'a str> {
    v.as_deref()
        .ok_or_else(|| Error::Config(format!("--{what} is required")))
}

fn load_dataset(dir: &str, net: &Network) -> Result<Dataset> {
    let ds = Dataset::read(Path::new(dir))?;
    ds.check_case(net)?;
    Ok(ds)
}

fn load_labels(dir: &str) -> Result<Option<Vec<Label>>> {
    let path = Path::new(dir).join(LABELS_FILE);
    if path.exists() {
        read_labels(&path).map(Some)
    } else {
        Ok(None)
    }
}

fn gen_data(s: &GenDataSettings, dir: &Path) -> Result<Outcome> {
    let net = network(&s.case)?;
    let spec = DatasetSpec {
        k: s.k,
        horizon: s.horizon,
        noise: s.noise,
        load_scale: s.scale,
        seed: s.seed,
    };
    let (ds, labels) = generate_dataset(&spec, &net, s.jobs)?;
    ds.write(dir, &net)?;
    let mut outputs = vec![dir.join("demand.csv"), dir.join("manifest.json")];
    if !s.no_labels {
        let path = dir.join(LABELS_FILE);
        write_labels(&path, &labels)?;
        outputs.push(path);
    }
    println!(
        "{} scenarios x {} hours for `{}` ({} redraws), demand sha256 {}",
        ds.len(),
        ds.horizon(),
        net.case.name,
        ds.manifest.resampled,
        ds.manifest.demand_sha256
    );
    Ok(Outcome {
        seed: s.seed,
        net,
        outputs,
        details: json!({ "demand_sha256": ds.manifest.demand_sha256, "resampled": ds.manifest.resampled }),
    })
}

/// Demand CSV: one row per hour, one column per load; `#` starts a comment.
fn read_demand(path: &str, n_d: usize) -> Result<DemandScenario> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{path}: {e}")))?;
    let parse_err = |message: String| Error::Parse {
        path: path.into(),
        message,
    };
    let mut hours: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| parse_err(format!("`{v}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != n_d {
            return Err(parse_err(format!(
                "hour {} has {} values, case has {n_d} loads",
                hours.len(),
                row.len()
            )));
        }
        hours.push(row);
    }
    if hours.is_empty() {
        return Err(parse_err("no demand rows".into()));
    }
    DemandScenario::new(DMatrix::from_fn(n_d, hours.len(), |l, t| hours[t][l]))
}

enum SolveOutcome {
    Solved(SolveResult, f64, f64),
    Failed(Error),
}

fn solve_one(net: &Network, sc: &DemandScenario) -> Result<SolveOutcome> {
    let qp = QpData::build(net, sc, FormulationOptions::default())?;
    let cost = cost_vector(&net.case, &qp.layout, 0);
    let prog = ConvexProgram::dispatch(&qp, &cost, LP_REGULARIZATION);
    match InteriorPointSolver::default().solve(&prog, None) {
        Ok(sol) => {
            let kkt = check_kkt(&sol, &prog).max_scaled();
            let c = cost.iter().zip(&sol.x_star).map(|(c, x)| c * x).sum();
            Ok(SolveOutcome::Solved(sol, c, kkt))
        }
        Err(e @ (Error::Infeasible(_) | Error::MaxIterations(_) | Error::Numerical(_))) => {
            Ok(SolveOutcome::Failed(e))
        }
        Err(e) => Err(e),
    }
}

fn print_dispatch(net: &Network, layout: &DecisionLayout, x: &[f64]) -> Result<()> {
    let case = &net.case;
    let soc = soc_trajectory(case, layout, x)?;
    let mut header = String::from("hour");
    for g in 0..case.n_g() {
        header += &format!("\tgen{g}");
    }
    for e in 0..case.n_e() {
        header += &format!("\tch{e}\tdis{e}\tsoc{e}");
    }
    println!("{header}");
    for t in 0..layout.horizon {
        let mut line = format!("{}", t + 1);
        for g in 0..case.n_g() {
            line += &format!("\t{:.4}", x[layout.gen(t, g)]);
        }
        for e in 0..case.n_e() {
            line += &format!(
                "\t{:.4}\t{:.4}\t{:.4}",
                x[layout.ch(t, e)],
                x[layout.dis(t, e)],
                soc[(e, t)]
            );
        }
        println!("{line}");
    }
    Ok(())
}

fn solve(s: &SolveSettings, dir: &Path) -> Result<Outcome> {
    let net = network(&s.case)?;
    if !(s.scale > 0.0 && s.scale.is_finite()) {
        return Err(Error::Validation(format!(
            "scale must be positive, got {}",
            s.scale
        )));
    }
    let scenarios: Vec<DemandScenario> = match (&s.dataset, &s.demand) {
        (Some(d), None) => load_dataset(d, &net)?.scenarios,
        (None, Some(f)) => vec![read_demand(f, net.case.n_d())?],
        _ => {
            return Err(Error::Config(
                "give exactly one of --dataset or --demand".into(),
            ))
        }
    }
    .into_iter()
    .map(|sc| sc.scaled(s.scale))
    .collect();
    let results = parallel_map(&scenarios, s.jobs, |_, sc| solve_one(&net, sc));

    let path = dir.join("solutions.csv");
    let file =
        File::create(&path).map_err(|e| Error::Output(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| Error::Output(format!("{}: {e}", path.display()));
    let n = QpData::build(&net, &scenarios[0], FormulationOptions::default())?.n();
    write!(w, "scenario,status,cost,kkt_residual,max_violation").map_err(io)?;
    for i in 0..n {
        write!(w, ",x{i}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    let (mut solved, mut worst_kkt, mut worst_viol) = (0usize, 0.0_f64, 0.0_f64);
    let mut last = None;
    let mut first_failure = None;
    for (i, (res, sc)) in results.into_iter().zip(&scenarios).enumerate() {
        match res? {
            SolveOutcome::Solved(sol, cost, kkt) => {
                let viol = check_schedule(&net, sc, &sol.x_star, FormulationOptions::default())?
                    .max_residual();
                write!(w, "{i},optimal,{cost},{kkt},{viol}").map_err(io)?;
                for v in &sol.x_star {
                    write!(w, ",{v}").map_err(io)?;
                }
                writeln!(w).map_err(io)?;
                solved += 1;
                worst_kkt = worst_kkt.max(kkt);
                worst_viol = worst_viol.max(viol);
                last = Some((sol, cost));
            }
            SolveOutcome::Failed(e) => {
                warn!("scenario {i}: {e}");
                println!("scenario {i}: FAILED ({e})");
                writeln!(w, "{i},failed,,,").map_err(io)?;
                first_failure.get_or_insert(e);
            }
        }
    }
    w.flush().map_err(io)?;
    println!(
        "{solved}/{} scenarios solved, max scaled KKT residual {worst_kkt:.3e}, max constraint violation {worst_viol:.3e}",
        scenarios.len()
    );
    if scenarios.len() == 1 {
        if let Some((sol, cost)) = &last {
            let layout =
                DecisionLayout::new(net.case.n_g(), net.case.n_e(), scenarios[0].horizon());
            println!("cost {cost:.6}");
            print_dispatch(&net, &layout, &sol.x_star)?;
        }
    }
    if let (0, Some(e)) = (solved, first_failure) {
        return Err(e);
    }
    Ok(Outcome {
        seed: 0,
        net,
        outputs: vec![path],
        details: json!({ "solved": solved, "scenarios": scenarios.len(), "max_kkt_residual": worst_kkt }),
    })
}

fn train_cmd(s: &TrainSettings, dir: &Path) -> Result<Outcome> {
    let net = network(&s.case)?;
    let ds_dir = require(&s.dataset, "dataset")?;
    let ds = load_dataset(ds_dir, &net)?;
    let labels = load_labels(ds_dir)?;
    let config = TrainConfig {
        mode: s.mode,
        max_epochs: s.epochs,
        lr: s.lr,
        seed: s.seed,
        split: split(&s.split)?,
        patience: s.patience,
        batch_size: s.batch_size,
        jobs: s.jobs,
    };
    let data = TrainingData {
        net: &net,
        scenarios: &ds.scenarios,
        labels: labels.as_deref(),
    };
    let out = train(&data, &config)?;
    let ckpt_path = dir.join("checkpoint.json");
    out.checkpoint(&net, &config).save(&ckpt_path)?;
    let rec_path = dir.join("train_record.csv");
    let file = File::create(&rec_path)
        .map_err(|e| Error::Output(format!("{}: {e}", rec_path.display())))?;
    out.record
        .write_csv(BufWriter::new(file))
        .map_err(|e| Error::Output(format!("{}: {e}", rec_path.display())))?;
    let best = &out.record.epochs[out.record.best_epoch - 1];
    println!(
        "{}: best epoch {} of {}, validation cost {:.4}, gap {}",
        s.mode,
        out.record.best_epoch,
        out.record.epochs.len(),
        best.val_cost,
        best.val_gap_pct
            .map_or("n/a".into(), |g| format!("{g:.4}%"))
    );
    Ok(Outcome {
        seed: s.seed,
        net,
        outputs: vec![ckpt_path, rec_path],
        details: json!({
            "best_epoch": out.record.best_epoch,
            "epochs_run": out.record.epochs.len(),
            "val_cost": best.val_cost,
            "val_gap_pct": best.val_gap_pct,
            "val_mae_pu": best.val_mae_pu,
            "epoch_seconds": out.epoch_seconds,
        }),
    })
}

fn eval(s: &EvalSettings, dir: &Path) -> Result<Outcome> {
    let net = network(&s.case)?;
    let ds_dir = require(&s.dataset, "dataset")?;
    let ds = load_dataset(ds_dir, &net)?;
    if s.scales.is_empty() || s.scales.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Validation(format!(
            "scales must be positive, got {:?}",
            s.scales
        )));
    }
    let checkpoints = s
        .checkpoints
        .iter()
        .map(|p| {
            let c = Checkpoint::load(Path::new(p))?;
            c.check_case(&net)?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    if checkpoints.is_empty() && !s.exact {
        return Err(Error::Config(
            "nothing to evaluate: pass --checkpoint or --exact".into(),
        ));
    }
    let seed = s
        .seed
        .or(checkpoints.first().map(|c| c.seed))
        .unwrap_or(TrainConfig::default().seed);
    let [_, _, test] = split_indices(ds.len(), split(&s.split)?, seed)?;
    if test.is_empty() {
        return Err(Error::Config("test split is empty".into()));
    }
    let stored = load_labels(ds_dir)?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for &scale in &s.scales {
        let scenarios: Vec<DemandScenario> = test
            .iter()
            .map(|&i| ds.scenarios[i].scaled(scale))
            .collect();
        let labels = match &stored {
            Some(l) if scale == 1.0 => test.iter().map(|&i| l[i].clone()).collect(),
            _ => label_dataset(&net, &scenarios, s.jobs)?,
        };
        if s.exact {
            let outputs: Vec<Vec<f64>> = labels.iter().map(|l| l.x_star.clone()).collect();
            reports.push(evaluate(
                &net, "exact", scale, &scenarios, &outputs, &labels, true,
            )?);
        }
        for ckpt in &checkpoints {
            let model = &ckpt.model;
            let outputs = parallel_map(&scenarios, s.jobs, |_, sc| {
                model
                    .infer(&net, sc, &mut InteriorPointSolver::default())
                    .map(|inf| inf.x)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let storage_energy = !model.mode.single_period();
            reports.push(evaluate(
                &net,
                model.mode.name(),
                scale,
                &scenarios,
                &outputs,
                &labels,
                storage_energy,
            )?);
        }
    }
    write_reports(dir, &reports)?;
    for r in &reports {
        println!(
            "{:<10} scale {:.3}: MAE {:.6} p.u., gap {:.4}%, ramp violations {}, max residual {:.2e}",
            r.model,
            r.load_scale,
            r.mae_pu,
            r.gap_pct,
            r.violations_label(),
            r.max_residual.max_residual()
        );
    }
    let outputs = [
        "accuracy.csv",
        "ramp_violations.csv",
        "hourly_cost.csv",
        "residuals.csv",
        "summary.txt",
    ]
    .iter()
    .map(|f| dir.join(f))
    .collect();
    Ok(Outcome {
        seed,
        net,
        outputs,
        details: to_value(&reports)?,
    })
}
