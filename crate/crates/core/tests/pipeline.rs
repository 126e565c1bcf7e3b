use rsopt::bench::{check_accounting, parse_curves_csv, parse_trajectory_csv, run_panel, write_curves_csv, write_trajectory_csv};
use rsopt::config::RunConfig;
use rsopt::optim::{run, Method, MethodConfig, Termination};
use rsopt::problems::{make_quadratic, NoiseModel};
use rsopt::special::{effective_rank, ell, tau};

const SMALL_BENCH: &str = r#"{
    "problem": {"d": 20, "rho": 4, "noise": {"kind": "sym_pareto", "alpha": 1.2, "scale": 1}},
    "bench": {"grid": [1e-4, 1e-3, 1e-2], "tune_seeds": [1, 2], "eval_seeds": [11, 12],
              "budget": 4000, "score_window": 5, "batch": 2,
              "methods": [{"name": "rs_sgd", "r": 20}, {"name": "rs_nsgd", "r": 5}, {"name": "rs_ngd", "r": 5}]},
    "output": {"dir": "unused"}
}"#;

#[test]
fn runs_are_reproducible_per_seed() {
    let q = make_quadratic(30, 6.0).unwrap();
    let noise = NoiseModel::SymPareto { alpha: 1.5, scale: 1.0 };
    let cfg = MethodConfig::constant(Method::RsNsgd, 5, 1e-2, 3, 200, 9);
    let a = run(&q, &noise, &cfg).unwrap();
    let b = run(&q, &noise, &cfg).unwrap();
    assert_eq!(a.points, b.points);
    assert_eq!(a.final_x, b.final_x);
    let c = run(&q, &noise, &MethodConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.final_x, c.final_x);
}

#[test]
fn trajectory_csv_round_trips_a_real_run() {
    let q = make_quadratic(10, 3.0).unwrap();
    let mut cfg = MethodConfig::constant(Method::RsSgd, 3, 1e-2, 2, 50, 1);
    cfg.log_stride = 7;
    let rec = run(&q, &NoiseModel::Gaussian { sigma_c: 0.5 }, &cfg).unwrap();
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &rec).unwrap();
    let back = parse_trajectory_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), rec.points.len());
    for (p, q) in back.iter().zip(&rec.points) {
        assert_eq!(p.k, q.k);
        assert_eq!(p.oracle_calls, q.oracle_calls);
        assert!((p.grad_norm - q.grad_norm).abs() <= 1e-12 * q.grad_norm.max(1.0));
    }
    // Logged every 7 steps plus the final iterate.
    assert_eq!(back.last().unwrap().k, 50);
    assert_eq!(back[1].k, 7);
}

#[test]
fn noiseless_ngd_decreases_the_objective() {
    let q = make_quadratic(50, 10.0).unwrap();
    let s = q.smoothness();
    let l = ell(50, 10, effective_rank(&s).unwrap()).unwrap();
    let delta0 = q.value(&q.default_start());
    let eta = (delta0 / (l * s.op_norm())).sqrt();
    let mut cfg = MethodConfig::constant(Method::RsNgd, 10, eta, 1, 2000, 3);
    cfg.u = 0.5;
    let rec = run(&q, &NoiseModel::None, &cfg).unwrap();
    assert_eq!(rec.termination, Termination::Completed);
    assert!(q.value(&rec.final_x) < delta0);
    assert!(tau(50, 10).unwrap() < 1.0);
}

#[test]
fn config_drives_a_full_run() {
    let cfg = RunConfig::from_json_str(
        r#"{"problem": {"d": 12, "rho": 3, "noise": {"kind": "gaussian", "sigma_c": 0.1}},
            "method": {"name": "rs_sgd", "r": 4, "eta": 0.05, "B": 2, "q": 0.5, "T": 16, "seed": 5}}"#,
    )
    .unwrap();
    let m = cfg.method_config().unwrap();
    assert_eq!(m.batch_size(), 8);
    let rec = run(&cfg.problem().unwrap(), &cfg.noise(), &m).unwrap();
    assert_eq!(rec.total_oracle_calls(), 16 * 8 * 4);
}

#[test]
fn small_panel_end_to_end() {
    let spec = RunConfig::from_json_str(SMALL_BENCH).unwrap().experiment().unwrap();
    let panel = run_panel(&spec, 4.0).unwrap();
    check_accounting(&spec, &panel).unwrap();
    assert_eq!(panel.results.len(), 3);
    for res in &panel.results {
        assert!(spec.tune.grid.contains(&res.tuned.eta_bar));
        assert_eq!(res.records.len(), 2);
        for rec in &res.records {
            assert!(rec.total_oracle_calls() <= 4000);
        }
        assert!(res.curve.oracle_calls.windows(2).all(|w| w[0] < w[1]));
    }
    assert_eq!(panel.results[0].label, "SGD");

    let curves: Vec<_> = panel.results.iter().map(|r| r.curve.clone()).collect();
    let mut buf = Vec::new();
    write_curves_csv(&mut buf, &curves).unwrap();
    let back = parse_curves_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), curves.len());
    for (a, b) in back.iter().zip(&curves) {
        assert_eq!(a.label, b.label);
        assert_eq!(a.oracle_calls, b.oracle_calls);
    }
}

#[test]
fn panel_is_deterministic_across_worker_counts() {
    let mut spec = RunConfig::from_json_str(SMALL_BENCH).unwrap().experiment().unwrap();
    let one = run_panel(&spec, 4.0).unwrap();
    spec.workers = 3;
    let many = run_panel(&spec, 4.0).unwrap();
    for (a, b) in one.results.iter().zip(&many.results) {
        assert_eq!(a.tuned, b.tuned);
        assert_eq!(a.curve, b.curve);
    }
}
