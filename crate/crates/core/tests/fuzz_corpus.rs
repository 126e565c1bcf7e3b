//! Replays the checked-in fuzz corpus through the parsers on stable.

use std::fs;
use std::path::PathBuf;

use rsopt::bench::{parse_curves_csv, parse_trajectory_csv, write_curves_csv};
use rsopt::config::RunConfig;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn config_json_seeds() {
    let mut accepted = 0;
    for (_, data) in seeds("config_json") {
        if let Ok(cfg) = RunConfig::from_json_str(&String::from_utf8_lossy(&data)) {
            cfg.problem().unwrap();
            accepted += 1;
        }
    }
    assert!(accepted > 0);
}

#[test]
fn trajectory_csv_seeds() {
    let results: Vec<_> = seeds("trajectory_csv").into_iter().map(|(_, d)| parse_trajectory_csv(d.as_slice()).is_ok()).collect();
    assert!(results.contains(&true) && results.contains(&false));
}

#[test]
fn curve_csv_seeds() {
    for (path, data) in seeds("curve_csv") {
        if let Ok(curves) = parse_curves_csv(data.as_slice()) {
            let mut buf = Vec::new();
            write_curves_csv(&mut buf, &curves).unwrap();
            assert_eq!(parse_curves_csv(buf.as_slice()).unwrap(), curves, "{}", path.display());
        }
    }
}
