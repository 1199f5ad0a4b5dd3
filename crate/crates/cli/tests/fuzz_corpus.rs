//! Replays the checked-in fuzz seeds through the fuzz-target invariants.

use std::fs;
use std::path::PathBuf;

use tauleap_cli::parse_config;
use tauleap_core::io::{read_pmf_csv, write_pmf_csv};
use tauleap_core::model::parse_network;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn network_seeds_round_trip() {
    let mut accepted = 0;
    for (path, text) in seeds("parse_network") {
        if let Ok(net) = parse_network(&text) {
            accepted += 1;
            assert_eq!(parse_network(&net.to_dsl()).unwrap(), net, "{}", path.display());
        }
    }
    assert!(accepted >= 4);
}

#[test]
fn pmf_seeds_round_trip() {
    let mut accepted = 0;
    for (path, text) in seeds("pmf_csv") {
        if let Ok(table) = read_pmf_csv(&text) {
            accepted += 1;
            let again = read_pmf_csv(&write_pmf_csv(&table.pmf, &table.species, &table.metadata)).unwrap();
            assert_eq!((&table.species, &table.pmf), (&again.species, &again.pmf), "{}", path.display());
        }
    }
    assert!(accepted >= 3);
}

#[test]
fn config_seeds_round_trip() {
    let mut accepted = 0;
    for (path, text) in seeds("config_json") {
        if let Ok(cfg) = parse_config(&text) {
            accepted += 1;
            let again = parse_config(&cfg.to_json()).unwrap();
            assert_eq!(cfg, again, "{}", path.display());
            assert_eq!(cfg.hash(), again.hash());
        }
    }
    assert!(accepted >= 5);
}
