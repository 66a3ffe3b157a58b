use std::process::{Command, Output};

use fermimap::io;

fn fermimap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fermimap"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn basis_prints_lexicographic_states() {
    let out = fermimap(&["basis", "-N", "2", "-L", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let basis = io::decode_basis(String::from_utf8(out.stdout).unwrap().trim()).unwrap();
    assert_eq!(basis.states(), &[vec![0, 1], vec![0, 2], vec![1, 2]]);
}

#[test]
fn overfull_sector_is_a_usage_error() {
    let out = fermimap(&["basis", "-N", "5", "-L", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exclusion violation"));
}

#[test]
fn unknown_example_is_a_usage_error() {
    assert_eq!(fermimap(&["example", "hubbard"]).status.code(), Some(2));
}

#[test]
fn malformed_domain_is_a_usage_error() {
    let out = fermimap(&["map", "--u", "1", "--v", "1", "--domain", "{\"Pure2\":"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dimer_map_round_trips_through_decoder() {
    let out = fermimap(&["map", "--u", "1", "--v", "0.5", "--mu", "0", "--t", "0.3", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().next().unwrap();
    let record: serde_json::Value = serde_json::from_str(line).unwrap();
    let ks = io::decode_kraus_set(&record["kraus_set"].to_string()).unwrap();
    assert_eq!(ks.len(), 4);
    assert_eq!(ks.time(), Some(0.3));
}

#[test]
fn perturbed_run_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.jsonl");
    let out = Command::new(env!("CARGO_BIN_EXE_fermimap"))
        .args(["verify", "--oracle", "--seed", "7", "--perturb", "1e-3", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL oracle/pure2"));
}
