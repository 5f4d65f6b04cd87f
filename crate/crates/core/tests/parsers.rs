//! Runs the fuzz-target invariants over the checked-in corpus and over
//! random mutations of it.

use std::fs;
use std::path::{Path, PathBuf};

use microcavity::config::ToolConfig;
use microcavity::instrument::{measure_roc, RetroScan, SweepTrace};
use microcavity::metrology::SurfaceProfile;
use microcavity::optics::BeamParams;
use proptest::prelude::*;

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<PathBuf> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty(), "{}", dir.display());
    files.iter().map(|p| fs::read(p).unwrap()).collect()
}

fn check_config(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    match ToolConfig::parse(text) {
        Ok(config) => {
            let again = ToolConfig::parse(&config.to_config_string()).expect("serialized configuration reparses");
            assert_eq!(config, again);
            true
        }
        Err(e) => {
            assert!(!e.0.is_empty());
            false
        }
    }
}

fn check_profile(data: &[u8]) -> bool {
    let Ok(profile) = SurfaceProfile::read_csv(data) else { return false };
    let mut out = Vec::new();
    profile.write_csv(&mut out).unwrap();
    assert_eq!(SurfaceProfile::read_csv(out.as_slice()).unwrap().len(), profile.len());
    true
}

fn check_trace(data: &[u8]) -> bool {
    let Ok(trace) = SweepTrace::read_csv(data) else { return false };
    let mut out = Vec::new();
    trace.write_csv(&mut out).unwrap();
    assert_eq!(SweepTrace::read_csv(out.as_slice()).unwrap(), trace);
    true
}

fn check_scan(data: &[u8]) -> bool {
    let beam = BeamParams::new(780e-9, 2e-6, 0.0).unwrap();
    let Ok(scan) = RetroScan::read_csv(data, beam) else { return false };
    let _ = measure_roc(&scan);
    true
}

#[test]
fn corpus_seeds_parse() {
    for seed in corpus("parse_config") {
        assert!(check_config(&seed));
    }
    for seed in corpus("parse_profile_csv") {
        assert!(check_profile(&seed));
    }
    for seed in corpus("parse_trace_csv") {
        assert!(check_trace(&seed));
    }
    for seed in corpus("parse_scan_csv") {
        assert!(check_scan(&seed));
    }
}

fn mutate(seed: &[u8], edits: &[(usize, u8, u8)]) -> Vec<u8> {
    let mut data = seed.to_vec();
    for &(pos, byte, op) in edits {
        if data.is_empty() {
            data.push(byte);
            continue;
        }
        let i = pos % data.len();
        match op % 3 {
            0 => data[i] = byte,
            1 => data.insert(i, byte),
            _ => {
                data.remove(i);
            }
        }
    }
    data
}

const ALPHABET: &[u8] = b"0123456789.-+eE,_=[]# \n\"abcdfghklmnprstuxyz";

fn edits() -> impl Strategy<Value = Vec<(usize, u8, u8)>> {
    prop::collection::vec((any::<usize>(), prop::sample::select(ALPHABET.to_vec()), any::<u8>()), 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn mutated_configs(which in any::<prop::sample::Index>(), e in edits()) {
        let seeds = corpus("parse_config");
        check_config(&mutate(&seeds[which.index(seeds.len())], &e));
    }

    #[test]
    fn mutated_csvs(which in any::<prop::sample::Index>(), e in edits()) {
        for (target, check) in [
            ("parse_profile_csv", check_profile as fn(&[u8]) -> bool),
            ("parse_trace_csv", check_trace),
            ("parse_scan_csv", check_scan),
        ] {
            let seeds = corpus(target);
            check(&mutate(&seeds[which.index(seeds.len())], &e));
        }
    }

    #[test]
    fn arbitrary_text(text in "\\PC{0,300}") {
        check_config(text.as_bytes());
        check_profile(text.as_bytes());
        check_trace(text.as_bytes());
        check_scan(text.as_bytes());
    }
}
