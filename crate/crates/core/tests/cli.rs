use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn ergolab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ergolab"))
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

/// Compares stdout with tests/golden/<name>; UPDATE_GOLDEN=1 rewrites it.
fn golden(name: &str, args: &[&str]) {
    let (code, out, err) = ergolab(args);
    assert_eq!(code, 0, "{err}");
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &out).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}; run with UPDATE_GOLDEN=1", path.display()));
    assert_eq!(out, want, "{name} drifted");
}

macro_rules! golden_tests {
    ($($name:ident: $file:literal => [$($arg:literal),*];)*) => {
        $(
            #[test]
            fn $name() {
                golden($file, &["--no-timing", $($arg),*]);
            }
        )*
    };
}

golden_tests! {
    sft_eigen: "sft_eigen.json" => ["sft", "eigen", "--matrix", "tests/fixtures/three_symbols.json"];
    sft_parry: "sft_parry.json" => ["sft", "parry"];
    sft_parry_bits: "sft_parry_bits.json" => ["--units", "bits", "sft", "parry", "--full", "3"];
    sft_entropy: "sft_entropy.json" => ["sft", "entropy", "--rows", "[[0.4,0.6],[1,0]]"];
    sft_mixing: "sft_mixing.json" => ["sft", "mixing", "--matrix", "tests/fixtures/three_symbols.json"];
    toral_validate: "toral_validate.json" => ["toral", "validate-partition", "data/golden_partition.json"];
    toral_encode: "toral_encode.json" => ["toral", "encode", "--point", "0.3", "0.2", "--window", "8"];
    toral_decode: "toral_decode.json" => ["toral", "decode", "--word", "0,1,0,0,1,0,1", "--zero", "3"];
    toral_roundtrip: "toral_roundtrip.json" => ["--seed", "7", "toral", "roundtrip", "--count", "100"];
    shadow_csv: "shadow.csv" => ["--seed", "3", "--format", "csv", "shadow", "--count", "3", "--length", "100"];
    shadow_json: "shadow.json" => ["--seed", "3", "shadow", "--count", "2", "--length", "50", "--delta", "1e-6"];
    saturate_schedule: "schedule.json" => ["saturate", "schedule", "--config", "configs/golden_mixture.json"];
    saturate_assemble: "assemble.csv" => ["--format", "csv", "saturate", "assemble", "--config", "configs/golden_mixture.json"];
    saturate_run: "run.json" => ["saturate", "run", "--config", "configs/golden_mixture.json"];
    saturate_track: "track.csv" => ["--format", "csv", "saturate", "track", "--config", "configs/golden_mixture.json", "--schedule", "tests/fixtures/schedule.json", "--word", "tests/fixtures/word.txt"];
    saturate_certificate: "certificate.json" => ["saturate", "certificate", "--schedule", "tests/fixtures/schedule.json", "--entropies", "0.4812118250595919,0.4206322918807853"];
    saturate_katok_entropy: "katok_entropy.json" => ["saturate", "katok-entropy", "--n", "10", "--samples", "3000"];
    katokmap_orbit: "orbit.csv" => ["--emit", "csv", "katokmap", "orbit", "--x", "0.001", "0.01", "--T", "20"];
    katokmap_orbit_config: "orbit_config.csv" => ["--emit", "csv", "katokmap", "orbit", "--map", "tests/fixtures/katok_map.json", "--x", "0.01", "0.02", "--T", "10"];
    katokmap_lyapunov: "lyapunov.json" => ["katokmap", "lyapunov", "--x", "0.3", "0.7", "--T", "100"];
    katokmap_pesin: "pesin.csv" => ["--seed", "5", "--format", "csv", "katokmap", "pesin-check", "--points", "6"];
    katokmap_frequency: "frequency.json" => ["--seed", "2", "katokmap", "frequency", "--count", "4", "--window", "2000"];
}

#[test]
fn assembled_word_matches_fixture() {
    let (_, out, _) = ergolab(&["saturate", "assemble", "--config", "configs/golden_mixture.json"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    let fixture = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/word.txt")).unwrap();
    assert_eq!(v["results"]["word_sha256"].as_str().unwrap(), hex_sha(&fixture));
    assert_eq!(v["results"]["admissible"], true);
}

fn hex_sha(s: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(s.as_bytes()))
}

#[test]
fn threads_do_not_change_output() {
    let args = |t: &'static str| vec!["--no-timing", "--threads", t, "saturate", "katok-entropy", "--n", "10", "--samples", "2000"];
    let (_, a, _) = ergolab(&args("1"));
    let (_, b, _) = ergolab(&args("4"));
    assert_eq!(a, b);
}

#[test]
fn config_hash_tracks_seed_only() {
    let hash = |args: &[&str]| -> String {
        let (_, out, _) = ergolab(args);
        let v: Value = serde_json::from_str(&out).unwrap();
        v["config_hash"].as_str().unwrap().to_string()
    };
    let a = hash(&["--seed", "1", "shadow", "--length", "20"]);
    let b = hash(&["--seed", "1", "--threads", "2", "shadow", "--length", "20"]);
    let c = hash(&["--seed", "2", "shadow", "--length", "20"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn errors_are_json_with_exit_codes() {
    let (code, out, err) = ergolab(&["sft", "eigen", "--full", "0"]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    let v: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"]["kind"], "BadMatrix");
    assert_eq!(v["exit_code"], 2);

    let (code, _, err) = ergolab(&["saturate", "katok-entropy", "--eps", "0"]);
    assert_ne!(code, 0);
    assert!(err.contains("\"error\""));
}

#[test]
fn csv_rejected_without_series() {
    let (code, _, err) = ergolab(&["--format", "csv", "sft", "parry"]);
    assert_eq!(code, 2);
    assert!(err.contains("no CSV series"));
}
