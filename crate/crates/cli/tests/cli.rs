use std::path::Path;
use std::process::{Command, Output};

fn chunkrx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chunkrx"))
        .args(args)
        .output()
        .expect("spawn chunkrx")
}

fn ok(args: &[&str]) -> String {
    let out = chunkrx(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    let mut a = vec!["--json"];
    a.extend_from_slice(args);
    serde_json::from_str(ok(&a).trim()).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_2_and_runtime_errors_exit_1() {
    assert_eq!(chunkrx(&["e2e", "--bogus"]).status.code(), Some(2));
    assert_eq!(chunkrx(&["frobnicate"]).status.code(), Some(2));
    let out = chunkrx(&["e2e", "--frames", "4", "--workers", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert_eq!(chunkrx(&["e2e", "--profile", "nope"]).status.code(), Some(1));
    assert_eq!(chunkrx(&["demod", "-i", "/nonexistent.cf32", "-o", "/tmp/x.blocks"]).status.code(), Some(1));
}

#[test]
fn e2e_reports_a_clean_run() {
    let v = json(&["e2e", "--frames", "24", "--esn0", "12", "--ppm", "10", "--workers", "2"]);
    assert_eq!(v["score"]["bit_errors"], 0);
    assert_eq!(v["score"]["frames_recovered"], 24);
    let text = ok(&["e2e", "--frames", "8", "--esn0", "12"]);
    assert!(text.starts_with("BER=0 frames=8/8"), "{text}");
}

#[test]
fn file_chain_matches_the_in_process_loop() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (frames, tail, seed) = (24, 20, 5u64);
    let blocks_e2e = path(d, "e2e.blocks");
    ok(&[
        "e2e", "--frames", "24", "--esn0", "12", "--ppm", "10", "--freq", "1e-4", "--phase", "0.7",
        "--workers", "2", "--seed", "5", "--blocks", &blocks_e2e,
    ]);

    let tx = path(d, "tx.cf32");
    let truth = path(d, "truth.blocks");
    let total = (frames + tail).to_string();
    ok(&["txgen", "--frames", &total, "--seed", "5", "-o", &tx, "--truth", &truth]);
    let rx = path(d, "rx.cf32");
    let noise_seed = (seed ^ 0x5eed).to_string();
    // 1e-4 cycles/symbol at 1.6 samples/symbol.
    ok(&[
        "channel", "-i", &tx, "-o", &rx, "--ppm", "10", "--freq", "6.25e-5", "--phase", "0.7", "--esn0", "12",
        "--seed", &noise_seed,
    ]);
    let raw = path(d, "raw.blocks");
    ok(&["demod", "-i", &rx, "-o", &raw, "--workers", "2"]);
    let stitched = path(d, "stitched.blocks");
    let v = json(&["stitch", &raw, "-o", &stitched, "--truth", &truth, "--ppm", "10"]);
    assert_eq!(v["score"]["bit_errors"], 0, "{v}");

    // The e2e run scores only the first 24 frames but writes every block.
    let a = std::fs::read(&blocks_e2e).unwrap();
    let b = std::fs::read(&stitched).unwrap();
    assert_eq!(a, b);
}

#[test]
fn distribute_writes_one_file_per_chunk() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let tx = path(d, "tx.sc8");
    ok(&["txgen", "--frames", "40", "-o", &tx]);
    let out = path(d, "chunks");
    let v = json(&["distribute", "-i", &tx, "--servers", "2", "--out-dir", &out]);
    let files = std::fs::read_dir(&out).unwrap().count() as u64;
    assert!(files >= 2);
    assert_eq!(v["chunks"].as_array().unwrap().len() as u64, files);
}

#[test]
fn ldpc_gen_writes_a_loadable_alist() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "code.alist");
    ok(&["ldpc-gen", "--n", "96", "--k", "48", "--seed", "2", "-o", &out]);
    let text = std::fs::read_to_string(&out).unwrap();
    let h = chunkrx::fec::alist::ParityCheckMatrix::parse_alist(&text).unwrap();
    assert_eq!((h.n(), h.m()), (96, 48));
}

#[test]
fn monitor_grab_without_a_server_fails_cleanly() {
    let out = chunkrx(&["monitor", "grab", "w0.phase", "--endpoint", "127.0.0.1:9", "-n", "16", "-o", "/tmp/never.cf32", "--timeout", "0.2"]);
    assert_eq!(out.status.code(), Some(1));
}
