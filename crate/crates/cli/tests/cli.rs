use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kvshare_core::{read_dump, read_snapshot};
use tempfile::TempDir;

const GEOMETRY: [&str; 8] = [
    "--layers",
    "2",
    "--kv-heads",
    "2",
    "--seq-len",
    "48",
    "--head-dim",
    "64",
];

fn kvshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kvshare"))
        .args(args)
        .output()
        .expect("run kvshare")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

/// Writes a synthetic dump and returns its path.
fn synth(dir: &TempDir, seed: &str) -> String {
    let out = path(dir, &format!("dump{seed}.pkvd"));
    let mut args = vec!["synth", "--seed", seed, "--output", &out];
    args.extend(GEOMETRY);
    let o = kvshare(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn compress(input: &str, output: &str, extra: &[&str]) -> Output {
    let mut args = vec!["compress", "--input", input, "--output", output];
    args.extend(extra);
    kvshare(&args)
}

#[test]
fn compress_reports_logical_ratio() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "pool.pkvp");
    let mut args = vec!["compress", "--synthetic", "--output", &out];
    args.extend(GEOMETRY);
    let o = kvshare(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("logical ratio 2.91"), "{}", stdout(&o));
    assert_eq!(read_snapshot(&out).unwrap().geometry().num_layers, 2);
}

#[test]
fn corrupt_input_is_a_format_error() {
    let dir = TempDir::new().unwrap();
    let junk = path(&dir, "junk.pkvd");
    fs::write(
        &junk,
        b"XXXXnot a dump at all, definitely not forty-four bytes",
    )
    .unwrap();
    let o = compress(&junk, &path(&dir, "out.pkvp"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad magic"), "{}", stderr(&o));
}

#[test]
fn packed_snapshot_is_smaller_and_decodes_identically() {
    let dir = TempDir::new().unwrap();
    let dump = synth(&dir, "1");
    let plain = path(&dir, "plain.pkvp");
    let packed = path(&dir, "packed.pkvp");
    assert!(compress(&dump, &plain, &[]).status.success());
    assert!(compress(&dump, &packed, &["--packed"]).status.success());
    let size = |p: &str| fs::metadata(p).unwrap().len();
    assert!(size(&packed) < size(&plain));

    let a = path(&dir, "a.pkvd");
    let b = path(&dir, "b.pkvd");
    assert!(kvshare(&["decompress", "--input", &plain, "--output", &a])
        .status
        .success());
    assert!(kvshare(&["decompress", "--input", &packed, "--output", &b])
        .status
        .success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        read_dump(&a).unwrap().geometry(),
        read_dump(&dump).unwrap().geometry()
    );
}

#[test]
fn verify_accepts_fresh_pair() {
    let dir = TempDir::new().unwrap();
    let dump = synth(&dir, "2");
    let pool = path(&dir, "pool.pkvp");
    assert!(compress(&dump, &pool, &["--packed", "--sign-diagonal"])
        .status
        .success());
    let o = kvshare(&[
        "verify", "--input", &dump, "--pool", &pool, "--agents", "15",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("verify: ok"));
}

#[test]
fn verify_names_flipped_payload_byte() {
    let dir = TempDir::new().unwrap();
    let dump = synth(&dir, "3");
    let pool = path(&dir, "pool.pkvp");
    assert!(compress(&dump, &pool, &[]).status.success());

    // First K code of layer 0: after the 48-byte header and the f32 scale.
    let mut bytes = fs::read(&pool).unwrap();
    bytes[48 + 4 + 10] ^= 0x40;
    fs::write(&pool, bytes).unwrap();

    let o = kvshare(&["verify", "--input", &dump, "--pool", &pool]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stdout(&o).contains("checksum mismatch in layer 0 K"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn verify_geometry_mismatch_is_exit_2() {
    let dir = TempDir::new().unwrap();
    let dump = synth(&dir, "4");
    let pool = path(&dir, "pool.pkvp");
    let mut args = vec![
        "compress",
        "--synthetic",
        "--output",
        &pool,
        "--layers",
        "3",
    ];
    args.extend(&GEOMETRY[2..]);
    assert!(kvshare(&args).status.success());
    let o = kvshare(&["verify", "--input", &dump, "--pool", &pool]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("geometry mismatch"));
}

#[test]
fn simulate_reproduces_reduction_column() {
    let o = kvshare(&["simulate", "--agents", "3,5,10,15", "--tokens", "1837"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for r in ["88.5%", "93.1%", "96.6%", "97.7%"] {
        assert!(text.contains(r), "{text}");
    }
    let o = kvshare(&["simulate", "--agents", "1", "--csv"]);
    let csv = stdout(&o);
    assert!(csv.starts_with("agents,tokens,baseline_bytes,pool_bytes,reduction_percent"));
    assert!(csv.contains(",65.6"), "{csv}");
}

#[test]
fn usage_errors_are_exit_2() {
    assert_eq!(
        kvshare(&["simulate", "--agents", ""]).status.code(),
        Some(2)
    );
    assert_eq!(
        kvshare(&[
            "decompress",
            "--input",
            "x",
            "--output",
            "y",
            "--decode-bits",
            "8"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        kvshare(&["compress", "--synthetic", "--input", "x", "--output", "y"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(kvshare(&[]).status.code(), Some(2));
}

#[test]
fn commands_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = synth(&dir, "5");
    let b = path(&dir, "again.pkvd");
    let mut args = vec!["synth", "--seed", "5", "--output", &b];
    args.extend(GEOMETRY);
    assert!(kvshare(&args).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let p1 = path(&dir, "p1.pkvp");
    let p2 = path(&dir, "p2.pkvp");
    assert!(compress(&a, &p1, &["--sign-diagonal"]).status.success());
    assert!(compress(&b, &p2, &["--sign-diagonal"]).status.success());
    assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    assert!(Path::new(&p1).exists());
}

#[test]
fn lloyd_and_bench_run() {
    let o = kvshare(&["lloyd", "--samples", "100000", "--seed", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("converged true"), "{}", stdout(&o));

    let mut args = vec!["bench", "--agents", "1,2", "--repetitions", "1", "--csv"];
    args.extend(GEOMETRY);
    let o = kvshare(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
}
