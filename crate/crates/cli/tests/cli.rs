//! End-to-end runs of the `treechol` binary.

use std::path::Path;
use std::process::{Command, Output};

use treechol::mtx::write_matrix_market;
use treechol::{extreme_range_spd, scaled_spd};

fn treechol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treechol")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows of a CSV report as header-keyed records.
fn csv_rows(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes()).records().map(Result::unwrap).collect()
}

fn column(text: &str, name: &str) -> usize {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.headers().unwrap().iter().position(|h| h == name).unwrap()
}

fn write_mtx(path: &Path, a: &treechol::Matrix) {
    let file = std::fs::File::create(path).unwrap();
    write_matrix_market(a, std::io::BufWriter::new(file)).unwrap();
}

#[test]
fn factor_tiny_double() {
    let o = treechol(&["factor", "--size", "4", "--config", "Pure F64", "--leaf", "4", "--seed", "1", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let row = &csv_rows(&text)[0];
    assert_eq!(&row[column(&text, "status")], "ok");
    let digits: f64 = row[column(&text, "digits")].parse().unwrap();
    assert!(digits >= 14.0, "{digits}");
}

#[test]
fn factor_half_single_at_512() {
    let o = treechol(&["factor", "--size", "512", "--config", "[F16,F32]", "--leaf", "64", "--seed", "7", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let row = &csv_rows(&text)[0];
    assert_eq!(&row[column(&text, "status")], "ok");
    let digits: f64 = row[column(&text, "digits")].parse().unwrap();
    assert!((6.0..=9.0).contains(&digits), "digits {digits}");
}

#[test]
fn table_output_by_default() {
    let o = treechol(&["factor", "--size", "16", "--leaf", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().contains("rel_error"));
    assert!(text.contains("[F16, F32]"));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let o = treechol(&["factor", "--size", "512", "--config", "[F64,F16]"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("[F64,F16]") || err.contains("F64"), "{err}");
    assert!(err.to_lowercase().contains("precision"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["factor", "--size", "8,16"][..],
        &["factor", "--leaf", "0", "--size", "8"],
        &["factor", "--size", "abc"],
        &["mtx", "--config", "Pure F64"],
        &["plan", "--config", "Pure F64;Pure F32"],
        &["frobnicate"],
    ] {
        let o = treechol(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
    assert_eq!(treechol(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_rows_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = treechol(&[
        "sweep", "--sizes", "256,512", "--configs", "Pure F64;Pure F32;Pure F16", "--seeds", "1,2,3",
        "--format", "csv", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(
        text.lines().next().unwrap(),
        "n,config,leaf,quantize,seed,status,rel_error,digits,flops_f16,flops_f32,flops_f64,flops_total,wall_ms"
    );
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 18);
    let mut k = 0;
    for n in ["256", "512"] {
        for c in ["Pure F64", "Pure F32", "Pure F16"] {
            for s in ["1", "2", "3"] {
                assert_eq!((&rows[k][0], &rows[k][1], &rows[k][4]), (n, c, s));
                k += 1;
            }
        }
    }
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
}

#[test]
fn sweep_is_deterministic_apart_from_wall_time() {
    let args = ["sweep", "--sizes", "64,96", "--configs", "[F16, F32];Pure F16", "--seeds", "4,5", "--leaf", "16", "--format", "csv"];
    let strip = |text: String| -> Vec<String> {
        text.lines().map(|l| l.rsplit_once(',').unwrap().0.to_owned()).collect()
    };
    let a = strip(stdout(&treechol(&args)));
    let b = strip(stdout(&treechol(&args)));
    assert_eq!(a.len(), 9);
    assert_eq!(a, b);
}

#[test]
fn plan_deep_half_config() {
    let o = treechol(&["plan", "--size", "65536", "--leaf", "256", "--config", "[F16,F16,F16,F16,F16,F16,F32]", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let (mut half, mut total) = (0u64, 0u64);
    for row in csv_rows(&stdout(&o)) {
        let f: u64 = row[2].parse().unwrap();
        total += f;
        if &row[0] == "F16" {
            half += f;
        }
    }
    assert!(half as f64 > 0.9 * total as f64, "{half} / {total}");
}

#[test]
fn plan_tiny_and_off_diagonal_share() {
    let o = treechol(&["plan", "--size", "4", "--leaf", "4", "--config", "Pure F64", "--format", "csv"]);
    let rows = csv_rows(&stdout(&o));
    let nonzero: Vec<_> = rows.iter().filter(|r| &r[2] != "0").collect();
    assert_eq!(nonzero.len(), 1);
    assert_eq!((&nonzero[0][0], &nonzero[0][2]), ("F64", "30"));

    let o = treechol(&["plan", "--size", "65536", "--leaf", "256", "--config", "Pure F64"]);
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("off-diagonal share")).unwrap();
    let pct: f64 = line.trim_start_matches("off-diagonal share").trim().trim_end_matches('%').parse().unwrap();
    assert!(pct > 60.0, "{line}");
}

#[test]
fn plan_matches_instrumented_factor() {
    for (n, leaf, config) in [(1, 1, "Pure F64"), (17, 4, "[F16, F32]"), (64, 8, "[F16, F16, F32, F64]"), (50, 64, "Pure F16")] {
        let (n, leaf) = (n.to_string(), leaf.to_string());
        let common = ["--size", n.as_str(), "--leaf", leaf.as_str(), "--config", config, "--format", "csv"];
        let plan = stdout(&treechol(&[&["plan"][..], &common].concat()));
        let planned: u64 = csv_rows(&plan).iter().map(|r| r[2].parse::<u64>().unwrap()).sum();
        let factor = stdout(&treechol(&[&["factor"][..], &common].concat()));
        let executed: u64 = csv_rows(&factor)[0][column(&factor, "flops_total")].parse().unwrap();
        assert_eq!(planned, executed, "n={n} b={leaf} {config}");
    }
}

#[test]
fn mtx_missing_diagonal_is_not_positive_definite() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hole.mtx");
    std::fs::write(&path, "%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n1 1 4\n2 1 2\n2 2 2\n").unwrap();
    let o = treechol(&["mtx", "--mtx-path", path.to_str().unwrap(), "--config", "Pure F64", "--leaf", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("not-positive-definite"));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}

#[test]
fn mtx_complex_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.mtx");
    std::fs::write(&path, "%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1.0 0.0\n").unwrap();
    let o = treechol(&["mtx", "--mtx-path", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("complex"), "{}", stderr(&o));
}

#[test]
fn mtx_malformed_files_never_crash() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.mtx");
    for body in [
        "",
        "%%MatrixMarket matrix coordinate real symmetric\n",
        "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1\n",
        "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 x\n",
        "%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 1\n",
        "%%MatrixMarket matrix coordinate pattern symmetric\n1 1 1\n1 1\n",
        "%%MatrixMarket matrix coordinate real symmetric\n100000 100000 1\n1 1 1\n",
        "garbage\n",
    ] {
        std::fs::write(&path, body).unwrap();
        let o = treechol(&["mtx", "--mtx-path", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{body:?}: {}", stderr(&o));
    }
    let o = treechol(&["mtx", "--mtx-path", dir.path().join("absent.mtx").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn mtx_extreme_range_breaks_half_but_not_double() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("graded.mtx");
    let a = extreme_range_spd(256, 3);
    assert!(treechol::dynamic_range(&a) > 1e11);
    write_mtx(&path, &a);
    let p = path.to_str().unwrap();

    let o = treechol(&["mtx", "--mtx-path", p, "--config", "[F16, F32]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("numerical-breakdown"));
    let err = stderr(&o);
    assert!(err.contains("underflow") && err.contains("rows"), "{err}");

    let o = treechol(&["mtx", "--mtx-path", p, "--config", "Pure F64", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(&csv_rows(&stdout(&o))[0][5], "ok");
}

#[test]
fn no_quantize_overflows_large_entries() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.mtx");
    write_mtx(&path, &scaled_spd(128, 5, 2.0 * 65504.0));
    let p = path.to_str().unwrap();
    let o = treechol(&["mtx", "--mtx-path", p, "--config", "[F16, F32]", "--no-quantize"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("overflow"), "{}", stderr(&o));
    let o = treechol(&["mtx", "--mtx-path", p, "--config", "[F16, F32]"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

/// Runs only when `TREECHOL_BODYY5` names a local copy of the SuiteSparse file.
#[test]
fn bodyy5_when_available() {
    let Some(path) = std::env::var_os("TREECHOL_BODYY5") else {
        eprintln!("TREECHOL_BODYY5 not set, skipping");
        return;
    };
    let o = treechol(&["mtx", "--mtx-path", path.to_str().unwrap(), "--config", "[F16, F32]", "--leaf", "256", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let digits: f64 = csv_rows(&text)[0][column(&text, "digits")].parse().unwrap();
    assert!(digits >= 5.0, "{digits}");
}
