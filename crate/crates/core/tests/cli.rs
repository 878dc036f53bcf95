//! End-to-end checks of the dyaden binary: report shapes, generator kinds,
//! encodings, and error handling. Determinism and exit-code sweeps live in
//! the acceptance target.

use std::path::Path;
use std::process::{Command, Output};

fn dyaden(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyaden"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary launches")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip_while(|l| l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn generators_report_mass_and_support() {
    let dir = tempfile::tempdir().unwrap();
    let out = dyaden(dir.path(), &["gen", "haar", "--n", "5", "--out", "h.dym"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let line = stdout(&out);
    assert!(line.contains("32 cells"), "{line}");
    assert!(line.contains("support 32"), "{line}");

    let out = dyaden(
        dir.path(),
        &["gen", "cylinder", "--n", "5", "--level", "2", "--index", "3", "--out", "c.dym"],
    );
    assert!(stdout(&out).contains("support 8"));

    let out = dyaden(
        dir.path(),
        &["gen", "pattern", "--n", "6", "--zeros", "1,3,5", "--out", "p.dym"],
    );
    assert!(stdout(&out).contains("support 8"));

    let out = dyaden(
        dir.path(),
        &["gen", "bernoulli", "--p", "0.5,0.5,1.0", "--out", "b.dym"],
    );
    assert!(stdout(&out).contains("8 cells at resolution 3"));
    assert!(stdout(&out).contains("support 4"), "{}", stdout(&out));
}

#[test]
fn bernoulli_length_conflict_names_both_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dyaden(
        dir.path(),
        &["gen", "bernoulli", "--p", "0.2,0.4", "--n", "5", "--out", "b.dym"],
    );
    assert_eq!(out.status.code(), Some(2));
    let message = stderr(&out);
    assert!(message.contains("--p") && message.contains("--n"), "{message}");

    let out = dyaden(dir.path(), &["gen", "bernoulli", "--p", "0.2", "--out", "b.dym"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--n"));
}

#[test]
fn json_encoded_measures_read_back() {
    let dir = tempfile::tempdir().unwrap();
    dyaden(
        dir.path(),
        &["gen", "random", "--n", "6", "--seed", "11", "--encoding", "json", "--out", "j.dym"],
    );
    let f64le = dyaden(
        dir.path(),
        &["gen", "random", "--n", "6", "--seed", "11", "--out", "f.dym"],
    );
    assert!(f64le.status.success());
    let a = dyaden(dir.path(), &["spectrum", "--in", "j.dym", "--out", "a.csv"]);
    let b = dyaden(dir.path(), &["spectrum", "--in", "f.dym", "--out", "b.csv"]);
    assert!(a.status.success() && b.status.success());
    let rows_a = data_rows(&std::fs::read_to_string(dir.path().join("a.csv")).unwrap());
    let rows_b = data_rows(&std::fs::read_to_string(dir.path().join("b.csv")).unwrap());
    assert_eq!(rows_a, rows_b, "encodings must carry identical masses");
    assert_eq!(rows_a.len(), 64);
}

#[test]
fn corrupt_measure_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.dym"), b"not a measure file\n").unwrap();
    let out = dyaden(dir.path(), &["spectrum", "--in", "bad.dym"]);
    assert_eq!(out.status.code(), Some(2));

    dyaden(dir.path(), &["gen", "haar", "--n", "4", "--out", "ok.dym"]);
    let bytes = std::fs::read(dir.path().join("ok.dym")).unwrap();
    std::fs::write(dir.path().join("short.dym"), &bytes[..bytes.len() - 9]).unwrap();
    let out = dyaden(dir.path(), &["spectrum", "--in", "short.dym"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn zero_mass_measures_are_rejected_on_load() {
    let dir = tempfile::tempdir().unwrap();
    // the writer refuses to produce one, so craft the file by hand
    std::fs::write(
        dir.path().join("zero.dym"),
        "dyadic-measure v1 levels=3 cells=8 encoding=json\n[0,0,0,0,0,0,0,0]\n",
    )
    .unwrap();
    let out = dyaden(dir.path(), &["energy", "--in", "zero.dym", "--s", "0.5"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(
        stderr(&out).contains("empty support"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn kernel_rows_cover_the_requested_range() {
    let dir = tempfile::tempdir().unwrap();
    let out = dyaden(dir.path(), &["kernel", "--s", "0.5", "--k", "2..5", "--out", "k.csv"]);
    assert!(out.status.success());
    let rows = data_rows(&std::fs::read_to_string(dir.path().join("k.csv")).unwrap());
    let ks: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(ks, ["2", "3", "4", "5"]);
    // block column: 2 and 3 sit in block 2, 4 and 5 in block 3
    let blocks: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(blocks, ["2", "2", "3", "3"]);
    // same-block coefficients are identical
    assert_eq!(rows[0][2], rows[1][2]);
    assert_ne!(rows[1][2], rows[2][2]);

    let out = dyaden(
        dir.path(),
        &["kernel", "--s", "0.5", "--trunc", "20", "--k", "0", "--oracle"],
    );
    assert_eq!(out.status.code(), Some(2), "quadrature oracle cap is 16");
}

#[test]
fn potential_of_a_point_mass_peaks_on_its_own_cell() {
    let dir = tempfile::tempdir().unwrap();
    dyaden(
        dir.path(),
        &["gen", "cylinder", "--n", "6", "--level", "6", "--index", "9", "--out", "pt.dym"],
    );
    let out = dyaden(dir.path(), &["potential", "--in", "pt.dym", "--s", "0.5", "--out", "phi.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = data_rows(&std::fs::read_to_string(dir.path().join("phi.csv")).unwrap());
    assert_eq!(rows.len(), 64);
    let value = |row: &[String]| row[2].parse::<f64>().unwrap();
    let peak_row = rows.iter().max_by(|a, b| value(a).total_cmp(&value(b))).unwrap();
    assert_eq!(peak_row[0], "9");
    assert_eq!(peak_row[1].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn energy_json_report_carries_method_rows_and_deviation() {
    let dir = tempfile::tempdir().unwrap();
    dyaden(dir.path(), &["gen", "random", "--n", "8", "--seed", "3", "--out", "m.dym"]);
    let out = dyaden(
        dir.path(),
        &["energy", "--in", "m.dym", "--s", "0.5", "--format", "json", "--out", "e.json"],
    );
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("e.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let methods: Vec<&str> = rows.iter().map(|r| r["method"].as_str().unwrap()).collect();
    assert_eq!(methods, ["naive", "hierarchical", "spectral"]);
    for row in rows {
        assert!(row["deviation"].as_f64().unwrap() < 1e-10);
        assert!(row["value"].as_f64().unwrap() > 0.0);
    }
    assert_eq!(report["header"]["resolution"], 8);
}

#[test]
fn energy_all_skips_the_quadratic_method_above_its_cap() {
    let dir = tempfile::tempdir().unwrap();
    dyaden(dir.path(), &["gen", "haar", "--n", "15", "--out", "big.dym"]);
    let out = dyaden(dir.path(), &["energy", "--in", "big.dym", "--s", "0.5", "--out", "e.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = data_rows(&std::fs::read_to_string(dir.path().join("e.csv")).unwrap());
    let methods: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(methods, ["hierarchical", "spectral"]);
}

#[test]
fn truncated_energy_rows_echo_the_truncation() {
    let dir = tempfile::tempdir().unwrap();
    dyaden(dir.path(), &["gen", "haar", "--n", "6", "--out", "h.dym"]);
    let out = dyaden(
        dir.path(),
        &["energy", "--in", "h.dym", "--s", "0.5", "--trunc", "4", "--method", "hierarchical", "--out", "e.csv"],
    );
    assert!(out.status.success());
    let rows = data_rows(&std::fs::read_to_string(dir.path().join("e.csv")).unwrap());
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "4");
    // uniform mass: the truncated energy is the k = 0 coefficient
    let value: f64 = rows[0][3].parse().unwrap();
    let expected = dyadic_energy::truncated_coefficient(0.5, 4, 0).unwrap();
    assert!((value - expected).abs() <= 1e-12 * expected);
}

#[test]
fn dim_json_report_nests_probes_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    dyaden(
        dir.path(),
        &["gen", "pattern", "--n", "16", "--zeros", "2,4,6,8,10,12,14,16", "--out", "p.dym"],
    );
    let out = dyaden(dir.path(), &["dim", "--in", "p.dym", "--format", "json", "--out", "d.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
    let bound = report["lower_bound"].as_f64().unwrap();
    assert!((0.45..=0.55).contains(&bound), "{bound}");
    assert!(report["resolved"].as_bool().unwrap());
    assert!(report["bracket_low"].as_f64().unwrap() < bound);
    assert!(report["bracket_high"].as_f64().unwrap() > bound);
    let probes = report["probes"].as_array().unwrap();
    assert!(!probes.is_empty());
    for probe in probes {
        assert!(["bounded", "divergent", "inconclusive"]
            .contains(&probe["verdict"].as_str().unwrap()));
    }
}

#[test]
fn bench_reports_status_per_method_and_skips_the_capped_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dyaden(
        dir.path(),
        &["bench", "--n", "14..15", "--s", "0.5", "--repeats", "1", "--out", "b.csv"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = data_rows(&std::fs::read_to_string(dir.path().join("b.csv")).unwrap());
    assert_eq!(rows.len(), 6);
    let find = |n: &str, method: &str| {
        rows.iter()
            .find(|r| r[0] == n && r[2] == method)
            .unwrap_or_else(|| panic!("missing row {n}/{method}"))
    };
    assert_eq!(find("14", "naive")[3], "ok");
    assert_eq!(find("15", "naive")[3], "skipped");
    assert_eq!(find("15", "naive")[7], "");
    for method in ["hierarchical", "spectral"] {
        for n in ["14", "15"] {
            let row = find(n, method);
            assert_eq!(row[3], "ok");
            assert!(row[4].parse::<f64>().unwrap() > 0.0, "median seconds");
            let deviation: f64 = row[7].parse().unwrap();
            assert!(deviation < 1e-10);
        }
    }
}

#[test]
fn thread_count_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    dyaden(dir.path(), &["gen", "haar", "--n", "4", "--out", "h.dym"]);
    let out = dyaden(dir.path(), &["energy", "--in", "h.dym", "--s", "0.5", "--threads", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--threads"));
}
