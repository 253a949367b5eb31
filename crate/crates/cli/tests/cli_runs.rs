//! End-to-end runs of the `vbpbb` binary: output reproducibility (including
//! the thread-count determinism criterion), exit codes, and manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vbpbb"))
}

fn run_ok(args: &[&str]) -> Output {
    let output = binary().args(args).output().expect("binary runs");
    assert!(
        output.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn make_fixture(dir: &Path) -> PathBuf {
    let fixture_dir = dir.join("fixture");
    run_ok(&[
        "synth",
        "--spec",
        "365:1:0,7:0.5:0.3",
        "--n",
        "1095",
        "--noise-sd",
        "0.5",
        "--seed",
        "11",
        "--output",
        fixture_dir.to_str().unwrap(),
    ]);
    fixture_dir.join("series.csv")
}

fn analyze_args<'a>(input: &'a str, output: &'a str, threads: &'a str) -> Vec<&'a str> {
    vec![
        "analyze",
        "--input",
        input,
        "--method",
        "both",
        "--harmonics",
        "1",
        "--replicates",
        "300",
        "--seed",
        "7",
        "--threads",
        threads,
        "--output",
        output,
    ]
}

/// Criterion 6: the same analysis at `--threads 1` and `--threads 8`
/// produces byte-identical bands.csv for the same seed.
#[test]
fn acceptance_6_thread_count_determinism() {
    let clock = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let input = make_fixture(dir.path());
    let input = input.to_str().unwrap();

    let out_single = dir.path().join("single");
    let out_many = dir.path().join("many");
    run_ok(&analyze_args(input, out_single.to_str().unwrap(), "1"));
    run_ok(&analyze_args(input, out_many.to_str().unwrap(), "8"));

    let bands_single = fs::read(out_single.join("bands.csv")).unwrap();
    let bands_many = fs::read(out_many.join("bands.csv")).unwrap();
    assert!(!bands_single.is_empty());
    assert_eq!(bands_single, bands_many, "bands.csv differs across thread counts");

    let report_single = fs::read(out_single.join("report.json")).unwrap();
    let report_many = fs::read(out_many.join("report.json")).unwrap();
    assert_eq!(report_single, report_many);

    let elapsed = clock.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!("ACCEPTANCE 6 thread-determinism: PASS");
}

#[test]
fn rerun_reproduces_outputs_and_manifest_records_run() {
    let dir = tempfile::tempdir().unwrap();
    let input = make_fixture(dir.path());
    let input = input.to_str().unwrap();

    let first = dir.path().join("first");
    let second = dir.path().join("second");
    run_ok(&analyze_args(input, first.to_str().unwrap(), "0"));
    run_ok(&analyze_args(input, second.to_str().unwrap(), "0"));

    for file in ["bands.csv", "report.json", "periodogram.csv"] {
        let a = fs::read(first.join(file)).unwrap();
        let b = fs::read(second.join(file)).unwrap();
        assert_eq!(a, b, "{file} not reproduced");
    }
    // Every output directory carries a manifest with the resolved run.
    for out in [&first, &second] {
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["command"], "analyze");
        assert_eq!(manifest["master_seed"], 7);
        assert_eq!(manifest["parameters"]["replicates"], 300);
        assert!(manifest["input_digests"]
            .as_object()
            .unwrap()
            .contains_key(input));
    }
    // Manifests differ only in the timestamp.
    let a: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(second.join("manifest.json")).unwrap()).unwrap();
    let strip = |mut v: serde_json::Value| {
        v.as_object_mut().unwrap().remove("timestamp");
        v["parameters"].as_object_mut().unwrap().remove("output");
        v
    };
    assert_eq!(strip(a), strip(b));
}

#[test]
fn analyze_reports_width_ratio_and_writes_plots() {
    let dir = tempfile::tempdir().unwrap();
    let input = make_fixture(dir.path());
    let out = dir.path().join("run");
    run_ok(&analyze_args(
        input.to_str().unwrap(),
        out.to_str().unwrap(),
        "0",
    ));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let component = &report["analysis"]["components"][0];
    let ratio = component["baseline"]["width_ratio"].as_f64().unwrap();
    assert!(ratio > 1.0, "width ratio {ratio}");
    assert_eq!(component["band"]["method"], "pbb");
    assert_eq!(component["baseline"]["band"]["method"], "gsbb");

    assert!(out.join("plots/series.svg").exists());
    assert!(out.join("plots/h1_p365.svg").exists());
    assert!(out.join("bands/vbpbb_h1_p365.csv").exists());
    assert!(out.join("bands/gsbb_h1_p365.csv").exists());
    assert!(out.join("components/h1_p365_filter.csv").exists());

    // The flat bands table carries both methods at every phase.
    let bands = fs::read_to_string(out.join("bands.csv")).unwrap();
    assert!(bands.starts_with(
        "method,component,period,phase,date_of_first_occurrence,point,lower,upper"
    ));
    assert_eq!(bands.matches("\nvbpbb,h1_p365,").count(), 365);
    assert_eq!(bands.matches("\ngsbb,h1_p365,").count(), 365);
}

#[test]
fn synth_is_deterministic_and_writes_truth() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        run_ok(&[
            "synth",
            "--spec",
            "365:1:0,122:0.5:1",
            "--n",
            "1460",
            "--noise-sd",
            "0.3",
            "--seed",
            "5",
            "--output",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(
        fs::read(a.join("series.csv")).unwrap(),
        fs::read(b.join("series.csv")).unwrap()
    );
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("truth.json")).unwrap()).unwrap();
    let components = truth["components"].as_array().unwrap();
    assert_eq!(components.len(), 2);
    assert_eq!(components[0]["bootstrap_period"], 365);
    assert_eq!(components[1]["bootstrap_period"], 122);
    assert_eq!(
        components[0]["phase_means"].as_array().unwrap().len(),
        365
    );
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = make_fixture(dir.path());

    // Zero replicates is rejected at flag level.
    let output = binary()
        .args([
            "analyze",
            "--input",
            input.to_str().unwrap(),
            "--replicates",
            "0",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    // Malformed synthetic spec.
    let output = binary()
        .args(["synth", "--spec", "banana", "--n", "100"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn data_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = binary()
        .args([
            "analyze",
            "--input",
            dir.path().join("missing.csv").to_str().unwrap(),
            "--seed",
            "1",
            "--output",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());

    // A parse error inside the data also exits 1 and names the row.
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "date,value\n2021-01-01,1\n2021-01-02,oops\n").unwrap();
    let output = binary()
        .args([
            "analyze",
            "--input",
            bad.to_str().unwrap(),
            "--seed",
            "1",
            "--output",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("row 3"));
}

#[test]
fn population_conversion_runs() {
    let dir = tempfile::tempdir().unwrap();
    let input = make_fixture(dir.path());
    // Shift the fixture to strictly positive counts by rewriting values.
    let text = fs::read_to_string(&input).unwrap();
    let mut rewritten = String::from("date,value,missing\n");
    for line in text.lines().skip(1) {
        let mut fields = line.split(',');
        let date = fields.next().unwrap();
        let value: f64 = fields.next().unwrap().parse().unwrap();
        rewritten.push_str(&format!("{date},{},0\n", (value + 10.0) * 100.0));
    }
    let counts = dir.path().join("counts.csv");
    fs::write(&counts, rewritten).unwrap();

    let pop = dir.path().join("pop.csv");
    fs::write(&pop, "year,population\n2020,1000000\n2021,2000000\n*,1500000\n").unwrap();

    let out = dir.path().join("out");
    run_ok(&[
        "analyze",
        "--input",
        counts.to_str().unwrap(),
        "--population",
        pop.to_str().unwrap(),
        "--method",
        "vbpbb",
        "--harmonics",
        "1",
        "--replicates",
        "100",
        "--seed",
        "3",
        "--output",
        out.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["input"]["rate_converted"], true);
    // Population file digest is recorded alongside the input digest.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["input_digests"].as_object().unwrap().len(), 2);
}

#[test]
fn gsbb_only_method_writes_baseline_bands() {
    let dir = tempfile::tempdir().unwrap();
    let input = make_fixture(dir.path());
    let out = dir.path().join("out");
    run_ok(&[
        "analyze",
        "--input",
        input.to_str().unwrap(),
        "--method",
        "gsbb",
        "--harmonics",
        "2",
        "--replicates",
        "150",
        "--seed",
        "9",
        "--output",
        out.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["analysis"].is_null());
    let entries = report["gsbb"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0]["period"], 365);
    assert_eq!(entries[1]["period"], 183);
    assert!(out.join("bands/gsbb_h1_p365.csv").exists());
    assert!(out.join("plots/h2_p183.svg").exists());
}
