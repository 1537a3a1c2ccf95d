//! End-to-end runs of the experiment harness and its output files.

use std::process::Command;

use fiducial::harness::output::{COVERAGE_HEADER, ESTIMATES_HEADER};
use fiducial::harness::{
    coverage_csv, estimates_csv, ols_baseline, parse_summary, run_experiment, summary_json,
    write_outputs, ExperimentConfig,
};
use fiducial::network::NetworkDataset;
use fiducial::numerics::{gaussian, DenseMatrix, RandomStream};
use fiducial::simgen::gen_centered_design;

fn config(text: &str) -> fiducial::harness::ResolvedConfig {
    ExperimentConfig::from_toml_str(text).unwrap().resolve().unwrap()
}

const TINY: [(&str, &str); 4] = [
    (
        "linear",
        "[experiment]\nmodel = \"linear\"\nreplicates = 1\ndraws = 2\n[scenario]\nn = 4\n",
    ),
    (
        "network",
        "[experiment]\nmodel = \"network\"\nreplicates = 1\ndraws = 2\n[gfi]\nlambda = 1.0\nsigma = \"truth\"\n[scenario]\nn = 9\np = 1\np_w = 1.0\n",
    ),
    (
        "mc",
        "[experiment]\nmodel = \"mc\"\nreplicates = 1\ndraws = 2\n[gfi]\nlambda = 0.01\n[scenario]\nn = 6\nR = 1\np = 0.7\n",
    ),
    (
        "tensor",
        "[experiment]\nmodel = \"tensor\"\nreplicates = 1\ndraws = 2\n[gfi]\nlambda = 1.0\nsigma = \"truth\"\n[scenario]\nn = 30\nshape = [4, 4]\nimage = \"shapes\"\nR = 1\n",
    ),
];

#[test]
fn smoke_runs_emit_well_formed_files() {
    for (name, text) in TINY {
        let cfg = config(text);
        let out = run_experiment(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&out, dir.path()).unwrap();

        let cov = std::fs::read_to_string(dir.path().join("coverage.csv")).unwrap();
        let mut lines = cov.split('\n');
        assert_eq!(lines.next(), Some(COVERAGE_HEADER));
        let mut rows = 0;
        for line in lines.filter(|l| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f.len(), 4, "{name}: {line}");
            let c: f64 = f[2].parse().unwrap();
            assert!((0.0..=1.0).contains(&c), "{name}: coverage {c}");
            if name == "linear" {
                // one replicate of one target
                assert!(c == 0.0 || c == 1.0, "coverage {c}");
            }
            assert!(f[3].parse::<f64>().unwrap() >= 0.0);
            rows += 1;
        }
        assert!(rows >= 3, "{name}");
        assert!(cov.ends_with('\n') && !cov.contains('\r'));

        let est = std::fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
        let mut lines = est.lines();
        assert_eq!(lines.next(), Some(ESTIMATES_HEADER));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 11);
        // 17 significant digits in scientific notation
        let mantissa = first[2].split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.replace('.', "").len(), 17, "{}", first[2]);

        let json = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
        assert_eq!(parse_summary(&json).unwrap(), out.report);
    }
}

#[test]
fn summary_round_trips_exactly() {
    let cfg = config(
        "[experiment]\nmodel = \"linear\"\nreplicates = 5\ndraws = 50\nlevels = [0.8, 0.9]\n[scenario]\nn = 12\np = 3\ndesign = \"gaussian\"\n",
    );
    let out = run_experiment(&cfg).unwrap();
    let text = summary_json(&out.report).unwrap();
    let back = parse_summary(&text).unwrap();
    assert_eq!(back, out.report);
    assert_eq!(summary_json(&back).unwrap(), text);
    let g = back.group("theta").unwrap();
    assert_eq!(g.count, 15);
    assert_eq!(g.coverage.len(), 2);
}

#[test]
fn csv_output_ignores_worker_count() {
    let text = "[experiment]\nmodel = \"network\"\nreplicates = 6\ndraws = 40\nseed = 3\n[scenario]\nn = 30\np = 2\np_w = 0.4\n";
    let mut a = config(text);
    let mut b = a.clone();
    a.workers = 1;
    b.workers = 3;
    let (ra, rb) = (run_experiment(&a).unwrap(), run_experiment(&b).unwrap());
    assert_eq!(coverage_csv(&ra.report), coverage_csv(&rb.report));
    assert_eq!(estimates_csv(&ra), estimates_csv(&rb));
}

#[test]
fn groups_partition_the_targets() {
    let cfg = config(TINY[2].1);
    let out = run_experiment(&cfg).unwrap();
    let r = &out.replicates[0];
    let total: usize = out.report.groups.iter().map(|g| g.count).sum();
    assert_eq!(total, r.truth.len());
    assert_eq!(r.truth.len(), 36);

    let cfg = config(TINY[1].1);
    let out = run_experiment(&cfg).unwrap();
    let names: Vec<&str> = out.report.groups.iter().map(|g| g.group.as_str()).collect();
    assert_eq!(names, ["beta", "ols_beta"]);
}

#[test]
fn ols_baseline_covers_at_nominal_rate_without_network_effects() {
    // beta = 0 and alpha = 0: classical intervals are exact
    let (n, p, sigma) = (60, 3, 0.7);
    let x = gen_centered_design(n, p, &RandomStream::new(4, 0)).unwrap();
    let adj = DenseMatrix::zeros(n, n);
    let (mut hit, mut tot) = (0, 0);
    for r in 0..500 {
        let y = gaussian(&RandomStream::new(4, r + 1), n, sigma).unwrap();
        let d = NetworkDataset::new(adj.clone(), x.clone(), y).unwrap();
        let s = ols_baseline(&d, sigma, &[0.9]).unwrap();
        for iv in &s.intervals[0] {
            hit += usize::from(iv.contains(0.0));
            tot += 1;
        }
    }
    let cov = hit as f64 / tot as f64;
    assert!((0.86..=0.94).contains(&cov), "coverage {cov}");
}

#[test]
fn too_many_aborted_replicates_fail_the_run() {
    // at p = 0.01 most 6 x 6 masks are empty, so nearly every replicate aborts
    let cfg = config(
        "[experiment]\nmodel = \"mc\"\nreplicates = 10\ndraws = 2\n[gfi]\nlambda = 0.1\n[scenario]\nn = 6\nR = 1\np = 0.01\n",
    );
    let err = run_experiment(&cfg).unwrap_err();
    assert!(err.to_string().contains("replicates aborted"), "{err}");
}

#[test]
fn command_line_overrides_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, TINY[0].1).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_gfi"))
        .args(["run", cfg_path.to_str().unwrap(), "--seed", "5", "--workers", "2"])
        .args(["--replicates", "3", "--draws", "20", "--out-dir", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let report = parse_summary(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let c = &report.config;
    assert_eq!((c.seed, c.workers, c.replicates, c.draws), (5, 2, 3, 20));
    let est = std::fs::read_to_string(out.join("estimates.csv")).unwrap();
    assert_eq!(est.lines().count(), 1 + 3);

    let bad = Command::new(env!("CARGO_BIN_EXE_gfi"))
        .args(["run", dir.path().join("missing.toml").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
