use std::fs;
use std::process::{Command, Output};

fn twr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twr-aab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn csv_body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn theta_sweep_writes_header_metadata_and_rows() {
    let out = twr(&[
        "theta-sweep",
        "--reproducible",
        "--set",
        "thetas=0.2,0.8",
        "--set",
        "horizon=20000",
        "--set",
        "warmup=100",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# experiment=theta-sweep\n"));
    assert!(text.contains("# thetas=0.2,0.8\n"));
    assert!(text.contains("# seed=0\n"));
    assert!(!text.contains("generated_unix"));
    let body = csv_body(&text);
    assert_eq!(body[0], "theta,mean_l01,mean_l21,censored");
    assert_eq!(body.len(), 3);
    assert!(body[1].starts_with("0.2,"));
    assert!(body[2].starts_with("0.8,"));
}

#[test]
fn timestamp_only_without_reproducible() {
    let out = twr(&["esr", "--set", "n_samples=5000", "--set", "snr_dbs=10"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("# generated_unix="));
}

#[test]
fn config_file_and_seed_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# small esr run\nexperiment = esr\nseed = 5\nsnr_dbs = 0, 20\nn_samples = 10000\nnakagami_m = 2\n",
    )
    .unwrap();
    let csv = dir.path().join("esr.csv");
    let out = twr(&[
        "esr",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        csv.to_str().unwrap(),
        "--reproducible",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.contains("# seed=9\n"));
    assert!(text.contains("# nakagami_m=2\n"));
    let body = csv_body(&text);
    assert_eq!(
        body[0],
        "snr_db,trad_ub,trad_ub_se,aab_ub,aab_ub_se,aab_ach,aab_ach_se,dnf,dnf_se"
    );
    for line in &body[1..] {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[3] >= v[1] && v[5] >= v[7]);
        assert!(v[1..].iter().all(|x| *x >= 0.0));
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "seed = 1\nthetaz = 0.5\n").unwrap();
    let out = twr(&["theta-sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":2:") && err.contains("thetaz"), "{err}");

    for args in [
        &["esr", "--set", "nakagami_m=0.2"][..],
        &["esr", "--set", "bogus=1"],
        &["theta-sweep", "--set", "thetas=1.2"],
        &["esr", "--config", "/nonexistent/file.cfg"],
        &["par-sweep", "--set", "rhos=50"],
        &["no-such-command"],
    ] {
        assert_eq!(twr(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn par_sweep_rows_and_empty_st_for_dnf() {
    let out = twr(&[
        "par-sweep",
        "--reproducible",
        "--set",
        "rhos=0,0.1",
        "--set",
        "horizon=20000",
        "--set",
        "warmup=1000",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let body = csv_body(&text);
    assert_eq!(
        body[0],
        "protocol,rho,mean_ss_d02,mean_ss_d20,mean_st,served,censored"
    );
    assert_eq!(body.len(), 5);
    assert!(body[1].starts_with("AAB,0,0,0,"));
    assert!(body[2].starts_with("DNF,0,0,0,,"));
    let st: Vec<&str> = [body[1], body[3]]
        .iter()
        .map(|l| l.split(',').nth(4).unwrap())
        .collect();
    assert_eq!(st[0], st[1]);
}

#[test]
fn oracle_check_passes_small() {
    let out = twr(&[
        "oracle-check",
        "--reproducible",
        "--set",
        "oracle_sequences=30",
        "--set",
        "oracle_rounds=500",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let body = csv_body(&text);
    assert_eq!(body[0], "mode,theta,sequences,injections,mismatches");
    assert_eq!(body.len(), 5);
    assert!(body[1..].iter().all(|l| l.ends_with(",0")));
    assert!(body[4].starts_with("suboptimal,,30,"));
}

#[test]
fn trace_file_for_snr_delay() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = twr(&[
        "snr-delay",
        "--reproducible",
        "--set",
        "snr_dbs=10",
        "--set",
        "horizon=5000",
        "--set",
        "warmup=0",
        "--set",
        "trace_rounds=200",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&trace).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 201);
    assert_eq!(
        lines[0],
        "round,g01,g21,inject_dir,inject_bits,drain_d02,drain_d20,backlog_d02,backlog_d20,completions"
    );
    assert!(lines[1].starts_with("1,"));
    assert!(lines[200].starts_with("200,"));
}

#[test]
fn different_seeds_differ() {
    let run = |seed: &str| {
        twr(&[
            "esr",
            "--reproducible",
            "--seed",
            seed,
            "--set",
            "n_samples=5000",
        ])
        .stdout
    };
    assert_ne!(run("1"), run("2"));
    assert_eq!(run("1"), run("1"));
}
