use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eibnb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eibnb"))
        .args(args)
        .output()
        .unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn derivplots_writes_csv_and_svgs() {
    let dir = tempfile::tempdir().unwrap();
    let out = eibnb(&["derivplots", "--out", dir.path().to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        header(&dir.path().join("derivatives.csv")),
        "alpha,s,t,d_dt,d_ds,ei"
    );
    for svg in ["d_dt.svg", "d_ds.svg"] {
        assert!(fs::read_to_string(dir.path().join(svg))
            .unwrap()
            .starts_with("<svg"));
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("direct.toml");
    fs::write(&cfg, "function = \"branin\"\ntarget = \"maxmin\"\nn0 = [10, 20]\nreplications = 5\nbudget = 100\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = eibnb(&[
        "direct",
        "--config",
        cfg.to_str().unwrap(),
        "--n0",
        "12",
        "--reps",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let raw = fs::read_to_string(out_dir.join("direct_raw.csv")).unwrap();
    assert_eq!(raw.lines().count(), 1 + 2 * 2);
    assert!(raw.lines().skip(1).all(|l| l.contains(",12,")));
    assert!(out_dir.join("direct_aggregate.csv").exists());
    assert!(out_dir.join("direct_paired.csv").exists());
}

#[test]
fn longrun_and_study_emit_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let common = [
        "--target",
        "contour:45",
        "--n0",
        "10",
        "--n-new",
        "2",
        "--reps",
        "2",
        "--out",
        d,
    ];
    let out = eibnb(&[&["longrun"][..], &common].concat());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        header(&dir.path().join("longrun_raw.csv")),
        "run_id,seed,method,k,y_new,fmin_est,fmax_est,max_ei,d_k"
    );
    assert_eq!(
        header(&dir.path().join("longrun_aggregate.csv")),
        "method,k,metric,mean,stderr,n_included,n_excluded"
    );
    let out = eibnb(&[&["study"][..], &common].concat());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("study_aggregate.csv").exists());
}

#[test]
fn bad_input_exits_nonzero_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let bad_cfg = dir.path().join("bad.toml");
    fs::write(&bad_cfg, "replicates = 3\n").unwrap();
    for args in [
        vec!["study", "--target", "maxmin", "--out", d],
        vec!["direct", "--target", "contour-full:45", "--out", d],
        vec!["direct", "--function", "rosenbrock", "--out", d],
        vec!["direct", "--reps", "0", "--out", d],
        vec!["longrun", "--config", bad_cfg.to_str().unwrap(), "--out", d],
        vec!["direct", "--config", "/nonexistent/cfg.toml", "--out", d],
    ] {
        let out = eibnb(&args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(
            String::from_utf8_lossy(&out.stderr).starts_with("eibnb: "),
            "{args:?}"
        );
    }
}
