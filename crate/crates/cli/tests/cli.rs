use std::fs;
use std::process::{Command, Output};

fn bfsplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bfsplit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn help_exits_zero() {
    let o = bfsplit(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("gemm-accuracy"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bfsplit(&[]).status.code(), Some(1));
    assert_eq!(bfsplit(&["no-such-experiment"]).status.code(), Some(1));
    assert_eq!(bfsplit(&["gemm-accuracy", "--dist", "lognormal"]).status.code(), Some(1));
    assert_eq!(bfsplit(&["gemm-accuracy", "--trials", "0"]).status.code(), Some(1));
    assert_eq!(
        bfsplit(&["gemm-accuracy", "--schemes", "b7x7", "--sizes", "4"]).status.code(),
        Some(1)
    );
}

#[test]
fn speedup_csv_on_stdout() {
    let o = bfsplit(&["speedup", "--densities", "8,16,32", "--schemes", "b3x6"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("config_hash,seed,density,scheme,products,ratio,projected_speedup")
    );
    let speedups: Vec<f64> = lines
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(speedups, vec![8.0 / 6.0, 16.0 / 6.0, 32.0 / 6.0]);
    assert!(csv.contains("8/6"));
}

#[test]
fn out_file_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = bfsplit(&[
            "gemm-accuracy",
            "--sizes",
            "8,16",
            "--trials",
            "3",
            "--seed",
            "7",
            "--dist",
            "gaussian",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        fs::read(path).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 4);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(1) == Some("7")));
}

#[test]
fn bound_audit_passes() {
    let o = bfsplit(&["bound-audit", "--sizes", "0,5,300", "--trials", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(6) == Some("0")));
}

#[test]
fn unwritable_output_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("out.csv");
    let o = bfsplit(&["speedup", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn refine_identity_sized_run() {
    let o = bfsplit(&[
        "refine", "--sizes", "8", "--trials", "2", "--dist", "cond:10", "--schemes", "fp32",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let row = csv.lines().nth(1).unwrap();
    assert!(row.contains(",fp32,8,"));
    assert!(row.contains(",1.0000000000000000e2,"));
}
