use std::path::Path;
use std::process::Command;

use vlq_cli::run;

fn vlq(args: &[&str]) -> i32 {
    run(std::iter::once("vlq").chain(args.iter().copied()))
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn parse_csv(path: &str) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn synth_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "base.fvecs");
    let code = vlq(&["synth", "--n", "100000", "--d", "32", "--clusters", "200", "--out", &out, "--seed", "1"]);
    assert_eq!(code, 0);
    let len = std::fs::metadata(&out).unwrap().len();
    assert_eq!(len, 100_000 * (4 + 32 * 4));
}

#[test]
fn build_rejects_m_not_dividing_dim() {
    let dir = tempfile::tempdir().unwrap();
    let base = p(dir.path(), "base.fvecs");
    assert_eq!(vlq(&["synth", "--n", "2000", "--d", "10", "--out", &base]), 0);
    let out = Command::new(env!("CARGO_BIN_EXE_vlq"))
        .args(["build", "--base", &base, "--m", "4", "--out", &p(dir.path(), "x.idx")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("m must divide the dimension"), "{stderr}");
    assert_eq!(stderr.trim().lines().count(), 1);
    assert!(!dir.path().join("x.idx").exists());
}

#[test]
fn exit_codes() {
    let bin = env!("CARGO_BIN_EXE_vlq");
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["--version"]), Some(0));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["query", "--w1", "abc"]), Some(1));
    assert_eq!(code(&["stats", "--index", "/nonexistent/index.vlq"]), Some(2));
}

#[test]
fn help_lists_defaults() {
    let out = Command::new(env!("CARGO_BIN_EXE_vlq"))
        .args(["build", "--help"])
        .output()
        .unwrap();
    let help = String::from_utf8(out.stdout).unwrap();
    for flag in ["--k", "--n", "--m", "--iters", "--seed", "--batch", "--clamp-lambda"] {
        let line = help.lines().find(|l| l.trim_start().starts_with(&format!("{flag} "))).unwrap();
        assert!(line.contains("[default:"), "{line}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_vlq"))
        .args(["query", "--help"])
        .output()
        .unwrap();
    let help = String::from_utf8(out.stdout).unwrap();
    assert!(help.contains("[default: 64]") && help.contains("[default: 0.25]"));
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (base, queries, gt) = (p(d, "base.fvecs"), p(d, "q.fvecs"), p(d, "gt.ivecs"));
    assert_eq!(
        vlq(&[
            "synth", "--n", "20000", "--d", "16", "--clusters", "30", "--queries", "100",
            "--queries-out", &queries, "--out", &base, "--seed", "5",
        ]),
        0
    );
    assert_eq!(vlq(&["gt", "--base", &base, "--queries", &queries, "--out", &gt]), 0);
    for name in ["model1.vlq", "model2.vlq"] {
        let code = vlq(&[
            "train", "--input", &base, "--k", "64", "--n", "8", "--m", "4", "--iters", "8",
            "--out", &p(d, name),
        ]);
        assert_eq!(code, 0);
    }
    for (model, out) in [("model1.vlq", "a.vlq"), ("model2.vlq", "b.vlq")] {
        let code = vlq(&[
            "build", "--base", &base, "--model", &p(d, model), "--batch", "3000", "--out", &p(d, out),
        ]);
        assert_eq!(code, 0);
    }
    let a = std::fs::read(p(d, "a.vlq")).unwrap();
    assert_eq!(a, std::fs::read(p(d, "b.vlq")).unwrap());

    let csv = p(d, "report.csv");
    let code = vlq(&[
        "eval", "--index", &p(d, "a.vlq"), "--queries", &queries, "--gt", &gt, "--w1", "8,16",
        "--alpha", "0.25,0.5", "--base", &base, "--baseline", "--csv", &csv, "--table",
        &p(d, "report.txt"),
    ]);
    assert_eq!(code, 0);
    let rows = parse_csv(&csv);
    let header = &rows[0];
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (r1, r10, r100) = (col("R@1"), col("R@10"), col("R@100"));
    assert_eq!(rows.len(), 1 + 4 + 2);
    for row in &rows[1..] {
        let r: Vec<f64> = [r1, r10, r100].iter().map(|&c| row[c].parse().unwrap()).collect();
        assert!(r[0] <= r[1] && r[1] <= r[2], "{row:?}");
    }
    let systems: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert!(systems.contains(&"vlq-adc") && systems.contains(&"ivfadc"));

    // A second eval run matches the first outside the timing columns.
    let csv2 = p(d, "report2.csv");
    let code = vlq(&[
        "eval", "--index", &p(d, "b.vlq"), "--queries", &queries, "--gt", &gt, "--w1", "8,16",
        "--alpha", "0.25,0.5", "--base", &base, "--baseline", "--csv", &csv2, "--table",
        &p(d, "report2.txt"),
    ]);
    assert_eq!(code, 0);
    let timing = [col("mean_query_ms"), col("median_query_ms")];
    let strip = |rows: Vec<Vec<String>>| -> Vec<Vec<String>> {
        rows.into_iter()
            .map(|r| r.into_iter().enumerate().filter(|(i, _)| !timing.contains(i)).map(|x| x.1).collect())
            .collect()
    };
    assert_eq!(strip(parse_csv(&csv)), strip(parse_csv(&csv2)));

    let out = Command::new(env!("CARGO_BIN_EXE_vlq"))
        .args(["query", "--index", &p(d, "a.vlq"), "--queries", &queries, "--K", "5"])
        .args(["--ids-out", &p(d, "ids.ivecs")])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 100);
    assert!(lines[7].starts_with("7: "));
    let pairs: Vec<(u32, f32)> = lines[7]
        .split_once(": ")
        .unwrap()
        .1
        .split(' ')
        .map(|t| {
            let (id, dist) = t.split_once(':').unwrap();
            (id.parse().unwrap(), dist.parse().unwrap())
        })
        .collect();
    assert_eq!(pairs.len(), 5);
    assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
    let ids = vlq_adc::read_ground_truth(p(d, "ids.ivecs")).unwrap();
    assert_eq!(ids.k(), 5);
    assert_eq!(ids.row(7)[0], pairs[0].0);

    let out = Command::new(env!("CARGO_BIN_EXE_vlq"))
        .args(["stats", "--index", &p(d, "a.vlq")])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("101-300") && text.contains("structure"), "{text}");
}

#[test]
fn eval_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let csv = p(dir.path(), "r.csv");
    std::fs::write(
        &cfg,
        format!(
            r#"
train_size = 3000
m = 4
iters = 4
w1 = [4, 8]
alpha = [0.25]
out_csv = "{csv}"
out_table = "{table}"

[data]
kind = "synthetic"
count = 3000
dim = 8
clusters = 10
spread = 0.05
queries = 20
seed = 9

[[variants]]
k = 16
n = 4
"#,
            table = p(dir.path(), "r.txt")
        ),
    )
    .unwrap();
    assert_eq!(vlq(&["eval", "--config", cfg.to_str().unwrap()]), 0);
    assert_eq!(parse_csv(&csv).len(), 1 + 2 + 2);
}
