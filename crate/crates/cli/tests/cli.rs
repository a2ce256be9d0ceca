use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bcsoftmax"))
}

/// Runs in-process; returns (exit code, stdout, stderr).
fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = vec![];
    let mut err = vec![];
    let argv = std::iter::once("bcsoftmax").chain(args.iter().copied());
    let code = bcsoftmax_cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn write(dir: &TempDir, name: &str, contents: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

fn parse_probs(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn eval_worked_example_row() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "x.csv", "logit_0,logit_1,logit_2\n-1.5,1,-0.5\n");
    let bounds = write(
        &dir,
        "b.csv",
        "a_0,a_1,a_2,b_0,b_1,b_2\n0,0,0,1.0,0.6,0.5\n",
    );
    for algo in ["auto", "sorted", "select", "quadratic"] {
        let (code, out, err) = run(&["eval", &input, "--bounds", &bounds, "--algo", algo]);
        assert_eq!(code, 0, "{err}");
        let p = &parse_probs(&out)[0];
        let expected = [0.10757, 0.6, 0.29243];
        assert!(
            p.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-5),
            "{p:?}"
        );
    }
}

#[test]
fn eval_temperature_halves_logits() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", "logit_0,logit_1,logit_2\n0.4,-2,3\n");
    let b = write(&dir, "b.csv", "logit_0,logit_1,logit_2\n0.2,-1,1.5\n");
    let (_, hot, _) = run(&["eval", &a, "--tau", "2", "--lower", "0.1", "--upper", "0.7"]);
    let (_, cold, _) = run(&["eval", &b, "--lower", "0.1", "--upper", "0.7"]);
    let (p, q) = (parse_probs(&hot), parse_probs(&cold));
    assert!(p[0].iter().zip(&q[0]).all(|(x, y)| (x - y).abs() <= 1e-12));
}

#[test]
fn eval_sorted_and_quadratic_files_agree() {
    let dir = TempDir::new().unwrap();
    let (code, _, err) = run(&[
        "gen",
        "--n",
        "200",
        "--k",
        "9",
        "--seed",
        "5",
        "--out",
        dir.path().join("data.csv").to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let data = dir.path().join("data.csv");
    let data = data.to_str().unwrap();
    let mut files = vec![];
    for algo in ["sorted", "quadratic"] {
        let out = dir.path().join(format!("{algo}.csv"));
        let (code, _, err) = run(&[
            "eval",
            data,
            "--lower",
            "0.02",
            "--upper",
            "0.5",
            "--algo",
            algo,
            "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
        files.push(parse_probs(&fs::read_to_string(out).unwrap()));
    }
    assert_eq!(files[0].len(), 200);
    for (p, q) in files[0].iter().zip(&files[1]) {
        for (x, y) in p.iter().zip(q) {
            assert!((x - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn eval_bounds_per_row_and_broadcast() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "x.csv", "logit_0,logit_1\n0,0\n3,0\n");
    let per_row = write(&dir, "r.csv", "a_0,a_1,b_0,b_1\n0.7,0,1,1\n0,0,0.6,1\n");
    let (code, out, _) = run(&["eval", &input, "--bounds", &per_row]);
    assert_eq!(code, 0);
    let p = parse_probs(&out);
    assert!((p[0][0] - 0.7).abs() < 1e-12 && (p[1][0] - 0.6).abs() < 1e-12);

    let three = write(
        &dir,
        "t.csv",
        "a_0,a_1,b_0,b_1\n0,0,1,1\n0,0,1,1\n0,0,1,1\n",
    );
    let (code, _, err) = run(&["eval", &input, "--bounds", &three]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn eval_empty_input_is_empty_output() {
    let dir = TempDir::new().unwrap();
    for contents in ["", "logit_0,logit_1\n"] {
        let input = write(&dir, "empty.csv", contents);
        let (code, out, _) = run(&["eval", &input]);
        assert_eq!(code, 0);
        assert!(out.is_empty());
    }
}

#[test]
fn eval_errors_name_the_row() {
    let dir = TempDir::new().unwrap();
    let ragged = write(&dir, "bad.csv", "logit_0,logit_1\n1,2\n1,oops\n");
    let (code, _, err) = run(&["eval", &ragged]);
    assert_eq!(code, 2);
    assert!(err.contains("row 1"), "{err}");

    let input = write(&dir, "x.csv", "logit_0,logit_1,logit_2\n1,2,3\n");
    let (code, _, err) = run(&["eval", &input, "--lower", "0.5"]);
    assert_eq!(code, 2);
    assert!(err.contains("row 0"), "{err}");

    let wide = write(&dir, "w.csv", "a_0,a_1,b_0,b_1\n0,0,1,1\n");
    let (code, _, _) = run(&["eval", &input, "--bounds", &wide]);
    assert_eq!(code, 2);

    let (code, _, _) = run(&["eval", &input, "--tau", "0"]);
    assert_eq!(code, 1);
    let (code, _, _) = run(&["eval", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn verify_exit_codes() {
    let (code, out, _) = run(&["verify", "--K", "6", "--trials", "1000", "--seed", "7"]);
    assert_eq!(code, 0);
    assert!(out.contains("< 1e-9"), "{out}");
    let (code, _, err) = run(&["verify", "--k", "13"]);
    assert_eq!(code, 1);
    assert!(err.contains("too large"), "{err}");
    let (code, out, _) = run(&["verify", "--k", "3", "--trials", "0"]);
    assert_eq!(code, 0);
    assert!(out.contains("< 1e-9"));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(run(&[]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["eval"]).0, 1);
    assert_eq!(run(&["bench", "--kmin", "3"]).0, 1);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("calibrate"));
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let paths: Vec<_> = ["a.csv", "b.csv", "c.csv"]
        .iter()
        .map(|f| dir.path().join(f))
        .collect();
    for (path, seed) in paths.iter().zip(["11", "11", "12"]) {
        let status = bin()
            .args([
                "gen", "--N", "5", "--K", "3", "--scale", "3", "--seed", seed, "--out",
            ])
            .arg(path)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let bytes: Vec<_> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(bytes[0], bytes[1]);
    assert_ne!(bytes[0], bytes[2]);
    let text = String::from_utf8(bytes[0].clone()).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(
        lines[0],
        "logit_0,logit_1,logit_2,label,feat_0,feat_1,feat_2"
    );
}

fn gen_split(dir: &TempDir) -> (String, String) {
    let train = dir.path().join("train.csv");
    let test = dir.path().join("test.csv");
    for (path, seed) in [(&train, "1"), (&test, "2")] {
        let (code, _, err) = run(&[
            "gen",
            "--n",
            "600",
            "--k",
            "5",
            "--scale",
            "3",
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
    }
    (
        train.to_str().unwrap().to_string(),
        test.to_str().unwrap().to_string(),
    )
}

fn metric_rows(report: &str) -> Vec<Vec<f64>> {
    report
        .lines()
        .filter(|l| {
            ["uncalibrated", "initialized", "calibrated"]
                .iter()
                .any(|s| l.starts_with(s))
        })
        .map(|l| {
            l.split_whitespace()
                .skip(1)
                .map(|v| v.parse().unwrap())
                .collect()
        })
        .collect()
}

#[test]
fn calibrate_pipeline_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (train, test) = gen_split(&dir);
    let model = dir.path().join("model.json");
    let args = [
        "calibrate",
        "--train",
        &train,
        "--test",
        &test,
        "--method",
        "pb-c",
        "--epochs",
        "5",
        "--seed",
        "3",
        "--model-out",
        model.to_str().unwrap(),
    ];
    let (code, first, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    let (_, second, _) = run(&args);
    assert_eq!(first, second);

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(json["kind"], "PB-C");
    assert_eq!(json["meta"]["epochs"], 5);
    assert!(json["params"]["a_raw"].is_number());
    assert_eq!(json["flags"]["use_upper"], true);
}

#[test]
fn calibrate_reports_ts_improvement_and_zero_epochs() {
    let dir = TempDir::new().unwrap();
    let (train, test) = gen_split(&dir);
    let (code, out, err) = run(&[
        "calibrate",
        "--train",
        &train,
        "--test",
        &test,
        "--method",
        "ts",
        "--epochs",
        "60",
    ]);
    assert_eq!(code, 0, "{err}");
    let rows = metric_rows(&out);
    assert!(rows[2][0] < rows[0][0], "{out}");

    let (_, out, _) = run(&[
        "calibrate",
        "--train",
        &train,
        "--test",
        &test,
        "--method",
        "ts",
        "--epochs",
        "0",
    ]);
    let rows = metric_rows(&out);
    assert_eq!(rows[1], rows[2]);
    assert!(out.contains("tau 1.500000"), "{out}");
}

#[test]
fn calibrate_lower_ablation_keeps_accuracy() {
    let dir = TempDir::new().unwrap();
    let (train, test) = gen_split(&dir);
    let (code, out, err) = run(&[
        "calibrate",
        "--train",
        &train,
        "--test",
        &test,
        "--method",
        "pb-c",
        "--ablate",
        "lower",
        "--epochs",
        "20",
    ]);
    assert_eq!(code, 0, "{err}");
    let rows = metric_rows(&out);
    assert_eq!(rows[0][1], rows[2][1], "{out}");
}

#[test]
fn calibrate_input_errors() {
    let dir = TempDir::new().unwrap();
    let (train, test) = gen_split(&dir);
    let (code, _, _) = run(&[
        "calibrate",
        "--train",
        &train,
        "--test",
        &test,
        "--method",
        "dir",
    ]);
    assert_eq!(code, 1);
    let unlabeled = write(&dir, "u.csv", "logit_0,logit_1\n1,2\n");
    let (code, _, err) = run(&[
        "calibrate",
        "--train",
        &unlabeled,
        "--test",
        &test,
        "--method",
        "ts",
    ]);
    assert_eq!(code, 2, "{err}");
    let no_feat = write(&dir, "nf.csv", "logit_0,logit_1,label\n1,2,0\n2,1,1\n");
    let (code, _, err) = run(&[
        "calibrate",
        "--train",
        &no_feat,
        "--test",
        &no_feat,
        "--method",
        "pb-l",
        "--epochs",
        "1",
    ]);
    assert_eq!(code, 1, "{err}");
    assert!(Path::new(&train).exists());
}

#[test]
fn bench_writes_one_row_per_k_and_algo() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bench.csv");
    let status = bin()
        .args([
            "bench", "--kmin", "8", "--kmax", "32", "--batch", "4", "--reps", "3", "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "K,algo,median_ns,p10_ns,p90_ns");
    assert_eq!(lines.len(), 1 + 3 * 3);
}
