use std::path::Path;
use std::process::{Command, Output};

fn kernrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kernrank")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Value of `key=` in the trailing summary line.
fn summary_value(out: &Output, key: &str) -> String {
    let text = stdout(out);
    let summary = text.lines().last().unwrap();
    assert!(summary.starts_with("# "), "{summary}");
    summary
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {summary}"))
        .to_string()
}

#[test]
fn sphere_squared_distance_is_full_rank() {
    let out = kernrank(&[
        "rank",
        "--manifold",
        "sphere:2",
        "--kernel",
        "sqdist",
        "--k",
        "50",
        "--trials",
        "100",
        "--seed",
        "1",
    ]);
    assert!(out.status.success());
    assert_eq!(summary_value(&out, "fullrank_fraction").parse::<f64>().unwrap(), 1.0);
}

#[test]
fn plane_squared_distance_has_rank_four() {
    let out = kernrank(&[
        "rank",
        "--manifold",
        "euclid:2",
        "--kernel",
        "sqdist",
        "--k",
        "10",
        "--trials",
        "100",
        "--seed",
        "1",
    ]);
    assert!(out.status.success());
    assert_eq!(summary_value(&out, "min_rank"), "4");
    assert_eq!(summary_value(&out, "max_rank"), "4");
}

#[test]
fn sphere_alpha_is_quarter_turn() {
    let out = kernrank(&["alpha", "--manifold", "sphere:2", "--trials", "100000", "--seed", "1"]);
    assert!(out.status.success());
    let estimate: f64 = summary_value(&out, "estimate").parse().unwrap();
    assert!((estimate - std::f64::consts::FRAC_PI_2).abs() <= 0.02, "{estimate}");
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["rank", "--manifold", "sphere:2", "--kernel", "dot:arccos2", "--k-list", "5,20", "--trials", "30"],
        &["rank", "--manifold", "euclid:3", "--system", "z", "--k", "8", "--trials", "30", "--format", "jsonl"],
        &["cond-sweep", "--manifold", "sphere:2", "--k-list", "20,40", "--trials", "6"],
        &["alpha", "--manifold", "euclid:1", "--trials", "5000"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let mut files = Vec::new();
        for threads in ["1", "4"] {
            let path = dir.path().join(format!("run{i}-{threads}.out"));
            let mut full: Vec<&str> = args.to_vec();
            full.extend(["--seed", "7", "--threads", threads, "--out", path.to_str().unwrap()]);
            let out = kernrank(&full);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            files.push((std::fs::read(&path).unwrap(), out.stdout));
        }
        assert_eq!(files[0], files[1], "run {i}");
    }
}

#[test]
fn reals_use_seventeen_significant_digits() {
    let out = kernrank(&["sample", "--manifold", "sphere:2", "--k", "4", "--seed", "3"]);
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    for value in row.split(',').skip(1) {
        let mantissa = value.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{value}");
    }
}

#[test]
fn forward_recovery_dichotomy() {
    let sphere = kernrank(&["recover", "--manifold", "sphere:2", "--k", "20", "--trials", "10"]);
    assert!(sphere.status.success());
    assert_eq!(summary_value(&sphere, "unique"), "10/10");
    assert!(summary_value(&sphere, "max_relative_error").parse::<f64>().unwrap() <= 1e-6);

    let plane = kernrank(&["recover", "--manifold", "euclid:2", "--k", "10", "--trials", "10"]);
    assert!(plane.status.success());
    assert_eq!(summary_value(&plane, "unique"), "0/10");
    assert!(summary_value(&plane, "max_residual").parse::<f64>().unwrap() <= 1e-10);
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn recovery_from_files() {
    // Sigma_j = sum_i f_i eta_ji eta_ji^T on the line with f = (1, 2, 3)
    // at points 0, 1, 3: Sigma_0 = 2*1 + 3*9 = 29, Sigma_1 = 1 + 3*4 = 13,
    // Sigma_2 = 9 + 2*4 = 17.
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("points.csv");
    let sigma = dir.path().join("sigma.csv");
    write(&points, "# x\n0\n1\n3\n");
    write(&sigma, "29\n13\n17\n");
    let out = kernrank(&[
        "recover",
        "--manifold",
        "euclid:1",
        "--points",
        points.to_str().unwrap(),
        "--sigma",
        sigma.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let f: Vec<f64> = text.lines().skip(1).take(3).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    for (got, want) in f.iter().zip([1.0, 2.0, 3.0]) {
        assert!((got - want).abs() <= 1e-12, "{f:?}");
    }
    assert_eq!(summary_value(&out, "unique"), "true");

    write(&sigma, "29\n13\n");
    let out = kernrank(&[
        "recover",
        "--manifold",
        "euclid:1",
        "--points",
        points.to_str().unwrap(),
        "--sigma",
        sigma.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tensor_dump_has_layout_header() {
    let out = kernrank(&["tensor", "--manifold", "sphere:2", "--k", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# kernrank tensor layout v1"));
    assert_eq!(lines.next(), Some("matrix,row,col,value"));
    // Y is 27 x 3, C 27 x 1, Z 9 x 9, Psi 3 x 3, f 3 x 1
    let count = |name: &str| text.lines().filter(|l| l.starts_with(&format!("{name},"))).count();
    assert_eq!([count("Y"), count("C"), count("Z"), count("Psi"), count("f")], [81, 27, 81, 9, 3]);
}

#[test]
fn exit_codes() {
    assert_eq!(kernrank(&["--help"]).status.code(), Some(0));
    assert_eq!(kernrank(&["--version"]).status.code(), Some(0));
    assert_eq!(kernrank(&["rank", "--manifold", "torus:2", "--k", "5"]).status.code(), Some(1));
    assert_eq!(kernrank(&["rank", "--manifold", "sphere:2", "--kernel", "rbf", "--k", "5"]).status.code(), Some(1));
    assert_eq!(kernrank(&["rank", "--manifold", "sphere:2", "--k", "5", "--bogus"]).status.code(), Some(1));
    assert_eq!(kernrank(&["rank", "--manifold", "sphere:2", "--k", "5", "--trials", "0"]).status.code(), Some(1));
    assert_eq!(kernrank(&["sample", "--manifold", "sphere:2:box=0,1", "--k", "5"]).status.code(), Some(1));
    assert_eq!(
        kernrank(&["recover", "--manifold", "euclid:1", "--points", "/nonexistent", "--sigma", "/nonexistent"])
            .status
            .code(),
        Some(1)
    );
    // squared distances overflow to infinity
    assert_eq!(kernrank(&["rank", "--manifold", "euclid:1:box=-1e200,1e200", "--k", "3"]).status.code(), Some(2));
}
