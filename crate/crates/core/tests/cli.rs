use std::fs;
use std::path::Path;

use wavelet_plm::cli::run;

fn wplm(args: &[&str]) -> i32 {
    let mut argv = vec!["wplm"];
    argv.extend_from_slice(args);
    run(argv)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// y = 2 x1 - 0.5 x2 + 0.1 exactly, with non-polynomial covariates.
fn write_linear_csv(path: &Path, n: usize) {
    let mut text = String::from("t,y,x1,x2\n");
    for i in 1..=n {
        let t = i as f64 / n as f64;
        let x1 = (7.3 * t * t).sin() + 0.3 * ((i * 37 % 11) as f64);
        let x2 = (i % 5) as f64 - 2.0 + t;
        let y = 2.0 * x1 - 0.5 * x2 + 0.1;
        text.push_str(&format!("{t},{y:.17e},{x1:.17e},{x2:.17e}\n"));
    }
    fs::write(path, text).unwrap();
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fit_noiseless_linear_recovers_beta() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    let out = dir.path().join("fit.json");
    let fitted = dir.path().join("fitted.csv");
    write_linear_csv(&input, 64);
    let code = wplm(&[
        "fit", "-i", s(&input), "--covariates", "x1,x2", "-o", s(&out), "--fitted", s(&fitted), "--delta", "1e-14",
    ]);
    assert_eq!(code, 0);
    let doc = json(&out);
    let beta: Vec<f64> = doc["beta_hat"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((beta[0] - 2.0).abs() < 1e-8, "{beta:?}");
    assert!((beta[1] + 0.5).abs() < 1e-8, "{beta:?}");
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["p"], 2);

    let text = fs::read_to_string(&fitted).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,y,xbeta,f_hat,y_hat");
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((v[2] + v[3] - v[4]).abs() < 1e-12);
        // the intercept ends up in f
        assert!((v[3] - 0.1).abs() < 1e-6);
    }
}

#[test]
fn fit_fixed_sigma_universal_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    let out = dir.path().join("fit.json");
    write_linear_csv(&input, 256);
    let code = wplm(&[
        "fit", "-i", s(&input), "--covariates", "x1", "--sigma", "0.5", "--lambda-mode", "universal", "-o", s(&out),
    ]);
    assert_eq!(code, 0);
    let lambda = json(&out)["lambda"].as_f64().unwrap();
    let expected = 0.5 * (2.0 * 256f64.ln()).sqrt();
    assert!((lambda - expected).abs() < 1e-12);
    assert!(format!("{lambda}").starts_with("1.665109"));
}

#[test]
fn fit_reports_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    write_linear_csv(&input, 64);
    assert_eq!(wplm(&["fit", "-i", s(&input), "--covariates", "x1,nope"]), 1);
    assert_eq!(wplm(&["fit", "-i", s(&input), "--covariates", "x1", "--response", "missing"]), 1);
    assert_eq!(wplm(&["fit", "-i", s(&input)]), 1);
    assert_eq!(wplm(&["fit", "-i", s(&input), "--covariates", "x1", "--solver", "newton"]), 1);
    assert_eq!(wplm(&["fit", "-i", s(&dir.path().join("absent.csv")), "--covariates", "x1"]), 1);
    assert_eq!(wplm(&["fit", "--bogus"]), 1);

    let odd = dir.path().join("odd.csv");
    fs::write(&odd, "y,x\n1,2\n2,3\n3,5\n").unwrap();
    assert_eq!(wplm(&["fit", "-i", s(&odd), "--covariates", "x"]), 1);
    let text = dir.path().join("text.csv");
    fs::write(&text, "y,x\n1,2\n2,abc\n3,5\n4,1\n").unwrap();
    assert_eq!(wplm(&["fit", "-i", s(&text), "--covariates", "x"]), 1);
}

#[test]
fn strict_mode_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    let mut body = String::from("y,x\n");
    for i in 0..64 {
        let x = ((i * 13) % 17) as f64 / 3.0;
        let spike = if i % 9 == 0 { 25.0 } else { 0.0 };
        body.push_str(&format!("{},{x}\n", 1.5 * x + spike + (i as f64 * 0.7).cos()));
    }
    fs::write(&input, body).unwrap();
    let out = dir.path().join("fit.json");
    let args = ["fit", "-i", s(&input), "--covariates", "x", "--solver", "artur", "--max-iter", "1", "--delta", "1e-15"];
    let mut strict = args.to_vec();
    strict.extend(["--strict", "-o", s(&out)]);
    assert_eq!(wplm(&strict), 2);
    assert!(out.exists());
    let mut relaxed = args.to_vec();
    relaxed.extend(["-o", s(&out)]);
    assert_eq!(wplm(&relaxed), 0);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    write_linear_csv(&input, 64);
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[fit]\ncovariates = [\"x1\", \"x2\"]\nfilter = \"haar\"\nlambda = 0.7\n").unwrap();
    let out = dir.path().join("fit.json");
    assert_eq!(wplm(&["fit", "-i", s(&input), "--config", s(&cfg), "-o", s(&out)]), 0);
    let doc = json(&out);
    assert_eq!(doc["filter"], "haar");
    assert_eq!(doc["lambda"].as_f64().unwrap(), 0.7);

    assert_eq!(wplm(&["fit", "-i", s(&input), "--config", s(&cfg), "--filter", "db4", "--lambda", "0.2", "-o", s(&out)]), 0);
    let doc = json(&out);
    assert_eq!(doc["filter"], "db4");
    assert_eq!(doc["lambda"].as_f64().unwrap(), 0.2);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[fit]\nfliter = \"haar\"\n").unwrap();
    assert_eq!(wplm(&["fit", "-i", s(&input), "--covariates", "x1", "--config", s(&bad)]), 1);
    fs::write(&bad, "[fitting]\n").unwrap();
    assert_eq!(wplm(&["fit", "-i", s(&input), "--covariates", "x1", "--config", s(&bad)]), 1);
}

#[test]
fn transform_constant_column() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.csv");
    fs::write(&input, format!("v\n{}", "2.5\n".repeat(64))).unwrap();
    let out = dir.path().join("coef.csv");
    assert_eq!(wplm(&["transform", "-i", s(&input), "-o", s(&out), "--filter", "haar", "--j0", "0"]), 0);
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 64);
    let nonzero: Vec<&Vec<String>> = rows.iter().filter(|r| r[3].parse::<f64>().unwrap().abs() > 1e-12).collect();
    assert_eq!(nonzero.len(), 1);
    assert_eq!(nonzero[0][0], "scaling");
    assert!((nonzero[0][3].parse::<f64>().unwrap() - 2.5 * 8.0).abs() < 1e-12);
}

#[test]
fn transform_round_trip_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    let x: Vec<f64> = (0..128).map(|i| (i as f64 * 0.37).sin() * 3.0 + (i % 7) as f64).collect();
    let mut body = String::from("a,signal\n");
    for v in &x {
        body.push_str(&format!("0,{v:.17e}\n"));
    }
    fs::write(&input, body).unwrap();
    let coef = dir.path().join("coef.csv");
    let back = dir.path().join("back.csv");
    assert_eq!(
        wplm(&["transform", "-i", s(&input), "--column", "signal", "-o", s(&coef), "--filter", "sym8", "--j0", "3"]),
        0
    );
    let meta = json(&dir.path().join("coef.csv.meta.json"));
    assert_eq!(meta["filter"], "sym8");
    assert_eq!(meta["j0"], 3);
    assert_eq!(meta["n"], 128);

    assert_eq!(
        wplm(&["transform", "-i", s(&coef), "--inverse", "-o", s(&back), "--filter", "sym8", "--j0", "3"]),
        0
    );
    let rec: Vec<f64> = fs::read_to_string(&back).unwrap().lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert_eq!(rec.len(), x.len());
    for (a, b) in rec.iter().zip(&x) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn transform_sizing_errors() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    fs::write(&input, format!("v\n{}", "1\n".repeat(48))).unwrap();
    assert_eq!(wplm(&["transform", "-i", s(&input)]), 1);
    fs::write(&input, format!("v\n{}", "1\n".repeat(16))).unwrap();
    assert_eq!(wplm(&["transform", "-i", s(&input), "--j0", "4"]), 1);
    assert_eq!(wplm(&["transform", "-i", s(&input), "--j0", "1", "--filter", "identity"]), 1);
    assert_eq!(wplm(&["transform", "-i", s(&input), "--j0", "1", "--filter", "coif3"]), 1);
}

#[test]
fn simulate_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let code = wplm(&[
            "simulate", "--preset", "example1", "--reps", "10", "--seed", "7", "--out-dir", s(dir.path()), "--quiet",
        ]);
        assert_eq!(code, 0);
    }
    for name in ["example1_replications.csv", "example1_aggregate.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
    let agg = json(&a.path().join("example1_aggregate.json"));
    assert_eq!(agg["replications"], 10);
    assert_eq!(agg["summaries"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_example3_and_timings() {
    let dir = tempfile::tempdir().unwrap();
    let code = wplm(&[
        "simulate", "--preset", "example3", "--reps", "3", "--estimators", "legend", "--timings", "--out-dir",
        s(dir.path()), "--quiet",
    ]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(dir.path().join("example3_replications.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.contains("beta_4") && header.contains("wall_time"));
    assert_eq!(csv.lines().count(), 4);
    let agg = json(&dir.path().join("example3_aggregate.json"));
    assert!(agg["summaries"][0]["mean_wall_time"].is_number());
    assert_eq!(agg["summaries"][0]["beta_mean"].as_array().unwrap().len(), 4);
}

#[test]
fn simulate_rejects_invalid_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(wplm(&["simulate", "--preset", "example7", "--out-dir", out]), 1);
    assert_eq!(wplm(&["simulate", "--n", "300", "--reps", "2", "--out-dir", out]), 1);
    assert_eq!(wplm(&["simulate", "--reps", "0", "--out-dir", out]), 1);
    assert_eq!(wplm(&["simulate", "--reps", "2", "--estimators", "lasso", "--out-dir", out]), 1);
}

#[test]
fn simulate_scenario_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    fs::write(
        &cfg,
        r#"[simulate]
reps = 2
estimators = ["legend"]
quiet = true

[simulate.scenario]
name = "cosine"
n = 64
f_kind = "sinusoid"
eta_sd = 1.0
snr_f = 2.0
snr_lin = 3.0
beta_true = [1.5]
sigma = 0.5
seed = 3
replications = 5
design = [{ kind = "cosine" }]
"#,
    )
    .unwrap();
    // `quiet` is a flag only, so the file is rejected
    assert_eq!(wplm(&["simulate", "--config", s(&cfg), "--out-dir", s(dir.path())]), 1);
    let text = fs::read_to_string(&cfg).unwrap().replace("quiet = true\n", "");
    fs::write(&cfg, text).unwrap();
    assert_eq!(wplm(&["simulate", "--config", s(&cfg), "--out-dir", s(dir.path()), "--quiet"]), 0);
    let agg = json(&dir.path().join("cosine_aggregate.json"));
    assert_eq!(agg["replications"], 2);
    assert_eq!(agg["scenario"]["n"], 64);
}
