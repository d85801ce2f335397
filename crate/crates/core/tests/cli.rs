use std::path::Path;
use std::process::Command;

use amalgam::algebra::{c64, AlgebraContext, ContextSpec};
use amalgam::cli::{run, EXIT_USAGE};
use amalgam::io::{ContextSource, Level, SeriesDocument};
use amalgam::series::CumulantSeries;
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("amalgam").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> (i32, Value) {
    let (code, out, err) = call(args);
    let v = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out} / {err}"));
    (code, v)
}

fn spec() -> ContextSpec {
    ContextSpec {
        ambient_dim: 3,
        b_blocks: vec![1, 1, 1],
        d_groups: None,
        weights: Some(vec![0.2, 0.3, 0.5]),
    }
}

fn write_context(dir: &Path) -> String {
    let p = dir.join("ctx.json");
    std::fs::write(&p, serde_json::to_string(&spec()).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

/// A scalar-valued cumulant series with one variable, lifted to `B`.
fn write_d_series(dir: &Path) -> String {
    let ctx = AlgebraContext::from_spec(&spec()).unwrap();
    let s = CumulantSeries::from_fn(ctx.d.clone(), 1, 4, |idx, _| vec![c64(0.5 + idx.len() as f64)]).unwrap();
    let doc = SeriesDocument::from_series(&s, ContextSource::Path("ctx.json".into()), Level::D);
    let p = dir.join("d.json");
    std::fs::write(&p, serde_json::to_string(&doc).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn nc_count_and_list() {
    assert_eq!(call(&["nc", "count", "4"]), (0, "14\n".into(), String::new()));
    assert_eq!(call(&["nc", "count", "6", "--pairs"]).1, "5\n");
    let (_, out, _) = call(&["nc", "list", "3"]);
    assert_eq!(out.lines().count(), 5);
    assert!(out.lines().any(|l| l == "{{1,3},{2}}"));
    let (_, v) = json(&["nc", "list", "4", "--pairs", "--format", "json", "--no-timestamp"]);
    assert_eq!(v["count"], 2);
    let parts = v["partitions"].as_array().unwrap();
    assert!(parts.contains(&serde_json::json!([[1, 2], [3, 4]])));
    assert!(parts.contains(&serde_json::json!([[1, 4], [2, 3]])));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(call(&["nc"]).0, EXIT_USAGE);
    assert_eq!(call(&["bogus"]).0, EXIT_USAGE);
    assert_eq!(call(&["bandmatrix", "criterion", "--profile", "builtin:nope"]).0, EXIT_USAGE);
    assert_eq!(call(&["algebra", "check", "/nonexistent.json"]).0, EXIT_USAGE);
    assert_eq!(call(&["nc", "count", "--help"]).0, 0);
}

#[test]
fn band_criterion_and_predict() {
    let (code, v) = json(&["bandmatrix", "criterion", "--profile", "builtin:const", "--no-timestamp"]);
    assert_eq!(code, 0);
    assert_eq!(v["holds"], true);
    assert_eq!(v["range"], 0.0);
    let (_, v) = json(&["bandmatrix", "criterion", "--profile", "builtin:xy"]);
    assert_eq!(v["holds"], false);
    assert!(v["generated_at"].is_u64());
    let (_, v) = json(&["bandmatrix", "predict", "--profile", "builtin:const", "--orders", "8"]);
    let m: Vec<f64> = serde_json::from_value(v["moments"].clone()).unwrap();
    assert_eq!(m.len(), 8);
    assert!((m[7] - 14.0).abs() < 1e-12);
    let (_, csv, _) = call(&["bandmatrix", "predict", "--profile", "builtin:const", "--orders", "4", "--format", "csv"]);
    assert_eq!(csv.lines().next(), Some("k,moment"));
}

#[test]
fn band_run_is_reproducible() {
    let args = [
        "bandmatrix", "run", "--profile", "builtin:const", "--n", "64", "--trials", "3", "--seed", "7", "--no-timestamp",
    ];
    let (code, a, _) = call(&args);
    assert_eq!(code, 0);
    assert_eq!(a, call(&args).1);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert!(v["ks_statistic"].as_f64().unwrap() < 0.2);
    assert_eq!(v["histogram"]["counts"].as_array().unwrap().len(), 40);
    assert!(call(&["bandmatrix", "run", "--profile", "builtin:const", "--n", "8", "--trials", "1"]).0 == EXIT_USAGE);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let mut with_out = args.to_vec();
    with_out.extend(["--format", "csv", "--out", csv.to_str().unwrap()]);
    assert_eq!(call(&with_out).0, 0);
    assert!(std::fs::read_to_string(csv).unwrap().starts_with("left,right,count,density"));
}

#[test]
fn algebra_check_reports() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = write_context(dir.path());
    let (code, v) = json(&["algebra", "check", &ctx]);
    assert_eq!(code, 0);
    assert_eq!(v["passes"], true);
}

#[test]
fn lift_output_passes_factorization_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = write_context(dir.path());
    let d = write_d_series(dir.path());
    let lifted = dir.path().join("lifted.json");
    let (code, _, err) = call(&["freeness", "lift", &d, "--out", lifted.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let lifted = lifted.to_str().unwrap();

    let (code, v) = json(&["freeness", "factorization", lifted, &ctx]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"], "pass");

    let (code, v) = json(&["freeness", "oracle", lifted, "--order", "4", "--random-words", "20", "--seed", "1"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["report"]["verdict"], "pass");
    // The oracle is stochastic and so requires a seed.
    assert_eq!(call(&["freeness", "oracle", lifted]).0, EXIT_USAGE);

    let (code, v) = json(&["freeness", "restriction", lifted]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"], "pass");
}

#[test]
fn transform_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    write_context(dir.path());
    let d = write_d_series(dir.path());
    let m = dir.path().join("m.json");
    let k = dir.path().join("k.json");
    assert_eq!(call(&["transform", "cumulants-to-moments", &d, "--out", m.to_str().unwrap()]).0, 0);
    assert_eq!(call(&["transform", "moments-to-cumulants", m.to_str().unwrap(), "--out", k.to_str().unwrap()]).0, 0);
    let orig: Value = serde_json::from_str(&std::fs::read_to_string(&d).unwrap()).unwrap();
    let back: Value = serde_json::from_str(&std::fs::read_to_string(&k).unwrap()).unwrap();
    let entries = |v: &Value| v["entries"].as_array().unwrap().clone();
    assert_eq!(entries(&orig).len(), entries(&back).len());
    for (a, b) in entries(&orig).iter().zip(entries(&back)) {
        assert_eq!(a["indices"], b["indices"]);
        let x = a["value"][0][0][0].as_f64().unwrap();
        let y = b["value"][0][0][0].as_f64().unwrap();
        assert!((x - y).abs() < 1e-12);
    }
    // Feeding moments where cumulants are expected is a usage error.
    assert_eq!(call(&["freeness", "factorization", m.to_str().unwrap()]).0, EXIT_USAGE);
}

#[test]
fn canonical_moments_match_transform() {
    let dir = tempfile::tempdir().unwrap();
    write_context(dir.path());
    let d = write_d_series(dir.path());
    let (c1, a) = json(&["canonical", "moments", "--cumulants", &d, "--order", "4", "--no-timestamp"]);
    let (c2, b) = json(&["transform", "cumulants-to-moments", &d, "--no-timestamp"]);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a["entries"].as_array().unwrap().len(), b["entries"].as_array().unwrap().len());
    for (x, y) in a["entries"].as_array().unwrap().iter().zip(b["entries"].as_array().unwrap()) {
        let (x, y) = (x["value"][0][0][0].as_f64().unwrap(), y["value"][0][0][0].as_f64().unwrap());
        assert!((x - y).abs() < 1e-9 * y.abs().max(1.0));
    }
}

#[test]
fn semicircular_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = write_context(dir.path());
    let write = |name: &str, diag: [[f64; 3]; 3]| {
        // η(e_a) = Σ_x S[x][a] e_x on the diagonal.
        let images: Vec<Vec<Vec<[f64; 2]>>> = (0..3)
            .map(|a| (0..3).map(|x| (0..3).map(|y| [if x == y { diag[x][a] } else { 0.0 }, 0.0]).collect()).collect())
            .collect();
        let p = dir.path().join(name);
        std::fs::write(&p, serde_json::json!({ "images": images }).to_string()).unwrap();
        p.to_str().unwrap().to_owned()
    };
    // τ(η(b)) = τ(b η(1)) needs w_x S[x][a] = w_a S[a][x]; constant multiples of
    // the weights give a scalar η(1).
    let w = [0.2, 0.3, 0.5];
    let flat = write("flat.json", [w, w, w]);
    let (code, v) = json(&["freeness", "semicircular", &flat, &ctx]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["eta_one_scalar"], true);

    let single = write("single.json", [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
    let (code, v) = json(&["freeness", "semicircular", &single, &ctx]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["eta_one_scalar"], false);
    assert_eq!(v["catalan_match"], false);

    let skew = write("skew.json", [[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
    let (code, v) = json(&["freeness", "semicircular", &skew, &ctx]);
    assert_eq!(code, 2, "{v}");
    assert_eq!(v["verdict"], "hypothesis-fails");
}

#[test]
fn binary_entry_point() {
    let out = Command::new(env!("CARGO_BIN_EXE_amalgam")).args(["nc", "count", "5"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "42\n");
    let out = Command::new(env!("CARGO_BIN_EXE_amalgam"))
        .args(["bandmatrix", "criterion", "--profile", "builtin:linear", "--no-timestamp"])
        .env("AMALGAM_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(out.status.code(), Some(0));
    let status = Command::new(env!("CARGO_BIN_EXE_amalgam")).arg("nope").output().unwrap().status;
    assert_eq!(status.code(), Some(64));
}
