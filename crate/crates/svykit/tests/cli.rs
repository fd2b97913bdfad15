use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;

use svykit::cli::{design_to_json, design_to_toml, load_design, parse_design_json, parse_design_toml, run};
use svykit::designs::{PpsMethod, SrsMethod};
use svykit::{Design, Phase2Rule};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

fn svykit(args: &[&str]) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_svykit")).args(args).output().expect("binary runs");
    (o.status.code().unwrap_or(-1), String::from_utf8(o.stdout).unwrap(), String::from_utf8(o.stderr).unwrap())
}

fn in_process(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("svykit").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s).expect("valid JSON output")
}

#[test]
fn draw_is_byte_identical_for_a_seed() {
    let frame = fixture("farm_frame.csv");
    let args = ["draw", "--design", "srs", "--n", "2", "--seed", "7", "--frame", frame.as_str()];
    let (c1, a, _) = svykit(&args);
    let (c2, b, _) = svykit(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    let v = json(&a);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["units"].as_array().unwrap().len(), 2);
    // other seeds eventually pick a different pair
    let picks: std::collections::BTreeSet<String> = (0..20)
        .map(|s| {
            let seed = s.to_string();
            let (_, o, _) = in_process(&["draw", "--design", "srs", "--n", "2", "--seed", &seed, "--frame", &frame]);
            json(&o)["units"].to_string()
        })
        .collect();
    assert!(picks.len() > 1);
}

#[test]
fn household_ratio_pipeline() {
    let (code, out, err) = svykit(&["estimate", "--estimator", "ht", "--y", "y", "--x", "t", "--frame", &fixture("household.csv")]);
    assert_eq!(code, 0, "{err}");
    let v = json(&out);
    let p = v["value"].as_f64().unwrap();
    assert!((p - 0.2135).abs() < 5e-4, "{p}");
    assert!((v["variance"].as_f64().unwrap() - 0.005302).abs() < 1e-6);
    assert_eq!(v["method"], "ht_ratio");
}

#[test]
fn neyman_allocation_from_strata_file() {
    let (code, out, _) = in_process(&["allocate", "--method", "neyman", "--n", "140", "--strata", &fixture("neyman_strata.csv")]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["n_h"], serde_json::json!([100, 26, 14]));
    assert_eq!(v["capped"], serde_json::json!([0]));
}

#[test]
fn csv_output() {
    let (code, out, _) =
        in_process(&["--out", "csv", "allocate", "--method", "proportional", "--n", "33", "--strata", &fixture("neyman_strata.csv")]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "stratum,n_h,continuous");
    assert_eq!(lines.len(), 4);
}

#[test]
fn exit_codes() {
    let frame = fixture("farm_frame.csv");
    assert_eq!(in_process(&["draw", "--bogus"]).0, 2);
    assert_eq!(in_process(&["draw", "--design", "srs", "--n", "2"]).0, 2);
    assert_eq!(in_process(&["draw", "--design", "nope", "--n", "2", "--frame", &frame]).0, 2);
    // n larger than the frame is a usage error; stratified design on an unstratified frame is a data error
    assert_eq!(in_process(&["draw", "--design", "srs", "--n", "9", "--frame", &frame]).0, 2);
    assert_eq!(in_process(&["draw", "--design", &fixture("stratified.toml"), "--frame", &frame]).0, 3);
    assert_eq!(in_process(&["draw", "--design", &fixture("bad_nesting.json"), "--frame", &frame]).0, 2);
    assert_eq!(in_process(&["--help"]).0, 0);
}

#[test]
fn malformed_csv_reports_row_and_column() {
    let dir = std::env::temp_dir().join(format!("svykit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("bad.csv");
    std::fs::write(&p, "id,mos,y\na,1,2\nb,x,3\n").unwrap();
    let (code, _, err) = in_process(&["draw", "--design", "srs", "--n", "1", "--frame", p.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.contains("row 3") && err.contains("`mos`"), "{err}");
    let q = dir.join("sample.csv");
    std::fs::write(&q, "id,weight,y\na,2,1\nb,2,\n").unwrap();
    let (code, _, err) = in_process(&["estimate", "--estimator", "ht", "--frame", q.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.contains("row 3") && err.contains("`y`"), "{err}");
}

#[test]
fn numerical_failure_exit_code() {
    let dir = std::env::temp_dir().join(format!("svykit-cli-num-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let q = dir.join("zero_x.csv");
    std::fs::write(&q, "id,weight,y,t\na,2,1,0\nb,2,3,0\n").unwrap();
    let (code, _, err) = in_process(&["estimate", "--estimator", "ht", "--x", "t", "--frame", q.to_str().unwrap()]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn diagnose_arithmetic() {
    let (_, out, _) = in_process(&["diagnose", "--rho", "0.1", "--m", "11"]);
    assert_eq!(json(&out)["deff"], 2.0);
    let (_, out, _) = in_process(&["diagnose", "--margin", "0.02", "--deff", "11", "--m", "200"]);
    assert_eq!(json(&out)["clusters"], 137.5);
}

#[test]
fn simulate_exact_and_monte_carlo() {
    let frame = fixture("farm_frame.csv");
    let (code, out, _) = in_process(&["simulate", "--design", "srs", "--n", "2", "--exact", "--frame", &frame]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!((v["mean"].as_f64().unwrap() - 24.0).abs() < 1e-9);
    // the HT total is 4 × the sample mean: 16 · 58/6
    assert!((v["var"].as_f64().unwrap() - 16.0 * 58.0 / 6.0).abs() < 1e-9);
    let args = ["simulate", "--design", "srs", "--n", "2", "--replicates", "4000", "--seed", "3", "--frame", &frame];
    let (_, a, _) = in_process(&args);
    let (_, b, _) = in_process(&args);
    assert_eq!(a, b);
    assert!(json(&a)["z_score"].as_f64().unwrap().abs() < 4.0);
}

#[test]
fn variance_methods_agree_roughly() {
    let h = fixture("household.csv");
    let lin = json(&in_process(&["variance", "--estimator", "ht", "--x", "t", "--frame", &h]).1);
    let (code, out, err) = in_process(&["variance", "--estimator", "ht", "--x", "t", "--method", "jackknife", "--replicates", "--frame", &h]);
    assert_eq!(code, 0, "{err}");
    let jk = json(&out);
    assert_eq!(jk["replicate_estimates"].as_array().unwrap().len(), 3);
    let r = jk["variance"].as_f64().unwrap() / lin["variance"].as_f64().unwrap();
    assert!(r > 0.8 && r < 1.5, "{r}");
}

// ---- design documents

#[test]
fn minimal_design_document() {
    assert_eq!(parse_design_json(r#"{"srs": {"n": 2}}"#).unwrap(), Design::Srs { n: 2, method: SrsMethod::DrawByDraw });
    assert_eq!(load_design(fixture("srs2.json")).unwrap(), Design::Srs { n: 2, method: SrsMethod::DrawByDraw });
    let d = load_design(fixture("stratified.toml")).unwrap();
    let Design::Stratified { strata } = d else { panic!("expected stratified") };
    assert_eq!(strata["b"], Design::Brewer2 {});
}

#[test]
fn invalid_nesting_is_a_schema_error() {
    assert!(load_design(fixture("bad_nesting.json")).is_err());
    assert!(parse_design_json(r#"{"srs": {"n": 2, "extra": 1}}"#).is_err());
    assert!(parse_design_json(r#"{"warp": {"n": 2}}"#).is_err());
    assert!(parse_design_json(r#"{"two_stage": {"psu": {"pps_wr": {"n": 2}}, "ssu": {"srs": {"n": 1}}}}"#).is_err());
}

fn nested_examples() -> Vec<Design> {
    let mut strata = BTreeMap::new();
    strata.insert("north".to_string(), Design::Systematic { n: 3 });
    strata.insert(
        "south".to_string(),
        Design::TwoStage {
            psu: Box::new(Design::Chao { n: 2 }),
            ssu: Box::new(Design::Srs { n: 4, method: SrsMethod::Reservoir }),
        },
    );
    let mut rates = BTreeMap::new();
    rates.insert("1".to_string(), 0.25);
    vec![
        Design::Srs { n: 2, method: SrsMethod::RandomSort },
        Design::PpsWr { n: 3, method: PpsMethod::Lahiri, bound: Some(12.5) },
        Design::Poisson { pi: vec![0.1, 0.5, 1.0] },
        Design::Brewer2 {},
        Design::RejectivePoisson { n: 2, working: Some(vec![0.3, 0.4, 0.6]) },
        Design::Stratified { strata },
        Design::TwoPhase {
            phase1: Box::new(Design::Srs { n: 10, method: SrsMethod::DrawByDraw }),
            phase2: Phase2Rule::StratifiedRate { rates },
        },
        Design::TwoPhase { phase1: Box::new(Design::Bernoulli { pi: 0.4 }), phase2: Phase2Rule::All },
        Design::OneStageCluster { psu: Box::new(Design::Srs { n: 2, method: SrsMethod::DrawByDraw }) },
        Design::Explicit { support: vec![(vec![0, 3], 0.5), (vec![1, 2], 0.5)] },
    ]
}

#[test]
fn design_round_trip_json_and_toml() {
    for d in nested_examples() {
        d.validate().unwrap();
        assert_eq!(parse_design_json(&design_to_json(&d)).unwrap(), d);
        assert_eq!(parse_design_toml(&design_to_toml(&d).unwrap()).unwrap(), d, "{d:?}");
    }
}

#[test]
fn drawing_from_a_design_file() {
    let (code, out, err) = in_process(&["draw", "--design", &fixture("srs2.json"), "--frame", &fixture("farm_frame.csv"), "--seed", "1"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(json(&out)["size"], 2);
}
