use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use democirc::api::PredictResponse;
use democirc::building::{ingest_building, BuildingModelFile, Storey};
use democirc::cli;
use democirc::service::{router, AppState};
use democirc_core::data::{generate_synthetic, GeneratorConfig};
use democirc_core::learners::load_model_path;
use http_body_util::BodyExt;
use proptest::prelude::*;
use tower::ServiceExt;

const BIN: &str = env!("CARGO_BIN_EXE_democirc");

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = cli::run(std::iter::once("democirc").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_train_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let model = dir.path().join("m.model");
    assert_eq!(run(&["gen-data", "--n", "300", "--seed", "7", "--out", path(&data)]).0, 0);
    let (code, stats) = run(&["summarize", path(&data)]);
    assert_eq!(code, 0);
    assert!(stats.starts_with("Factor"));
    assert!(stats.contains("Number of levels"));
    let (code, _) = run(&[
        "train", "--algo", "xgb", "--data", path(&data), "--out", path(&model), "--param", "n_estimators=30", "--split", "0.8",
    ]);
    assert_eq!(code, 0);
    let (code, text) = run(&[
        "predict", "--model", path(&model), "--gfa", "200", "--volume", "600", "--levels", "2", "--frame", "Steel", "--usage", "Offices",
    ]);
    assert_eq!(code, 0);
    let values: Vec<f64> = text.lines().map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap()).collect();
    let record = democirc_core::data::BuildingRecord::new(
        200.0,
        600.0,
        2,
        democirc_core::data::FrameType::Steel,
        democirc_core::data::UsageType::Offices,
    )
    .unwrap();
    let expected = load_model_path(&model).unwrap().predict_record(&record).to_array();
    assert_eq!(values, expected.to_vec());
    let (code, table) = run(&["eval", "--model", path(&model), "--data", path(&data), "--split", "0.8"]);
    assert_eq!(code, 0);
    assert!(table.lines().nth(1).unwrap().starts_with("XGBoost"));
}

#[test]
fn rank_reproduces_the_fixture_scores() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/table5_testing.csv");
    let (code, out) = run(&["rank", "--fixtures", fixture, "--csv"]);
    assert_eq!(code, 0);
    for row in ["XGBoost,22,4,0,1", "RF,9,3,1,2", "DT,9,2,2,3", "LightGBM,-14,1,3,4", "KNN,-26,0,4,5"] {
        assert!(out.lines().any(|l| l.starts_with(row)), "{row} missing from\n{out}");
    }
}

#[test]
fn tune_writes_history_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let history = dir.path().join("h.csv");
    let model = dir.path().join("knn.model");
    run(&["gen-data", "--n", "200", "--out", path(&data)]);
    let (code, text) = run(&[
        "tune", "--algo", "knn", "--data", path(&data), "--budget", "10", "--split", "0.8", "--history", path(&history), "--out",
        path(&model),
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("test rmse"));
    let log = std::fs::read_to_string(history).unwrap();
    assert!(log.starts_with("trial,n_neighbors,weights,p,objective,status"));
    assert_eq!(log.lines().count(), 11);
    assert!(load_model_path(&model).is_ok());
    assert_eq!(run(&["tune", "--algo", "knn", "--data", path(&data), "--budget", "3"]).0, 1);
}

#[test]
fn explain_reports_groups_and_global_importance() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let model = dir.path().join("m.model");
    run(&["gen-data", "--n", "300", "--out", path(&data)]);
    run(&["train", "--algo", "dt", "--data", path(&data), "--out", path(&model)]);
    let (code, json) = run(&[
        "explain", "--model", path(&model), "--background", path(&data), "--bg-size", "16", "--gfa", "500", "--volume", "1500",
        "--levels", "2", "--frame", "Concrete", "--usage", "Retail", "--json",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["outputs"][0]["attributions"].as_array().unwrap().len(), 14);
    let (code, text) = run(&[
        "explain", "--model", path(&model), "--background", path(&data), "--bg-size", "16", "--data", path(&data), "--rows", "10",
    ]);
    assert_eq!(code, 0);
    assert!(text.starts_with("mean |phi| over 10 rows"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.model");
    let status = |args: &[&str]| Command::new(BIN).args(args).output().unwrap();
    let out = status(&["--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(status(&["--help"]).status.code(), Some(0));
    assert_eq!(status(&["train", "--algo", "svm", "--data", "x", "--out", "y"]).status.code(), Some(1));
    let out = status(&["predict", "--model", path(&missing), "--gfa", "1", "--volume", "1", "--levels", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.model"));
}

#[test]
fn building_file_flag_matches_inline_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let model = dir.path().join("m.model");
    let building = dir.path().join("b.json");
    std::fs::write(
        &building,
        r#"{"name":"b","storeys":[{"label":"G","floor_area":100,"height":3},{"label":"1","floor_area":100,"height":3}],"frame_type":"Masonry"}"#,
    )
    .unwrap();
    run(&["gen-data", "--n", "200", "--out", path(&data)]);
    run(&["train", "--algo", "rf", "--data", path(&data), "--out", path(&model), "--param", "n_trees=10"]);
    let a = run(&["predict", "--model", path(&model), "--building", path(&building), "--usage", "Education"]);
    let b = run(&[
        "predict", "--model", path(&model), "--gfa", "200", "--volume", "600", "--levels", "2", "--frame", "Masonry", "--usage",
        "Education",
    ]);
    assert_eq!(a, b);
    assert_eq!(a.0, 0);
    std::fs::write(&building, r#"{"name":"b","storeys":[{"label":"G","floor_area":100,"height":0}]}"#).unwrap();
    let (code, _) = run(&["predict", "--model", path(&model), "--building", path(&building), "--frame", "Steel", "--usage", "Retail"]);
    assert_eq!(code, 1);
}

#[tokio::test]
async fn service_and_cli_agree_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let model = dir.path().join("m.model");
    run(&["gen-data", "--n", "400", "--out", path(&data)]);
    run(&["train", "--algo", "lgbm", "--data", path(&data), "--out", path(&model), "--param", "n_estimators=40"]);
    let app = router(Arc::new(AppState::new(load_model_path(&model).unwrap(), None)));
    let probes = generate_synthetic(&GeneratorConfig { n: 100, seed: 77, ..GeneratorConfig::default() }).unwrap();
    for (r, _) in &probes.records {
        let (gfa, volume, levels) = (r.gfa.to_string(), r.volume.to_string(), r.levels.to_string());
        let (code, out) = run(&[
            "predict", "--model", path(&model), "--gfa", &gfa, "--volume", &volume, "--levels", &levels, "--frame",
            r.frame_type.as_str(), "--usage", r.usage_type.as_str(), "--json",
        ]);
        assert_eq!(code, 0);
        let from_cli: PredictResponse = serde_json::from_str(&out).unwrap();
        let body = serde_json::json!({
            "gfa": r.gfa, "volume": r.volume, "levels": r.levels,
            "frame_type": r.frame_type.as_str(), "usage_type": r.usage_type.as_str()
        });
        let req = Request::post("/v1/predict").body(Body::from(body.to_string())).unwrap();
        let bytes = app.clone().oneshot(req).await.unwrap().into_body().collect().await.unwrap().to_bytes();
        let from_service: PredictResponse = serde_json::from_slice(&bytes).unwrap();
        let bits = |p: &PredictResponse| [p.recycle_m3, p.reuse_m3, p.landfill_m3].map(f64::to_bits);
        assert_eq!(bits(&from_cli), bits(&from_service));
        assert_eq!(from_cli, from_service);
    }
}

fn arb_storeys() -> impl Strategy<Value = Vec<Storey>> {
    prop::collection::vec((0.5f64..5000.0, 2.0f64..6.0), 1..8).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (floor_area, height))| Storey { label: format!("L{i}"), floor_area, height })
            .collect()
    })
}

proptest! {
    #[test]
    fn splitting_a_storey_keeps_area_and_volume(storeys in arb_storeys(), which in 0usize..8) {
        let which = which % storeys.len();
        let file = BuildingModelFile { name: "p".into(), storeys: storeys.clone(), frame_type: None, usage_type: None };
        let before = ingest_building(&file).unwrap();
        prop_assert_eq!(before, ingest_building(&file).unwrap());
        let mut split = storeys;
        let half = Storey { floor_area: split[which].floor_area / 2.0, ..split[which].clone() };
        split[which] = half.clone();
        split.insert(which + 1, half);
        let after = ingest_building(&BuildingModelFile { storeys: split, ..file }).unwrap();
        prop_assert_eq!(after.levels, before.levels + 1);
        prop_assert!((after.gfa - before.gfa).abs() <= 1e-12 * before.gfa);
        prop_assert!((after.volume - before.volume).abs() <= 1e-12 * before.volume);
    }
}
