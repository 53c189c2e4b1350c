use democirc_core::data::{generate_synthetic, Dataset, FeatureVector, GeneratorConfig};
use democirc_core::learners::{
    load_model, save_model, train, BoostParams, ForestParams, LearnerKind, LearnerParams, PersistError, TrainedModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn synthetic(n: usize, seed: u64) -> Dataset {
    generate_synthetic(&GeneratorConfig {
        n,
        seed,
        ..GeneratorConfig::default()
    })
    .unwrap()
}

fn quick_params(kind: LearnerKind) -> LearnerParams {
    match LearnerParams::default_for(kind) {
        LearnerParams::RandomForest(p) => LearnerParams::RandomForest(ForestParams { n_trees: 20, ..p }),
        LearnerParams::GbtLevelWise(p) => LearnerParams::GbtLevelWise(BoostParams { n_estimators: 30, ..p }),
        LearnerParams::GbtLeafWise(p) => LearnerParams::GbtLeafWise(BoostParams { n_estimators: 30, ..p }),
        other => other,
    }
}

fn to_bytes(model: &TrainedModel) -> Vec<u8> {
    let mut buf = Vec::new();
    save_model(model, &mut buf).unwrap();
    buf
}

/// 500 in-distribution rows plus 500 arbitrary (not one-hot) rows.
fn probes() -> Vec<FeatureVector> {
    let mut out = synthetic(500, 99).features();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        out.push(FeatureVector(std::array::from_fn(|_| rng.random_range(-100.0..40_000.0))));
    }
    out
}

#[test]
fn round_trip_predictions_are_bit_identical() {
    let data = synthetic(400, 3);
    let probes = probes();
    assert_eq!(probes.len(), 1000);
    for kind in LearnerKind::ALL {
        let model = train(&data, &quick_params(kind), 11).unwrap();
        let loaded = load_model(to_bytes(&model).as_slice()).unwrap();
        assert_eq!(loaded, model, "{kind}");
        for x in &probes {
            let (a, b) = (model.predict(x).to_array(), loaded.predict(x).to_array());
            assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits), "{kind}");
        }
    }
}

fn edit(model: &TrainedModel, f: impl FnOnce(&mut serde_json::Value)) -> Vec<u8> {
    let mut v: serde_json::Value = serde_json::from_slice(&to_bytes(model)).unwrap();
    f(&mut v);
    serde_json::to_vec(&v).unwrap()
}

#[test]
fn version_and_schema_are_checked() {
    let model = train(&synthetic(50, 1), &quick_params(LearnerKind::DecisionTree), 0).unwrap();
    let bumped = edit(&model, |v| v["version"] = "2.0".into());
    assert!(matches!(
        load_model(bumped.as_slice()),
        Err(PersistError::VersionMismatch { found }) if found == "2.0"
    ));
    let minor = edit(&model, |v| v["version"] = "1.3".into());
    assert!(load_model(minor.as_slice()).is_ok());
    let schema = edit(&model, |v| v["schema"] = "0000000000000000".into());
    assert!(matches!(load_model(schema.as_slice()), Err(PersistError::SchemaMismatch { .. })));
    let kind = edit(&model, |v| v["kind"] = "knn".into());
    assert!(matches!(load_model(kind.as_slice()), Err(PersistError::CorruptFile(_))));
    let format = edit(&model, |v| v["format"] = "pickle".into());
    assert!(matches!(load_model(format.as_slice()), Err(PersistError::CorruptFile(_))));
}

#[test]
fn truncated_and_inconsistent_files_are_corrupt() {
    let model = train(&synthetic(80, 2), &quick_params(LearnerKind::GbtLevelWise), 0).unwrap();
    let bytes = to_bytes(&model);
    for cut in [0, 10, bytes.len() / 2, bytes.len() - 3] {
        assert!(
            matches!(load_model(&bytes[..cut]), Err(PersistError::CorruptFile(_))),
            "cut at {cut}"
        );
    }
    let dangling = edit(&model, |v| {
        let node = &mut v["learner"]["model"]["trees"][0][0]["nodes"][0];
        if node["node"] == "internal" {
            node["left"] = 10_000.into();
        } else {
            node["node"] = "internal".into();
        }
    });
    assert!(matches!(load_model(dangling.as_slice()), Err(PersistError::CorruptFile(_))));
}
