//! Files shared with the embedded side: model JSON and dataset CSV.

use sirec_core::dataset::DatasetAppender;
use sirec_core::sirec::{deserialize, serialize, MODEL_FORMAT_VERSION};
use sirec_core::synth::generate_dataset;
use sirec_core::{IntervalBounds, LabeledDataset, SceneConfig, SirecModel, TrainConfig};

fn small_model() -> (SirecModel, LabeledDataset) {
    let data = generate_dataset(&SceneConfig::default(), 2, 3).unwrap();
    let model = SirecModel::fit(&data, &TrainConfig::new(8, 120, IntervalBounds::new(10, 60), 4)).unwrap();
    (model, data)
}

#[test]
fn model_file_roundtrip_preserves_predictions() {
    let (model, data) = small_model();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, serialize(&model)).unwrap();
    let back = deserialize(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(serialize(&back), serialize(&model));
    for row in data.rows() {
        assert_eq!(back.predict(&row.rir).unwrap(), model.predict(&row.rir).unwrap());
    }
}

#[test]
fn model_file_layout() {
    let (model, _) = small_model();
    let v: serde_json::Value = serde_json::from_slice(&serialize(&model)).unwrap();
    assert_eq!(v["format_version"], MODEL_FORMAT_VERSION);
    assert_eq!(v["config"]["n_estimators"], 8);
    assert_eq!(v["config"]["segment_length"], 120);
    assert_eq!(v["config"]["random_state"], 4);
    assert_eq!(v["classes"], serde_json::json!([0, 25, 50, 75, 100]));
    let trees = v["trees"].as_array().unwrap();
    assert_eq!(trees.len(), 8);
    let root = &trees[0]["nodes"][0];
    assert!(root["kind"] == "split" || root["kind"] == "leaf");
}

#[test]
fn model_file_rejects_other_versions() {
    let (model, _) = small_model();
    let mut v: serde_json::Value = serde_json::from_slice(&serialize(&model)).unwrap();
    v["format_version"] = serde_json::json!(MODEL_FORMAT_VERSION + 1);
    let err = deserialize(v.to_string().as_bytes()).unwrap_err();
    assert_eq!(err.kind(), "version");
}

#[test]
fn dataset_file_roundtrip_and_append() {
    let data = generate_dataset(&SceneConfig::default(), 1, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    data.write_path(&path).unwrap();
    let back = LabeledDataset::read_path(&path).unwrap();
    assert_eq!(back.meta(), data.meta());
    assert_eq!(back.len(), data.len());
    for (a, b) in back.rows().iter().zip(data.rows()) {
        assert_eq!(a.label, b.label);
        assert_eq!(a.material, b.material);
        for (x, y) in a.rir.iter().zip(&b.rir) {
            assert!((x - y).abs() <= 1e-7 * y.abs().max(1e-30), "{x} vs {y}");
        }
    }

    let appended = dir.path().join("appended.csv");
    let mut app = DatasetAppender::open(&appended, data.meta().clone()).unwrap();
    for row in data.rows() {
        app.append(row).unwrap();
    }
    drop(app);
    // reopening an existing file keeps its rows
    let mut app = DatasetAppender::open(&appended, data.meta().clone()).unwrap();
    app.append(&data.rows()[0]).unwrap();
    drop(app);
    assert_eq!(LabeledDataset::read_path(&appended).unwrap().len(), data.len() + 1);
}

#[test]
fn dataset_file_header() {
    let data = generate_dataset(&SceneConfig::default(), 1, 8).unwrap();
    let mut buf = Vec::new();
    data.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# sirec-dataset version=1 "));
    assert!(lines
        .next()
        .unwrap()
        .starts_with("label,fine_fill_percent,material,x0,x1,"));
}
