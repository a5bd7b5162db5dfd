//! Properties of the synthetic scene that the classifier relies on.

use sirec_core::features::diff_std;
use sirec_core::sirec::{DecisionTree, TreeParams};
use sirec_core::synth::generate_dataset;
use sirec_core::{LabeledDataset, SceneConfig};

fn rows_of(data: &LabeledDataset, label: i32, seg: usize) -> Vec<[f64; 3]> {
    data.rows()
        .iter()
        .filter(|r| r.label == label)
        .map(|r| [0.0, 0.0, diff_std(&r.rir[..seg]).unwrap()])
        .collect()
}

#[test]
fn empty_and_full_separate_on_one_feature() {
    let scene = SceneConfig::default();
    let seg = 300;
    let train = generate_dataset(&scene, 10, 41).unwrap();
    let test = generate_dataset(&scene, 10, 42).unwrap();
    let (lo, hi) = (scene.classes()[0], *scene.classes().last().unwrap());

    let mut x = rows_of(&train, lo, seg);
    let mut y = vec![lo; x.len()];
    let full = rows_of(&train, hi, seg);
    y.extend(std::iter::repeat_n(hi, full.len()));
    x.extend(full);
    let params = TreeParams {
        max_depth: Some(1),
        min_samples_leaf: 1,
    };
    let stump = DecisionTree::fit::<rand::rngs::StdRng>(&x, &y, &[lo, hi], params, None).unwrap();

    let mut correct = 0;
    let mut total = 0;
    for label in [lo, hi] {
        for f in rows_of(&test, label, seg) {
            total += 1;
            if stump.predict(&f) == label {
                correct += 1;
            }
        }
    }
    let acc = correct as f64 / total as f64;
    assert!(acc >= 0.95, "stump accuracy {acc}");
}

#[test]
fn rows_cover_every_class_evenly() {
    let scene = SceneConfig::default();
    let data = generate_dataset(&scene, 3, 1).unwrap();
    for class in scene.classes() {
        let n = data.rows().iter().filter(|r| r.label == class).count();
        assert_eq!(n, 9, "class {class}");
    }
    assert!(data.rows().iter().all(|r| r.rir.len() == scene.rir_samples));
}

#[test]
fn same_seed_same_rows() {
    let scene = SceneConfig::default();
    let a = generate_dataset(&scene, 2, 77).unwrap();
    let b = generate_dataset(&scene, 2, 77).unwrap();
    let c = generate_dataset(&scene, 2, 78).unwrap();
    assert_eq!(a.rows(), b.rows());
    assert_ne!(a.rows(), c.rows());
}
