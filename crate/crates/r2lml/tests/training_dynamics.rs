//! Cross-module training behavior: cost scaling of the transform block and
//! end-to-end persistence of trained models.

use std::time::Instant;

use nalgebra::DMatrix;

use r2lml::rng::substream;
use r2lml::{
    evaluate, load_model, psd_block, save_model, similarity_from_labels, standardize,
    synth_gaussian_mixture, train_e_r2lml, Hyperparams, Method, PsdConfig, SynthConfig, SynthKind,
};
use rand::Rng;

fn block1_seconds_per_iteration(q: usize, iterations: usize) -> f64 {
    let d = 6;
    let mut rng = substream(q as u64, "dyn-scaling");
    let features = DMatrix::from_fn(q, d, |_, _| rng.gen_range(-1.0..1.0f64));
    let labels: Vec<usize> = (0..q).map(|i| i % 2).collect();
    let s = similarity_from_labels(&labels).unwrap();
    let transforms = vec![DMatrix::<f64>::identity(d, d)];
    let coefficients = DMatrix::from_element(1, q, 1.0);
    let cfg = PsdConfig::new(1e-6, iterations).unwrap();
    // warm-up, then best of three
    let mut best = f64::INFINITY;
    for _ in 0..4 {
        let clock = Instant::now();
        psd_block(&transforms, &coefficients, &features, &s, 1.0, 0.0, &cfg).unwrap();
        best = best.min(clock.elapsed().as_secs_f64());
    }
    best / iterations as f64
}

/// Per-iteration cost of the transform block grows roughly quadratically
/// with the number of samples: doubling Q should scale time by about 4,
/// allowed to drift within a factor of two either way.
#[test]
fn block1_cost_scales_quadratically_in_samples() {
    let small = block1_seconds_per_iteration(160, 40);
    let large = block1_seconds_per_iteration(320, 40);
    let ratio = large / small;
    assert!(
        (2.0..=16.0).contains(&ratio),
        "timing ratio {ratio:.2} outside [2, 16] (small {small:.2e}s, large {large:.2e}s)"
    );
}

#[test]
fn train_save_load_evaluate_round_trip() {
    let (train, test) = synth_gaussian_mixture::<f64>(&SynthConfig {
        kind: SynthKind::Overlap,
        dim: 5,
        n_train: 40,
        n_test: 60,
        mean_offset: Some(0.8),
        seed: 5,
        ..SynthConfig::default()
    })
    .unwrap();
    let (train_std, mut others, params) = standardize(&train, &[&test]).unwrap();
    let test_std = others.pop().unwrap();
    let hyper = Hyperparams {
        k: 2,
        c: 1.0,
        lambda: 0.5,
        step_length: 1e-3,
        epochs: 2,
        psd_iters_per_epoch: 50,
        seed: 6,
        ..Hyperparams::default()
    };
    let (mut model, trace) = train_e_r2lml(&train_std, &hyper).unwrap();
    model.standardization = Some(params);
    assert!(trace.final_objective <= trace.initial_objective);

    let file = tempfile::NamedTempFile::new().unwrap();
    save_model(&model, file.path()).unwrap();
    let loaded = load_model::<f64>(file.path()).unwrap();
    assert_eq!(model, loaded);

    let (acc_orig, preds_orig) = evaluate(&model, &test_std, Method::Efficient, None, 5).unwrap();
    let (acc_loaded, preds_loaded) =
        evaluate(&loaded, &test_std, Method::Efficient, None, 5).unwrap();
    assert_eq!(acc_orig, acc_loaded);
    assert_eq!(preds_orig.predicted, preds_loaded.predicted);
}
