mod common;

use coopsteer::autograd::Padding;
use coopsteer::models::{Arch, Model, ModelConfig, REFERENCE_FEATURE_LEN};
use common::axis_geometry;

/// Golden per-frame feature length at 480×640 (7 × 10 × 128).
const FEATURE_LEN_480X640: usize = 8960;

fn oracle_shapes(cfg: &ModelConfig) -> Vec<[usize; 3]> {
    let (mut h, mut w) = (cfg.input_h, cfg.input_w);
    cfg.conv
        .iter()
        .map(|c| {
            h = axis_geometry(h, c.kernel, c.stride.0, Padding::Same).unwrap().0;
            w = axis_geometry(w, c.kernel, c.stride.1, Padding::Same).unwrap().0;
            [h, w, c.filters]
        })
        .collect()
}

#[test]
fn reference_conv_chain() {
    let cfg = ModelConfig::new(Arch::Coop, 8, 480, 640);
    let want = vec![[96, 160, 24], [32, 80, 32], [7, 20, 48], [7, 20, 64], [7, 10, 128]];
    assert_eq!(oracle_shapes(&cfg), want);
    assert_eq!(cfg.conv_shapes().unwrap(), want);
    assert_eq!(cfg.feature_len().unwrap(), FEATURE_LEN_480X640);
    assert_eq!(REFERENCE_FEATURE_LEN, FEATURE_LEN_480X640);
}

#[test]
fn every_layer_is_well_formed_at_reference_size() {
    let cfg = ModelConfig::new(Arch::Coop, 8, 480, 640);
    for [h, w, c] in cfg.conv_shapes().unwrap() {
        assert!(h >= 1 && w >= 1 && c >= 1);
    }
}

#[test]
fn parameter_counts() {
    let full = Model::zeros(ModelConfig::new(Arch::Coop, 8, 480, 640)).unwrap();
    assert_eq!(full.count_params(), 2_729_815);
    let sum_of = |prefix: &str| -> usize {
        full.named_params()
            .iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(_, t)| t.numel())
            .sum()
    };
    assert_eq!(sum_of("conv"), 341_296);
    assert_eq!(sum_of("lstm1."), 2_310_400);
    assert_eq!(sum_of("lstm2.") + sum_of("lstm3."), 66_048);
    assert_eq!(sum_of("fc"), 12_071);

    // x does not change the parameter count; the frame size does.
    for x in [1, 4, 20] {
        let m = Model::zeros(ModelConfig::new(Arch::Coop, x, 64, 64)).unwrap();
        assert_eq!(m.count_params(), 468_823);
    }
    let tiny = Model::zeros(ModelConfig::new(Arch::Coop, 2, 16, 16)).unwrap();
    assert_eq!(tiny.count_params(), 468_823);
}

#[test]
fn oracle_agrees_on_many_sizes() {
    for h in (1..=130).step_by(7) {
        for w in (1..=130).step_by(11) {
            let cfg = ModelConfig::new(Arch::BaselineA, 1, h, w);
            assert_eq!(cfg.conv_shapes().unwrap(), oracle_shapes(&cfg), "{h}x{w}");
        }
    }
}

#[test]
fn forward_output_shapes() {
    for arch in Arch::ALL {
        let cfg = ModelConfig::new(arch, 2, 16, 16);
        let model = Model::new(cfg.clone(), 1).unwrap();
        let batch = coopsteer::Tensor::zeros(&[3, cfg.frames_per_sample(), 16, 16, 3]);
        assert_eq!(model.predict(batch).unwrap().len(), 3, "{arch}");
        let wrong = coopsteer::Tensor::zeros(&[3, cfg.frames_per_sample() + 1, 16, 16, 3]);
        assert!(model.predict(wrong).is_err());
    }
}
