//! Laplacian scale learning and residual behaviour of the slot solver on
//! instances drawn from the solver's own prior.

mod common;

use common::{em_calibration, laplacian_slot, EM_SHAPE, EM_TRUTH};
use ura::hygamp::{run_hygamp_traced, HyGampConfig, TraceRecord};

#[test]
fn learned_scale_within_fifteen_percent() {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (learned, sample) = em_calibration(seed);
        println!("seed {seed}: learned {learned:.4} sample {sample:.4}");
        let rel = (learned / EM_TRUTH - 1.0).abs();
        worst = worst.max(rel);
        assert!((learned / sample - 1.0).abs() < 0.01, "seed {seed}");
        assert!(rel < 0.15, "seed {seed}: sigma_x {learned:.4} vs {EM_TRUTH}");
    }
    println!("worst relative sigma_x error: {worst:.3}");
}

#[test]
fn noiseless_residual_does_not_grow() {
    for seed in 0..5 {
        let (cb, obs, _) = laplacian_slot(seed, EM_SHAPE, 1.0, 0.0);
        let cfg = HyGampConfig {
            sigma_w2: 1e-8,
            ..Default::default()
        };
        let mut trace: Vec<TraceRecord> = Vec::new();
        run_hygamp_traced(&obs, &cb, &cfg, EM_SHAPE.3, |r| trace.push(*r)).unwrap();
        let (first, last) = (trace[0].residual_norm, trace.last().unwrap().residual_norm);
        assert!(last <= first, "seed {seed}: {first} -> {last}");
    }
}

#[test]
fn far_starting_scales_agree() {
    let noise_power = 1e-3;
    for seed in 0..5 {
        let (cb, obs, _) = laplacian_slot(seed, EM_SHAPE, EM_TRUTH, noise_power);
        let learned: Vec<f64> = [4.0, 0.25]
            .iter()
            .map(|f| {
                let cfg = HyGampConfig {
                    sigma_x: Some(f * EM_TRUTH),
                    sigma_w2: noise_power / 2.0,
                    ..Default::default()
                };
                ura::hygamp::run_hygamp(&obs, &cb, &cfg, EM_SHAPE.3).unwrap().sigma_x
            })
            .collect();
        println!("seed {seed}: from 4x {:.4}, from 0.25x {:.4}", learned[0], learned[1]);
        assert!((learned[0] / learned[1] - 1.0).abs() < 0.25, "seed {seed}");
    }
}
