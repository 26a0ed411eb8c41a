use std::f64::consts::PI;

use fovnoise::analysis::spectral_peak;
use fovnoise::gabor::{generate_impulses, synthesize_with, ConstantParams, GaborGrid, GaborParams};
use fovnoise::FieldMap;

const SIZE: usize = 512;

fn constant_noise(amplitude: f64, seed: u64, impulses: u32) -> FieldMap {
    let grid = GaborGrid::new(impulses, seed);
    let lattice = generate_impulses(&grid, SIZE, SIZE);
    let params = ConstantParams(GaborParams {
        frequency: 0.2,
        amplitude,
        orientation: 30f64.to_radians(),
    });
    synthesize_with(&lattice, &params, SIZE, SIZE)
}

#[test]
fn spectrum_peaks_at_kernel_frequency_and_orientation() {
    for seed in [0, 1, 99] {
        let noise = constant_noise(1.0, seed, 12);
        let (f, angle) = spectral_peak(&noise);
        assert!((f - 0.2).abs() <= 0.02, "seed {seed}: radial peak {f}");
        let d = (angle - PI / 6.0).abs();
        assert!(d.min(PI - d) <= 5f64.to_radians(), "seed {seed}: angle {}", angle.to_degrees());
    }
}

#[test]
fn amplitude_scales_exactly() {
    let one = constant_noise(1.0, 4, 12);
    for k in [2.0f32, 0.5, 0.25] {
        let scaled = constant_noise(k as f64, 4, 12);
        for (a, b) in scaled.data().iter().zip(one.data()) {
            assert_eq!(*a, b * k);
        }
    }
    let odd = constant_noise(0.3, 4, 12);
    for (a, b) in odd.data().iter().zip(one.data()) {
        assert!((a - 0.3 * b).abs() <= 1e-6 * (1.0 + b.abs()));
    }
}

#[test]
fn noise_is_zero_mean_and_seeded() {
    let a = constant_noise(1.0, 5, 12);
    let (lo, hi) = a.min_max();
    let peak = hi.max(-lo) as f64;
    assert!(a.mean().abs() < 0.02 * peak, "mean {} peak {peak}", a.mean());
    assert_eq!(a, constant_noise(1.0, 5, 12));
    assert_ne!(a, constant_noise(1.0, 6, 12));
}

#[test]
fn denser_impulses_raise_variance() {
    let var = |f: &FieldMap| f.data().iter().map(|v| (*v as f64).powi(2)).sum::<f64>() / f.data().len() as f64;
    let sparse = var(&constant_noise(1.0, 2, 12));
    let dense = var(&constant_noise(1.0, 2, 64));
    // Variance grows with the number of impulses (20 vs 4 per cell).
    let ratio = dense / sparse;
    assert!((3.0..7.5).contains(&ratio), "{ratio}");
}
