use fovnoise::analysis::{fft2, fft_frequency};
use fovnoise::blur::{blur, BlurMethod};
use fovnoise::FieldMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIGMA: f64 = 5.47;

fn hann_crop(img: &FieldMap, x0: usize, n: usize) -> FieldMap {
    let w = |i: usize| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
    let crop = img.crop(x0, x0, n, n);
    let mean = crop.mean();
    FieldMap::from_fn(n, n, |x, y| ((crop.get(x, y) as f64 - mean) * w(x) * w(y)) as f32)
}

/// Blurring white noise multiplies its spectrum by the Gaussian transfer
/// function `exp(-2π²σ²f²)`; checked where the response is at least 0.1.
#[test]
fn white_noise_spectrum_follows_gaussian_transfer() {
    let size = 768;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = FieldMap::from_fn(size, size, |_, _| rng.random::<f32>());
    let sigma = FieldMap::filled(size, size, SIGMA as f32);
    let blurred = blur(&noise, &sigma, BlurMethod::Exact).unwrap();

    let n = 256;
    let x0 = (size - n) / 2;
    let a = fft2(&hann_crop(&noise, x0, n));
    let b = fft2(&hann_crop(&blurred, x0, n));

    let bins = 40;
    let width = 0.5 / bins as f64;
    let mut pa = vec![0.0; bins];
    let mut pb = vec![0.0; bins];
    for v in 0..n {
        for u in 0..n {
            let f = fft_frequency(u, n).hypot(fft_frequency(v, n));
            let k = (f / width) as usize;
            if k < bins {
                pa[k] += a[v * n + u].norm_sqr();
                pb[k] += b[v * n + u].norm_sqr();
            }
        }
    }
    let mut checked = 0;
    for k in 1..bins {
        let f = (k as f64 + 0.5) * width;
        let expected = (-2.0 * std::f64::consts::PI.powi(2) * SIGMA * SIGMA * f * f).exp();
        if expected < 0.1 {
            continue;
        }
        let measured = (pb[k] / pa[k]).sqrt();
        assert!(
            (measured - expected).abs() <= 0.1 * expected,
            "f={f:.4}: {measured:.4} vs {expected:.4}"
        );
        checked += 1;
    }
    assert!(checked >= 4);
}
