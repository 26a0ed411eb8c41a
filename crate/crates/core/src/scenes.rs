//! Procedural test scenes with natural-image statistics: a `1/f` amplitude
//! spectrum plus hard edges, gratings and smooth color variation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::field::FieldMap;
use crate::frame::Frame;

/// Zero-mean, unit-variance noise with amplitude spectrum `1/f^beta`.
pub fn pink_noise(width: usize, height: usize, beta: f64, seed: u64) -> FieldMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width, height);
    let mut data: Vec<Complex<f64>> = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let fx = crate::analysis::fft_frequency(u, w);
            let fy = crate::analysis::fft_frequency(v, h);
            let f = fx.hypot(fy);
            let amp = if f == 0.0 { 0.0 } else { f.powf(-beta) };
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            data.push(Complex::from_polar(amp, phase));
        }
    }
    let mut planner = FftPlanner::new();
    let row = planner.plan_fft_inverse(w);
    for r in data.chunks_mut(w) {
        row.process(r);
    }
    let col_fft = planner.plan_fft_inverse(h);
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
    // The real part of a random-phase spectrum is a valid real field.
    let re: Vec<f64> = data.iter().map(|c| c.re).collect();
    let mean = re.iter().sum::<f64>() / re.len() as f64;
    let var = re.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / re.len() as f64;
    let sd = var.sqrt().max(1e-30);
    FieldMap::from_vec(w, h, re.iter().map(|v| ((v - mean) / sd) as f32).collect()).expect("dims")
}

/// One scene. Different seeds give different layouts.
pub fn natural_scene(width: usize, height: usize, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5CE4E);
    let base = pink_noise(width, height, 1.0, seed);
    let tint = pink_noise(width, height, 1.6, seed.wrapping_add(1));
    let mut lum = base.map(|v| 0.45 + 0.11 * v);

    // Flat-shaded regions with hard boundaries.
    for _ in 0..6 {
        let cx = rng.random::<f64>() * width as f64;
        let cy = rng.random::<f64>() * height as f64;
        let rx = (0.05 + 0.2 * rng.random::<f64>()) * width as f64;
        let ry = (0.1 + 0.3 * rng.random::<f64>()) * height as f64;
        let level = 0.2 + 0.5 * rng.random::<f32>();
        let square = rng.random::<bool>();
        for y in 0..height {
            for x in 0..width {
                let dx = (x as f64 - cx) / rx;
                let dy = (y as f64 - cy) / ry;
                let inside = if square { dx.abs().max(dy.abs()) < 1.0 } else { dx * dx + dy * dy < 1.0 };
                if inside {
                    let v = lum.get(x, y);
                    lum.set(x, y, 0.4 * v + 0.6 * level + 0.4 * (v - 0.45));
                }
            }
        }
    }

    // A patch of fine grating.
    let gx = rng.random::<f64>() * width as f64;
    let gy = rng.random::<f64>() * height as f64;
    let gr = 0.15 * width.min(height) as f64 + 0.1 * rng.random::<f64>() * width as f64;
    let gf = 0.08 + 0.2 * rng.random::<f64>();
    let ga = rng.random::<f64>() * std::f64::consts::PI;
    for y in 0..height {
        for x in 0..width {
            let (dx, dy) = (x as f64 - gx, y as f64 - gy);
            if dx.hypot(dy) < gr {
                let t = dx * ga.cos() + dy * ga.sin();
                let g = 0.08 * (std::f64::consts::TAU * gf * t).sin();
                lum.set(x, y, lum.get(x, y) + g as f32);
            }
        }
    }

    let hue: [f32; 3] = std::array::from_fn(|_| 0.85 + 0.3 * rng.random::<f32>());
    let rgb = lum
        .data()
        .iter()
        .zip(tint.data())
        .map(|(&l, &t)| {
            let l = l.clamp(0.02, 0.98);
            [
                (l * hue[0] * (1.0 + 0.08 * t)).clamp(0.0, 1.0),
                (l * hue[1]).clamp(0.0, 1.0),
                (l * hue[2] * (1.0 - 0.08 * t)).clamp(0.0, 1.0),
            ]
        })
        .collect();
    Frame::new(width, height, rgb).expect("values clamped")
}

/// Five scenes with fixed seeds.
pub fn corpus(width: usize, height: usize) -> Vec<Frame> {
    [11u64, 23, 37, 41, 59]
        .iter()
        .map(|&s| natural_scene(width, height, s))
        .collect()
}

/// Horizontal pan across a wider scene, `speed` pixels per frame.
pub fn panning_sequence(width: usize, height: usize, frames: usize, speed: usize, seed: u64) -> Vec<Frame> {
    let wide = natural_scene(width + speed * frames.saturating_sub(1), height, seed);
    (0..frames)
        .map(|i| {
            let x0 = i * speed;
            let rgb = (0..height)
                .flat_map(|y| (0..width).map(move |x| (x, y)))
                .map(|(x, y)| wide.pixel(x0 + x, y))
                .collect();
            Frame::new(width, height, rgb).expect("crop")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pink_noise_is_normalized_and_deterministic() {
        let a = pink_noise(64, 48, 1.0, 3);
        assert!(a.mean().abs() < 1e-5);
        let var = a.data().iter().map(|v| (*v as f64).powi(2)).sum::<f64>() / a.data().len() as f64;
        assert!((var - 1.0).abs() < 1e-4);
        assert_eq!(a, pink_noise(64, 48, 1.0, 3));
        assert_ne!(a, pink_noise(64, 48, 1.0, 4));
    }

    #[test]
    fn pink_noise_spectrum_falls_off() {
        let n = pink_noise(128, 128, 1.0, 9);
        let spec = crate::analysis::fft2(&n);
        let power = |f: f64| {
            let mut s = 0.0;
            let mut c = 0;
            for v in 0..128 {
                for u in 0..128 {
                    let r = crate::analysis::fft_frequency(u, 128).hypot(crate::analysis::fft_frequency(v, 128));
                    if (r - f).abs() < 0.01 {
                        s += spec[v * 128 + u].norm_sqr();
                        c += 1;
                    }
                }
            }
            s / c as f64
        };
        // Power ~ 1/f^2: doubling f quarters the power.
        let ratio = power(0.1) / power(0.2);
        assert!((3.0..5.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn scenes_differ_and_pan_shifts() {
        let c = corpus(96, 64);
        assert_eq!(c.len(), 5);
        assert_ne!(c[0], c[1]);
        let seq = panning_sequence(80, 40, 4, 3, 5);
        assert_eq!(seq.len(), 4);
        assert_eq!(seq[1].pixel(0, 10), seq[0].pixel(3, 10));
        assert_eq!(seq[3].pixel(5, 7), seq[2].pixel(8, 7));
    }
}
