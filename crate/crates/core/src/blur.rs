//! Spatially varying Gaussian blur.
//!
//! Each output pixel is a normalized Gaussian average of its neighbourhood
//! with that pixel's own standard deviation, truncated at `ceil(3σ)`. Taps
//! falling outside the image are dropped and the remaining weights
//! renormalized. Pixels with `σ = 0` are copied unchanged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::FieldMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlurMethod {
    /// Full 2-D kernel per pixel.
    Exact,
    /// A horizontal then a vertical 1-D pass, both with the output pixel's
    /// σ. Agrees with [`BlurMethod::Exact`] when σ varies slowly.
    #[default]
    Separable,
}

#[inline]
fn kernel_radius(sigma: f32) -> usize {
    (3.0 * sigma).ceil() as usize
}

/// Unnormalized taps `exp(-d²/2σ²)` for `d = -radius..=radius`, using
/// `q^((d+1)²) = q^(d²) · q^(2d+1)` so only one `exp` is needed.
fn gaussian_weights(sigma: f32, radius: usize, out: &mut Vec<f32>) {
    out.clear();
    out.resize(2 * radius + 1, 0.0);
    let q = (-0.5 / (sigma as f64 * sigma as f64)).exp();
    let q2 = q * q;
    let (mut w, mut step) = (1.0f64, q);
    for d in 0..=radius {
        out[radius + d] = w as f32;
        out[radius - d] = w as f32;
        w *= step;
        step *= q2;
    }
}

/// Blurs each plane with the per-pixel σ map.
pub fn blur_planes(planes: &[&FieldMap], sigma: &FieldMap, method: BlurMethod) -> Result<Vec<FieldMap>> {
    for p in planes {
        p.ensure_same_dims(sigma)?;
    }
    Ok(match method {
        BlurMethod::Exact => exact(planes, sigma),
        BlurMethod::Separable => separable(planes, sigma),
    })
}

pub fn blur(field: &FieldMap, sigma: &FieldMap, method: BlurMethod) -> Result<FieldMap> {
    Ok(blur_planes(&[field], sigma, method)?.pop().expect("one plane"))
}

fn exact(planes: &[&FieldMap], sigma: &FieldMap) -> Vec<FieldMap> {
    let (w, h) = sigma.dims();
    let n = planes.len();
    // Row-major, channel-interleaved output.
    let mut out = vec![0.0f32; w * h * n];
    out.par_chunks_mut(w * n).enumerate().for_each(|(y, row)| {
        let mut weights = Vec::new();
        let mut acc = vec![0.0f32; n];
        for x in 0..w {
            let s = sigma.get(x, y);
            let dst = &mut row[x * n..(x + 1) * n];
            if s <= 0.0 {
                for (c, p) in planes.iter().enumerate() {
                    dst[c] = p.get(x, y);
                }
                continue;
            }
            let r = kernel_radius(s);
            gaussian_weights(s, r, &mut weights);
            let x0 = x as isize - r as isize;
            let y0 = y as isize - r as isize;
            let xs = x0.max(0) as usize;
            let xe = (x + r + 1).min(w);
            let ys = y0.max(0) as usize;
            let ye = (y + r + 1).min(h);
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut norm = 0.0f32;
            for yy in ys..ye {
                let wy = weights[(yy as isize - y0) as usize];
                for (c, p) in planes.iter().enumerate() {
                    let src = &p.row(yy)[xs..xe];
                    let wx = &weights[(xs as isize - x0) as usize..][..src.len()];
                    let line: f32 = src.iter().zip(wx).map(|(v, k)| v * k).sum();
                    acc[c] += wy * line;
                }
                let wsum: f32 = weights[(xs as isize - x0) as usize..][..xe - xs].iter().sum();
                norm += wy * wsum;
            }
            for c in 0..n {
                dst[c] = acc[c] / norm;
            }
        }
    });
    deinterleave(out, w, h, n)
}

fn separable(planes: &[&FieldMap], sigma: &FieldMap) -> Vec<FieldMap> {
    let (w, h) = sigma.dims();
    let n = planes.len();

    let mut horiz = vec![0.0f32; w * h * n];
    horiz.par_chunks_mut(w * n).enumerate().for_each(|(y, row)| {
        let mut weights = Vec::new();
        for x in 0..w {
            let s = sigma.get(x, y);
            let dst = &mut row[x * n..(x + 1) * n];
            if s <= 0.0 {
                for (c, p) in planes.iter().enumerate() {
                    dst[c] = p.get(x, y);
                }
                continue;
            }
            let r = kernel_radius(s);
            gaussian_weights(s, r, &mut weights);
            let x0 = x as isize - r as isize;
            let xs = x0.max(0) as usize;
            let xe = (x + r + 1).min(w);
            let wx = &weights[(xs as isize - x0) as usize..][..xe - xs];
            let norm: f32 = wx.iter().sum();
            for (c, p) in planes.iter().enumerate() {
                let src = &p.row(y)[xs..xe];
                dst[c] = src.iter().zip(wx).map(|(v, k)| v * k).sum::<f32>() / norm;
            }
        }
    });

    let mut out = vec![0.0f32; w * h * n];
    out.par_chunks_mut(w * n).enumerate().for_each(|(y, row)| {
        let mut weights = Vec::new();
        for x in 0..w {
            let s = sigma.get(x, y);
            let dst = &mut row[x * n..(x + 1) * n];
            if s <= 0.0 {
                dst.copy_from_slice(&horiz[(y * w + x) * n..][..n]);
                continue;
            }
            let r = kernel_radius(s);
            gaussian_weights(s, r, &mut weights);
            let y0 = y as isize - r as isize;
            let ys = y0.max(0) as usize;
            let ye = (y + r + 1).min(h);
            let mut norm = 0.0f32;
            dst.iter_mut().for_each(|d| *d = 0.0);
            for yy in ys..ye {
                let k = weights[(yy as isize - y0) as usize];
                norm += k;
                let src = &horiz[(yy * w + x) * n..][..n];
                for c in 0..n {
                    dst[c] += k * src[c];
                }
            }
            dst.iter_mut().for_each(|d| *d /= norm);
        }
    });
    deinterleave(out, w, h, n)
}

fn deinterleave(data: Vec<f32>, w: usize, h: usize, n: usize) -> Vec<FieldMap> {
    (0..n)
        .map(|c| FieldMap::from_vec(w, h, data.iter().skip(c).step_by(n).copied().collect()).expect("dims"))
        .collect()
}
