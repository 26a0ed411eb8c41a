//! Spectral and temporal measurements: band energy on eccentricity rings,
//! inter-frame SSIM and sampling-rate ratios.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldMap;
use crate::retina::ViewingSetup;

/// Side of the square patches cut from a ring.
pub const PATCH_SIZE: usize = 128;
/// Patch stride; half the patch size gives 50% overlap.
pub const PATCH_STRIDE: usize = PATCH_SIZE / 2;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// An annulus of eccentricities, `center ± half_width` degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub center: f64,
    pub half_width: f64,
}

impl Ring {
    pub fn new(center: f64, half_width: f64) -> Self {
        Self { center, half_width }
    }

    pub fn contains(&self, e: f64) -> bool {
        (e - self.center).abs() <= self.half_width
    }
}

/// A frequency interval in cycles per degree, half-open `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    #[inline]
    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && f < self.hi
    }
}

/// Top-left corners of the patches whose centers fall on the ring.
pub fn ring_patches(setup: &ViewingSetup, ring: Ring) -> Result<Vec<(usize, usize)>> {
    let (w, h) = (setup.width(), setup.height());
    let outside = Error::RingOutsideImage {
        center: ring.center,
        half_width: ring.half_width,
    };
    if !(ring.half_width > 0.0 && ring.center - ring.half_width >= 0.0) || w < PATCH_SIZE || h < PATCH_SIZE {
        return Err(outside);
    }
    if ring.center + ring.half_width > setup.max_eccentricity() {
        return Err(outside);
    }
    let mut out = Vec::new();
    for y0 in (0..=h - PATCH_SIZE).step_by(PATCH_STRIDE) {
        for x0 in (0..=w - PATCH_SIZE).step_by(PATCH_STRIDE) {
            let (cx, cy) = patch_center(x0, y0);
            if ring.contains(setup.eccentricity_at(cx, cy)) {
                out.push((x0, y0));
            }
        }
    }
    if out.is_empty() {
        return Err(outside);
    }
    Ok(out)
}

fn patch_center(x0: usize, y0: usize) -> (f64, f64) {
    let half = (PATCH_SIZE as f64 - 1.0) / 2.0;
    (x0 as f64 + half, y0 as f64 + half)
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// 2-D forward FFT of a real field, row-major.
pub fn fft2(field: &FieldMap) -> Vec<Complex<f64>> {
    let (w, h) = field.dims();
    let data: Vec<Complex<f64>> = field.data().iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
    fft2_complex(data, w, h)
}

fn fft2_complex(mut data: Vec<Complex<f64>>, w: usize, h: usize) -> Vec<Complex<f64>> {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(w);
    for row in data.chunks_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(h);
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
    data
}

/// Signed FFT frequency of bin `k` out of `n`, cycles per sample.
#[inline]
pub fn fft_frequency(k: usize, n: usize) -> f64 {
    let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    k / n as f64
}

/// Power spectrum of one patch: mean removed, Hann windowed, normalized so
/// the bins sum to the windowed variance. Returns `(radial cycles/px, power)`
/// for every non-DC bin.
fn patch_spectrum(img: &FieldMap, x0: usize, y0: usize, window: &[f64]) -> Vec<(f64, f64)> {
    let n = PATCH_SIZE;
    let patch = img.crop(x0, y0, n, n);
    let mean = patch.mean();
    let mut wsum = 0.0;
    let mut data = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let wv = window[x] * window[y];
            wsum += wv * wv;
            data.push(Complex::new((patch.get(x, y) as f64 - mean) * wv, 0.0));
        }
    }
    let spec = fft2_complex(data, n, n);
    let norm = 1.0 / (wsum * (n * n) as f64);
    let mut out = Vec::with_capacity(n * n - 1);
    for v in 0..n {
        for u in 0..n {
            if u == 0 && v == 0 {
                continue;
            }
            let f = fft_frequency(u, n).hypot(fft_frequency(v, n));
            out.push((f, spec[v * n + u].norm_sqr() * norm));
        }
    }
    out
}

/// Per-patch spectra with frequencies converted to cycles per degree.
fn ring_spectra(img: &FieldMap, setup: &ViewingSetup, ring: Ring) -> Result<Vec<Vec<(f64, f64)>>> {
    if img.dims() != (setup.width(), setup.height()) {
        return Err(Error::DimensionMismatch {
            expected: (setup.width(), setup.height()),
            actual: img.dims(),
        });
    }
    let patches = ring_patches(setup, ring)?;
    let window = hann(PATCH_SIZE);
    Ok(patches
        .par_iter()
        .map(|&(x0, y0)| {
            let (cx, cy) = patch_center(x0, y0);
            let dpp = setup.deg_per_px_at(cx, cy);
            patch_spectrum(img, x0, y0, &window)
                .into_iter()
                .map(|(f, p)| (f / dpp, p))
                .collect()
        })
        .collect())
}

/// Mean over ring patches of the spectral power inside `band`.
pub fn ring_band_energy(img: &FieldMap, setup: &ViewingSetup, ring: Ring, band: Band) -> Result<f64> {
    Ok(ring_band_energies(img, setup, ring, &[band])?[0])
}

/// [`ring_band_energy`] for several bands, sharing the FFTs.
pub fn ring_band_energies(img: &FieldMap, setup: &ViewingSetup, ring: Ring, bands: &[Band]) -> Result<Vec<f64>> {
    let spectra = ring_spectra(img, setup, ring)?;
    let mut out = vec![0.0; bands.len()];
    for spec in &spectra {
        for &(f, p) in spec {
            for (e, b) in out.iter_mut().zip(bands) {
                if b.contains(f) {
                    *e += p;
                }
            }
        }
    }
    let n = spectra.len() as f64;
    Ok(out.into_iter().map(|e| e / n).collect())
}

/// Mean windowed non-DC power over the ring patches.
pub fn ring_total_power(img: &FieldMap, setup: &ViewingSetup, ring: Ring) -> Result<f64> {
    let spectra = ring_spectra(img, setup, ring)?;
    let total: f64 = spectra.iter().flatten().map(|&(_, p)| p).sum();
    Ok(total / spectra.len() as f64)
}

/// Highest radial frequency, in cycles per degree, present in any ring
/// patch (the spectrum corner, `√2 · 0.5` cycles/px).
pub fn ring_max_frequency(setup: &ViewingSetup, ring: Ring) -> Result<f64> {
    let corner = std::f64::consts::SQRT_2 * 0.5;
    Ok(ring_patches(setup, ring)?
        .into_iter()
        .map(|(x0, y0)| {
            let (cx, cy) = patch_center(x0, y0);
            corner / setup.deg_per_px_at(cx, cy)
        })
        .fold(0.0, f64::max))
}

/// Radially averaged power spectrum over the ring, `bins` equal-width bins
/// from 0 to `f_max` cycles per degree. Each value is the mean power of the
/// FFT bins that fall in it.
pub fn ring_radial_spectrum(
    img: &FieldMap,
    setup: &ViewingSetup,
    ring: Ring,
    f_max: f64,
    bins: usize,
) -> Result<Vec<(f64, f64)>> {
    if !(f_max > 0.0) || bins == 0 {
        return Err(Error::InvalidConfig("radial spectrum needs f_max > 0 and bins > 0".into()));
    }
    let spectra = ring_spectra(img, setup, ring)?;
    let width = f_max / bins as f64;
    let mut sum = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for &(f, p) in spectra.iter().flatten() {
        let b = (f / width) as usize;
        if b < bins {
            sum[b] += p;
            count[b] += 1;
        }
    }
    Ok((0..bins)
        .map(|b| {
            let mean = if count[b] > 0 { sum[b] / count[b] as f64 } else { 0.0 };
            ((b as f64 + 0.5) * width, mean)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Reference,
    Foveated,
    Contrast,
    Enhanced,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Reference,
        Condition::Foveated,
        Condition::Contrast,
        Condition::Enhanced,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::Reference => "reference",
            Condition::Foveated => "foveated",
            Condition::Contrast => "contrast",
            Condition::Enhanced => "enhanced",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown condition {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandEnergy {
    pub condition: Condition,
    pub f_lo: f64,
    pub f_hi: f64,
    pub energy: f64,
}

/// Band energies of several versions of one image on one ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub eccentricity_ring: Ring,
    pub bands: Vec<Band>,
    pub energies: Vec<BandEnergy>,
}

impl BandReport {
    pub fn compute(
        images: &[(Condition, &FieldMap)],
        setup: &ViewingSetup,
        ring: Ring,
        bands: Vec<Band>,
    ) -> Result<Self> {
        check_bands(&bands)?;
        let mut energies = Vec::new();
        for &(condition, img) in images {
            let values = ring_band_energies(img, setup, ring, &bands)?;
            energies.extend(bands.iter().zip(values).map(|(b, energy)| BandEnergy {
                condition,
                f_lo: b.lo,
                f_hi: b.hi,
                energy,
            }));
        }
        Ok(Self {
            eccentricity_ring: ring,
            bands,
            energies,
        })
    }

    pub fn energy(&self, condition: Condition, band: usize) -> Option<f64> {
        let b = self.bands.get(band)?;
        self.energies
            .iter()
            .find(|e| e.condition == condition && e.f_lo == b.lo && e.f_hi == b.hi)
            .map(|e| e.energy)
    }

    /// CSV with columns `f_lo, f_hi, condition, energy`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for e in &self.energies {
            wtr.serialize(e)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Bands must be non-empty, non-negative, ordered and non-overlapping.
pub fn check_bands(bands: &[Band]) -> Result<()> {
    for b in bands {
        if !(b.lo >= 0.0 && b.hi > b.lo && b.hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad band [{}, {})", b.lo, b.hi)));
        }
    }
    if bands.windows(2).any(|p| p[1].lo < p[0].hi) {
        return Err(Error::InvalidConfig("bands must be ordered and non-overlapping".into()));
    }
    Ok(())
}

/// Splits `[0, f_max)` into `n` equal bands.
pub fn uniform_bands(f_max: f64, n: usize) -> Vec<Band> {
    let w = f_max / n as f64;
    (0..n).map(|i| Band::new(i as f64 * w, (i + 1) as f64 * w)).collect()
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let k: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable 'valid' filtering: output is `(w - 10) x (h - 10)`.
fn filter_valid(data: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = row[x..x + n].iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| tmp[(y + i) * ow + x] * k[i]).sum();
        }
    }
    out
}

/// Mean SSIM of two images with dynamic range 1.
pub fn ssim(a: &FieldMap, b: &FieldMap) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            levels: 1,
        });
    }
    let k = gaussian_window();
    let x: Vec<f64> = a.data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.data().iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|d| filter_valid(d, w, h, &k));
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

/// Mean SSIM over consecutive frame pairs.
pub fn interframe_ssim(frames: &[&FieldMap]) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::NotEnoughFrames {
            needed: 2,
            got: frames.len(),
        });
    }
    for f in &frames[1..] {
        f.ensure_same_dims(frames[0])?;
    }
    let values: Vec<f64> = frames
        .par_windows(2)
        .map(|p| ssim(p[0], p[1]))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Nyquist sampling rate supported by a Gaussian blur of width `sigma`.
pub fn sampling_rate(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::NoBlur);
    }
    Ok(1.0 / (4.0 * sigma))
}

/// Ratio of net sampling rates at blur rate 2 versus blur rate 1. Blur
/// width is proportional to the blur rate, so this is `rate_1 / rate_2`.
pub fn sampling_rate_ratio(blur_rate_1: f64, blur_rate_2: f64) -> Result<f64> {
    if !(blur_rate_1 > 0.0 && blur_rate_2 > 0.0) || !blur_rate_1.is_finite() || !blur_rate_2.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "blur rates must be positive (got {blur_rate_1}, {blur_rate_2})"
        )));
    }
    Ok(blur_rate_1 / blur_rate_2)
}

/// Strongest non-DC component of a field: `(radial cycles/px, angle in
/// [0, π))`. Angle 0 is a horizontal frequency vector.
pub fn spectral_peak(field: &FieldMap) -> (f64, f64) {
    let (w, h) = field.dims();
    let mean = field.mean();
    let centered = field.map(|v| (v as f64 - mean) as f32);
    let spec = fft2(&centered);
    let mut best = (0.0, 0usize, 0usize);
    for v in 0..h {
        for u in 0..w {
            if u == 0 && v == 0 {
                continue;
            }
            let p = spec[v * w + u].norm_sqr();
            if p > best.0 {
                best = (p, u, v);
            }
        }
    }
    let (fx, fy) = (fft_frequency(best.1, w), fft_frequency(best.2, h));
    let angle = fy.atan2(fx).rem_euclid(std::f64::consts::PI);
    (fx.hypot(fy), angle)
}
