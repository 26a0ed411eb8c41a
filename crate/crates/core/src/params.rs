//! Per-location noise parameters: frequency distribution, amplitude and
//! orientation, plus the calibrated constants that scale them.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldMap;
use crate::pyramid::{self, build_pyramid, upsample_bicubic, Pyramid, PyramidKind};
use crate::retina::DEFAULT_FOVEA_RADIUS_DEG;

/// Attenuation at which the foveation blur is considered to have removed a
/// frequency when picking the pyramid level for amplitude estimation.
pub const DEFAULT_ATTENUATION_CUTOFF: f64 = 0.25;

/// Pyramid level whose min/max values bound the room left for noise, and
/// whose Gaussian level feeds orientation estimation.
pub const NEIGHBORHOOD_LEVEL: usize = 3;

pub const F_E_RANGE: (f64, f64) = (0.0, 0.4);
pub const S_K_RANGE: (f64, f64) = (0.0, 45.0);

const MAX_REJECTIONS: usize = 64;

/// One row of calibrated constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub blur_rate: f64,
    pub f_e: f64,
    pub s_k: f64,
    pub s_f: f64,
}

/// Calibrated constants per foveation strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    rows: Vec<CalibrationRow>,
}

impl Default for CalibrationTable {
    fn default() -> Self {
        let row = |blur_rate, f_e, s_k, s_f| CalibrationRow {
            blur_rate,
            f_e,
            s_k,
            s_f,
        };
        Self {
            rows: vec![
                row(0.11, 0.15, 22.4, 3.45),
                row(0.34, 0.23, 21.02, 2.21),
                row(0.57, 0.28, 18.68, 2.19),
            ],
        }
    }
}

impl CalibrationTable {
    pub fn new(mut rows: Vec<CalibrationRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidConfig("calibration table is empty".into()));
        }
        rows.sort_by(|a, b| a.blur_rate.total_cmp(&b.blur_rate));
        if rows.windows(2).any(|w| w[0].blur_rate == w[1].blur_rate) {
            return Err(Error::InvalidConfig("duplicate blur rate in calibration table".into()));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[CalibrationRow] {
        &self.rows
    }

    /// Constants at `blur_rate`, linear between rows and clamped outside.
    pub fn interpolate(&self, blur_rate: f64) -> CalibrationRow {
        let rows = &self.rows;
        let first = rows[0];
        let last = rows[rows.len() - 1];
        if blur_rate <= first.blur_rate {
            return CalibrationRow { blur_rate, ..first };
        }
        if blur_rate >= last.blur_rate {
            return CalibrationRow { blur_rate, ..last };
        }
        let i = rows.partition_point(|r| r.blur_rate <= blur_rate);
        let (a, b) = (rows[i - 1], rows[i]);
        let t = (blur_rate - a.blur_rate) / (b.blur_rate - a.blur_rate);
        let lerp = |x: f64, y: f64| x + t * (y - x);
        CalibrationRow {
            blur_rate,
            f_e: lerp(a.f_e, b.f_e),
            s_k: lerp(a.s_k, b.s_k),
            s_f: lerp(a.s_f, b.s_f),
        }
    }

    /// Row whose blur rate is closest to `blur_rate`.
    pub fn nearest(&self, blur_rate: f64) -> CalibrationRow {
        *self
            .rows
            .iter()
            .min_by(|a, b| {
                (a.blur_rate - blur_rate)
                    .abs()
                    .total_cmp(&(b.blur_rate - blur_rate).abs())
            })
            .expect("non-empty")
    }
}

/// Everything that controls one enhancement pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnhanceConfig {
    /// Foveation strength in arcmin of blur per degree of eccentricity.
    pub blur_rate: f64,
    /// Contrast enhancement gain.
    pub f_e: f64,
    /// Noise amplitude scale.
    pub s_k: f64,
    /// Noise bandwidth scale.
    pub s_f: f64,
    /// Attenuation cutoff for amplitude level selection.
    pub a: f64,
    pub impulses_per_kernel: u32,
    pub seed: u64,
    pub fovea_radius: f64,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self::for_blur_rate(0.34)
    }
}

impl EnhanceConfig {
    /// Calibrated defaults for a foveation strength.
    pub fn for_blur_rate(blur_rate: f64) -> Self {
        Self::from_table(&CalibrationTable::default(), blur_rate)
    }

    pub fn from_table(table: &CalibrationTable, blur_rate: f64) -> Self {
        let row = table.interpolate(blur_rate);
        Self {
            blur_rate,
            f_e: row.f_e,
            s_k: row.s_k,
            s_f: row.s_f,
            a: DEFAULT_ATTENUATION_CUTOFF,
            impulses_per_kernel: 12,
            seed: 0,
            fovea_radius: DEFAULT_FOVEA_RADIUS_DEG,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.blur_rate >= 0.0 && self.blur_rate.is_finite()) {
            return bad(format!("blur_rate {} must be >= 0", self.blur_rate));
        }
        if !(F_E_RANGE.0..=F_E_RANGE.1).contains(&self.f_e) {
            return bad(format!("f_e {} outside [0, 0.4]", self.f_e));
        }
        if !(S_K_RANGE.0..=S_K_RANGE.1).contains(&self.s_k) {
            return bad(format!("s_k {} outside [0, 45]", self.s_k));
        }
        if !(self.s_f > 0.0 && self.s_f.is_finite()) {
            return bad(format!("s_f {} must be > 0", self.s_f));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return bad(format!("a {} outside (0, 1)", self.a));
        }
        if self.impulses_per_kernel == 0 {
            return bad("impulses_per_kernel must be >= 1".into());
        }
        if !(self.fovea_radius >= 0.0 && self.fovea_radius.is_finite()) {
            return bad(format!("fovea_radius {} must be >= 0", self.fovea_radius));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Truncated log-normal distribution of noise frequencies (cycles per
/// degree) at one location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencySpec {
    /// Mean of the log-frequency.
    pub mu_n: f64,
    /// Standard deviation of the log-frequency.
    pub sigma_n: f64,
    /// Samples must fall strictly below this frequency.
    pub f_high_trunc: f64,
    pub empty: bool,
}

impl FrequencySpec {
    pub const EMPTY: Self = Self {
        mu_n: 0.0,
        sigma_n: 0.0,
        f_high_trunc: 0.0,
        empty: true,
    };
}

/// Log-normal centered (in log frequency) between the band edges, with a
/// spread proportional to the band's log half-width.
pub fn frequency_spec(f_low: f64, f_high: f64, s_f: f64) -> Result<FrequencySpec> {
    if !(f_low > 0.0 && f_high > 0.0) {
        return Err(Error::NonPositiveFrequency {
            low: f_low,
            high: f_high,
        });
    }
    if !f_low.is_finite() {
        return Ok(FrequencySpec::EMPTY);
    }
    let (ln_lo, ln_hi) = (f_low.ln(), f_high.ln());
    let mu_n = 0.5 * (ln_lo + ln_hi);
    let sigma_n = (0.5 * s_f * (mu_n - ln_lo)).max(0.0);
    Ok(FrequencySpec {
        mu_n,
        sigma_n,
        f_high_trunc: f_high,
        empty: f_low >= f_high,
    })
}

/// Draws one frequency in `(0, f_high_trunc)`, resampling values at or above
/// the bound. After 64 rejections the median, nudged below the bound, is
/// returned.
pub fn sample_frequency<R: Rng + ?Sized>(spec: &FrequencySpec, rng: &mut R) -> Result<f64> {
    if spec.empty {
        return Err(Error::EmptyBand);
    }
    let bound = spec.f_high_trunc;
    if spec.sigma_n == 0.0 {
        return Ok(spec.mu_n.exp().min(bound.next_down()));
    }
    for _ in 0..MAX_REJECTIONS {
        let z: f64 = rng.sample(StandardNormal);
        let f = (spec.mu_n + spec.sigma_n * z).exp();
        if f > 0.0 && f < bound {
            return Ok(f);
        }
    }
    Ok(spec.mu_n.exp().min(bound.next_down()))
}

/// Frequency (cycles per pixel) above which the foveation blur of width
/// `sigma` pixels is taken to have removed content.
pub fn cutoff_frequency(sigma: f64, a: f64) -> f64 {
    (-a.ln() / (PI * sigma)).sqrt()
}

/// Unclamped fractional Laplacian level whose central frequency equals
/// [`cutoff_frequency`].
pub fn cutoff_level_raw(sigma: f64, a: f64) -> f64 {
    (-PI * sigma / a.ln()).sqrt().log2() - 0.5
}

/// Pyramid level carrying the highest reliable frequencies, clamped to the
/// pyramid `depth`.
pub fn cutoff_level(sigma: f64, a: f64, depth: usize) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidConfig(format!("attenuation cutoff {a} outside (0, 1)")));
    }
    if !(sigma > 0.0) {
        return Err(Error::NoBlur);
    }
    Ok(cutoff_level_raw(sigma, a).clamp(0.0, depth.saturating_sub(1) as f64))
}

/// Noise amplitude per pixel: `s_k` times the Laplacian magnitude at the
/// cutoff level. Zero wherever there is no blur.
pub fn amplitude_field(lap: &Pyramid, sigma_map: &FieldMap, s_k: f64, a: f64) -> Result<FieldMap> {
    if lap.kind() != PyramidKind::Laplacian {
        return Err(Error::InvalidConfig("amplitude needs a Laplacian pyramid".into()));
    }
    lap.level(0).ensure_same_dims(sigma_map)?;
    let (w, h) = sigma_map.dims();
    let depth = lap.depth();
    let mut out = vec![0.0f32; w * h];
    out.par_chunks_mut(w)
        .enumerate()
        .try_for_each(|(y, row)| -> Result<()> {
            for (x, k) in row.iter_mut().enumerate() {
                let sigma = sigma_map.get(x, y) as f64;
                if sigma <= 0.0 {
                    continue;
                }
                let level = cutoff_level(sigma, a, depth)?;
                let mag = pyramid::sample_laplacian_log(lap, x as f64, y as f64, level)?;
                *k = (s_k * mag) as f32;
            }
            Ok(())
        })?;
    FieldMap::from_vec(w, h, out)
}

/// Room left for symmetric noise above `min_img` and below `1 - max_img`,
/// taken from the extremum pyramids at `level`.
pub fn available_range(min_img: &FieldMap, max_img: &FieldMap, level: usize) -> Result<FieldMap> {
    min_img.ensure_same_dims(max_img)?;
    let depth = level + 1;
    let mins = build_pyramid(min_img, PyramidKind::Min, depth)?;
    let maxs = build_pyramid(max_img, PyramidKind::Max, depth)?;
    let (nmin, nmax) = (mins.level(level), maxs.level(level));
    let s = 1usize << level;
    Ok(FieldMap::from_fn(min_img.width(), min_img.height(), |x, y| {
        let (cx, cy) = (x / s, y / s);
        (1.0 - nmax.get(cx, cy)).min(nmin.get(cx, cy)).max(0.0)
    }))
}

/// Caps amplitudes so noise of that amplitude stays inside `[0, 1]` around
/// the image it will be added to.
pub fn attenuate_for_clipping(k: &FieldMap, base_img: &FieldMap, level: usize) -> Result<FieldMap> {
    attenuate_for_clipping_range(k, base_img, base_img, level)
}

/// Like [`attenuate_for_clipping`] for a color image, given its per-pixel
/// channel minimum and maximum.
pub fn attenuate_for_clipping_range(
    k: &FieldMap,
    min_img: &FieldMap,
    max_img: &FieldMap,
    level: usize,
) -> Result<FieldMap> {
    let avail = available_range(min_img, max_img, level)?;
    k.zip_map(&avail, |k, room| k.min(room).max(0.0))
}

/// Folds an angle into `[0, π)`.
#[inline]
pub fn fold_orientation(w: f64) -> f64 {
    let w = w.rem_euclid(PI);
    if w >= PI {
        0.0
    } else {
        w
    }
}

/// Double-angle encoding, continuous across the 0/π wrap.
#[inline]
pub fn encode_orientation(w: f64) -> (f64, f64) {
    ((2.0 * w).cos(), (2.0 * w).sin())
}

#[inline]
pub fn decode_orientation(c: f64, s: f64) -> f64 {
    if c * c + s * s < 1e-12 {
        return 0.0;
    }
    fold_orientation(0.5 * s.atan2(c))
}

/// Sobel gradient direction at one level of a Gaussian pyramid,
/// interpolated back to full resolution.
pub fn orientation_from_gaussian(gauss: &Pyramid, level: usize, width: usize, height: usize) -> Result<FieldMap> {
    let level = level.min(gauss.depth() - 1);
    let img = gauss.level(level);
    let (w, h) = img.dims();
    let mut cos2 = FieldMap::new(w, h);
    let mut sin2 = FieldMap::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let p = |dx: isize, dy: isize| img.get_clamped(x as isize + dx, y as isize + dy) as f64;
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            if gx.hypot(gy) < 1e-12 {
                continue;
            }
            let (c, s) = encode_orientation(fold_orientation(gy.atan2(gx)));
            cos2.set(x, y, c as f32);
            sin2.set(x, y, s as f32);
        }
    }
    let cos2 = upsample_bicubic(&cos2, width, height)?;
    let sin2 = upsample_bicubic(&sin2, width, height)?;
    cos2.zip_map(&sin2, |c, s| decode_orientation(c as f64, s as f64) as f32)
}

/// Orientation (radians in `[0, π)`) of the dominant luminance gradient
/// around each pixel, estimated on a coarse pyramid level.
pub fn orientation_field(lum: &FieldMap) -> Result<FieldMap> {
    let depth = pyramid::max_depth(lum.width(), lum.height()).min(NEIGHBORHOOD_LEVEL + 1);
    let gauss = build_pyramid(lum, PyramidKind::Gaussian, depth)?;
    orientation_from_gaussian(&gauss, NEIGHBORHOOD_LEVEL, lum.width(), lum.height())
}
