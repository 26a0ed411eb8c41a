//! Viewing geometry and peripheral acuity.
//!
//! Pixel coordinates address pixel centers: pixel `(i, j)` sits at `(i, j)`.
//! The eye looks perpendicularly at the screen plane through the gaze point,
//! so eccentricity is the exact angle between the two rays rather than a
//! small-angle approximation. Angular sizes of pixels are evaluated locally,
//! which matters at wide fields of view where pixels near the edge subtend
//! noticeably less than pixels at the gaze point.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldMap;

/// Highest frequency a display can reproduce, in cycles per pixel.
pub const DISPLAY_NYQUIST: f64 = 0.5;

/// Radius of the full-resolution region around the gaze point.
pub const DEFAULT_FOVEA_RADIUS_DEG: f64 = 8.0;

/// Display geometry plus the gaze position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewingSetup {
    /// Width and height in pixels.
    pub resolution: [usize; 2],
    /// Physical width and height of the visible area in meters.
    pub size_m: [f64; 2],
    pub distance_m: f64,
    /// Gaze position in (sub-)pixel coordinates.
    pub gaze: [f64; 2],
}

impl ViewingSetup {
    pub fn new(resolution: [usize; 2], size_m: [f64; 2], distance_m: f64, gaze: [f64; 2]) -> Result<Self> {
        let setup = Self {
            resolution,
            size_m,
            distance_m,
            gaze,
        };
        setup.validate()?;
        Ok(setup)
    }

    /// 55" 16:9 4K panel viewed from 71.5 cm, gaze at the screen center.
    pub fn reference_display() -> Self {
        let width = 55.0 * 0.0254 * 16.0 / (16.0f64 * 16.0 + 9.0 * 9.0).sqrt();
        let height = width * 9.0 / 16.0;
        Self::centered([3840, 2160], [width, height], 0.715)
    }

    /// Setup with the gaze on the center of the image.
    pub fn centered(resolution: [usize; 2], size_m: [f64; 2], distance_m: f64) -> Self {
        Self {
            resolution,
            size_m,
            distance_m,
            gaze: [
                (resolution[0] as f64 - 1.0) / 2.0,
                (resolution[1] as f64 - 1.0) / 2.0,
            ],
        }
    }

    /// A window of `resolution` pixels cut from the reference display: same
    /// pixel pitch and viewing distance, gaze at `gaze`.
    pub fn reference_pitch(resolution: [usize; 2], gaze: [f64; 2]) -> Self {
        let reference = Self::reference_display();
        let pitch = reference.pixel_pitch();
        Self {
            resolution,
            size_m: [resolution[0] as f64 * pitch[0], resolution[1] as f64 * pitch[1]],
            distance_m: reference.distance_m,
            gaze,
        }
    }

    /// Same physical screen sampled at a different resolution. The gaze
    /// keeps its relative position.
    pub fn rescaled(&self, resolution: [usize; 2]) -> Self {
        let sx = resolution[0] as f64 / self.resolution[0] as f64;
        let sy = resolution[1] as f64 / self.resolution[1] as f64;
        Self {
            resolution,
            size_m: self.size_m,
            distance_m: self.distance_m,
            gaze: [
                (self.gaze[0] + 0.5) * sx - 0.5,
                (self.gaze[1] + 0.5) * sy - 0.5,
            ],
        }
    }

    pub fn with_gaze(mut self, gaze: [f64; 2]) -> Self {
        self.gaze = gaze;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let [w, h] = self.resolution;
        if w == 0 || h == 0 {
            return Err(Error::InvalidSetup("resolution must be positive".into()));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.size_m[0]) || !positive(self.size_m[1]) {
            return Err(Error::InvalidSetup("physical size must be positive".into()));
        }
        if !positive(self.distance_m) {
            return Err(Error::InvalidSetup("viewing distance must be positive".into()));
        }
        let [gx, gy] = self.gaze;
        let inside = |v: f64, n: usize| v.is_finite() && v >= -0.5 && v <= n as f64 - 0.5;
        if !inside(gx, w) || !inside(gy, h) {
            return Err(Error::InvalidSetup(format!(
                "gaze ({gx}, {gy}) outside the {w}x{h} image"
            )));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let setup: Self = serde_json::from_str(&text)?;
        setup.validate()?;
        Ok(setup)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.resolution[0]
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.resolution[1]
    }

    /// Meters per pixel horizontally and vertically.
    pub fn pixel_pitch(&self) -> [f64; 2] {
        [
            self.size_m[0] / self.resolution[0] as f64,
            self.size_m[1] / self.resolution[1] as f64,
        ]
    }

    /// Distance on the screen plane from the gaze point, in meters.
    #[inline]
    fn screen_radius(&self, x: f64, y: f64) -> f64 {
        let [px, py] = self.pixel_pitch();
        let dx = (x - self.gaze[0]) * px;
        let dy = (y - self.gaze[1]) * py;
        dx.hypot(dy)
    }

    /// Eccentricity of a point in degrees.
    pub fn eccentricity_at(&self, x: f64, y: f64) -> f64 {
        (self.screen_radius(x, y) / self.distance_m).atan().to_degrees()
    }

    /// Local angular size of one pixel in degrees.
    ///
    /// A flat screen shrinks pixels radially by `D/(D²+r²)` and tangentially
    /// by `1/sqrt(D²+r²)`; the returned value is the geometric mean of the
    /// two, i.e. the square root of the solid angle a pixel subtends.
    pub fn deg_per_px_at(&self, x: f64, y: f64) -> f64 {
        let d = self.distance_m;
        let r = self.screen_radius(x, y);
        let q = d * d + r * r;
        let radial = d / q;
        let tangential = 1.0 / q.sqrt();
        let [px, py] = self.pixel_pitch();
        ((px * py).sqrt() * (radial * tangential).sqrt()).to_degrees()
    }

    /// Horizontal field of view covered by the image.
    pub fn horizontal_fov_deg(&self) -> f64 {
        let [px, _] = self.pixel_pitch();
        let left = (self.gaze[0] + 0.5) * px;
        let right = (self.resolution[0] as f64 - 0.5 - self.gaze[0]) * px;
        (left / self.distance_m).atan().to_degrees() + (right / self.distance_m).atan().to_degrees()
    }

    /// Largest eccentricity present anywhere in the image.
    pub fn max_eccentricity(&self) -> f64 {
        let (w, h) = (self.width() as f64 - 1.0, self.height() as f64 - 1.0);
        [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
            .into_iter()
            .map(|(x, y)| self.eccentricity_at(x, y))
            .fold(0.0, f64::max)
    }
}

fn per_pixel_map(setup: &ViewingSetup, f: impl Fn(f64, f64) -> f64 + Sync) -> FieldMap {
    let (w, h) = (setup.width(), setup.height());
    let mut data = vec![0.0f32; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, v) in row.iter_mut().enumerate() {
            *v = f(x as f64, y as f64) as f32;
        }
    });
    FieldMap::from_vec(w, h, data).expect("dimensions match by construction")
}

/// Eccentricity of every pixel, in degrees.
pub fn eccentricity_map(setup: &ViewingSetup) -> FieldMap {
    per_pixel_map(setup, |x, y| setup.eccentricity_at(x, y))
}

/// Local degrees per pixel for every pixel.
pub fn deg_per_px_map(setup: &ViewingSetup) -> FieldMap {
    per_pixel_map(setup, |x, y| setup.deg_per_px_at(x, y))
}

/// Foveation blur width at eccentricity `e` in arcminutes: grows linearly
/// with `blur_rate` arcmin per degree beyond the fovea.
#[inline]
pub fn blur_sigma_arcmin(e_deg: f64, blur_rate: f64, fovea_radius: f64) -> f64 {
    blur_rate * (e_deg - fovea_radius).max(0.0)
}

/// Standard deviation of the simulated foveation blur at every pixel, in
/// pixels. Zero inside the fovea.
pub fn sigma_map(setup: &ViewingSetup, blur_rate: f64, fovea_radius: f64) -> FieldMap {
    per_pixel_map(setup, |x, y| {
        let e = setup.eccentricity_at(x, y);
        let arcmin = blur_sigma_arcmin(e, blur_rate, fovea_radius);
        if arcmin <= 0.0 {
            0.0
        } else {
            arcmin / 60.0 / setup.deg_per_px_at(x, y)
        }
    })
}

/// Resolution (`t_low`) and detection (`t_high`) acuity in cycles per
/// degree, tabulated against eccentricity.
#[derive(Debug, Clone, PartialEq)]
pub struct AcuityLimits {
    eccentricity: Vec<f64>,
    t_low: Vec<f64>,
    t_high: Vec<f64>,
}

impl Default for AcuityLimits {
    /// Nasal-field measurements at 0..30 degrees in 5 degree steps.
    fn default() -> Self {
        Self {
            eccentricity: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            t_low: vec![60.0, 27.0, 10.5, 8.0, 5.5, 4.8, 4.0],
            t_high: vec![60.0, 40.0, 26.0, 24.0, 23.0, 21.0, 20.5],
        }
    }
}

#[derive(Debug, Deserialize)]
struct AcuityRow {
    eccentricity: f64,
    t_low: f64,
    t_high: f64,
}

impl AcuityLimits {
    pub fn new(eccentricity: Vec<f64>, t_low: Vec<f64>, t_high: Vec<f64>) -> Result<Self> {
        let invalid = |msg: &str| Err(Error::InvalidConfig(format!("acuity table: {msg}")));
        if eccentricity.is_empty() || eccentricity.len() != t_low.len() || eccentricity.len() != t_high.len() {
            return invalid("columns must be non-empty and equally long");
        }
        if eccentricity[0] != 0.0 {
            return invalid("first knot must be at 0 degrees");
        }
        if eccentricity.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("knots must be strictly increasing");
        }
        if t_low.iter().zip(&t_high).any(|(l, h)| !(*l > 0.0 && l <= h)) {
            return invalid("need 0 < t_low <= t_high at every knot");
        }
        if t_low[0] != t_high[0] {
            return invalid("limits must coincide at the fovea");
        }
        Ok(Self {
            eccentricity,
            t_low,
            t_high,
        })
    }

    /// Reads `eccentricity,t_low,t_high` rows with a header line.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut e = Vec::new();
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for row in reader.deserialize() {
            let row: AcuityRow = row?;
            e.push(row.eccentricity);
            lo.push(row.t_low);
            hi.push(row.t_high);
        }
        Self::new(e, lo, hi)
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.eccentricity
            .iter()
            .zip(&self.t_low)
            .zip(&self.t_high)
            .map(|((&e, &l), &h)| (e, l, h))
    }

    /// `(T_L, T_H)` at eccentricity `e` by piecewise-linear interpolation.
    /// Past the last knot the last row is used.
    pub fn limits(&self, e: f64) -> Result<(f64, f64)> {
        if e < 0.0 || e.is_nan() {
            return Err(Error::NegativeEccentricity(e));
        }
        let knots = &self.eccentricity;
        let last = knots.len() - 1;
        if e >= knots[last] {
            return Ok((self.t_low[last], self.t_high[last]));
        }
        // First knot strictly above e; e >= knots[0] = 0 so i >= 1.
        let i = knots.partition_point(|&k| k <= e);
        let t = (e - knots[i - 1]) / (knots[i] - knots[i - 1]);
        let lerp = |v: &[f64]| v[i - 1] + t * (v[i] - v[i - 1]);
        Ok((lerp(&self.t_low), lerp(&self.t_high)))
    }
}

/// Shorthand for [`AcuityLimits::limits`].
pub fn thibos_limits(limits: &AcuityLimits, e: f64) -> Result<(f64, f64)> {
    limits.limits(e)
}

/// Frequency range the noise may occupy at one location, in cycles per
/// degree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBand {
    pub low: f64,
    pub high: f64,
}

impl NoiseBand {
    #[inline]
    pub fn is_empty(&self) -> bool {
        !(self.low < self.high)
    }
}

/// Bounds the noise band by perception and by what the foveated image and
/// the display can carry.
///
/// The lower edge is the larger of the resolution limit and the blur cutoff
/// `3/(2πσ)` (three standard deviations of the blur's frequency response).
/// The upper edge is the smaller of the detection limit and `f_display`.
/// `sigma_px == 0` yields an empty band.
pub fn noise_band(t_low: f64, t_high: f64, sigma_px: f64, deg_per_px: f64, f_display: f64) -> NoiseBand {
    let blur_cutoff_cpd = if sigma_px > 0.0 {
        3.0 / (2.0 * std::f64::consts::PI * sigma_px) / deg_per_px
    } else {
        f64::INFINITY
    };
    NoiseBand {
        low: t_low.max(blur_cutoff_cpd),
        high: t_high.min(f_display / deg_per_px),
    }
}
