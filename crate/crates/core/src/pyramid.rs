//! Gaussian, Laplacian, min and max pyramids and the resampling helpers
//! built around them.
//!
//! Level `l` has `ceil(w / 2^l) × ceil(h / 2^l)` samples. A sample at level
//! `l` index `i` is centered on full-resolution coordinate
//! `(i + 0.5) · 2^l − 0.5`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::FieldMap;

/// 5-tap binomial low-pass used for every Gaussian reduction step.
const BINOMIAL: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Below this magnitude log-domain level blending falls back to linear.
pub const LOG_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PyramidKind {
    Gaussian,
    Laplacian,
    Min,
    Max,
}

#[derive(Debug, Clone)]
pub struct Pyramid {
    kind: PyramidKind,
    levels: Vec<FieldMap>,
}

impl Pyramid {
    /// Wraps precomputed levels, checking that each halves the previous.
    pub fn from_levels(kind: PyramidKind, levels: Vec<FieldMap>) -> Result<Self> {
        let Some(base) = levels.first() else {
            return Err(Error::InvalidConfig("pyramid needs at least one level".into()));
        };
        for (l, level) in levels.iter().enumerate() {
            let expected = level_dims(base.width(), base.height(), l);
            if level.dims() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    actual: level.dims(),
                });
            }
        }
        Ok(Self { kind, levels })
    }

    pub fn kind(&self) -> PyramidKind {
        self.kind
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &FieldMap {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[FieldMap] {
        &self.levels
    }

    /// Collapses a Laplacian pyramid back into the image it came from.
    pub fn collapse(&self) -> FieldMap {
        assert_eq!(self.kind, PyramidKind::Laplacian, "only Laplacian pyramids collapse");
        let mut acc = self.levels.last().expect("non-empty pyramid").clone();
        for band in self.levels.iter().rev().skip(1) {
            let up = expand(&acc, band.width(), band.height());
            acc = band.zip_map(&up, |b, u| b + u).expect("same dims");
        }
        acc
    }
}

/// Central frequency in cycles per pixel carried by Laplacian level `l`,
/// halfway (in log frequency) between the level's two cutoffs.
#[inline]
pub fn level_center_frequency(level: f64) -> f64 {
    (-(level + 0.5)).exp2()
}

/// Inverse of [`level_center_frequency`].
#[inline]
pub fn level_for_frequency(freq: f64) -> f64 {
    -freq.log2() - 0.5
}

pub fn level_dims(width: usize, height: usize, level: usize) -> (usize, usize) {
    let f = 1usize << level;
    (width.div_ceil(f), height.div_ceil(f))
}

/// Deepest level count an image of this size supports.
pub fn max_depth(width: usize, height: usize) -> usize {
    let mut depth = 1;
    while (1usize << depth) <= width.min(height) {
        depth += 1;
    }
    depth
}

fn check_depth(img: &FieldMap, levels: usize) -> Result<()> {
    if levels == 0 || levels > max_depth(img.width(), img.height()) {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            levels,
        });
    }
    Ok(())
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Binomial blur followed by 2× decimation.
pub fn reduce(img: &FieldMap) -> FieldMap {
    let (w, h) = img.dims();
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));

    let mut horiz = vec![0.0f32; nw * h];
    horiz.par_chunks_mut(nw).enumerate().for_each(|(y, out)| {
        let row = img.row(y);
        for (i, o) in out.iter_mut().enumerate() {
            let cx = 2 * i as isize;
            *o = (-2..=2)
                .map(|k| BINOMIAL[(k + 2) as usize] * row[reflect(cx + k, w)])
                .sum();
        }
    });

    let mut out = vec![0.0f32; nw * nh];
    out.par_chunks_mut(nw).enumerate().for_each(|(j, dst)| {
        let cy = 2 * j as isize;
        for k in -2..=2isize {
            let wgt = BINOMIAL[(k + 2) as usize];
            let src = &horiz[reflect(cy + k, h) * nw..][..nw];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wgt * s;
            }
        }
    });
    FieldMap::from_vec(nw, nh, out).expect("dims")
}

/// Burt–Adelson expansion of `img` to `width × height` (at most twice its
/// size, rounded up).
pub fn expand(img: &FieldMap, width: usize, height: usize) -> FieldMap {
    let (sw, sh) = img.dims();

    // For output index x, taps k with x - k even read source (x - k) / 2
    // with weight 2 * BINOMIAL[k + 2]. Both parities sum to one.
    let taps = |x: usize, n: usize| -> [(usize, f32); 3] {
        let mut out = [(0usize, 0.0f32); 3];
        let mut m = 0;
        for k in -2..=2isize {
            let t = x as isize - k;
            if t.rem_euclid(2) == 0 {
                out[m] = (reflect(t / 2, n), 2.0 * BINOMIAL[(k + 2) as usize]);
                m += 1;
            }
        }
        out
    };

    let col_taps: Vec<[(usize, f32); 3]> = (0..width).map(|x| taps(x, sw)).collect();
    let mut horiz = vec![0.0f32; width * sh];
    horiz.par_chunks_mut(width).enumerate().for_each(|(y, out)| {
        let row = img.row(y);
        for (o, t) in out.iter_mut().zip(&col_taps) {
            *o = t.iter().map(|&(i, w)| w * row[i]).sum();
        }
    });

    let mut out = vec![0.0f32; width * height];
    out.par_chunks_mut(width).enumerate().for_each(|(y, dst)| {
        for (j, wgt) in taps(y, sh) {
            if wgt == 0.0 {
                continue;
            }
            let src = &horiz[j * width..][..width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wgt * s;
            }
        }
    });
    FieldMap::from_vec(width, height, out).expect("dims")
}

fn extremum_reduce(img: &FieldMap, pick: fn(f32, f32) -> f32) -> FieldMap {
    let (w, h) = img.dims();
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    FieldMap::from_fn(nw, nh, |i, j| {
        let (x0, y0) = (2 * i, 2 * j);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        pick(
            pick(img.get(x0, y0), img.get(x1, y0)),
            pick(img.get(x0, y1), img.get(x1, y1)),
        )
    })
}

/// Builds a pyramid with `levels` levels (level 0 is the source).
pub fn build_pyramid(img: &FieldMap, kind: PyramidKind, levels: usize) -> Result<Pyramid> {
    check_depth(img, levels)?;
    let levels = match kind {
        PyramidKind::Gaussian => gaussian_levels(img, levels),
        PyramidKind::Laplacian => laplacian_from_gaussian(&gaussian_levels(img, levels)),
        PyramidKind::Min => extremum_levels(img, levels, f32::min),
        PyramidKind::Max => extremum_levels(img, levels, f32::max),
    };
    Ok(Pyramid { kind, levels })
}

/// Gaussian and Laplacian pyramids of the same image, sharing the
/// reduction work.
pub fn build_gaussian_laplacian(img: &FieldMap, levels: usize) -> Result<(Pyramid, Pyramid)> {
    check_depth(img, levels)?;
    let gaussian = gaussian_levels(img, levels);
    let laplacian = laplacian_from_gaussian(&gaussian);
    Ok((
        Pyramid {
            kind: PyramidKind::Gaussian,
            levels: gaussian,
        },
        Pyramid {
            kind: PyramidKind::Laplacian,
            levels: laplacian,
        },
    ))
}

fn gaussian_levels(img: &FieldMap, levels: usize) -> Vec<FieldMap> {
    let mut out = Vec::with_capacity(levels);
    out.push(img.clone());
    for l in 1..levels {
        let next = reduce(&out[l - 1]);
        out.push(next);
    }
    out
}

fn laplacian_from_gaussian(gaussian: &[FieldMap]) -> Vec<FieldMap> {
    let depth = gaussian.len();
    let mut out: Vec<FieldMap> = (0..depth - 1)
        .into_par_iter()
        .map(|l| {
            let fine = &gaussian[l];
            let up = expand(&gaussian[l + 1], fine.width(), fine.height());
            fine.zip_map(&up, |a, b| a - b).expect("same dims")
        })
        .collect();
    out.push(gaussian[depth - 1].clone());
    out
}

fn extremum_levels(img: &FieldMap, levels: usize, pick: fn(f32, f32) -> f32) -> Vec<FieldMap> {
    let mut out = Vec::with_capacity(levels);
    out.push(img.clone());
    for l in 1..levels {
        let next = extremum_reduce(&out[l - 1], pick);
        out.push(next);
    }
    out
}

/// Bilinear sample of `|level|` at full-resolution coordinates.
fn sample_abs_level(level: &FieldMap, k: usize, x: f64, y: f64) -> f64 {
    let scale = (1u64 << k) as f64;
    let lx = (x + 0.5) / scale - 0.5;
    let ly = (y + 0.5) / scale - 0.5;

    let lx = lx.clamp(0.0, (level.width() - 1) as f64);
    let ly = ly.clamp(0.0, (level.height() - 1) as f64);
    let x0 = lx.floor() as usize;
    let y0 = ly.floor() as usize;
    let x1 = (x0 + 1).min(level.width() - 1);
    let y1 = (y0 + 1).min(level.height() - 1);
    let tx = lx - x0 as f64;
    let ty = ly - y0 as f64;
    let v = |x, y| level.get(x, y).abs() as f64;
    let top = v(x0, y0) * (1.0 - tx) + v(x1, y0) * tx;
    let bottom = v(x0, y1) * (1.0 - tx) + v(x1, y1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Magnitude of a Laplacian pyramid at a fractional level.
///
/// The two neighbouring integer levels are blended geometrically
/// (linearly in the log domain). If either magnitude is below
/// [`LOG_EPSILON`] the blend is linear instead.
pub fn sample_laplacian_log(pyr: &Pyramid, x: f64, y: f64, level: f64) -> Result<f64> {
    let max = pyr.depth() - 1;
    if !(0.0..=max as f64).contains(&level) {
        return Err(Error::LevelOutOfRange { level, max });
    }
    let lo = level.floor() as usize;
    let t = level - lo as f64;
    let v_lo = sample_abs_level(&pyr.levels[lo], lo, x, y);
    if t == 0.0 {
        return Ok(v_lo);
    }
    let hi = lo + 1;
    let v_hi = sample_abs_level(&pyr.levels[hi], hi, x, y);
    if v_lo < LOG_EPSILON || v_hi < LOG_EPSILON {
        Ok((1.0 - t) * v_lo + t * v_hi)
    } else {
        Ok(((1.0 - t) * v_lo.ln() + t * v_hi.ln()).exp())
    }
}

/// Catmull-Rom weights for fractional offset `t` over samples at
/// `-1, 0, 1, 2`.
#[inline]
fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Sample `i` of `samples`, extrapolated linearly from the two nearest
/// samples outside the valid range.
#[inline]
fn extended(samples: &[f64], i: isize) -> f64 {
    let n = samples.len() as isize;
    if n == 1 {
        return samples[0];
    }
    if i < 0 {
        samples[0] + i as f64 * (samples[1] - samples[0])
    } else if i >= n {
        let last = samples[(n - 1) as usize];
        last + (i - n + 1) as f64 * (last - samples[(n - 2) as usize])
    } else {
        samples[i as usize]
    }
}

#[inline]
fn cubic_1d(samples: &[f64], s: f64) -> f64 {
    let i = s.floor();
    let w = catmull_rom_weights(s - i);
    let i = i as isize;
    (0..4).map(|k| w[k] * extended(samples, i - 1 + k as isize)).sum()
}

/// Catmull-Rom sample at source coordinates (integer coordinates hit
/// samples exactly).
pub fn sample_bicubic(img: &FieldMap, sx: f64, sy: f64) -> f64 {
    let row_vals = |y: isize| -> f64 {
        let y = y.clamp(0, img.height() as isize - 1) as usize;
        let row: Vec<f64> = img.row(y).iter().map(|&v| v as f64).collect();
        cubic_1d(&row, sx)
    };
    let n = img.height() as isize;
    let j = sy.floor();
    let w = catmull_rom_weights(sy - j);
    let j = j as isize;
    let cols: Vec<f64> = (0..n).map(row_vals).collect();
    (0..4).map(|k| w[k] * extended(&cols, j - 1 + k as isize)).sum()
}

/// Upsamples `img` to `width × height` with Catmull-Rom interpolation,
/// aligning pixel centers.
pub fn upsample_bicubic(img: &FieldMap, width: usize, height: usize) -> Result<FieldMap> {
    let (sw, sh) = img.dims();
    if width < sw || height < sh {
        return Err(Error::Downscale {
            from: (sw, sh),
            to: (width, height),
        });
    }
    let sx = sw as f64 / width as f64;
    let sy = sh as f64 / height as f64;

    // Horizontal pass: sh rows of `width` samples.
    let horiz: Vec<Vec<f64>> = (0..sh)
        .into_par_iter()
        .map(|y| {
            let row: Vec<f64> = img.row(y).iter().map(|&v| v as f64).collect();
            (0..width)
                .map(|x| cubic_1d(&row, (x as f64 + 0.5) * sx - 0.5))
                .collect()
        })
        .collect();

    let mut out = vec![0.0f32; width * height];
    out.par_chunks_mut(width).enumerate().for_each(|(y, dst)| {
        let s = (y as f64 + 0.5) * sy - 0.5;
        let j = s.floor();
        let w = catmull_rom_weights(s - j);
        let j = j as isize;
        let rows: [&Vec<f64>; 4] = std::array::from_fn(|k| {
            let idx = (j - 1 + k as isize).clamp(0, sh as isize - 1) as usize;
            &horiz[idx]
        });
        let n = sh as isize;
        for (x, d) in dst.iter_mut().enumerate() {
            // Rows outside the image are linear extrapolations, like `extended`.
            let mut acc = 0.0;
            for k in 0..4 {
                let i = j - 1 + k as isize;
                let v = if n == 1 {
                    rows[k][x]
                } else if i < 0 {
                    let (a, b) = (horiz[0][x], horiz[1][x]);
                    a + i as f64 * (b - a)
                } else if i >= n {
                    let (a, b) = (horiz[(n - 2) as usize][x], horiz[(n - 1) as usize][x]);
                    b + (i - n + 1) as f64 * (b - a)
                } else {
                    rows[k][x]
                };
                acc += w[k] * v;
            }
            *d = acc as f32;
        }
    });
    FieldMap::from_vec(width, height, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::rms_diff;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn textured(w: usize, h: usize, seed: u64) -> FieldMap {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f32> = (0..w * h).map(|_| rng.random::<f32>()).collect();
        FieldMap::from_fn(w, h, |x, y| {
            let (fx, fy) = (x as f32, y as f32);
            0.5 + 0.25 * (fx * 0.07 + fy * 0.03).sin() + 0.1 * ((fx * 0.9).cos() * (fy * 0.4).sin())
                + 0.1 * (noise[y * w + x] - 0.5)
        })
    }

    #[test]
    fn level_dimensions_round_up() {
        let img = FieldMap::new(37, 20);
        let pyr = build_pyramid(&img, PyramidKind::Gaussian, 4).unwrap();
        let dims: Vec<_> = pyr.levels().iter().map(|l| l.dims()).collect();
        assert_eq!(dims, vec![(37, 20), (19, 10), (10, 5), (5, 3)]);
    }

    #[test]
    fn too_deep_is_rejected() {
        let img = FieldMap::new(8, 8);
        assert!(build_pyramid(&img, PyramidKind::Gaussian, 4).is_ok());
        assert!(matches!(
            build_pyramid(&img, PyramidKind::Laplacian, 5),
            Err(Error::ImageTooSmall { .. })
        ));
        assert!(build_pyramid(&img, PyramidKind::Min, 0).is_err());
    }

    #[test]
    fn constant_image() {
        let img = FieldMap::filled(33, 17, 0.37);
        let lap = build_pyramid(&img, PyramidKind::Laplacian, 5).unwrap();
        for level in &lap.levels()[..4] {
            let (lo, hi) = level.min_max();
            assert!(lo.abs() <= 1e-6 && hi.abs() <= 1e-6, "{lo} {hi}");
        }
        for kind in [PyramidKind::Min, PyramidKind::Max] {
            let pyr = build_pyramid(&img, kind, 5).unwrap();
            assert!(pyr.levels().iter().all(|l| l.data().iter().all(|&v| v == 0.37)));
        }
    }

    #[test]
    fn checkerboard_2x2_min_max() {
        let img = FieldMap::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let min = build_pyramid(&img, PyramidKind::Min, 2).unwrap();
        let max = build_pyramid(&img, PyramidKind::Max, 2).unwrap();
        assert_eq!(min.level(1).data(), &[0.0]);
        assert_eq!(max.level(1).data(), &[1.0]);
    }

    #[test]
    fn laplacian_reconstructs() {
        let img = textured(203, 131, 3);
        let lap = build_pyramid(&img, PyramidKind::Laplacian, 6).unwrap();
        let rms = rms_diff(&lap.collapse(), &img).unwrap();
        assert!(rms < 1e-4, "rms {rms}");
    }

    #[test]
    fn extremum_pyramids_bound_covered_pixels() {
        let img = textured(45, 29, 9);
        let min = build_pyramid(&img, PyramidKind::Min, 4).unwrap();
        let max = build_pyramid(&img, PyramidKind::Max, 4).unwrap();
        for l in 0..4 {
            let s = 1usize << l;
            for y in 0..img.height() {
                for x in 0..img.width() {
                    let v = img.get(x, y);
                    assert!(min.level(l).get(x / s, y / s) <= v);
                    assert!(max.level(l).get(x / s, y / s) >= v);
                }
            }
            if l > 0 {
                for y in 0..min.level(l).height() {
                    for x in 0..min.level(l).width() {
                        let fine = min.level(l - 1).get(2 * x, 2 * y);
                        assert!(min.level(l).get(x, y) <= fine);
                        assert!(max.level(l).get(x, y) >= max.level(l - 1).get(2 * x, 2 * y));
                    }
                }
            }
        }
    }

    #[test]
    fn log_sampling() {
        // Levels 1 and 2 hold constants 4 and -16.
        let lap = Pyramid {
            kind: PyramidKind::Laplacian,
            levels: vec![
                FieldMap::filled(8, 8, 1.0),
                FieldMap::filled(4, 4, 4.0),
                FieldMap::filled(2, 2, -16.0),
                FieldMap::filled(1, 1, 0.0),
            ],
        };
        assert_eq!(sample_laplacian_log(&lap, 3.0, 3.0, 1.0).unwrap(), 4.0);
        let mid = sample_laplacian_log(&lap, 3.0, 3.0, 1.5).unwrap();
        assert!((mid - 8.0).abs() < 1e-12, "{mid}");
        // Zero on level 3: linear fallback.
        let guard = sample_laplacian_log(&lap, 3.0, 3.0, 2.25).unwrap();
        assert!((guard - 0.75 * 16.0).abs() < 1e-12);
        assert!(sample_laplacian_log(&lap, 0.0, 0.0, 3.5).is_err());
        assert!(sample_laplacian_log(&lap, 0.0, 0.0, -0.1).is_err());
    }

    #[test]
    fn log_sampling_zero_lower_level() {
        let lap = Pyramid {
            kind: PyramidKind::Laplacian,
            levels: vec![FieldMap::filled(4, 4, 0.0), FieldMap::filled(2, 2, 2.0)],
        };
        let v = sample_laplacian_log(&lap, 1.0, 1.0, 0.3).unwrap();
        assert!((v - 0.3 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn bicubic_constant_and_ramp() {
        let c = FieldMap::filled(7, 5, 0.25);
        let up = upsample_bicubic(&c, 14, 10).unwrap();
        assert!(up.data().iter().all(|&v| (v - 0.25).abs() < 1e-7));

        let ramp = FieldMap::from_fn(8, 6, |x, y| 0.1 * x as f32 + 0.05 * y as f32);
        let up = upsample_bicubic(&ramp, 16, 12).unwrap();
        for y in 0..12 {
            for x in 0..16 {
                let sx = (x as f32 + 0.5) / 2.0 - 0.5;
                let sy = (y as f32 + 0.5) / 2.0 - 0.5;
                assert!((up.get(x, y) - (0.1 * sx + 0.05 * sy)).abs() < 1e-5);
            }
        }
        assert!(upsample_bicubic(&ramp, 4, 12).is_err());
    }

    #[test]
    fn bicubic_exact_at_sources() {
        let img = textured(9, 7, 1);
        for y in 0..7 {
            for x in 0..9 {
                let v = sample_bicubic(&img, x as f64, y as f64);
                assert!((v - img.get(x, y) as f64).abs() < 1e-12);
            }
        }
        // Identity resize reproduces the image.
        let same = upsample_bicubic(&img, 9, 7).unwrap();
        assert!(rms_diff(&same, &img).unwrap() < 1e-7);
    }

    /// Direct-convolution bicubic: sums every (extended) source sample
    /// weighted by the Catmull-Rom kernel evaluated at its distance.
    fn naive_bicubic(img: &FieldMap, tw: usize, th: usize) -> Vec<f64> {
        fn kernel(d: f64) -> f64 {
            let d = d.abs();
            if d < 1.0 {
                1.5 * d * d * d - 2.5 * d * d + 1.0
            } else if d < 2.0 {
                -0.5 * d * d * d + 2.5 * d * d - 4.0 * d + 2.0
            } else {
                0.0
            }
        }
        let (sw, sh) = img.dims();
        let src = |i: isize, j: isize| -> f64 {
            // Linear extension in x, then in y.
            let ext = |n: usize, i: isize, get: &dyn Fn(usize) -> f64| -> f64 {
                let n = n as isize;
                if i < 0 {
                    get(0) + i as f64 * (get(1) - get(0))
                } else if i >= n {
                    get((n - 1) as usize) + (i - n + 1) as f64 * (get((n - 1) as usize) - get((n - 2) as usize))
                } else {
                    get(i as usize)
                }
            };
            let row_val = |y: usize| ext(sw, i, &|x| img.get(x, y) as f64);
            ext(sh, j, &row_val)
        };
        let mut out = Vec::with_capacity(tw * th);
        for y in 0..th {
            let syy = (y as f64 + 0.5) * sh as f64 / th as f64 - 0.5;
            for x in 0..tw {
                let sxx = (x as f64 + 0.5) * sw as f64 / tw as f64 - 0.5;
                let mut acc = 0.0;
                for j in -3..(sh as isize + 3) {
                    for i in -3..(sw as isize + 3) {
                        acc += kernel(sxx - i as f64) * kernel(syy - j as f64) * src(i, j);
                    }
                }
                out.push(acc);
            }
        }
        out
    }

    #[test]
    fn bicubic_matches_direct_convolution() {
        let img = textured(11, 8, 5);
        for (tw, th) in [(22, 16), (31, 19), (11, 8)] {
            let fast = upsample_bicubic(&img, tw, th).unwrap();
            let slow = naive_bicubic(&img, tw, th);
            for (a, b) in fast.data().iter().zip(&slow) {
                assert!((*a as f64 - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    proptest! {
        #[test]
        fn level_frequency_bijection(l in -2.0f64..12.0) {
            let back = level_for_frequency(level_center_frequency(l));
            prop_assert!((back - l).abs() < 1e-12);
            let f = level_center_frequency(l);
            prop_assert!((level_center_frequency(level_for_frequency(f)) - f).abs() < 1e-12 * f.max(1.0));
        }

        #[test]
        fn reconstruction_holds_for_random_sizes(w in 8usize..70, h in 8usize..70, seed in 0u64..1000) {
            let img = textured(w, h, seed);
            let depth = max_depth(w, h).min(5);
            let lap = build_pyramid(&img, PyramidKind::Laplacian, depth).unwrap();
            prop_assert!(rms_diff(&lap.collapse(), &img).unwrap() < 1e-4);
        }
    }

    #[test]
    fn random_image_min_below_max() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let img = FieldMap::from_fn(16, 16, |_, _| rng.random());
        let min = build_pyramid(&img, PyramidKind::Min, 5).unwrap();
        let max = build_pyramid(&img, PyramidKind::Max, 5).unwrap();
        assert_eq!(min.level(4).dims(), (1, 1));
        assert_eq!(min.level(4).get(0, 0), img.min_max().0);
        assert_eq!(max.level(4).get(0, 0), img.min_max().1);
    }
}
