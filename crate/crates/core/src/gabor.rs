//! Sparse Gabor convolution noise.
//!
//! Impulses live in a regular grid of square cells, one kernel radius wide.
//! Each cell draws its impulses from its own random stream, seeded by the
//! global seed and the cell index, so the impulse set does not depend on
//! evaluation order and stays fixed for a whole sequence. Every impulse
//! carries its own frequency, amplitude and orientation and contributes one
//! truncated Gabor kernel.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::field::FieldMap;

/// Gaussian envelope width in the frequency domain, cycles per pixel.
pub const DEFAULT_BANDWIDTH: f64 = 0.06;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborGrid {
    pub cell_size_px: usize,
    pub kernel_radius_px: usize,
    pub bandwidth_a: f64,
    pub impulses_per_kernel: u32,
    pub seed: u64,
}

impl GaborGrid {
    pub fn new(impulses_per_kernel: u32, seed: u64) -> Self {
        Self::with_bandwidth(DEFAULT_BANDWIDTH, impulses_per_kernel, seed)
    }

    pub fn with_bandwidth(bandwidth_a: f64, impulses_per_kernel: u32, seed: u64) -> Self {
        let radius = (1.0 / bandwidth_a).ceil() as usize;
        Self {
            cell_size_px: radius,
            kernel_radius_px: radius,
            bandwidth_a,
            impulses_per_kernel,
            seed,
        }
    }

    /// Impulses per cell: the kernel density scaled from the kernel's disc
    /// to the cell's area, rounded, and at least one.
    pub fn impulses_per_cell(&self) -> usize {
        let cell_area = (self.cell_size_px * self.cell_size_px) as f64;
        let kernel_area = PI * (self.kernel_radius_px * self.kernel_radius_px) as f64;
        ((self.impulses_per_kernel as f64 * cell_area / kernel_area).round() as usize).max(1)
    }
}

/// Gabor kernel: Gaussian envelope of bandwidth `a` times a cosine of
/// frequency `f0` along direction `omega`. Zero beyond radius `1/a`.
pub fn kernel_eval(f0: f64, omega: f64, a: f64, dx: f64, dy: f64) -> f64 {
    let r2 = dx * dx + dy * dy;
    let radius = (1.0 / a).ceil();
    if r2 > radius * radius {
        return 0.0;
    }
    (-PI * a * a * r2).exp() * (2.0 * PI * f0 * (dx * omega.cos() + dy * omega.sin())).cos()
}

/// A random impulse before any Gabor parameters are attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpulseSite {
    pub cell: (i32, i32),
    pub x: f64,
    pub y: f64,
    /// Uniform in `[-1, 1]`.
    pub weight: f64,
    /// Seed for any further per-impulse randomness.
    pub stream: u64,
}

/// Gabor parameters assigned to one impulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborParams {
    /// Cycles per pixel, in `(0, 0.5]`.
    pub frequency: f64,
    pub amplitude: f64,
    /// Radians.
    pub orientation: f64,
}

/// An impulse with its Gabor parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Impulse {
    pub cell_x: i32,
    pub cell_y: i32,
    pub x: f64,
    pub y: f64,
    pub weight: f64,
    pub frequency: f64,
    pub amplitude: f64,
    pub orientation: f64,
}

/// All impulse sites covering an image, including a one-cell margin so that
/// pixels near the border receive contributions from every side.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseLattice {
    grid: GaborGrid,
    /// Index of the first cell column/row (always -1).
    origin: i32,
    cells_x: usize,
    cells_y: usize,
    cells: Vec<Vec<ImpulseSite>>,
}

impl ImpulseLattice {
    pub fn grid(&self) -> &GaborGrid {
        &self.grid
    }

    pub fn cells_x(&self) -> usize {
        self.cells_x
    }

    pub fn cells_y(&self) -> usize {
        self.cells_y
    }

    pub fn cell(&self, cx: i32, cy: i32) -> &[ImpulseSite] {
        let i = (cx - self.origin) as usize;
        let j = (cy - self.origin) as usize;
        &self.cells[j * self.cells_x + i]
    }

    pub fn sites(&self) -> impl Iterator<Item = &ImpulseSite> {
        self.cells.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of the random stream owned by cell `(cx, cy)`.
pub fn cell_seed(seed: u64, cx: i32, cy: i32) -> u64 {
    let h = splitmix64(seed);
    let h = splitmix64(h ^ (cx as i64 as u64).wrapping_mul(0x9e37_79b1_85eb_ca87));
    splitmix64(h ^ (cy as i64 as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f))
}

/// Draws the impulse sites for an image of `width × height` pixels.
pub fn generate_impulses(grid: &GaborGrid, width: usize, height: usize) -> ImpulseLattice {
    let cs = grid.cell_size_px;
    let origin = -1i32;
    let cells_x = width.div_ceil(cs) + 2;
    let cells_y = height.div_ceil(cs) + 2;
    let per_cell = grid.impulses_per_cell();
    let cells = (0..cells_x * cells_y)
        .into_par_iter()
        .map(|i| {
            let cx = origin + (i % cells_x) as i32;
            let cy = origin + (i / cells_x) as i32;
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(grid.seed, cx, cy));
            (0..per_cell)
                .map(|_| {
                    let u: f64 = rng.random();
                    let v: f64 = rng.random();
                    ImpulseSite {
                        cell: (cx, cy),
                        x: (cx as f64 + u) * cs as f64,
                        y: (cy as f64 + v) * cs as f64,
                        weight: rng.random_range(-1.0..=1.0),
                        stream: rng.next_u64(),
                    }
                })
                .collect()
        })
        .collect();
    ImpulseLattice {
        grid: *grid,
        origin,
        cells_x,
        cells_y,
        cells,
    }
}

/// Supplies Gabor parameters for an impulse site. `None` mutes the impulse.
pub trait ImpulseParams: Sync {
    fn params(&self, site: &ImpulseSite) -> Option<GaborParams>;
}

/// Same parameters everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantParams(pub GaborParams);

impl ImpulseParams for ConstantParams {
    fn params(&self, _site: &ImpulseSite) -> Option<GaborParams> {
        Some(self.0)
    }
}

impl<F> ImpulseParams for F
where
    F: Fn(&ImpulseSite) -> Option<GaborParams> + Sync,
{
    fn params(&self, site: &ImpulseSite) -> Option<GaborParams> {
        self(site)
    }
}

/// Attaches parameters to every site. Muted impulses are dropped unless
/// `keep_muted` is set, in which case they are reported with zero amplitude.
pub fn assign_params<P: ImpulseParams>(lattice: &ImpulseLattice, params: &P, keep_muted: bool) -> Vec<Vec<Impulse>> {
    lattice
        .cells
        .par_iter()
        .map(|cell| {
            cell.iter()
                .filter_map(|site| {
                    let p = params.params(site);
                    let p = match p {
                        Some(p) if p.amplitude != 0.0 && p.frequency > 0.0 => p,
                        _ if keep_muted => GaborParams {
                            frequency: 0.0,
                            amplitude: 0.0,
                            orientation: 0.0,
                        },
                        _ => return None,
                    };
                    Some(Impulse {
                        cell_x: site.cell.0,
                        cell_y: site.cell.1,
                        x: site.x,
                        y: site.y,
                        weight: site.weight,
                        frequency: p.frequency.min(0.5),
                        amplitude: p.amplitude,
                        orientation: p.orientation,
                    })
                })
                .collect()
        })
        .collect()
}

/// Per-impulse lookup tables for one splat.
struct Splat {
    x0: isize,
    y0: isize,
    /// `exp(-π a² dx²) · cos(2π f dx cos ω)` and the matching sine, per column.
    col_c: Vec<f32>,
    col_s: Vec<f32>,
    row_c: Vec<f32>,
    row_s: Vec<f32>,
    dx0: f64,
    dy0: f64,
    scale: f32,
}

fn prepare_splat(imp: &Impulse, a: f64, radius: usize) -> Splat {
    let r = radius as isize;
    let x0 = imp.x.floor() as isize - r;
    let y0 = imp.y.floor() as isize - r;
    let n = 2 * radius + 2;
    let (cw, sw) = (imp.orientation.cos(), imp.orientation.sin());
    let k = 2.0 * PI * imp.frequency;
    let env = -PI * a * a;
    let dx0 = x0 as f64 - imp.x;
    let dy0 = y0 as f64 - imp.y;
    let (col_c, col_s) = modulated_gaussian(env, k * cw, dx0, n);
    let (row_c, row_s) = modulated_gaussian(env, k * sw, dy0, n);
    Splat {
        x0,
        y0,
        col_c,
        col_s,
        row_c,
        row_s,
        dx0,
        dy0,
        scale: (imp.weight * imp.amplitude) as f32,
    }
}

/// `exp(env·d²)·cos(k·d)` and `exp(env·d²)·sin(k·d)` for `d = d0 + i`,
/// `i < n`. Uses `exp(env·(d+1)²) = exp(env·d²)·exp(env·(2d+1))` and a
/// unit-phasor rotation, so only a few transcendentals per table.
fn modulated_gaussian(env: f64, k: f64, d0: f64, n: usize) -> (Vec<f32>, Vec<f32>) {
    let mut c = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let q2 = (2.0 * env).exp();
    let mut g = (env * d0 * d0).exp();
    let mut step = (env * (2.0 * d0 + 1.0)).exp();
    let (mut pc, mut ps) = ((k * d0).cos(), (k * d0).sin());
    let (rc, rs) = (k.cos(), k.sin());
    for _ in 0..n {
        c.push((g * pc) as f32);
        s.push((g * ps) as f32);
        g *= step;
        step *= q2;
        (pc, ps) = (pc * rc - ps * rs, pc * rs + ps * rc);
    }
    (c, s)
}

/// Sums the Gabor kernels of all `impulses` (grouped per cell, in lattice
/// order) over a `width × height` image.
pub fn render(lattice: &ImpulseLattice, impulses: &[Vec<Impulse>], width: usize, height: usize) -> FieldMap {
    let grid = lattice.grid;
    let cs = grid.cell_size_px;
    let radius = grid.kernel_radius_px;
    let r2 = (radius * radius) as f64;
    let a = grid.bandwidth_a;
    let mut out = vec![0.0f32; width * height];

    // One band of rows per cell row; only the neighbouring cell rows reach it.
    out.par_chunks_mut(cs * width)
        .enumerate()
        .for_each(|(band, buf)| {
            let band_y0 = (band * cs) as isize;
            let band_rows = buf.len() / width;
            let band_y1 = band_y0 + band_rows as isize;
            let cy = band as i32;
            for ncy in (cy - 1)..=(cy + 1) {
                let row_start = ((ncy - lattice.origin) as usize) * lattice.cells_x;
                for cell in &impulses[row_start..row_start + lattice.cells_x] {
                    for imp in cell {
                        let s = prepare_splat(imp, a, radius);
                        let ys = s.y0.max(band_y0);
                        let ye = (s.y0 + s.row_c.len() as isize).min(band_y1);
                        let xs = s.x0.max(0);
                        let xe = (s.x0 + s.col_c.len() as isize).min(width as isize);
                        if xs >= xe {
                            continue;
                        }
                        for y in ys..ye {
                            let j = (y - s.y0) as usize;
                            let dy = s.dy0 + j as f64;
                            let rem = r2 - dy * dy;
                            if rem < 0.0 {
                                continue;
                            }
                            let (rc, rs) = (s.row_c[j] * s.scale, s.row_s[j] * s.scale);
                            // Columns with dx² <= rem, nudged so the test
                            // below agrees exactly with the disc predicate.
                            let half = rem.sqrt();
                            let inside = |i: isize| {
                                let dx = s.dx0 + i as f64;
                                dx * dx <= rem
                            };
                            let mut i0 = ((-half - s.dx0).ceil() as isize).max(xs - s.x0);
                            let mut i1 = ((half - s.dx0).floor() as isize).min(xe - s.x0 - 1);
                            while i0 <= i1 && !inside(i0) {
                                i0 += 1;
                            }
                            while i0 > xs - s.x0 && inside(i0 - 1) {
                                i0 -= 1;
                            }
                            while i1 >= i0 && !inside(i1) {
                                i1 -= 1;
                            }
                            while i1 + 1 < xe - s.x0 && inside(i1 + 1) {
                                i1 += 1;
                            }
                            if i0 > i1 {
                                continue;
                            }
                            let (i0, i1) = (i0 as usize, i1 as usize);
                            let x0 = (s.x0 + i0 as isize) as usize;
                            let line = &mut buf[(y - band_y0) as usize * width + x0..][..i1 - i0 + 1];
                            for ((o, c), sn) in line.iter_mut().zip(&s.col_c[i0..=i1]).zip(&s.col_s[i0..=i1]) {
                                *o += c * rc - sn * rs;
                            }
                        }
                    }
                }
            }
        });
    FieldMap::from_vec(width, height, out).expect("dims")
}

/// Generates and renders noise in one go.
pub fn synthesize_with<P: ImpulseParams>(lattice: &ImpulseLattice, params: &P, width: usize, height: usize) -> FieldMap {
    let impulses = assign_params(lattice, params, false);
    render(lattice, &impulses, width, height)
}

/// Writes impulses as CSV with a header row.
pub fn write_impulse_csv<W: Write>(impulses: impl IntoIterator<Item = Impulse>, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for imp in impulses {
        writer.serialize(imp)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_defaults() {
        let g = GaborGrid::new(64, 0);
        assert_eq!(g.kernel_radius_px, 17);
        assert_eq!(g.cell_size_px, g.kernel_radius_px);
        assert_eq!(g.impulses_per_cell(), 20);
        assert_eq!(GaborGrid::new(12, 0).impulses_per_cell(), 4);
        assert_eq!(GaborGrid::new(1, 0).impulses_per_cell(), 1);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_eval(0.2, 0.3, 0.06, 0.0, 0.0), 1.0);
        let a = 0.06;
        let f0 = 0.125;
        let dx = 1.0 / (2.0 * f0);
        for dy in [0.0, 1.5, -3.0] {
            let env = (-PI * a * a * (dx * dx + dy * dy)).exp();
            let v = kernel_eval(f0, 0.0, a, dx, dy);
            assert!((v + env).abs() < 1e-12);
        }
        assert_eq!(kernel_eval(f0, 0.0, a, 17.5, 0.0), 0.0);
    }

    #[test]
    fn sites_are_deterministic_and_inside_cells() {
        let grid = GaborGrid::new(25, 42);
        let a = generate_impulses(&grid, 100, 60);
        let b = generate_impulses(&grid, 100, 60);
        assert_eq!(a, b);
        let cs = grid.cell_size_px as f64;
        for s in a.sites() {
            assert!(s.x >= s.cell.0 as f64 * cs && s.x < (s.cell.0 + 1) as f64 * cs);
            assert!(s.y >= s.cell.1 as f64 * cs && s.y < (s.cell.1 + 1) as f64 * cs);
            assert!((-1.0..=1.0).contains(&s.weight));
        }
        assert_eq!(a.cell(-1, -1).len(), grid.impulses_per_cell());
    }

    #[test]
    fn cell_contents_do_not_depend_on_image_size() {
        let grid = GaborGrid::new(12, 3);
        let small = generate_impulses(&grid, 40, 40);
        let big = generate_impulses(&grid, 400, 300);
        assert_eq!(small.cell(1, 1), big.cell(1, 1));
    }

    #[test]
    fn seeds_change_most_cells() {
        let a = generate_impulses(&GaborGrid::new(12, 7), 340, 340);
        let b = generate_impulses(&GaborGrid::new(12, 8), 340, 340);
        let total = a.cells.len();
        let differing = a.cells.iter().zip(&b.cells).filter(|(x, y)| x != y).count();
        assert!(differing as f64 >= 0.99 * total as f64);
    }

    #[test]
    fn modulated_gaussian_matches_direct_eval() {
        let env = -PI * DEFAULT_BANDWIDTH * DEFAULT_BANDWIDTH;
        for (k, d0) in [(0.0, -17.3), (2.9, -18.0), (-1.7, -17.99), (3.1, -0.5)] {
            let (c, s) = modulated_gaussian(env, k, d0, 36);
            for i in 0..36 {
                let d = d0 + i as f64;
                let g = (env * d * d).exp();
                assert!((c[i] as f64 - g * (k * d).cos()).abs() < 1e-6, "{k} {d}");
                assert!((s[i] as f64 - g * (k * d).sin()).abs() < 1e-6, "{k} {d}");
            }
        }
    }

    #[test]
    fn render_matches_direct_sum() {
        let grid = GaborGrid::new(12, 5);
        let (w, h) = (50, 41);
        let lattice = generate_impulses(&grid, w, h);
        let params = |s: &ImpulseSite| {
            Some(GaborParams {
                frequency: 0.1 + 0.3 * (s.stream % 1000) as f64 / 1000.0,
                amplitude: 0.05,
                orientation: (s.stream % 314) as f64 / 100.0,
            })
        };
        let impulses = assign_params(&lattice, &params, false);
        let noise = render(&lattice, &impulses, w, h);
        for (x, y) in [(0usize, 0usize), (17, 20), (49, 40), (33, 3)] {
            let mut expected = 0.0;
            for imp in impulses.iter().flatten() {
                expected += imp.weight
                    * imp.amplitude
                    * kernel_eval(imp.frequency, imp.orientation, grid.bandwidth_a, x as f64 - imp.x, y as f64 - imp.y);
            }
            assert!((noise.get(x, y) as f64 - expected).abs() < 1e-5, "{} vs {expected}", noise.get(x, y));
        }
    }

    #[test]
    fn muted_impulses_contribute_nothing() {
        let grid = GaborGrid::new(12, 5);
        let lattice = generate_impulses(&grid, 40, 40);
        let silent = |_: &ImpulseSite| None;
        let noise = synthesize_with(&lattice, &silent, 40, 40);
        assert!(noise.data().iter().all(|&v| v == 0.0));
        let kept = assign_params(&lattice, &silent, true);
        assert_eq!(kept.iter().map(Vec::len).sum::<usize>(), lattice.len());
    }

    #[test]
    fn csv_dump() {
        let grid = GaborGrid::new(12, 1);
        let lattice = generate_impulses(&grid, 20, 20);
        let p = ConstantParams(GaborParams {
            frequency: 0.2,
            amplitude: 0.1,
            orientation: 0.5,
        });
        let imps = assign_params(&lattice, &p, false);
        let mut buf = Vec::new();
        write_impulse_csv(imps.into_iter().flatten(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("cell_x,cell_y,x,y,weight,frequency,amplitude,orientation\n"));
        assert_eq!(text.lines().count(), lattice.len() + 1);
    }
}
