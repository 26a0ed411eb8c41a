//! End-to-end enhancement: foveation simulation, contrast enhancement,
//! parameter estimation, noise synthesis and compositing.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::blur::{self, BlurMethod};
use crate::color;
use crate::error::{Error, Result};
use crate::field::FieldMap;
use crate::frame::Frame;
use crate::gabor::{self, GaborGrid, GaborParams, ImpulseLattice, ImpulseSite};
use crate::params::{self, EnhanceConfig, FrequencySpec, NEIGHBORHOOD_LEVEL};
use crate::pyramid::{self, build_gaussian_laplacian};
use crate::retina::{self, AcuityLimits, ViewingSetup, DISPLAY_NYQUIST};

/// Detail gain per unit of `f_e`; `f_e = 0.2` gives a gain of one.
pub const CONTRAST_NORMALIZER: f32 = 5.0;

/// Enhancement fails when more than this fraction of pixels clips.
pub const MAX_CLIPPED_FRACTION: f64 = 0.05;

/// Deepest Laplacian level used for amplitude estimation.
pub const LAPLACIAN_DEPTH: usize = 6;

/// Simulates foveated rendering with a spatially varying Gaussian blur in
/// linear RGB. Pixels with zero blur keep their exact values.
pub fn foveate(frame: &Frame, sigma_map: &FieldMap, method: BlurMethod) -> Result<Frame> {
    sigma_map.ensure_same_dims(frame.luminance())?;
    let planes = frame.linear_planes();
    let blurred = blur::blur_planes(&[&planes[0], &planes[1], &planes[2]], sigma_map, method)?;
    let rgb = frame
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if sigma_map.data()[i] <= 0.0 {
                p
            } else {
                std::array::from_fn(|c| color::linear_to_srgb(blurred[c].data()[i].max(0.0)))
            }
        })
        .collect();
    Frame::from_clamped(frame.width(), frame.height(), rgb)
}

/// New luminance after unsharp masking with gain `f_e`: the detail layer
/// `lum - blurred` is added back `f_e · 5` times.
#[inline]
pub fn enhanced_luminance(lum: f32, blurred: f32, f_e: f32) -> f32 {
    lum + f_e * CONTRAST_NORMALIZER * (lum - blurred)
}

/// Unsharp-mask contrast enhancement with the local foveation blur as the
/// mask. Colors are scaled by the luminance ratio; pixels whose detail
/// layer is zero are returned untouched.
pub fn contrast_enhance(frame: &Frame, sigma_map: &FieldMap, f_e: f64, method: BlurMethod) -> Result<Frame> {
    sigma_map.ensure_same_dims(frame.luminance())?;
    if f_e == 0.0 {
        return Ok(frame.clone());
    }
    let lum = frame.luminance();
    let blurred = blur::blur(lum, sigma_map, method)?;
    let f_e = f_e as f32;
    let rgb = frame
        .pixels()
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let l = lum.data()[i];
            let b = blurred.data()[i];
            if l == b || l < 1e-6 {
                return p;
            }
            let ratio = enhanced_luminance(l, b, f_e).max(0.0) / l;
            p.map(|v| color::linear_to_srgb(color::srgb_to_linear(v) * ratio).clamp(0.0, 1.0))
        })
        .collect();
    Frame::from_clamped(frame.width(), frame.height(), rgb)
}

/// Wall-clock time per stage in milliseconds.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StageTimings {
    pub contrast_ms: f64,
    pub estimation_ms: f64,
    pub synthesis_ms: f64,
    pub composite_ms: f64,
}

/// Per-pixel noise parameters estimated from a foveated frame.
#[derive(Debug, Clone)]
pub struct NoiseFields {
    /// Amplitude before clipping attenuation.
    pub raw_amplitude: FieldMap,
    pub amplitude: FieldMap,
    /// Radians in `[0, π)`.
    pub orientation: FieldMap,
}

#[derive(Debug, Clone)]
pub struct Enhanced {
    pub frame: Frame,
    /// The contrast-enhanced frame the noise was added to.
    pub contrast: Frame,
    /// Signed noise added to every channel.
    pub noise: FieldMap,
    pub clipped_fraction: f64,
    pub timings: StageTimings,
}

/// Enhancement for one viewing setup and configuration. Everything that
/// depends only on geometry (blur widths, impulse positions) is computed
/// once, so a single `Enhancer` can process a whole sequence.
#[derive(Debug, Clone)]
pub struct Enhancer {
    setup: ViewingSetup,
    config: EnhanceConfig,
    limits: AcuityLimits,
    blur_method: BlurMethod,
    sigma: FieldMap,
    lattice: ImpulseLattice,
    depth: usize,
}

impl Enhancer {
    pub fn new(setup: ViewingSetup, config: EnhanceConfig) -> Result<Self> {
        setup.validate()?;
        config.validate()?;
        let sigma = retina::sigma_map(&setup, config.blur_rate, config.fovea_radius);
        Self::build(setup, config, sigma)
    }

    /// Uses an externally supplied blur-width map (pixels) instead of the
    /// one implied by `config.blur_rate`.
    pub fn with_sigma_map(setup: ViewingSetup, config: EnhanceConfig, sigma: FieldMap) -> Result<Self> {
        setup.validate()?;
        config.validate()?;
        if sigma.dims() != (setup.width(), setup.height()) {
            return Err(Error::DimensionMismatch {
                expected: (setup.width(), setup.height()),
                actual: sigma.dims(),
            });
        }
        if sigma.data().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidConfig("sigma map must be finite and non-negative".into()));
        }
        Self::build(setup, config, sigma)
    }

    fn build(setup: ViewingSetup, config: EnhanceConfig, sigma: FieldMap) -> Result<Self> {
        let (w, h) = (setup.width(), setup.height());
        let max_depth = pyramid::max_depth(w, h);
        if max_depth < NEIGHBORHOOD_LEVEL + 1 {
            return Err(Error::ImageTooSmall {
                width: w,
                height: h,
                levels: NEIGHBORHOOD_LEVEL + 1,
            });
        }
        let grid = GaborGrid::new(config.impulses_per_kernel, config.seed);
        Ok(Self {
            setup,
            config,
            limits: AcuityLimits::default(),
            blur_method: BlurMethod::default(),
            lattice: gabor::generate_impulses(&grid, w, h),
            sigma,
            depth: max_depth.min(LAPLACIAN_DEPTH),
        })
    }

    pub fn with_limits(mut self, limits: AcuityLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn with_blur_method(mut self, method: BlurMethod) -> Self {
        self.blur_method = method;
        self
    }

    pub fn setup(&self) -> &ViewingSetup {
        &self.setup
    }

    pub fn config(&self) -> &EnhanceConfig {
        &self.config
    }

    pub fn sigma_map(&self) -> &FieldMap {
        &self.sigma
    }

    pub fn lattice(&self) -> &ImpulseLattice {
        &self.lattice
    }

    fn check_frame(&self, frame: &Frame) -> Result<()> {
        let expected = (self.setup.width(), self.setup.height());
        if frame.dims() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: frame.dims(),
            });
        }
        Ok(())
    }

    pub fn foveate(&self, frame: &Frame) -> Result<Frame> {
        self.check_frame(frame)?;
        foveate(frame, &self.sigma, self.blur_method)
    }

    pub fn contrast_enhance(&self, frame: &Frame) -> Result<Frame> {
        self.check_frame(frame)?;
        contrast_enhance(frame, &self.sigma, self.config.f_e, self.blur_method)
    }

    /// Frequency distribution (cycles per degree) at a pixel.
    pub fn frequency_spec_at(&self, x: usize, y: usize) -> Result<FrequencySpec> {
        let sigma = self.sigma.get(x, y) as f64;
        if sigma <= 0.0 {
            return Ok(FrequencySpec::EMPTY);
        }
        let (fx, fy) = (x as f64, y as f64);
        let (t_low, t_high) = self.limits.limits(self.setup.eccentricity_at(fx, fy))?;
        let band = retina::noise_band(t_low, t_high, sigma, self.setup.deg_per_px_at(fx, fy), DISPLAY_NYQUIST);
        params::frequency_spec(band.low, band.high, self.config.s_f)
    }

    /// Amplitude and orientation fields. The Laplacian and Gaussian pyramids
    /// come from the foveated luminance; the clipping bound comes from the
    /// display-encoded frame the noise will be added to.
    pub fn estimate(&self, foveated: &Frame, target: &Frame) -> Result<NoiseFields> {
        self.check_frame(foveated)?;
        self.check_frame(target)?;
        let (w, h) = foveated.dims();
        let (gauss, lap) = build_gaussian_laplacian(foveated.luminance(), self.depth)?;
        let raw_amplitude = params::amplitude_field(&lap, &self.sigma, self.config.s_k, self.config.a)?;
        let (lo, hi) = target.channel_extrema();
        let amplitude = params::attenuate_for_clipping_range(&raw_amplitude, &lo, &hi, NEIGHBORHOOD_LEVEL)?;
        let orientation = params::orientation_from_gaussian(&gauss, NEIGHBORHOOD_LEVEL, w, h)?;
        Ok(NoiseFields {
            raw_amplitude,
            amplitude,
            orientation,
        })
    }

    /// Gabor parameters for one impulse, or `None` where no noise belongs.
    pub fn impulse_params(&self, fields: &NoiseFields, site: &ImpulseSite) -> Option<GaborParams> {
        let (w, h) = (self.setup.width(), self.setup.height());
        let x = (site.x.round().max(0.0) as usize).min(w - 1);
        let y = (site.y.round().max(0.0) as usize).min(h - 1);
        let amplitude = fields.amplitude.get(x, y) as f64;
        if amplitude <= 0.0 {
            return None;
        }
        let spec = self.frequency_spec_at(x, y).ok()?;
        if spec.empty {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(site.stream);
        let cpd = params::sample_frequency(&spec, &mut rng).ok()?;
        let frequency = cpd * self.setup.deg_per_px_at(x as f64, y as f64);
        Some(GaborParams {
            frequency,
            amplitude,
            orientation: fields.orientation.get(x, y) as f64,
        })
    }

    /// Impulses with their parameters, grouped per cell.
    pub fn impulses(&self, fields: &NoiseFields, keep_muted: bool) -> Vec<Vec<gabor::Impulse>> {
        let source = |site: &ImpulseSite| self.impulse_params(fields, site);
        gabor::assign_params(&self.lattice, &source, keep_muted)
    }

    /// Renders the noise and zeroes it wherever there is no blur, so the
    /// fovea stays untouched.
    pub fn synthesize(&self, fields: &NoiseFields) -> FieldMap {
        let (w, h) = (self.setup.width(), self.setup.height());
        let impulses = self.impulses(fields, false);
        let mut noise = gabor::render(&self.lattice, &impulses, w, h);
        for (n, &s) in noise.data_mut().iter_mut().zip(self.sigma.data()) {
            if s <= 0.0 {
                *n = 0.0;
            }
        }
        noise
    }

    /// Enhances an already foveated frame.
    pub fn enhance(&self, foveated: &Frame) -> Result<Enhanced> {
        let mut timings = StageTimings::default();

        let t = Instant::now();
        let contrast = self.contrast_enhance(foveated)?;
        timings.contrast_ms = ms(t);

        let t = Instant::now();
        let fields = self.estimate(foveated, &contrast)?;
        timings.estimation_ms = ms(t);

        let t = Instant::now();
        let noise = self.synthesize(&fields);
        timings.synthesis_ms = ms(t);

        let t = Instant::now();
        let (frame, clipped_fraction) = composite(&contrast, &noise)?;
        timings.composite_ms = ms(t);

        if clipped_fraction > MAX_CLIPPED_FRACTION {
            return Err(Error::ExcessiveClipping {
                clipped: clipped_fraction,
                limit: MAX_CLIPPED_FRACTION,
            });
        }
        Ok(Enhanced {
            frame,
            contrast,
            noise,
            clipped_fraction,
            timings,
        })
    }
}

impl Enhancer {
    /// Enhances frames independently with this enhancer's impulse set.
    /// Output order matches input order.
    pub fn enhance_sequence(&self, frames: &[Frame], simulate_foveation: bool) -> Result<Vec<Enhanced>> {
        frames
            .par_iter()
            .map(|frame| {
                if simulate_foveation {
                    self.enhance(&self.foveate(frame)?)
                } else {
                    self.enhance(frame)
                }
            })
            .collect()
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Adds the achromatic noise to every display-encoded channel and clamps.
/// Returns the fraction of pixels where any channel left `[0, 1]`.
pub fn composite(base: &Frame, noise: &FieldMap) -> Result<(Frame, f64)> {
    noise.ensure_same_dims(base.luminance())?;
    let mut clipped = 0usize;
    let rgb: Vec<[f32; 3]> = base
        .pixels()
        .iter()
        .zip(noise.data())
        .map(|(&p, &n)| {
            let out = p.map(|v| v + n);
            if out.iter().any(|v| !(0.0..=1.0).contains(v)) {
                clipped += 1;
            }
            out.map(|v| v.clamp(0.0, 1.0))
        })
        .collect();
    let fraction = clipped as f64 / rgb.len().max(1) as f64;
    Ok((Frame::new(base.width(), base.height(), rgb)?, fraction))
}

/// Convenience wrapper: builds an [`Enhancer`] and enhances one frame.
pub fn enhance(frame: &Frame, setup: &ViewingSetup, config: &EnhanceConfig) -> Result<Enhanced> {
    Enhancer::new(*setup, *config)?.enhance(frame)
}

/// Frames sharing one setup, configuration and seed.
#[derive(Debug, Clone)]
pub struct SequenceJob {
    pub frames: Vec<Frame>,
    pub config: EnhanceConfig,
    pub setup: ViewingSetup,
    /// Blur the inputs first; otherwise they are taken as already foveated.
    pub simulate_foveation: bool,
}

/// Enhances every frame with the same impulse set. Frames are independent
/// and may run in parallel; output order matches input order.
pub fn process_sequence(job: &SequenceJob) -> Result<Vec<Enhanced>> {
    Enhancer::new(job.setup, job.config)?.enhance_sequence(&job.frames, job.simulate_foveation)
}
