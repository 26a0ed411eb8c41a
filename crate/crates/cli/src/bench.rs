//! Stage timings at a fixed resolution for several impulse densities.

use std::time::Instant;

use fovnoise::pipeline::{composite, Enhancer};
use fovnoise::{scenes, EnhanceConfig, Frame, Result, ViewingSetup};
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub width: usize,
    pub height: usize,
    pub runs: usize,
    pub warmup: usize,
    pub impulses: Vec<u32>,
    pub config: EnhanceConfig,
    pub setup: ViewingSetup,
    /// Synthetic scene when `None`.
    pub input: Option<Frame>,
}

impl BenchOptions {
    /// Reference display at 4K with calibrated defaults.
    pub fn reference() -> Self {
        Self {
            width: 3840,
            height: 2160,
            runs: 10,
            warmup: 2,
            impulses: vec![12, 25, 50, 64],
            config: EnhanceConfig::default(),
            setup: ViewingSetup::reference_display(),
            input: None,
        }
    }
}

/// Median milliseconds per stage. Contrast and estimation are shared by
/// all densities and repeat across rows.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub impulses_per_kernel: u32,
    pub impulse_count: usize,
    pub contrast_ms: f64,
    pub estimation_ms: f64,
    pub synthesis_ms: f64,
    pub composite_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub runs: usize,
    pub warmup: usize,
    pub threads: usize,
    pub foveation_ms: f64,
    pub rows: Vec<BenchRow>,
    /// Synthesis time at the densest setting over the sparsest.
    pub synthesis_ratio: Option<f64>,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn run_bench(opts: &BenchOptions) -> Result<BenchReport> {
    let frame = match &opts.input {
        Some(f) => f.clone(),
        None => scenes::natural_scene(opts.width, opts.height, opts.config.seed),
    };
    let (w, h) = frame.dims();
    let setup = if opts.setup.resolution == [w, h] {
        opts.setup
    } else {
        opts.setup.rescaled([w, h])
    };

    // Foveation does not depend on the impulse density; run it once.
    let base = Enhancer::new(setup, opts.config)?;
    let t = Instant::now();
    let foveated = base.foveate(&frame)?;
    let foveation_ms = ms(t);

    let runs = opts.runs.max(1);
    let enhancers = opts
        .impulses
        .iter()
        .map(|&n| {
            Enhancer::new(
                setup,
                EnhanceConfig {
                    impulses_per_kernel: n,
                    ..opts.config
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    // Contrast enhancement and estimation do not depend on the density
    // either, so each run shares them and then synthesizes every density
    // back to back. Drift in machine load then hits all densities alike.
    let mut shared: [Vec<f64>; 2] = Default::default();
    let mut per_density: Vec<[Vec<f64>; 2]> = vec![Default::default(); enhancers.len()];
    for i in 0..opts.warmup + runs {
        let t = Instant::now();
        let contrast = base.contrast_enhance(&foveated)?;
        let t_contrast = ms(t);
        let t = Instant::now();
        let fields = base.estimate(&foveated, &contrast)?;
        let t_estimate = ms(t);
        let keep = i >= opts.warmup;
        if keep {
            shared[0].push(t_contrast);
            shared[1].push(t_estimate);
        }
        for (enhancer, times) in enhancers.iter().zip(per_density.iter_mut()) {
            let t = Instant::now();
            let noise = enhancer.synthesize(&fields);
            let t_synth = ms(t);
            let t = Instant::now();
            composite(&contrast, &noise)?;
            let t_comp = ms(t);
            if keep {
                times[0].push(t_synth);
                times[1].push(t_comp);
            }
        }
    }
    let [c, e] = shared.map(|mut v| median(&mut v));
    let rows: Vec<BenchRow> = enhancers
        .iter()
        .zip(per_density)
        .map(|(enhancer, times)| {
            let [s, k] = times.map(|mut v| median(&mut v));
            BenchRow {
                impulses_per_kernel: enhancer.config().impulses_per_kernel,
                impulse_count: enhancer.lattice().len(),
                contrast_ms: c,
                estimation_ms: e,
                synthesis_ms: s,
                composite_ms: k,
                total_ms: c + e + s + k,
            }
        })
        .collect();
    let synthesis_ratio = {
        let lo = rows.iter().min_by_key(|r| r.impulses_per_kernel);
        let hi = rows.iter().max_by_key(|r| r.impulses_per_kernel);
        match (lo, hi) {
            (Some(lo), Some(hi)) if hi.impulses_per_kernel > lo.impulses_per_kernel => {
                Some(hi.synthesis_ms / lo.synthesis_ms)
            }
            _ => None,
        }
    };
    Ok(BenchReport {
        width: w,
        height: h,
        runs,
        warmup: opts.warmup,
        threads: rayon::current_num_threads(),
        foveation_ms,
        rows,
        synthesis_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn small_bench_reports_every_density() {
        let opts = BenchOptions {
            width: 256,
            height: 128,
            runs: 1,
            warmup: 0,
            impulses: vec![12, 64],
            setup: ViewingSetup::reference_pitch([256, 128], [0.0, 64.0]),
            ..BenchOptions::reference()
        };
        let report = run_bench(&opts).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows[1].impulse_count > report.rows[0].impulse_count);
        assert!(report.synthesis_ratio.is_some());
    }
}
