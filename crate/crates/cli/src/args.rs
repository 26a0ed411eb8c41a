use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fovnoise::pipeline::Enhancer;
use fovnoise::retina::AcuityLimits;
use fovnoise::{io, EnhanceConfig, ViewingSetup};

use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "fovnoise", version, about = "Gabor-noise enhancement of foveated images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate foveated rendering with a spatially varying blur.
    Foveate(FoveateArgs),
    /// Contrast-enhance a foveated image and add noise.
    Enhance(EnhanceArgs),
    /// Band energies on an eccentricity ring, and inter-frame SSIM.
    Analyze(AnalyzeArgs),
    /// Enhance every frame in a directory with one seed.
    Sequence(SequenceArgs),
    /// Time the pipeline stages for several impulse densities.
    Bench(BenchArgs),
    /// Dump the impulses and their parameters as CSV.
    Impulses(ImpulsesArgs),
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated numbers, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

/// Viewing setup and enhancement parameters shared by all commands.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// ViewingSetup JSON. Defaults to the 55" 4K reference display; the
    /// setup is rescaled when the image resolution differs.
    #[arg(long)]
    pub setup: Option<PathBuf>,
    /// EnhanceConfig JSON; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Blur rate in arcmin/deg. Without --config, the other constants
    /// default to the calibrated values for this rate.
    #[arg(long)]
    pub blur_rate: Option<f64>,
    #[arg(long = "fe")]
    pub f_e: Option<f64>,
    #[arg(long = "sk")]
    pub s_k: Option<f64>,
    #[arg(long = "sf")]
    pub s_f: Option<f64>,
    /// Attenuation cutoff for amplitude estimation.
    #[arg(long)]
    pub a: Option<f64>,
    /// Impulses per kernel.
    #[arg(long)]
    pub impulses: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gaze position in pixels, "x,y".
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub gaze: Option<(f64, f64)>,
    /// Fovea radius in degrees.
    #[arg(long)]
    pub fovea_radius: Option<f64>,
    /// Single-channel EXR with the blur width in pixels, replacing the
    /// simulated foveation profile.
    #[arg(long)]
    pub sigma_map: Option<PathBuf>,
    /// Acuity table CSV (eccentricity,t_low,t_high).
    #[arg(long)]
    pub acuity: Option<PathBuf>,
}

impl ParamArgs {
    pub fn config(&self) -> CliResult<EnhanceConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let mut cfg = EnhanceConfig::from_json_file(path)?;
                if let Some(b) = self.blur_rate {
                    cfg.blur_rate = b;
                }
                cfg
            }
            None => EnhanceConfig::for_blur_rate(self.blur_rate.unwrap_or(EnhanceConfig::default().blur_rate)),
        };
        if let Some(v) = self.f_e {
            cfg.f_e = v;
        }
        if let Some(v) = self.s_k {
            cfg.s_k = v;
        }
        if let Some(v) = self.s_f {
            cfg.s_f = v;
        }
        if let Some(v) = self.a {
            cfg.a = v;
        }
        if let Some(v) = self.impulses {
            cfg.impulses_per_kernel = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.fovea_radius {
            cfg.fovea_radius = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn setup(&self, width: usize, height: usize) -> CliResult<ViewingSetup> {
        let base = match &self.setup {
            Some(path) => ViewingSetup::from_json_file(path)?,
            None => ViewingSetup::reference_display(),
        };
        let mut setup = if base.resolution == [width, height] {
            base
        } else {
            base.rescaled([width, height])
        };
        if let Some((x, y)) = self.gaze {
            setup = setup.with_gaze([x, y]);
        }
        setup.validate()?;
        Ok(setup)
    }

    /// Builds the enhancer for an image of the given size. Configuration is
    /// validated before any file besides the parameter files is read.
    pub fn enhancer(&self, width: usize, height: usize) -> CliResult<Enhancer> {
        let cfg = self.config()?;
        let setup = self.setup(width, height)?;
        let mut enhancer = match &self.sigma_map {
            Some(path) => Enhancer::with_sigma_map(setup, cfg, io::load_field_exr(path)?)?,
            None => Enhancer::new(setup, cfg)?,
        };
        if let Some(path) = &self.acuity {
            enhancer = enhancer.with_limits(AcuityLimits::from_csv(path)?);
        }
        Ok(enhancer)
    }

    /// Fails early on bad flags, before any image is loaded.
    pub fn check(&self) -> CliResult<()> {
        self.config()?;
        if let Some(path) = &self.setup {
            ViewingSetup::from_json_file(path)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write 16-bit PNGs.
    #[arg(long)]
    pub sixteen_bit: bool,
    /// JSON report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FoveateArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EnhanceArgs {
    /// Foveated input image (see --foveate).
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Simulate foveation first instead of treating the input as foveated.
    #[arg(long)]
    pub foveate: bool,
    /// Report JPEG (quality 90) sizes of input and output.
    #[arg(long)]
    pub jpeg_size: bool,
    /// Directory for intermediate dumps: sigma map, noise, pyramids.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub foveated: Option<PathBuf>,
    #[arg(long)]
    pub contrast: Option<PathBuf>,
    #[arg(long)]
    pub enhanced: Option<PathBuf>,
    /// Eccentricity ring "center,half_width" in degrees.
    #[arg(long, value_parser = parse_pair, default_value = "20,2")]
    pub ring: (f64, f64),
    /// Frequency band "lo,hi" in cycles/deg; repeatable. Defaults to the
    /// aliasing band at the ring center.
    #[arg(long = "band", value_parser = parse_pair)]
    pub bands: Vec<(f64, f64)>,
    /// Instead of --band, split [0, max frequency] into this many bands.
    #[arg(long, conflicts_with = "bands")]
    pub partition: Option<usize>,
    /// Band energy CSV (stdout if omitted).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Band energy JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Frame directory for inter-frame SSIM, "condition=dir"; repeatable.
    #[arg(long = "ssim")]
    pub ssim: Vec<String>,
    /// SSIM CSV (stdout if omitted).
    #[arg(long)]
    pub ssim_csv: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SequenceArgs {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Simulate foveation first.
    #[arg(long)]
    pub foveate: bool,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 3840)]
    pub width: usize,
    #[arg(long, default_value_t = 2160)]
    pub height: usize,
    /// Timed runs per setting; the median is reported.
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = 2)]
    pub warmup: usize,
    #[arg(long = "impulses-list", value_delimiter = ',', default_value = "12,25,50,64")]
    pub impulses_list: Vec<u32>,
    /// Benchmark on this image instead of a synthetic scene.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ImpulsesArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub foveate: bool,
    /// Include impulses whose amplitude is zero.
    #[arg(long)]
    pub keep_muted: bool,
    #[command(flatten)]
    pub params: ParamArgs,
}
