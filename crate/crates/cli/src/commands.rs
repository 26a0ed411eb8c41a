use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fovnoise::analysis::{self, Band, BandReport, Condition, Ring};
use fovnoise::io::{self, BitDepth};
use fovnoise::pipeline::{self, Enhancer};
use fovnoise::pyramid::{self, build_gaussian_laplacian};
use fovnoise::retina::AcuityLimits;
use fovnoise::{FieldMap, Frame};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::args::{AnalyzeArgs, BenchArgs, EnhanceArgs, FoveateArgs, ImpulsesArgs, OutputArgs, SequenceArgs};
use crate::bench::{run_bench, BenchOptions};
use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

fn depth(out: &OutputArgs) -> BitDepth {
    if out.sixteen_bit {
        BitDepth::Sixteen
    } else {
        BitDepth::Eight
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Writes the report if requested and returns it for stdout.
fn finish(report: Value, path: Option<&PathBuf>) -> CliResult<Value> {
    if let Some(p) = path {
        write_json(p, &report)?;
    }
    Ok(report)
}

pub fn foveate(args: &FoveateArgs) -> CliResult<Value> {
    args.params.check()?;
    let frame = io::load_frame(&args.input)?;
    let enhancer = args.params.enhancer(frame.width(), frame.height())?;
    let t = Instant::now();
    let out = enhancer.foveate(&frame)?;
    let elapsed = t.elapsed().as_secs_f64() * 1e3;
    io::save_frame(&args.output, &out, depth(&args.out))?;
    finish(
        json!({
            "command": "foveate",
            "output": args.output,
            "setup": enhancer.setup(),
            "blur_rate": enhancer.config().blur_rate,
            "foveation_ms": elapsed,
            "output_sha256": file_sha256(&args.output)?,
        }),
        args.out.report.as_ref(),
    )
}

pub fn enhance(args: &EnhanceArgs) -> CliResult<Value> {
    args.params.check()?;
    let input = io::load_frame(&args.input)?;
    let enhancer = args.params.enhancer(input.width(), input.height())?;
    let foveated = if args.foveate { enhancer.foveate(&input)? } else { input.clone() };
    let result = enhancer.enhance(&foveated)?;
    io::save_frame(&args.output, &result.frame, depth(&args.out))?;

    if let Some(dir) = &args.dump_dir {
        dump_intermediates(dir, &enhancer, &foveated, &result)?;
    }

    let mut report = json!({
        "command": "enhance",
        "input": args.input,
        "output": args.output,
        "width": input.width(),
        "height": input.height(),
        "setup": enhancer.setup(),
        "config": enhancer.config(),
        "clipped_fraction": result.clipped_fraction,
        "timings": result.timings,
        "output_sha256": file_sha256(&args.output)?,
    });
    if args.jpeg_size {
        report["jpeg_q90_bytes"] = json!({
            "input": io::encode_jpeg(&input, 90)?.len(),
            "output": io::encode_jpeg(&result.frame, 90)?.len(),
        });
    }
    finish(report, args.out.report.as_ref())
}

fn dump_intermediates(dir: &Path, enhancer: &Enhancer, foveated: &Frame, result: &pipeline::Enhanced) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let fields = enhancer.estimate(foveated, &result.contrast)?;
    io::save_field_exr(dir.join("sigma.exr"), enhancer.sigma_map())?;
    io::save_field_exr(dir.join("amplitude.exr"), &fields.amplitude)?;
    io::save_field_exr(dir.join("orientation.exr"), &fields.orientation)?;
    io::save_field_exr(dir.join("noise.exr"), &result.noise)?;
    let (w, h) = foveated.dims();
    let levels = pyramid::max_depth(w, h).min(pipeline::LAPLACIAN_DEPTH);
    let (gauss, lap) = build_gaussian_laplacian(foveated.luminance(), levels)?;
    io::dump_pyramid(dir, "gaussian", &gauss)?;
    io::dump_pyramid(dir, "laplacian", &lap)?;
    Ok(())
}

fn load_luminance(path: &Path) -> CliResult<FieldMap> {
    Ok(io::load_frame(path)?.luminance().clone())
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult<Value> {
    args.params.check()?;
    let ring = Ring::new(args.ring.0, args.ring.1);
    let inputs: Vec<(Condition, &PathBuf)> = [
        (Condition::Reference, &args.reference),
        (Condition::Foveated, &args.foveated),
        (Condition::Contrast, &args.contrast),
        (Condition::Enhanced, &args.enhanced),
    ]
    .into_iter()
    .filter_map(|(c, p)| p.as_ref().map(|p| (c, p)))
    .collect();
    let ssim_dirs = args
        .ssim
        .iter()
        .map(|s| {
            let (c, d) = s
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("--ssim expects condition=dir, got {s:?}")))?;
            Ok((c.parse::<Condition>()?, PathBuf::from(d)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if inputs.is_empty() && ssim_dirs.is_empty() {
        return Err(CliError::config("nothing to analyze: pass images and/or --ssim"));
    }

    let mut report = json!({ "command": "analyze" });

    if !inputs.is_empty() {
        let images = inputs
            .iter()
            .map(|(c, p)| Ok((*c, load_luminance(p)?)))
            .collect::<CliResult<Vec<_>>>()?;
        let (w, h) = images[0].1.dims();
        if let Some((_, bad)) = images.iter().find(|(_, img)| img.dims() != (w, h)) {
            return Err(CliError::config(format!(
                "images differ in size: {w}x{h} vs {}x{}",
                bad.width(),
                bad.height()
            )));
        }
        let setup = args.params.setup(w, h)?;
        let bands = if let Some(n) = args.partition {
            if n == 0 {
                return Err(CliError::config("--partition must be at least 1"));
            }
            // Slightly past the corner frequency so every bin is covered.
            analysis::uniform_bands(analysis::ring_max_frequency(&setup, ring)? * 1.0001, n)
        } else if args.bands.is_empty() {
            let limits = match &args.params.acuity {
                Some(p) => AcuityLimits::from_csv(p)?,
                None => AcuityLimits::default(),
            };
            let (lo, hi) = limits.limits(ring.center)?;
            vec![Band::new(lo, hi)]
        } else {
            args.bands.iter().map(|&(lo, hi)| Band::new(lo, hi)).collect()
        };
        let refs: Vec<(Condition, &FieldMap)> = images.iter().map(|(c, img)| (*c, img)).collect();
        let bands_report = BandReport::compute(&refs, &setup, ring, bands)?;
        match &args.csv {
            Some(p) => bands_report.write_csv(fs::File::create(p)?)?,
            None => bands_report.write_csv(std::io::stdout().lock())?,
        }
        if let Some(p) = &args.json {
            fs::write(p, bands_report.to_json()? + "\n")?;
        }
        report["bands"] = serde_json::to_value(&bands_report)?;
    }

    if !ssim_dirs.is_empty() {
        let mut rows = Vec::new();
        for (condition, dir) in &ssim_dirs {
            let frames = io::list_frames(dir)?
                .iter()
                .map(|p| load_luminance(p))
                .collect::<CliResult<Vec<_>>>()?;
            let refs: Vec<&FieldMap> = frames.iter().collect();
            let mean = analysis::interframe_ssim(&refs)?;
            rows.push(json!({ "condition": condition, "frames": frames.len(), "mean_ssim": mean }));
        }
        let mut text = String::from("condition,frames,mean_ssim\n");
        for r in &rows {
            text += &format!("{},{},{}\n", r["condition"].as_str().unwrap_or_default(), r["frames"], r["mean_ssim"]);
        }
        match &args.ssim_csv {
            Some(p) => fs::write(p, text)?,
            None => print!("{text}"),
        }
        report["ssim"] = Value::Array(rows);
    }
    Ok(report)
}

pub fn sequence(args: &SequenceArgs) -> CliResult<Value> {
    args.params.check()?;
    let paths = io::list_frames(&args.input_dir)?;
    if paths.is_empty() {
        return Err(CliError::io(format!("no frames in {}", args.input_dir.display())));
    }
    let frames = paths.iter().map(io::load_frame).collect::<Result<Vec<_>, _>>()?;
    let (w, h) = frames[0].dims();
    if let Some((p, _)) = paths.iter().zip(&frames).find(|(_, f)| f.dims() != (w, h)) {
        return Err(CliError::config(format!("{} is not {w}x{h}", p.display())));
    }
    let enhancer = args.params.enhancer(w, h)?;
    let results = enhancer.enhance_sequence(&frames, args.foveate)?;

    fs::create_dir_all(&args.output_dir)?;
    let mut entries = Vec::new();
    let mut combined = Sha256::new();
    let mut max_clip: f64 = 0.0;
    for (path, result) in paths.iter().zip(&results) {
        let name = format!(
            "{}.png",
            path.file_stem().and_then(|s| s.to_str()).unwrap_or("frame")
        );
        let out = args.output_dir.join(&name);
        io::save_frame(&out, &result.frame, depth(&args.out))?;
        let hash = file_sha256(&out)?;
        combined.update(hash.as_bytes());
        max_clip = max_clip.max(result.clipped_fraction);
        entries.push(json!({ "frame": name, "sha256": hash, "clipped_fraction": result.clipped_fraction }));
    }
    finish(
        json!({
            "command": "sequence",
            "frames": entries,
            "sequence_sha256": format!("{:x}", combined.finalize()),
            "max_clipped_fraction": max_clip,
            "setup": enhancer.setup(),
            "config": enhancer.config(),
        }),
        args.out.report.as_ref(),
    )
}

pub fn bench(args: &BenchArgs) -> CliResult<Value> {
    args.params.check()?;
    if args.impulses_list.is_empty() {
        return Err(CliError::config("--impulses-list is empty"));
    }
    let input = args.input.as_ref().map(io::load_frame).transpose()?;
    let (w, h) = input.as_ref().map_or((args.width, args.height), |f| f.dims());
    let opts = BenchOptions {
        width: w,
        height: h,
        runs: args.runs,
        warmup: args.warmup,
        impulses: args.impulses_list.clone(),
        config: args.params.config()?,
        setup: args.params.setup(w, h)?,
        input,
    };
    let report = serde_json::to_value(run_bench(&opts)?)?;
    finish(json!({ "command": "bench", "bench": report }), args.report.as_ref())
}

pub fn impulses(args: &ImpulsesArgs) -> CliResult<Value> {
    args.params.check()?;
    let input = io::load_frame(&args.input)?;
    let enhancer = args.params.enhancer(input.width(), input.height())?;
    let foveated = if args.foveate { enhancer.foveate(&input)? } else { input };
    let contrast = enhancer.contrast_enhance(&foveated)?;
    let fields = enhancer.estimate(&foveated, &contrast)?;
    let cells = enhancer.impulses(&fields, args.keep_muted);
    let count: usize = cells.iter().map(Vec::len).sum();
    fovnoise::gabor::write_impulse_csv(cells.into_iter().flatten(), fs::File::create(&args.output)?)?;
    Ok(json!({ "command": "impulses", "output": args.output, "impulses": count }))
}
