use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fovnoise::io::{self, BitDepth};
use fovnoise::scenes;
use serde_json::Value;

fn fovnoise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fovnoise"))
        .args(args)
        .output()
        .expect("spawn fovnoise")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn write_scene(path: &Path, w: usize, h: usize, seed: u64) {
    io::save_frame(path, &scenes::natural_scene(w, h, seed), BitDepth::Eight).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn zero_gain_enhance_keeps_image_content() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    let output = dir.path().join("out.png");
    write_scene(&input, 320, 180, 1);
    let out = fovnoise(&[
        "enhance",
        s(&input),
        "-o",
        s(&output),
        "--sk",
        "0",
        "--fe",
        "0",
        "--blur-rate",
        "0.57",
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["clipped_fraction"], 0.0);
    assert_eq!(io::load_frame(&input).unwrap(), io::load_frame(&output).unwrap());
}

#[test]
fn enhance_reports_metrics_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    let output = dir.path().join("out.png");
    let report_path = dir.path().join("report.json");
    let dumps = dir.path().join("dumps");
    write_scene(&input, 320, 180, 2);
    let out = fovnoise(&[
        "enhance",
        s(&input),
        "-o",
        s(&output),
        "--foveate",
        "--gaze",
        "0,90",
        "--report",
        s(&report_path),
        "--jpeg-size",
        "--dump-dir",
        s(&dumps),
        "--sixteen-bit",
    ]);
    let report = stdout_json(&out);
    let saved: Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report, saved);
    for key in ["contrast_ms", "estimation_ms", "synthesis_ms", "composite_ms"] {
        assert!(report["timings"][key].as_f64().unwrap() >= 0.0);
    }
    assert!(report["jpeg_q90_bytes"]["output"].as_u64().unwrap() > 0);
    assert!(dumps.join("sigma.exr").exists());
    assert!(dumps.join("laplacian_0.png").exists());
    let img = image::open(&output).unwrap();
    assert!(matches!(img, image::DynamicImage::ImageRgb16(_)));
}

#[test]
fn bad_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    write_scene(&input, 64, 64, 3);
    let out = fovnoise(&["enhance", s(&input), "-o", s(&dir.path().join("o.png")), "--fe", "0.9"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "config");
    assert!(err["error"].as_str().unwrap().contains("f_e"));
    assert!(!dir.path().join("o.png").exists());

    let out = fovnoise(&["enhance", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "config");

    let out = fovnoise(&["foveate", s(&input), "-o", "x.png", "--gaze", "500,10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = fovnoise(&["foveate", s(&dir.path().join("none.png")), "-o", s(&dir.path().join("o.png"))]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["kind"], "io");
}

fn make_frames(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    for (i, f) in scenes::panning_sequence(480, 128, 3, 2, 4).iter().enumerate() {
        io::save_frame(dir.join(format!("f{i:03}.png")), f, BitDepth::Eight).unwrap();
    }
}

#[test]
fn sequence_hashes_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    make_frames(&frames);
    let run = |out: &str, seed: &str| {
        let o = dir.path().join(out);
        stdout_json(&fovnoise(&[
            "sequence",
            s(&frames),
            s(&o),
            "--foveate",
            "--gaze",
            "0,64",
            "--blur-rate",
            "0.57",
            "--seed",
            seed,
            "--threads",
            "1",
        ]))
    };
    let a = run("a", "0");
    let b = run("b", "0");
    let c = run("c", "1");
    assert_eq!(a["sequence_sha256"], b["sequence_sha256"]);
    assert_ne!(a["sequence_sha256"], c["sequence_sha256"]);
    assert_eq!(a["frames"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("a/f002.png").exists());
}

#[test]
fn analyze_writes_band_and_ssim_csv() {
    let dir = tempfile::tempdir().unwrap();
    let reference = dir.path().join("ref.png");
    let foveated = dir.path().join("fov.png");
    write_scene(&reference, 1200, 512, 5);
    stdout_json(&fovnoise(&[
        "foveate",
        s(&reference),
        "-o",
        s(&foveated),
        "--gaze",
        "60,256",
        "--blur-rate",
        "0.57",
    ]));
    let frames = dir.path().join("frames");
    make_frames(&frames);
    let csv = dir.path().join("bands.csv");
    let ssim_csv = dir.path().join("ssim.csv");
    let report = stdout_json(&fovnoise(&[
        "analyze",
        "--reference",
        s(&reference),
        "--foveated",
        s(&foveated),
        "--gaze",
        "60,256",
        "--ring",
        "20,2",
        "--csv",
        s(&csv),
        "--ssim",
        &format!("reference={}", s(&frames)),
        "--ssim-csv",
        s(&ssim_csv),
    ]));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("condition,f_lo,f_hi,energy"));
    assert_eq!(text.lines().count(), 3);
    let energies = report["bands"]["energies"].as_array().unwrap();
    let e = |i: usize| energies[i]["energy"].as_f64().unwrap();
    assert!(e(1) < e(0));
    let ssim = fs::read_to_string(&ssim_csv).unwrap();
    assert!(ssim.starts_with("condition,frames,mean_ssim\nreference,3,"));
}

#[test]
fn impulses_csv_lists_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    let csv = dir.path().join("imp.csv");
    write_scene(&input, 400, 120, 6);
    let report = stdout_json(&fovnoise(&[
        "impulses", s(&input), "-o", s(&csv), "--foveate", "--gaze", "0,60", "--blur-rate", "0.57",
    ]));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "cell_x,cell_y,x,y,weight,frequency,amplitude,orientation");
    assert_eq!(lines.count() as u64, report["impulses"].as_u64().unwrap());
    assert!(report["impulses"].as_u64().unwrap() > 0);
}
