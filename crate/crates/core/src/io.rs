//! Image files: 8/16-bit PNG and JPEG (display-encoded), EXR (linear),
//! single-channel EXR field maps and pyramid debug dumps.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use crate::color;
use crate::error::{Error, Result};
use crate::field::FieldMap;
use crate::frame::Frame;
use crate::pyramid::Pyramid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

/// File kinds understood by [`load_frame`] and [`save_frame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Png,
    Jpeg,
    Exr,
}

impl FileKind {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "png" => Ok(FileKind::Png),
            "jpg" | "jpeg" => Ok(FileKind::Jpeg),
            "exr" => Ok(FileKind::Exr),
            _ => Err(Error::Parse(format!("unsupported image extension: {}", path.display()))),
        }
    }
}

/// Loads an image as a display-encoded frame. Float images (EXR) are taken
/// as linear and encoded with the sRGB curve.
pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    FileKind::from_path(path)?;
    let img = image::ImageReader::open(path)?.with_guessed_format()?.decode()?;
    frame_from_image(&img)
}

pub fn frame_from_image(img: &DynamicImage) -> Result<Frame> {
    let linear = matches!(
        img,
        DynamicImage::ImageRgb32F(_) | DynamicImage::ImageRgba32F(_)
    );
    let buf = img.to_rgb32f();
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let rgb = buf
        .pixels()
        .map(|p| {
            if linear {
                p.0.map(|v| color::linear_to_srgb(v.max(0.0)))
            } else {
                p.0
            }
        })
        .collect();
    Frame::from_clamped(w, h, rgb)
}

fn quantize(v: f32, max: f32) -> f32 {
    (v.clamp(0.0, 1.0) * max).round()
}

pub fn frame_to_rgb8(frame: &Frame) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
    let data = frame
        .pixels()
        .iter()
        .flat_map(|p| p.map(|v| quantize(v, 255.0) as u8))
        .collect();
    ImageBuffer::from_raw(frame.width() as u32, frame.height() as u32, data).expect("dims")
}

pub fn frame_to_rgb16(frame: &Frame) -> ImageBuffer<Rgb<u16>, Vec<u16>> {
    let data = frame
        .pixels()
        .iter()
        .flat_map(|p| p.map(|v| quantize(v, 65535.0) as u16))
        .collect();
    ImageBuffer::from_raw(frame.width() as u32, frame.height() as u32, data).expect("dims")
}

/// Saves a frame. PNG uses `depth`; JPEG is 8-bit at quality 90; EXR
/// stores linear RGB.
pub fn save_frame(path: impl AsRef<Path>, frame: &Frame, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    match FileKind::from_path(path)? {
        FileKind::Png => match depth {
            BitDepth::Eight => frame_to_rgb8(frame).save_with_format(path, ImageFormat::Png)?,
            BitDepth::Sixteen => frame_to_rgb16(frame).save_with_format(path, ImageFormat::Png)?,
        },
        FileKind::Jpeg => fs::write(path, encode_jpeg(frame, 90)?)?,
        FileKind::Exr => {
            let data = frame
                .pixels()
                .iter()
                .flat_map(|p| p.map(color::srgb_to_linear))
                .collect();
            let buf: ImageBuffer<Rgb<f32>, Vec<f32>> =
                ImageBuffer::from_raw(frame.width() as u32, frame.height() as u32, data).expect("dims");
            DynamicImage::ImageRgb32F(buf).save_with_format(path, ImageFormat::OpenExr)?;
        }
    }
    Ok(())
}

pub fn encode_jpeg(frame: &Frame, quality: u8) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, quality);
    frame_to_rgb8(frame).write_with_encoder(enc)?;
    Ok(out)
}

pub fn encode_png(frame: &Frame) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    frame_to_rgb8(frame).write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Reads a single-channel EXR as a field map, e.g. a blur-width map in
/// pixels exported from a renderer.
pub fn load_field_exr(path: impl AsRef<Path>) -> Result<FieldMap> {
    use exr::prelude::*;
    let image = read_first_flat_layer_from_file(path.as_ref())?;
    let layer = image.layer_data;
    let channels = &layer.channel_data.list;
    if channels.len() != 1 {
        return Err(crate::error::Error::Parse(format!(
            "expected a single-channel EXR, found {} channels",
            channels.len()
        )));
    }
    let data: Vec<f32> = channels[0].sample_data.values_as_f32().collect();
    FieldMap::from_vec(layer.size.width(), layer.size.height(), data)
}

/// Writes a field as a single-channel float EXR with channel `Y`.
pub fn save_field_exr(path: impl AsRef<Path>, field: &FieldMap) -> Result<()> {
    use exr::prelude::*;
    let (w, h) = field.dims();
    let channels = SpecificChannels::build()
        .with_channel("Y")
        .with_pixel_fn(|pos: Vec2<usize>| (field.get(pos.x(), pos.y()),));
    Image::from_channels((w, h), channels).write().to_file(path.as_ref())?;
    Ok(())
}

/// Writes a field as a 16-bit grayscale PNG, mapping `[lo, hi]` to the
/// full code range.
pub fn save_field_png16(path: impl AsRef<Path>, field: &FieldMap, lo: f32, hi: f32) -> Result<()> {
    let scale = if hi > lo { 1.0 / (hi - lo) } else { 0.0 };
    let data = field
        .data()
        .iter()
        .map(|&v| quantize((v - lo) * scale, 65535.0) as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(field.width() as u32, field.height() as u32, data).expect("dims");
    buf.save_with_format(path.as_ref(), ImageFormat::Png)?;
    Ok(())
}

/// Dumps every pyramid level as `<prefix>_<level>.png`, each stretched to
/// its own value range. Returns the written paths.
pub fn dump_pyramid(dir: impl AsRef<Path>, prefix: &str, pyr: &Pyramid) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    pyr.levels()
        .iter()
        .enumerate()
        .map(|(l, level)| {
            let path = dir.join(format!("{prefix}_{l}.png"));
            let (lo, hi) = level.min_max();
            save_field_png16(&path, level, lo, hi)?;
            Ok(path)
        })
        .collect()
}

/// Image files in a directory, sorted by name.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && FileKind::from_path(p).is_ok())
        .collect();
    out.sort();
    Ok(out)
}
