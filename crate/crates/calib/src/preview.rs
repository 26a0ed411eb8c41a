//! Side-by-side preview frames and their render cache.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use fovnoise::io;
use fovnoise::pipeline::Enhancer;
use fovnoise::{EnhanceConfig, Frame, ViewingSetup};
use image::imageops::{self, FilterType};
use image::DynamicImage;
use serde::Serialize;
use sha2::{Digest, Sha256};
use tokio::sync::watch;

use crate::session::Mode;

pub const DEFAULT_PREVIEW_WIDTH: usize = 1280;

/// Everything a preview depends on.
#[derive(Debug, Clone, Serialize)]
pub struct PreviewRequest {
    pub stimulus: String,
    pub setup: ViewingSetup,
    pub config: EnhanceConfig,
    pub mode: Mode,
    /// Output width in pixels; `None` renders at the stimulus resolution.
    pub width: Option<usize>,
}

impl PreviewRequest {
    pub fn key(&self) -> String {
        let json = serde_json::to_vec(self).expect("serializable");
        let digest = Sha256::digest(&json);
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Resamples to `width` pixels wide, keeping the aspect ratio. Never
/// upsamples.
pub fn resize(frame: &Frame, width: usize) -> fovnoise::Result<Frame> {
    let (w, h) = frame.dims();
    if width >= w {
        return Ok(frame.clone());
    }
    let height = ((h as f64 * width as f64 / w as f64).round() as usize).max(1);
    let small = imageops::resize(&io::frame_to_rgb16(frame), width as u32, height as u32, FilterType::Triangle);
    io::frame_from_image(&DynamicImage::ImageRgb16(small))
}

/// Reference on the left half, the left half of the processed image
/// mirrored onto the right. Gaze is at the frame center, so both halves
/// sit at matching eccentricities.
pub fn side_by_side(frame: &Frame, setup: &ViewingSetup, config: &EnhanceConfig, noise: bool) -> fovnoise::Result<Frame> {
    let (w, h) = frame.dims();
    let setup = centered(setup, w, h);
    let enhancer = Enhancer::new(setup, *config)?;
    let foveated = enhancer.foveate(frame)?;
    let test = if noise {
        enhancer.enhance(&foveated)?.frame
    } else {
        enhancer.contrast_enhance(&foveated)?
    };
    let mut rgb = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            rgb.push(if x < w / 2 { frame.pixel(x, y) } else { test.pixel(w - 1 - x, y) });
        }
    }
    Frame::new(w, h, rgb)
}

/// `setup` resampled to `w × h` with the gaze at the center.
pub fn centered(setup: &ViewingSetup, w: usize, h: usize) -> ViewingSetup {
    let s = if setup.resolution == [w, h] {
        *setup
    } else {
        setup.rescaled([w, h])
    };
    s.with_gaze([(w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0])
}

pub fn render_png(stimulus: &Frame, req: &PreviewRequest) -> fovnoise::Result<Vec<u8>> {
    let frame = match req.width {
        Some(w) => resize(stimulus, w)?,
        None => stimulus.clone(),
    };
    let out = side_by_side(&frame, &req.setup, &req.config, req.mode.uses_noise())?;
    io::encode_png(&out)
}

pub type Rendered = Result<Arc<Vec<u8>>, String>;
type Slot = watch::Receiver<Option<Rendered>>;

/// Renders keyed by [`PreviewRequest::key`], oldest evicted first.
#[derive(Debug)]
pub struct PreviewCache {
    capacity: usize,
    inner: Mutex<CacheInner>,
}

#[derive(Debug, Default)]
struct CacheInner {
    slots: HashMap<String, Slot>,
    order: VecDeque<String>,
}

impl PreviewCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            inner: Mutex::default(),
        }
    }

    /// Returns the slot for `key`, starting a background render if there
    /// is none. Must be called inside a Tokio runtime.
    pub fn ensure(&self, key: &str, stimulus: Arc<Frame>, req: PreviewRequest) -> Slot {
        let mut inner = self.inner.lock().expect("cache lock");
        if let Some(slot) = inner.slots.get(key) {
            return slot.clone();
        }
        let (tx, rx) = watch::channel(None);
        tokio::task::spawn_blocking(move || {
            let result = render_png(&stimulus, &req).map(Arc::new).map_err(|e| e.to_string());
            // Nobody listening once the slot is evicted; that is fine.
            let _ = tx.send(Some(result));
        });
        inner.slots.insert(key.to_owned(), rx.clone());
        inner.order.push_back(key.to_owned());
        while inner.order.len() > self.capacity {
            if let Some(old) = inner.order.pop_front() {
                inner.slots.remove(&old);
            }
        }
        rx
    }

    /// The finished render for `key`, if any.
    pub fn ready(&self, key: &str) -> Option<Arc<Vec<u8>>> {
        let inner = self.inner.lock().expect("cache lock");
        let slot = inner.slots.get(key)?.borrow();
        match &*slot {
            Some(Ok(png)) => Some(png.clone()),
            _ => None,
        }
    }
}
