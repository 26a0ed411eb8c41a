use crate::color;
use crate::error::{Error, Result};
use crate::field::FieldMap;

/// A display-encoded RGB image with its linear luminance.
///
/// Channel values are kept in `[0, 1]`. The luminance is derived on
/// construction and the pixels are immutable afterwards, so the two always
/// agree.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    rgb: Vec<[f32; 3]>,
    luminance: FieldMap,
}

impl Frame {
    pub fn new(width: usize, height: usize, rgb: Vec<[f32; 3]>) -> Result<Self> {
        if rgb.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (rgb.len(), 1),
            });
        }
        if rgb.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("pixel values must lie in [0, 1]".into()));
        }
        let luminance = FieldMap::from_vec(
            width,
            height,
            rgb.iter().map(|&p| color::encoded_luminance(p)).collect(),
        )?;
        Ok(Self {
            width,
            height,
            rgb,
            luminance,
        })
    }

    /// Builds a frame, clamping every channel into `[0, 1]`.
    pub fn from_clamped(width: usize, height: usize, mut rgb: Vec<[f32; 3]>) -> Result<Self> {
        for v in rgb.iter_mut().flatten() {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(width, height, rgb)
    }

    /// Gray frame from display-encoded values.
    pub fn from_gray(gray: &FieldMap) -> Result<Self> {
        Self::from_clamped(
            gray.width(),
            gray.height(),
            gray.data().iter().map(|&g| [g, g, g]).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.rgb
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        self.rgb[y * self.width + x]
    }

    pub fn into_pixels(self) -> Vec<[f32; 3]> {
        self.rgb
    }

    /// Linear luminance per pixel.
    pub fn luminance(&self) -> &FieldMap {
        &self.luminance
    }

    /// One display-encoded channel as a field.
    pub fn channel(&self, c: usize) -> FieldMap {
        FieldMap::from_vec(self.width, self.height, self.rgb.iter().map(|p| p[c]).collect()).expect("dims")
    }

    /// Per-pixel minimum and maximum over the display-encoded channels.
    pub fn channel_extrema(&self) -> (FieldMap, FieldMap) {
        let min = self.rgb.iter().map(|p| p[0].min(p[1]).min(p[2])).collect();
        let max = self.rgb.iter().map(|p| p[0].max(p[1]).max(p[2])).collect();
        (
            FieldMap::from_vec(self.width, self.height, min).expect("dims"),
            FieldMap::from_vec(self.width, self.height, max).expect("dims"),
        )
    }

    /// Linear RGB planes.
    pub fn linear_planes(&self) -> [FieldMap; 3] {
        std::array::from_fn(|c| {
            FieldMap::from_vec(
                self.width,
                self.height,
                self.rgb.iter().map(|p| color::srgb_to_linear(p[c])).collect(),
            )
            .expect("dims")
        })
    }

    /// Recomputes the luminance from the pixels and compares it with the
    /// stored copy.
    pub fn is_consistent(&self) -> bool {
        self.rgb
            .iter()
            .zip(self.luminance.data())
            .all(|(&p, &l)| color::encoded_luminance(p).to_bits() == l.to_bits())
    }
}
