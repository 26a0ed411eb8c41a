//! sRGB transfer function and luminance.

/// Rec. 709 luminance weights applied to linear RGB.
pub const LUMA_WEIGHTS: [f32; 3] = [0.2126, 0.7152, 0.0722];

#[inline]
pub fn srgb_to_linear(v: f32) -> f32 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
pub fn linear_to_srgb(v: f32) -> f32 {
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
pub fn luminance(linear: [f32; 3]) -> f32 {
    LUMA_WEIGHTS[0] * linear[0] + LUMA_WEIGHTS[1] * linear[1] + LUMA_WEIGHTS[2] * linear[2]
}

/// Linear luminance of a display-encoded pixel.
#[inline]
pub fn encoded_luminance(rgb: [f32; 3]) -> f32 {
    luminance(rgb.map(srgb_to_linear))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_maps_to_degamma() {
        for g in [0.0f32, 0.02, 0.2, 0.5, 0.73, 1.0] {
            let l = encoded_luminance([g, g, g]);
            assert!((l - srgb_to_linear(g)).abs() < 1e-6, "{g}");
        }
    }

    #[test]
    fn transfer_round_trip() {
        for i in 0..=255 {
            let v = i as f32 / 255.0;
            assert!((linear_to_srgb(srgb_to_linear(v)) - v).abs() < 1e-5);
        }
    }
}
