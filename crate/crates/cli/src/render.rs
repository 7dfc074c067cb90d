//! BEV heatmaps as binary PPM (P6) images with the jet colormap.
//!
//! Jet is the 4-segment piecewise-linear map over `v` in [0, 1]:
//! `R = clamp(1.5 - |4v - 3|)`, `G = clamp(1.5 - |4v - 2|)`, `B = clamp(1.5 - |4v - 1|)`, each
//! scaled by 255 and rounded half away from zero. The endpoints are `v = 0 -> (0, 0, 128)` (dark
//! blue) and `v = 1 -> (128, 0, 0)` (dark red); `v = 0.5 -> (128, 255, 128)`.
//!
//! Orientation: the top image row is the largest x (forward), the leftmost column the largest y
//! (left of the sensor), so the picture reads like a top-down view with the sensor at the bottom.

use radsynth_core::grid::BevMap;

pub fn jet(v: f64) -> [u8; 3] {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let ch = |c: f64| ((1.5 - (4.0 * v - c).abs()).clamp(0.0, 1.0) * 255.0).round() as u8;
    [ch(3.0), ch(2.0), ch(1.0)]
}

/// Encodes `map` (values clamped to [0, 1]) as a P6 image `cols` wide and `rows` high.
pub fn render_ppm(map: &BevMap) -> Vec<u8> {
    let (h, w) = (map.rows, map.cols);
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(3 * w * h);
    for r in 0..h {
        for c in 0..w {
            out.extend_from_slice(&jet(map.get(h - 1 - r, w - 1 - c)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(jet(0.0), [0, 0, 128]);
        assert_eq!(jet(1.0), [128, 0, 0]);
        assert_eq!(jet(0.5), [128, 255, 128]);
        assert_eq!(jet(-3.0), jet(0.0));
        assert_eq!(jet(7.0), jet(1.0));
    }

    #[test]
    fn orientation_puts_forward_up_and_left_left() {
        let mut data = vec![0.0; 9];
        data[2 * 3 + 2] = 1.0; // x index 2 (far), y index 2 (left)
        let img = render_ppm(&BevMap::new(3, 3, data).unwrap());
        let header = b"P6\n3 3\n255\n".len();
        assert_eq!(&img[header..header + 3], &[128, 0, 0]);
    }
}
