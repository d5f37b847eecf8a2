use std::sync::atomic::{AtomicU64, Ordering};

use image::Rgb;

use super::{SynthError, SynthesisBackend, SynthesizerId};
use crate::geometry::{ViewLabel, ViewSpec};
use crate::image::Image;

pub const MARKER_SIZE: u32 = 4;

/// Marker color stamped into the top-left corner of a mock view.
pub fn marker_color(label: ViewLabel) -> Option<[u8; 3]> {
    match label {
        ViewLabel::Left => Some([255, 0, 0]),
        ViewLabel::Right => Some([0, 255, 0]),
        ViewLabel::Random => Some([0, 0, 255]),
        ViewLabel::Origin | ViewLabel::Composite => None,
    }
}

/// Column and row shifts the mock applies for `spec` on a `width`x`height` image.
pub fn mock_shifts(spec: &ViewSpec, width: u32, height: u32) -> (i64, i64) {
    let cols = (f64::from(width) * spec.azimuth_deg() / 360.0).round() as i64;
    let rows = (f64::from(height) * spec.elevation_deg() / 360.0).round() as i64;
    (cols, rows)
}

/// Deterministic stand-in for a novel-view model: cyclic shifts driven by
/// azimuth and elevation, plus a solid label marker in the top-left block.
pub fn mock_synthesize(image: &Image, spec: &ViewSpec) -> Image {
    if spec.is_origin() {
        return image.clone();
    }
    let (w, h) = (image.width(), image.height());
    let (dc, dr) = mock_shifts(spec, w, h);
    let src = image.pixels();
    let mut out = src.clone();
    for (c, r, px) in out.enumerate_pixels_mut() {
        let sc = (i64::from(c) - dc).rem_euclid(i64::from(w)) as u32;
        let sr = (i64::from(r) - dr).rem_euclid(i64::from(h)) as u32;
        *px = *src.get_pixel(sc, sr);
    }
    if let Some(color) = marker_color(spec.label()) {
        for r in 0..MARKER_SIZE.min(h) {
            for c in 0..MARKER_SIZE.min(w) {
                out.put_pixel(c, r, Rgb(color));
            }
        }
    }
    Image::new(out, format!("{}#{}", image.source_id(), spec.label())).expect("same dimensions")
}

pub struct MockSynthesizer {
    id: SynthesizerId,
    calls: AtomicU64,
}

impl MockSynthesizer {
    pub fn new() -> Self {
        MockSynthesizer { id: SynthesizerId::mock(), calls: AtomicU64::new(0) }
    }
}

impl Default for MockSynthesizer {
    fn default() -> Self {
        Self::new()
    }
}

impl SynthesisBackend for MockSynthesizer {
    fn id(&self) -> &SynthesizerId {
        &self.id
    }

    fn synthesize(&self, image: &Image, spec: &ViewSpec) -> Result<Image, SynthError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(mock_synthesize(image, spec))
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rotation_about_y, ViewGeometry};
    use image::RgbImage;

    fn gradient(w: u32, h: u32) -> Image {
        let mut px = RgbImage::new(w, h);
        for (x, y, p) in px.enumerate_pixels_mut() {
            *p = Rgb([(x % 251) as u8, (y % 241) as u8, ((x * 7 + y * 13) % 256) as u8]);
        }
        Image::new(px, "grad").unwrap()
    }

    #[test]
    fn origin_is_identity() {
        let img = gradient(17, 9);
        assert_eq!(mock_synthesize(&img, &ViewSpec::origin()), img);
    }

    #[test]
    fn azimuth_shifts_columns() {
        let img = gradient(360, 20);
        let spec = ViewSpec::from_parts(rotation_about_y(45.0).unwrap(), [0.0; 3], 45.0, 0.0).unwrap();
        let out = mock_synthesize(&img, &spec);
        for r in 0..20 {
            for c in 0..360 {
                let expected = img.pixel((c + 360 - 45) % 360, r);
                assert_eq!(out.pixel(c, r), expected, "pixel ({r}, {c})");
            }
        }
    }

    #[test]
    fn left_view_carries_red_marker() {
        let img = gradient(64, 64);
        let left = ViewSpec::canonical(ViewLabel::Left, &ViewGeometry::default()).unwrap();
        let out = mock_synthesize(&img, &left);
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(out.pixel(c, r), [255, 0, 0]);
            }
        }
        // 64 * 45 / 360 = 8 columns
        assert_eq!(out.pixel(10, 10), img.pixel(2, 10));
        assert_eq!(mock_synthesize(&img, &left), out);
    }

    #[test]
    fn marker_clipped_on_tiny_images() {
        let img = gradient(2, 1);
        let out = mock_synthesize(&img, &ViewSpec::random(1));
        assert_eq!(out.pixel(0, 0), [0, 0, 255]);
        assert_eq!(out.pixel(1, 0), [0, 0, 255]);
    }

    #[test]
    fn counter_increments() {
        let m = MockSynthesizer::new();
        let img = gradient(8, 8);
        m.synthesize(&img, &ViewSpec::random(2)).unwrap();
        m.synthesize(&img, &ViewSpec::random(2)).unwrap();
        assert_eq!(m.calls(), 2);
    }
}
