//! RGB images with a stable source identifier.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("image must be at least 1x1, got {width}x{height}")]
    Empty { width: u32, height: u32 },
    #[error("decode {source_id}: {message}")]
    Decode { source_id: String, message: String },
    #[error("encode: {0}")]
    Encode(String),
    #[error("read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// An 8-bit, 3-channel image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pixels: RgbImage,
    source_id: String,
}

impl Image {
    pub fn new(pixels: RgbImage, source_id: impl Into<String>) -> Result<Self, ImageError> {
        if pixels.width() == 0 || pixels.height() == 0 {
            return Err(ImageError::Empty { width: pixels.width(), height: pixels.height() });
        }
        Ok(Image { pixels, source_id: source_id.into() })
    }

    /// Uses the content hash as the source id.
    pub fn from_pixels(pixels: RgbImage) -> Result<Self, ImageError> {
        let mut img = Image::new(pixels, String::new())?;
        img.source_id = format!("sha256:{}", img.content_hash());
        Ok(img)
    }

    pub fn filled(width: u32, height: u32, color: [u8; 3], source_id: impl Into<String>) -> Result<Self, ImageError> {
        Image::new(RgbImage::from_pixel(width, height, Rgb(color)), source_id)
    }

    pub fn open(path: &Path, source_id: impl Into<String>) -> Result<Self, ImageError> {
        let bytes = std::fs::read(path).map_err(|source| ImageError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Image::decode(&bytes, source_id)
    }

    /// Decodes any supported container (PNG here) and converts to RGB8.
    pub fn decode(bytes: &[u8], source_id: impl Into<String>) -> Result<Self, ImageError> {
        let source_id = source_id.into();
        let decoded = image::load_from_memory(bytes).map_err(|e| ImageError::Decode {
            source_id: source_id.clone(),
            message: e.to_string(),
        })?;
        Image::new(decoded.to_rgb8(), source_id)
    }

    pub fn to_png(&self) -> Result<Vec<u8>, ImageError> {
        let mut out = Cursor::new(Vec::new());
        self.pixels
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| ImageError::Encode(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    pub fn pixels(&self) -> &RgbImage {
        &self.pixels
    }

    pub fn into_pixels(self) -> RgbImage {
        self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels.get_pixel(x, y).0
    }

    /// Row-major RGB bytes prefixed by the dimensions.
    pub fn raw_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.pixels.as_raw().len());
        out.extend_from_slice(&self.width().to_le_bytes());
        out.extend_from_slice(&self.height().to_le_bytes());
        out.extend_from_slice(self.pixels.as_raw());
        out
    }

    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.raw_bytes()))
    }

    /// Pixel equality, ignoring the source id.
    pub fn same_pixels(&self, other: &Image) -> bool {
        self.pixels == other.pixels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty() {
        assert!(matches!(Image::new(RgbImage::new(0, 4), "x"), Err(ImageError::Empty { .. })));
    }

    #[test]
    fn png_round_trip_is_lossless() {
        let mut px = RgbImage::new(5, 3);
        for (x, y, p) in px.enumerate_pixels_mut() {
            *p = Rgb([x as u8 * 40, y as u8 * 70, 200]);
        }
        let img = Image::new(px, "a").unwrap();
        let back = Image::decode(&img.to_png().unwrap(), "a").unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn hash_depends_on_shape() {
        let a = Image::filled(2, 3, [1, 2, 3], "a").unwrap();
        let b = Image::filled(3, 2, [1, 2, 3], "a").unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn garbage_does_not_decode() {
        assert!(matches!(Image::decode(b"not a png", "x"), Err(ImageError::Decode { .. })));
    }
}
