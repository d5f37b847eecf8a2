//! View configurations and horizontal-strip composites.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use image::imageops::{self, FilterType};
use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{ViewGeometry, ViewLabel, ViewSpec};
use crate::image::Image;
use crate::synth::{SynthError, SynthesizerId, ViewSynthesizer};

/// One row of the view-combination matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViewConfiguration {
    #[serde(rename = "ORIGIN")]
    Origin,
    #[serde(rename = "L_V")]
    LeftView,
    #[serde(rename = "R_V")]
    RightView,
    #[serde(rename = "RA_V")]
    RandomView,
    #[serde(rename = "M_V")]
    MultiView,
    #[serde(rename = "ORIGIN_PLUS_LV")]
    OriginLeft,
    #[serde(rename = "ORIGIN_PLUS_LV_RV")]
    OriginLeftRight,
    #[serde(rename = "ORIGIN_PLUS_MV")]
    OriginMulti,
}

impl ViewConfiguration {
    pub const ALL: [ViewConfiguration; 8] = [
        ViewConfiguration::Origin,
        ViewConfiguration::LeftView,
        ViewConfiguration::RightView,
        ViewConfiguration::RandomView,
        ViewConfiguration::MultiView,
        ViewConfiguration::OriginLeft,
        ViewConfiguration::OriginLeftRight,
        ViewConfiguration::OriginMulti,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ViewConfiguration::Origin => "ORIGIN",
            ViewConfiguration::LeftView => "L_V",
            ViewConfiguration::RightView => "R_V",
            ViewConfiguration::RandomView => "RA_V",
            ViewConfiguration::MultiView => "M_V",
            ViewConfiguration::OriginLeft => "ORIGIN_PLUS_LV",
            ViewConfiguration::OriginLeftRight => "ORIGIN_PLUS_LV_RV",
            ViewConfiguration::OriginMulti => "ORIGIN_PLUS_MV",
        }
    }

    /// Short label used in report tables and charts.
    pub fn display(self) -> &'static str {
        match self {
            ViewConfiguration::Origin => "Origin",
            ViewConfiguration::LeftView => "L-V",
            ViewConfiguration::RightView => "R-V",
            ViewConfiguration::RandomView => "Ra-V",
            ViewConfiguration::MultiView => "M-V",
            ViewConfiguration::OriginLeft => "Origin + L-V",
            ViewConfiguration::OriginLeftRight => "Origin + L-V + R-V",
            ViewConfiguration::OriginMulti => "Origin + M-V",
        }
    }

    /// Members in canonical order: origin first when present, then left, right, random.
    pub fn members(self) -> &'static [ViewLabel] {
        use ViewLabel::*;
        match self {
            ViewConfiguration::Origin => &[Origin],
            ViewConfiguration::LeftView => &[Left],
            ViewConfiguration::RightView => &[Right],
            ViewConfiguration::RandomView => &[Random],
            ViewConfiguration::MultiView => &[Left, Right, Random],
            ViewConfiguration::OriginLeft => &[Origin, Left],
            ViewConfiguration::OriginLeftRight => &[Origin, Left, Right],
            ViewConfiguration::OriginMulti => &[Origin, Left, Right, Random],
        }
    }

    pub fn includes_original(self) -> bool {
        self.members().contains(&ViewLabel::Origin)
    }

    pub fn is_multi_view(self) -> bool {
        self.members().len() > 1
    }

    pub fn uses_random_view(self) -> bool {
        self.members().contains(&ViewLabel::Random)
    }
}

impl fmt::Display for ViewConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("unknown view configuration {0:?}")]
pub struct UnknownConfiguration(pub String);

impl FromStr for ViewConfiguration {
    type Err = UnknownConfiguration;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ViewConfiguration::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| UnknownConfiguration(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StitchLayout {
    pub target_height: u32,
    pub separator_width: u32,
    pub separator_color: [u8; 3],
}

impl Default for StitchLayout {
    fn default() -> Self {
        StitchLayout { target_height: 512, separator_width: 8, separator_color: [255, 255, 255] }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StitchError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("example {example_id}: {source}")]
    Synthesis {
        example_id: String,
        #[source]
        source: SynthError,
    },
}

/// Width a panel of `width`x`height` takes once scaled to `target_height`.
pub fn scaled_width(width: u32, height: u32, target_height: u32) -> u32 {
    if height == target_height {
        return width;
    }
    let w = (u64::from(width) * u64::from(target_height) + u64::from(height) / 2) / u64::from(height);
    (w as u32).max(1)
}

/// Concatenates `images` left to right at a common height with separator
/// bars between neighbours. Panels already at `target_height` are copied
/// untouched; others are resampled with a bicubic filter.
pub fn stitch(images: &[&Image], layout: &StitchLayout) -> Result<Image, StitchError> {
    if images.is_empty() {
        return Err(StitchError::InvalidArgument("nothing to stitch".into()));
    }
    if layout.target_height == 0 {
        return Err(StitchError::InvalidArgument("target height must be at least 1".into()));
    }
    let th = layout.target_height;
    let widths: Vec<u32> = images.iter().map(|i| scaled_width(i.width(), i.height(), th)).collect();
    let gaps = layout.separator_width * (images.len() as u32 - 1);
    let total = widths.iter().sum::<u32>() + gaps;
    let mut canvas = RgbImage::from_pixel(total, th, Rgb(layout.separator_color));
    let mut x = 0i64;
    for (img, &w) in images.iter().zip(&widths) {
        if img.height() == th {
            imageops::replace(&mut canvas, img.pixels(), x, 0);
        } else {
            let scaled = imageops::resize(img.pixels(), w, th, FilterType::CatmullRom);
            imageops::replace(&mut canvas, &scaled, x, 0);
        }
        x += i64::from(w) + i64::from(layout.separator_width);
    }
    let mut h = Sha256::new();
    for img in images {
        h.update(img.source_id().as_bytes());
        h.update([0]);
    }
    let id = format!("stitched:{}", &hex::encode(h.finalize())[..16]);
    Ok(Image::new(canvas, id).expect("non-empty canvas"))
}

/// The original image, its synthesized views and their composite.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewBundle {
    pub example_id: String,
    pub per_view: BTreeMap<ViewLabel, Image>,
    pub stitched: Image,
    pub configuration: ViewConfiguration,
}

/// Random-view seed for one source image under the run-level seed. Keyed
/// by image rather than record so every question about an image shares
/// the same random view.
pub fn image_seed(base: u64, source_id: &str) -> u64 {
    crate::derive_seed(base, source_id)
}

/// Builds bundles for one synthesizer under fixed geometry and layout.
#[derive(Clone)]
pub struct BundleBuilder<'a> {
    pub synthesizer: &'a ViewSynthesizer,
    pub synthesizer_id: SynthesizerId,
    pub geometry: ViewGeometry,
    pub layout: StitchLayout,
    /// Run-level seed for random views; required by configurations that use one.
    pub random_seed: Option<u64>,
}

impl BundleBuilder<'_> {
    pub fn spec_for(&self, label: ViewLabel, source_id: &str) -> Result<ViewSpec, StitchError> {
        let invalid = |m: String| StitchError::InvalidArgument(m);
        match label {
            ViewLabel::Origin => Ok(ViewSpec::origin()),
            ViewLabel::Left | ViewLabel::Right => {
                ViewSpec::canonical(label, &self.geometry).map_err(|e| invalid(e.to_string()))
            }
            ViewLabel::Random => {
                let base = self
                    .random_seed
                    .ok_or_else(|| invalid("random view requested without a seed".into()))?;
                Ok(ViewSpec::random(image_seed(base, source_id)))
            }
            ViewLabel::Composite => Err(invalid("composite views are not part of any configuration".into())),
        }
    }

    pub fn build(
        &self,
        example_id: &str,
        original: &Image,
        configuration: ViewConfiguration,
    ) -> Result<ViewBundle, StitchError> {
        let mut per_view = BTreeMap::new();
        for &label in configuration.members() {
            let spec = self.spec_for(label, original.source_id())?;
            let view = self
                .synthesizer
                .synthesize(original, &spec, &self.synthesizer_id)
                .map_err(|source| StitchError::Synthesis { example_id: example_id.to_string(), source })?;
            per_view.insert(label, view);
        }
        let members = configuration.members();
        let stitched = if members.len() == 1 {
            per_view[&members[0]].clone()
        } else {
            let ordered: Vec<&Image> = members.iter().map(|l| &per_view[l]).collect();
            stitch(&ordered, &self.layout)?
        };
        Ok(ViewBundle { example_id: example_id.to_string(), per_view, stitched, configuration })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(w: u32, h: u32, c: [u8; 3]) -> Image {
        Image::filled(w, h, c, format!("{c:?}")).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for c in ViewConfiguration::ALL {
            assert_eq!(c.name().parse::<ViewConfiguration>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.name()));
        }
        assert!("LV".parse::<ViewConfiguration>().is_err());
    }

    #[test]
    fn member_sets() {
        use ViewLabel::*;
        assert_eq!(ViewConfiguration::MultiView.members(), &[Left, Right, Random]);
        assert!(!ViewConfiguration::MultiView.includes_original());
        assert_eq!(ViewConfiguration::OriginMulti.members(), &[Origin, Left, Right, Random]);
        for c in ViewConfiguration::ALL {
            let synthesized = c.members().iter().filter(|l| **l != Origin).count();
            if !c.is_multi_view() && c != ViewConfiguration::Origin {
                assert_eq!(synthesized, 1);
            }
        }
    }

    #[test]
    fn single_member_is_identity() {
        let a = solid(256, 256, [1, 2, 3]);
        let layout = StitchLayout { target_height: 256, ..Default::default() };
        let out = stitch(&[&a], &layout).unwrap();
        assert!(out.same_pixels(&a));
    }

    #[test]
    fn two_members_with_separator() {
        let a = solid(256, 256, [10, 0, 0]);
        let b = solid(256, 256, [0, 10, 0]);
        let layout = StitchLayout { target_height: 256, ..Default::default() };
        let out = stitch(&[&a, &b], &layout).unwrap();
        assert_eq!((out.width(), out.height()), (256 + 8 + 256, 256));
        assert_eq!(out.pixel(0, 0), [10, 0, 0]);
        assert_eq!(out.pixel(255, 255), [10, 0, 0]);
        assert_eq!(out.pixel(256, 100), [255, 255, 255]);
        assert_eq!(out.pixel(263, 100), [255, 255, 255]);
        assert_eq!(out.pixel(264, 0), [0, 10, 0]);
    }

    #[test]
    fn four_members_width() {
        let imgs: Vec<Image> = (0..4).map(|i| solid(256, 256, [i, i, i])).collect();
        let refs: Vec<&Image> = imgs.iter().collect();
        let layout = StitchLayout { target_height: 256, ..Default::default() };
        assert_eq!(stitch(&refs, &layout).unwrap().width(), 4 * 256 + 3 * 8);
    }

    #[test]
    fn scales_to_target_height() {
        let a = solid(100, 50, [5, 5, 5]);
        let b = solid(30, 60, [6, 6, 6]);
        let layout = StitchLayout { target_height: 120, separator_width: 4, ..Default::default() };
        let out = stitch(&[&a, &b], &layout).unwrap();
        assert_eq!(out.height(), 120);
        assert_eq!(out.width(), 240 + 4 + 60);
        assert_eq!(out.pixel(120, 60), [5, 5, 5]);
    }

    #[test]
    fn rejects_empty_input() {
        assert!(stitch(&[], &StitchLayout::default()).is_err());
        let a = solid(2, 2, [0, 0, 0]);
        let layout = StitchLayout { target_height: 0, ..Default::default() };
        assert!(stitch(&[&a], &layout).is_err());
    }

    #[test]
    fn image_seeds_differ_per_image() {
        assert_eq!(image_seed(7, "a"), image_seed(7, "a"));
        assert_ne!(image_seed(7, "a"), image_seed(7, "b"));
        assert_ne!(image_seed(7, "a"), image_seed(8, "a"));
    }
}
