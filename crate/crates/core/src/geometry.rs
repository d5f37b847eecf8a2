//! Camera transforms that condition the view synthesizer.
//!
//! A [`ViewSpec`] pairs a relative rotation with a translation and a label
//! naming the viewpoint. Every constructor validates that the rotation is
//! proper and orthonormal, so downstream code never re-checks.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Elementwise tolerance for orthonormality and determinant checks.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Looser tolerance applied to matrices read back from a 9-digit record.
const RECORD_TOLERANCE: f64 = 1e-8;

/// Decimal digits used when a spec is written to its external record.
pub const RECORD_DIGITS: usize = 9;

pub const RANDOM_AZIMUTH_RANGE: (f64, f64) = (-90.0, 90.0);
pub const RANDOM_ELEVATION_RANGE: (f64, f64) = (-20.0, 20.0);

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("rotation is not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("rotation is not proper (determinant {0})")]
    NotProper(f64),
    #[error("view record: {0}")]
    Record(String),
}

pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    let mut out = [0.0; 3];
    for (i, cell) in out.iter_mut().enumerate() {
        *cell = (0..3).map(|k| a[i][k] * v[k]).sum();
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[j][i];
        }
    }
    out
}

pub fn determinant(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Largest elementwise deviation of `a` from `b`.
pub fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn check_rotation(r: &Mat3, tol: f64) -> Result<(), GeometryError> {
    if r.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GeometryError::InvalidArgument("rotation has non-finite entries".into()));
    }
    let dev = max_abs_diff(&mat_mul(&transpose(r), r), &IDENTITY);
    if dev > tol {
        return Err(GeometryError::NotOrthonormal(dev));
    }
    let det = determinant(r);
    if (det - 1.0).abs() > tol {
        return Err(GeometryError::NotProper(det));
    }
    Ok(())
}

/// Rotation about the vertical (Y) axis by `angle_deg` degrees.
pub fn rotation_about_y(angle_deg: f64) -> Result<Mat3, GeometryError> {
    if !angle_deg.is_finite() {
        return Err(GeometryError::InvalidArgument(format!("angle {angle_deg} is not finite")));
    }
    let (s, c) = angle_deg.to_radians().sin_cos();
    Ok([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
}

/// Rotation about the horizontal (X) axis by `angle_deg` degrees.
pub fn rotation_about_x(angle_deg: f64) -> Result<Mat3, GeometryError> {
    if !angle_deg.is_finite() {
        return Err(GeometryError::InvalidArgument(format!("angle {angle_deg} is not finite")));
    }
    let (s, c) = angle_deg.to_radians().sin_cos();
    Ok([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewLabel {
    Origin,
    Left,
    Right,
    Random,
    /// Result of composing two specs; carries no generating seed.
    Composite,
}

impl ViewLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewLabel::Origin => "origin",
            ViewLabel::Left => "left",
            ViewLabel::Right => "right",
            ViewLabel::Random => "random",
            ViewLabel::Composite => "composite",
        }
    }

    /// Human-readable panel name used in prompts.
    pub fn display_name(self) -> &'static str {
        match self {
            ViewLabel::Origin => "original view",
            ViewLabel::Left => "left view",
            ViewLabel::Right => "right view",
            ViewLabel::Random => "random view",
            ViewLabel::Composite => "composite view",
        }
    }
}

impl fmt::Display for ViewLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ViewLabel {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "origin" => Ok(ViewLabel::Origin),
            "left" => Ok(ViewLabel::Left),
            "right" => Ok(ViewLabel::Right),
            "random" => Ok(ViewLabel::Random),
            "composite" => Ok(ViewLabel::Composite),
            other => Err(GeometryError::Record(format!("unknown view label {other:?}"))),
        }
    }
}

/// Parameters of the fixed left/right viewpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViewGeometry {
    /// Magnitude of the left/right yaw, in degrees.
    pub canonical_angle_deg: f64,
    /// Sideways translation for left/right views, in normalized scene units.
    pub translation_magnitude: f64,
}

impl Default for ViewGeometry {
    fn default() -> Self {
        ViewGeometry { canonical_angle_deg: 45.0, translation_magnitude: 0.5 }
    }
}

/// A validated camera transform with its viewpoint label.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSpec {
    rotation: Mat3,
    translation: Vec3,
    label: ViewLabel,
    azimuth_deg: f64,
    elevation_deg: f64,
    seed: Option<u64>,
}

impl ViewSpec {
    pub fn origin() -> Self {
        ViewSpec {
            rotation: IDENTITY,
            translation: [0.0; 3],
            label: ViewLabel::Origin,
            azimuth_deg: 0.0,
            elevation_deg: 0.0,
            seed: None,
        }
    }

    /// Left or right view under `geometry`. Left yaws by `+angle` and shifts
    /// the camera towards negative x; right mirrors it.
    pub fn canonical(label: ViewLabel, geometry: &ViewGeometry) -> Result<Self, GeometryError> {
        let (azimuth, tx) = match label {
            ViewLabel::Left => (geometry.canonical_angle_deg, -geometry.translation_magnitude),
            ViewLabel::Right => (-geometry.canonical_angle_deg, geometry.translation_magnitude),
            other => {
                return Err(GeometryError::InvalidArgument(format!(
                    "{other} is not a canonical view (expected left or right)"
                )))
            }
        };
        if !tx.is_finite() {
            return Err(GeometryError::InvalidArgument("translation magnitude is not finite".into()));
        }
        let spec = ViewSpec {
            rotation: rotation_about_y(azimuth)?,
            translation: [tx, 0.0, 0.0],
            label,
            azimuth_deg: azimuth,
            elevation_deg: 0.0,
            seed: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Seeded random viewpoint: azimuth about Y, then elevation about X.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let azimuth = rng.random_range(RANDOM_AZIMUTH_RANGE.0..=RANDOM_AZIMUTH_RANGE.1);
        let elevation = rng.random_range(RANDOM_ELEVATION_RANGE.0..=RANDOM_ELEVATION_RANGE.1);
        let yaw = rotation_about_y(azimuth).expect("finite");
        let pitch = rotation_about_x(elevation).expect("finite");
        ViewSpec {
            rotation: mat_mul(&pitch, &yaw),
            translation: [0.0; 3],
            label: ViewLabel::Random,
            azimuth_deg: azimuth,
            elevation_deg: elevation,
            seed: Some(seed),
        }
    }

    /// Builds a spec from raw parts, labelled [`ViewLabel::Composite`].
    pub fn from_parts(
        rotation: Mat3,
        translation: Vec3,
        azimuth_deg: f64,
        elevation_deg: f64,
    ) -> Result<Self, GeometryError> {
        let spec = ViewSpec {
            rotation,
            translation,
            label: ViewLabel::Composite,
            azimuth_deg,
            elevation_deg,
            seed: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `a` applied after `b`: rotation `a.R * b.R`, translation `a.R * b.T + a.T`.
    pub fn compose(a: &ViewSpec, b: &ViewSpec) -> Result<Self, GeometryError> {
        a.validate()?;
        b.validate()?;
        let rotation = mat_mul(&a.rotation, &b.rotation);
        let rt = mat_vec(&a.rotation, &b.translation);
        let translation = [rt[0] + a.translation[0], rt[1] + a.translation[1], rt[2] + a.translation[2]];
        let spec = ViewSpec {
            rotation,
            translation,
            label: ViewLabel::Composite,
            azimuth_deg: a.azimuth_deg + b.azimuth_deg,
            elevation_deg: a.elevation_deg + b.elevation_deg,
            seed: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn inverse(&self) -> Self {
        let rotation = transpose(&self.rotation);
        let t = mat_vec(&rotation, &self.translation);
        ViewSpec {
            rotation,
            translation: [-t[0], -t[1], -t[2]],
            label: ViewLabel::Composite,
            azimuth_deg: -self.azimuth_deg,
            elevation_deg: -self.elevation_deg,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        self.validate_with(ROTATION_TOLERANCE)
    }

    fn validate_with(&self, tol: f64) -> Result<(), GeometryError> {
        check_rotation(&self.rotation, tol)?;
        if self.translation.iter().any(|v| !v.is_finite())
            || !self.azimuth_deg.is_finite()
            || !self.elevation_deg.is_finite()
        {
            return Err(GeometryError::InvalidArgument("non-finite translation or angle".into()));
        }
        match self.label {
            ViewLabel::Origin => {
                if self.rotation != IDENTITY
                    || self.translation != [0.0; 3]
                    || self.azimuth_deg != 0.0
                    || self.elevation_deg != 0.0
                {
                    return Err(GeometryError::InvalidArgument("origin spec must be the identity".into()));
                }
            }
            ViewLabel::Random => {
                let seed = self.seed.ok_or_else(|| {
                    GeometryError::InvalidArgument("random spec without a seed".into())
                })?;
                let regenerated = ViewSpec::random(seed);
                if regenerated.rotation != self.rotation || regenerated.translation != self.translation {
                    return Err(GeometryError::InvalidArgument(format!(
                        "random spec does not match its seed {seed}"
                    )));
                }
            }
            _ => {
                if self.seed.is_some() {
                    return Err(GeometryError::InvalidArgument(format!(
                        "{} spec must not carry a seed",
                        self.label
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn label(&self) -> ViewLabel {
        self.label
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_deg
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_origin(&self) -> bool {
        self.label == ViewLabel::Origin
    }

    pub fn to_record(&self) -> ViewRecord {
        let mut rotation = [0.0; 9];
        for (dst, src) in rotation.iter_mut().zip(self.rotation.iter().flatten()) {
            *dst = round_digits(*src);
        }
        ViewRecord {
            label: self.label,
            azimuth_deg: round_digits(self.azimuth_deg),
            elevation_deg: round_digits(self.elevation_deg),
            seed: self.seed,
            rotation,
            translation: self.translation.map(round_digits),
        }
    }

    /// Canonical text form; used verbatim inside cache keys.
    pub fn canonical_string(&self) -> String {
        self.to_record().to_text()
    }

    /// Rebuilds a spec from its record. Labelled specs are regenerated from
    /// their parameters and checked against the stored matrix, so the result
    /// equals the spec that produced the record.
    pub fn from_record(record: &ViewRecord) -> Result<Self, GeometryError> {
        let stored: Mat3 = [
            [record.rotation[0], record.rotation[1], record.rotation[2]],
            [record.rotation[3], record.rotation[4], record.rotation[5]],
            [record.rotation[6], record.rotation[7], record.rotation[8]],
        ];
        let spec = match record.label {
            ViewLabel::Origin => ViewSpec::origin(),
            ViewLabel::Random => {
                let seed = record
                    .seed
                    .ok_or_else(|| GeometryError::Record("random view without seed".into()))?;
                ViewSpec::random(seed)
            }
            ViewLabel::Left | ViewLabel::Right => {
                if record.seed.is_some() {
                    return Err(GeometryError::Record(format!("{} view carries a seed", record.label)));
                }
                let spec = ViewSpec {
                    rotation: rotation_about_y(record.azimuth_deg)?,
                    translation: record.translation,
                    label: record.label,
                    azimuth_deg: record.azimuth_deg,
                    elevation_deg: record.elevation_deg,
                    seed: None,
                };
                if record.elevation_deg != 0.0 {
                    return Err(GeometryError::Record("left/right views have zero elevation".into()));
                }
                spec.validate()?;
                spec
            }
            ViewLabel::Composite => {
                if record.seed.is_some() {
                    return Err(GeometryError::Record("composite view carries a seed".into()));
                }
                let spec = ViewSpec {
                    rotation: stored,
                    translation: record.translation,
                    label: ViewLabel::Composite,
                    azimuth_deg: record.azimuth_deg,
                    elevation_deg: record.elevation_deg,
                    seed: None,
                };
                spec.validate_with(RECORD_TOLERANCE)?;
                return Ok(spec);
            }
        };
        let dev = max_abs_diff(&spec.rotation, &stored);
        if dev > RECORD_TOLERANCE {
            return Err(GeometryError::Record(format!(
                "stored rotation disagrees with {} parameters by {dev:e}",
                record.label
            )));
        }
        let tdev = spec
            .translation
            .iter()
            .zip(record.translation.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if tdev > RECORD_TOLERANCE
            || (spec.azimuth_deg - record.azimuth_deg).abs() > RECORD_TOLERANCE
            || (spec.elevation_deg - record.elevation_deg).abs() > RECORD_TOLERANCE
        {
            return Err(GeometryError::Record(format!(
                "stored parameters disagree with {} spec",
                record.label
            )));
        }
        Ok(spec)
    }
}

fn round_digits(v: f64) -> f64 {
    let scale = 10f64.powi(RECORD_DIGITS as i32);
    let r = (v * scale).round() / scale;
    // fold -0.0 into 0.0 so the text form is stable
    r + 0.0
}

/// Flat external form of a [`ViewSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewRecord {
    pub label: ViewLabel,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub seed: Option<u64>,
    /// Row-major.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl ViewRecord {
    /// `key=value` lines with fixed 9-digit precision.
    pub fn to_text(&self) -> String {
        let join = |vals: &[f64]| {
            vals.iter()
                .map(|v| format!("{:.*}", RECORD_DIGITS, v + 0.0))
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "label={}\nazimuth_deg={:.d$}\nelevation_deg={:.d$}\nseed={}\nrotation={}\ntranslation={}\n",
            self.label,
            self.azimuth_deg + 0.0,
            self.elevation_deg + 0.0,
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            join(&self.rotation),
            join(&self.translation),
            d = RECORD_DIGITS,
        )
    }

    /// Parses the text form produced by [`ViewRecord::to_text`].
    pub fn parse_text(text: &str) -> Result<Self, GeometryError> {
        let mut label = None;
        let mut azimuth = None;
        let mut elevation = None;
        let mut seed = None;
        let mut rotation = None;
        let mut translation = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                GeometryError::Record(format!("line {}: expected key=value", lineno + 1))
            })?;
            let value = value.trim();
            let dup = |k: &str| GeometryError::Record(format!("duplicate key {k}"));
            match key.trim() {
                "label" => {
                    if label.replace(value.parse::<ViewLabel>()?).is_some() {
                        return Err(dup("label"));
                    }
                }
                "azimuth_deg" => {
                    if azimuth.replace(parse_number(value)?).is_some() {
                        return Err(dup("azimuth_deg"));
                    }
                }
                "elevation_deg" => {
                    if elevation.replace(parse_number(value)?).is_some() {
                        return Err(dup("elevation_deg"));
                    }
                }
                "seed" => {
                    let parsed = if value.is_empty() {
                        None
                    } else {
                        Some(value.parse::<u64>().map_err(|e| {
                            GeometryError::Record(format!("seed {value:?}: {e}"))
                        })?)
                    };
                    if seed.replace(parsed).is_some() {
                        return Err(dup("seed"));
                    }
                }
                "rotation" => {
                    if rotation.replace(parse_array::<9>(value)?).is_some() {
                        return Err(dup("rotation"));
                    }
                }
                "translation" => {
                    if translation.replace(parse_array::<3>(value)?).is_some() {
                        return Err(dup("translation"));
                    }
                }
                other => return Err(GeometryError::Record(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| GeometryError::Record(format!("missing key {k}"));
        Ok(ViewRecord {
            label: label.ok_or_else(|| missing("label"))?,
            azimuth_deg: azimuth.ok_or_else(|| missing("azimuth_deg"))?,
            elevation_deg: elevation.ok_or_else(|| missing("elevation_deg"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            rotation: rotation.ok_or_else(|| missing("rotation"))?,
            translation: translation.ok_or_else(|| missing("translation"))?,
        })
    }
}

fn parse_number(s: &str) -> Result<f64, GeometryError> {
    let v: f64 = s
        .parse()
        .map_err(|e| GeometryError::Record(format!("number {s:?}: {e}")))?;
    if !v.is_finite() {
        return Err(GeometryError::Record(format!("number {s:?} is not finite")));
    }
    Ok(v)
}

fn parse_array<const N: usize>(s: &str) -> Result<[f64; N], GeometryError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(GeometryError::Record(format!("expected {N} values, found {}", parts.len())));
    }
    let mut out = [0.0; N];
    for (dst, p) in out.iter_mut().zip(parts) {
        *dst = parse_number(p)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn orthonormal_and_proper(r: &Mat3) -> bool {
        max_abs_diff(&mat_mul(&transpose(r), r), &IDENTITY) <= 1e-9 && (determinant(r) - 1.0).abs() <= 1e-9
    }

    #[test]
    fn zero_rotation_is_identity() {
        assert_eq!(rotation_about_y(0.0).unwrap(), IDENTITY);
    }

    #[test]
    fn half_turn() {
        let r = rotation_about_y(180.0).unwrap();
        let expected = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]];
        assert!(max_abs_diff(&r, &expected) <= 1e-12);
    }

    #[test]
    fn forty_five_degrees() {
        let r = rotation_about_y(45.0).unwrap();
        assert!(orthonormal_and_proper(&r));
        assert_eq!(r[0][0], 45f64.to_radians().cos());
        assert!((r[0][0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn non_finite_angle_rejected() {
        assert!(matches!(rotation_about_y(f64::NAN), Err(GeometryError::InvalidArgument(_))));
        assert!(matches!(rotation_about_y(f64::INFINITY), Err(GeometryError::InvalidArgument(_))));
    }

    #[test]
    fn compose_with_origin_is_identity_element() {
        let left = ViewSpec::canonical(ViewLabel::Left, &ViewGeometry::default()).unwrap();
        let c = ViewSpec::compose(&ViewSpec::origin(), &left).unwrap();
        assert_eq!(c.rotation(), left.rotation());
        assert_eq!(c.translation(), left.translation());
        assert_eq!(c.label(), ViewLabel::Composite);
    }

    #[test]
    fn compose_adds_yaw() {
        let a = ViewSpec::from_parts(rotation_about_y(30.0).unwrap(), [0.0; 3], 30.0, 0.0).unwrap();
        let b = ViewSpec::from_parts(rotation_about_y(15.0).unwrap(), [0.0; 3], 15.0, 0.0).unwrap();
        let c = ViewSpec::compose(&a, &b).unwrap();
        // oracle: closed-form entries of a 45 degree yaw
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [[h, 0.0, h], [0.0, 1.0, 0.0], [-h, 0.0, h]];
        assert!(max_abs_diff(c.rotation(), &expected) <= 1e-9);
    }

    #[test]
    fn compose_with_inverse_cancels() {
        let spec = ViewSpec::random(99);
        let c = ViewSpec::compose(&spec, &spec.inverse()).unwrap();
        assert!(max_abs_diff(c.rotation(), &IDENTITY) <= 1e-9);
        assert!(c.translation().iter().all(|v| v.abs() <= 1e-9));

        let left = ViewSpec::canonical(ViewLabel::Left, &ViewGeometry::default()).unwrap();
        let c = ViewSpec::compose(&left, &left.inverse()).unwrap();
        assert!(max_abs_diff(c.rotation(), &IDENTITY) <= 1e-9);
        assert!(c.translation().iter().all(|v| v.abs() <= 1e-9));
    }

    #[test]
    fn compose_rejects_invalid_input() {
        let bad = ViewSpec {
            rotation: [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
            label: ViewLabel::Composite,
            azimuth_deg: 0.0,
            elevation_deg: 0.0,
            seed: None,
        };
        assert!(ViewSpec::compose(&bad, &ViewSpec::origin()).is_err());
    }

    #[test]
    fn reflection_rejected() {
        let reflect = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(matches!(
            ViewSpec::from_parts(reflect, [0.0; 3], 0.0, 0.0),
            Err(GeometryError::NotProper(_))
        ));
    }

    #[test]
    fn canonical_left_and_right() {
        let g = ViewGeometry::default();
        let left = ViewSpec::canonical(ViewLabel::Left, &g).unwrap();
        let right = ViewSpec::canonical(ViewLabel::Right, &g).unwrap();
        assert_eq!(left.azimuth_deg(), 45.0);
        assert_eq!(right.azimuth_deg(), -45.0);
        assert!(left.translation()[0] < 0.0);
        assert_eq!(left.translation(), &[-0.5, 0.0, 0.0]);
        assert_eq!(right.translation(), &[0.5, 0.0, 0.0]);
        assert!(max_abs_diff(right.rotation(), &transpose(left.rotation())) <= 1e-9);
        left.validate().unwrap();
        right.validate().unwrap();
        assert_eq!(left, ViewSpec::canonical(ViewLabel::Left, &g).unwrap());
        assert!(ViewSpec::canonical(ViewLabel::Random, &g).is_err());
    }

    #[test]
    fn random_views_are_seeded() {
        let a = ViewSpec::random(7);
        let b = ViewSpec::random(7);
        assert_eq!(a, b);
        assert_eq!(a.rotation().map(|r| r.map(f64::to_bits)), b.rotation().map(|r| r.map(f64::to_bits)));
        let c = ViewSpec::random(8);
        assert_ne!(a.azimuth_deg(), c.azimuth_deg());
        a.validate().unwrap();
    }

    #[test]
    fn record_text_round_trip() {
        let g = ViewGeometry { canonical_angle_deg: 30.0, translation_magnitude: 0.3 };
        for spec in [
            ViewSpec::origin(),
            ViewSpec::canonical(ViewLabel::Left, &g).unwrap(),
            ViewSpec::canonical(ViewLabel::Right, &g).unwrap(),
            ViewSpec::random(12345),
        ] {
            let text = spec.canonical_string();
            let record = ViewRecord::parse_text(&text).unwrap();
            assert_eq!(ViewSpec::from_record(&record).unwrap(), spec);
            let json = serde_json::to_string(&spec.to_record()).unwrap();
            let back: ViewRecord = serde_json::from_str(&json).unwrap();
            assert_eq!(ViewSpec::from_record(&back).unwrap(), spec);
        }
    }

    #[test]
    fn canonical_string_has_nine_digits() {
        let left = ViewSpec::canonical(ViewLabel::Left, &ViewGeometry::default()).unwrap();
        let text = left.canonical_string();
        assert!(text.contains("azimuth_deg=45.000000000\n"));
        assert!(text.contains("rotation=0.707106781,0.000000000,0.707106781,"));
        assert!(text.contains("translation=-0.500000000,0.000000000,0.000000000\n"));
        assert!(!text.contains("-0.000000000"));
    }

    #[test]
    fn tampered_record_rejected() {
        let mut record = ViewSpec::random(3).to_record();
        record.rotation[0] += 0.01;
        assert!(ViewSpec::from_record(&record).is_err());
        let mut record = ViewSpec::origin().to_record();
        record.seed = None;
        record.label = ViewLabel::Random;
        assert!(ViewSpec::from_record(&record).is_err());
    }

    #[test]
    fn malformed_text_rejected() {
        assert!(ViewRecord::parse_text("label=left").is_err());
        assert!(ViewRecord::parse_text("nonsense").is_err());
        let text = ViewSpec::origin().canonical_string().replace("rotation=", "rotation=1,");
        assert!(ViewRecord::parse_text(&text).is_err());
    }

    proptest! {
        #[test]
        fn yaw_cancels(a in -720.0f64..720.0) {
            let r = mat_mul(&rotation_about_y(a).unwrap(), &rotation_about_y(-a).unwrap());
            prop_assert!(max_abs_diff(&r, &IDENTITY) <= 1e-9);
        }

        #[test]
        fn random_specs_are_valid(seed in any::<u64>()) {
            let spec = ViewSpec::random(seed);
            prop_assert!(orthonormal_and_proper(spec.rotation()));
            prop_assert!((-90.0..=90.0).contains(&spec.azimuth_deg()));
            prop_assert!((-20.0..=20.0).contains(&spec.elevation_deg()));
            let back = ViewSpec::from_record(&ViewRecord::parse_text(&spec.canonical_string()).unwrap()).unwrap();
            prop_assert_eq!(back, spec);
        }

        #[test]
        fn composite_record_round_trips(a in -180.0f64..180.0, tx in -2.0f64..2.0) {
            let spec = ViewSpec::from_parts(rotation_about_y(a).unwrap(), [tx, 0.0, 0.0], a, 0.0).unwrap();
            let back = ViewSpec::from_record(&spec.to_record()).unwrap();
            prop_assert!(max_abs_diff(back.rotation(), spec.rotation()) <= 1e-9);
            prop_assert_eq!(back.canonical_string(), spec.canonical_string());
        }
    }
}
