//! Array geometries and target kinematics.
//!
//! Everything here lives in a 2-D world: the array axis is the x-axis, the
//! target angle is measured from that axis (broadside is 90 degrees), and
//! velocities are split into a radial component along the array-center line
//! of sight and a transverse component perpendicular to it.

use nalgebra::Vector2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative tolerance used when checking spacing/radius invariants.
pub const SPACING_TOLERANCE: f64 = 1e-9;

pub type Point = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrayKind {
    /// Half-wavelength uniform linear array.
    DenseUla,
    /// One-wavelength uniform linear array.
    SparseUla,
    /// Uniform circular array whose diameter equals the dense ULA aperture.
    Uca,
}

impl ArrayKind {
    pub fn name(self) -> &'static str {
        match self {
            ArrayKind::DenseUla => "dense-ula",
            ArrayKind::SparseUla => "sparse-ula",
            ArrayKind::Uca => "uca",
        }
    }

    pub fn is_linear(self) -> bool {
        !matches!(self, ArrayKind::Uca)
    }

    /// Element spacing in wavelengths required by the linear kinds.
    pub fn spacing_in_wavelengths(self) -> Option<f64> {
        match self {
            ArrayKind::DenseUla => Some(0.5),
            ArrayKind::SparseUla => Some(1.0),
            ArrayKind::Uca => None,
        }
    }
}

impl std::fmt::Display for ArrayKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    kind: ArrayKind,
    wavelength: f64,
    spacing: Option<f64>,
    radius: Option<f64>,
    orientation: f64,
    positions: Vec<Point>,
}

/// Radius of the circular array whose diameter matches a dense ULA of the
/// same element count.
pub fn aperture_matched_radius(elements: usize, wavelength: f64) -> f64 {
    (elements.saturating_sub(1) as f64) * wavelength / 2.0 / 2.0
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= SPACING_TOLERANCE * b.abs().max(f64::MIN_POSITIVE)
}

/// Collects every geometry invariant violated by the given parameters.
///
/// `spacing` applies to the linear kinds, `radius` to the UCA; a `None`
/// means "use the value implied by the kind".
pub fn geometry_violations(
    kind: ArrayKind,
    elements: usize,
    wavelength: f64,
    spacing: Option<f64>,
    radius: Option<f64>,
) -> Vec<String> {
    let mut out = Vec::new();
    if elements == 0 {
        out.push("element count must be at least 1".to_string());
    }
    if !(wavelength.is_finite() && wavelength > 0.0) {
        out.push(format!("wavelength must be positive and finite, got {wavelength}"));
        return out;
    }
    match kind {
        ArrayKind::DenseUla | ArrayKind::SparseUla => {
            if radius.is_some() {
                out.push(format!("{kind} does not take a radius"));
            }
            if let Some(d) = spacing {
                let want = kind.spacing_in_wavelengths().unwrap() * wavelength;
                if !(d.is_finite() && d > 0.0) {
                    out.push(format!("spacing must be positive, got {d}"));
                } else if !close(d, want) {
                    out.push(format!(
                        "{kind} requires spacing {} wavelength ({want} m), got {d} m",
                        kind.spacing_in_wavelengths().unwrap()
                    ));
                }
            }
        }
        ArrayKind::Uca => {
            if spacing.is_some() {
                out.push("uca does not take a spacing".to_string());
            }
            if elements == 1 {
                out.push("uca needs at least 2 elements for a positive radius".to_string());
            }
            if let Some(r) = radius {
                let want = aperture_matched_radius(elements, wavelength);
                if !(r.is_finite() && r > 0.0) {
                    out.push(format!("radius must be positive, got {r}"));
                } else if elements > 1 && !close(r, want) {
                    out.push(format!(
                        "uca radius must match the dense-ula aperture ({want} m), got {r} m"
                    ));
                }
            }
        }
    }
    out
}

impl ArrayGeometry {
    /// Builds a geometry of `kind` with the spacing or radius the kind implies.
    pub fn new(kind: ArrayKind, elements: usize, wavelength: f64) -> Result<Self> {
        Self::with_orientation(kind, elements, wavelength, 0.0)
    }

    /// Like [`ArrayGeometry::new`], rotating a UCA so element 0 sits at
    /// `orientation` radians. Ignored for linear arrays.
    pub fn with_orientation(
        kind: ArrayKind,
        elements: usize,
        wavelength: f64,
        orientation: f64,
    ) -> Result<Self> {
        let violations = geometry_violations(kind, elements, wavelength, None, None);
        if !violations.is_empty() {
            return Err(Error::InvalidGeometry(violations.join("; ")));
        }
        if !orientation.is_finite() {
            return Err(Error::InvalidGeometry("orientation must be finite".into()));
        }
        let (spacing, radius, positions) = match kind.spacing_in_wavelengths() {
            Some(s) => {
                let d = s * wavelength;
                (Some(d), None, linear_positions(elements, d))
            }
            None => {
                let r = aperture_matched_radius(elements, wavelength);
                (None, Some(r), circular_positions(elements, r, orientation))
            }
        };
        Ok(Self {
            kind,
            wavelength,
            spacing,
            radius,
            orientation: if kind.is_linear() { 0.0 } else { orientation },
            positions,
        })
    }

    pub fn dense_ula(elements: usize, wavelength: f64) -> Result<Self> {
        Self::new(ArrayKind::DenseUla, elements, wavelength)
    }

    pub fn sparse_ula(elements: usize, wavelength: f64) -> Result<Self> {
        Self::new(ArrayKind::SparseUla, elements, wavelength)
    }

    pub fn uca(elements: usize, wavelength: f64) -> Result<Self> {
        Self::new(ArrayKind::Uca, elements, wavelength)
    }

    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn spacing(&self) -> Option<f64> {
        self.spacing
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    /// Largest distance between two elements.
    pub fn aperture(&self) -> f64 {
        match (self.spacing, self.radius) {
            (Some(d), _) => (self.len() - 1) as f64 * d,
            (_, Some(r)) => 2.0 * r,
            _ => 0.0,
        }
    }
}

fn linear_positions(elements: usize, spacing: f64) -> Vec<Point> {
    let center = (elements as f64 - 1.0) / 2.0;
    (0..elements)
        .map(|n| Point::new((n as f64 - center) * spacing, 0.0))
        .collect()
}

fn circular_positions(elements: usize, radius: f64, orientation: f64) -> Vec<Point> {
    let pitch = std::f64::consts::TAU / elements as f64;
    (0..elements)
        .map(|n| {
            let phi = orientation + pitch * n as f64;
            Point::new(radius * phi.cos(), radius * phi.sin())
        })
        .collect()
}

/// Element coordinates in meters, in index order.
pub fn element_positions(geometry: &ArrayGeometry) -> Vec<Point> {
    geometry.positions.clone()
}

/// Point target with range/angle relative to the array center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub range: f64,
    pub angle: f64,
    pub v_radial: f64,
    pub v_transverse: f64,
    pub gain: Complex64,
}

impl TargetState {
    /// Static unit-gain target.
    pub fn new(range: f64, angle: f64) -> Result<Self> {
        Self::moving(range, angle, 0.0, 0.0)
    }

    pub fn moving(range: f64, angle: f64, v_radial: f64, v_transverse: f64) -> Result<Self> {
        let t = Self {
            range,
            angle,
            v_radial,
            v_transverse,
            gain: Complex64::new(1.0, 0.0),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_gain(mut self, gain: Complex64) -> Self {
        self.gain = gain;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range.is_finite() && self.range > 0.0) {
            return Err(Error::InvalidTarget(format!(
                "range must be positive, got {}",
                self.range
            )));
        }
        if !(self.angle > 0.0 && self.angle < std::f64::consts::PI) {
            return Err(Error::InvalidTarget(format!(
                "angle must lie in (0, pi), got {}",
                self.angle
            )));
        }
        if !(self.v_radial.is_finite() && self.v_transverse.is_finite()) {
            return Err(Error::InvalidTarget("velocity must be finite".into()));
        }
        if !(self.gain.re.is_finite() && self.gain.im.is_finite()) {
            return Err(Error::InvalidTarget("gain must be finite".into()));
        }
        Ok(())
    }

    /// One-way delay r/c.
    pub fn delay(&self) -> f64 {
        self.range / SPEED_OF_LIGHT
    }

    /// Unit vector from the array center towards the target.
    pub fn los_unit(&self) -> Point {
        Point::new(self.angle.cos(), self.angle.sin())
    }

    /// Unit vector perpendicular to the line of sight, pointing towards
    /// increasing angle.
    pub fn transverse_unit(&self) -> Point {
        Point::new(-self.angle.sin(), self.angle.cos())
    }

    pub fn position(&self) -> Point {
        self.los_unit() * self.range
    }

    pub fn velocity(&self) -> Point {
        self.los_unit() * self.v_radial + self.transverse_unit() * self.v_transverse
    }
}

/// How one element sees the target, expressed in the target's line-of-sight
/// frame (radial axis along the center line of sight).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementView {
    /// Element coordinate along the center line of sight.
    pub along: f64,
    /// Element coordinate along the transverse axis.
    pub across: f64,
    /// Euclidean element-to-target distance in meters.
    pub distance: f64,
    /// Cosine of the angle between the element's line of sight and the
    /// center line of sight.
    pub cos_offset: f64,
    /// Matching sine; positive when the element lies on the negative
    /// transverse side.
    pub sin_offset: f64,
}

impl ElementView {
    pub fn new(target: &TargetState, element: &Point) -> Self {
        let along = element.dot(&target.los_unit());
        let across = element.dot(&target.transverse_unit());
        let radial = target.range - along;
        let distance = (radial * radial + across * across).sqrt();
        Self {
            along,
            across,
            distance,
            cos_offset: radial / distance,
            sin_offset: across / distance,
        }
    }

    /// Velocity projected onto this element's line of sight (positive when
    /// the target recedes).
    pub fn doppler_projection(&self, target: &TargetState) -> f64 {
        target.v_radial * self.cos_offset - target.v_transverse * self.sin_offset
    }
}

/// Exact spherical-wave propagation delay from `element` to the target.
pub fn element_delay(target: &TargetState, element: &Point) -> f64 {
    ElementView::new(target, element).distance / SPEED_OF_LIGHT
}

/// Planar-wave (first-order) delay approximation `tau - d_n cos(theta)`
/// generalised to arbitrary element positions.
pub fn planar_delay(target: &TargetState, element: &Point) -> f64 {
    (target.range - element.dot(&target.los_unit())) / SPEED_OF_LIGHT
}

/// Radial velocity seen by `element`; equals `v_radial` at the array center.
pub fn doppler_projection(target: &TargetState, element: &Point) -> f64 {
    ElementView::new(target, element).doppler_projection(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const LAMBDA_60: f64 = 0.005;

    #[test]
    fn dense_pair_is_centered() {
        let g = ArrayGeometry::dense_ula(2, LAMBDA_60).unwrap();
        let p = element_positions(&g);
        assert_eq!(p[0], Point::new(-0.00125, 0.0));
        assert_eq!(p[1], Point::new(0.00125, 0.0));
    }

    #[test]
    fn dense_512_first_offset() {
        let g = ArrayGeometry::dense_ula(512, LAMBDA_60).unwrap();
        assert_relative_eq!(g.positions()[0].x, -0.638750, epsilon = 1e-15);
        assert_relative_eq!(g.positions()[511].x, 0.638750, epsilon = 1e-15);
    }

    #[test]
    fn uca_radius_matches_dense_aperture() {
        let g = ArrayGeometry::uca(512, LAMBDA_60).unwrap();
        assert_relative_eq!(g.radius().unwrap(), 0.638750, epsilon = 1e-15);
        let dense = ArrayGeometry::dense_ula(512, LAMBDA_60).unwrap();
        assert_relative_eq!(g.aperture(), dense.aperture(), epsilon = 1e-15);
        for p in g.positions() {
            assert_relative_eq!(p.norm(), 0.638750, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ArrayGeometry::dense_ula(0, LAMBDA_60).is_err());
        assert!(ArrayGeometry::dense_ula(4, 0.0).is_err());
        assert!(ArrayGeometry::dense_ula(4, -1.0).is_err());
        assert!(ArrayGeometry::uca(1, LAMBDA_60).is_err());
        let v = geometry_violations(ArrayKind::DenseUla, 8, LAMBDA_60, Some(0.003), None);
        assert_eq!(v.len(), 1, "{v:?}");
        let v = geometry_violations(ArrayKind::SparseUla, 8, LAMBDA_60, Some(-1.0), None);
        assert!(v[0].contains("positive"));
        let v = geometry_violations(ArrayKind::Uca, 8, LAMBDA_60, None, Some(0.0));
        assert!(v[0].contains("positive"));
        assert!(geometry_violations(ArrayKind::SparseUla, 8, LAMBDA_60, Some(0.005), None).is_empty());
    }

    #[test]
    fn target_invariants() {
        assert!(TargetState::new(0.0, 1.0).is_err());
        assert!(TargetState::new(1.0, 0.0).is_err());
        assert!(TargetState::new(1.0, PI).is_err());
        let t = TargetState::new(20.0, PI / 2.0).unwrap();
        assert!(t.delay() > 0.0);
    }

    #[test]
    fn delay_at_center_and_broadside() {
        let t = TargetState::new(20.0, PI / 2.0).unwrap();
        let d0 = element_delay(&t, &Point::zeros());
        assert_eq!(d0, 20.0 / SPEED_OF_LIGHT);
        assert_relative_eq!(d0 * 1e9, 66.713, epsilon = 1e-3);
        let d1 = element_delay(&t, &Point::new(0.63875, 0.0));
        let want = (20.0f64.powi(2) + 0.63875f64.powi(2)).sqrt() / SPEED_OF_LIGHT;
        assert_relative_eq!(d1, want, max_relative = 1e-14);
        assert_relative_eq!(d1 * 1e9, 66.747, epsilon = 1e-3);
    }

    #[test]
    fn planar_expansion_error_is_small_at_200m() {
        let t = TargetState::new(200.0, PI / 3.0).unwrap();
        let g = ArrayGeometry::dense_ula(512, LAMBDA_60).unwrap();
        for p in g.positions().iter().filter(|p| p.x != 0.0) {
            let exact = element_delay(&t, p);
            let planar = planar_delay(&t, p);
            let scale = p.x.abs() / SPEED_OF_LIGHT;
            assert!((exact - planar).abs() < 2e-3 * scale);
        }
    }

    #[test]
    fn doppler_projection_examples() {
        let t = TargetState::moving(37.0, 1.1, 3.25, -7.5).unwrap();
        assert_eq!(doppler_projection(&t, &Point::zeros()), 3.25);
        let t = TargetState::moving(5.0, PI / 2.0, 0.0, 10.0).unwrap();
        assert_eq!(doppler_projection(&t, &Point::zeros()), 0.0);
        // explicit vector geometry: velocity (-10, 0), element-to-target
        // direction (-0.63875, 5) normalised
        let q = Point::new(0.63875, 0.0);
        let dir = (t.position() - q).normalize();
        let oracle = t.velocity().dot(&dir);
        let got = doppler_projection(&t, &q);
        assert_relative_eq!(got, oracle, max_relative = 1e-12);
        assert_relative_eq!(got, 1.2672, epsilon = 1e-4);
    }

    #[test]
    fn planar_and_uniform_doppler_limits() {
        let g = ArrayGeometry::dense_ula(512, LAMBDA_60).unwrap();
        for angle in [0.3, PI / 3.0, PI / 2.0, 2.5] {
            // transverse leakage is v_t * x / r, so keep |v_t| modest for the
            // 1e-6 m/s bound at this aperture
            let t = TargetState::moving(1e6, angle, 4.0, 1.0).unwrap();
            for p in g.positions() {
                let gap = (element_delay(&t, p) - planar_delay(&t, p)).abs();
                assert!(gap <= 1e-15, "delay gap {gap}");
                let dv = (doppler_projection(&t, p) - 4.0).abs();
                assert!(dv <= 1e-6, "doppler gap {dv}");
            }
            let fast = TargetState::moving(1e6, angle, 4.0, 9.0).unwrap();
            let slow = TargetState::moving(1e3, angle, 4.0, 9.0).unwrap();
            let worst = |t: &TargetState| {
                g.positions()
                    .iter()
                    .map(|p| (doppler_projection(t, p) - 4.0).abs())
                    .fold(0.0, f64::max)
            };
            assert!(worst(&fast) < 1e-2 * worst(&slow));
        }
    }

    #[test]
    fn uca_rotation_permutes_delays() {
        let g = ArrayGeometry::uca(16, LAMBDA_60).unwrap();
        let pitch = std::f64::consts::TAU / 16.0;
        let a = TargetState::new(3.0, 0.7).unwrap();
        let b = TargetState::new(3.0, 0.7 + pitch).unwrap();
        let mut da: Vec<f64> = g.positions().iter().map(|p| element_delay(&a, p)).collect();
        let mut db: Vec<f64> = g.positions().iter().map(|p| element_delay(&b, p)).collect();
        da.sort_by(f64::total_cmp);
        db.sort_by(f64::total_cmp);
        for (x, y) in da.iter().zip(&db) {
            assert!((x - y).abs() <= 1e-15);
        }
    }

    #[test]
    fn linear_mirror_symmetry() {
        let g = ArrayGeometry::sparse_ula(33, LAMBDA_60).unwrap();
        let a = TargetState::new(4.0, 0.4).unwrap();
        let b = TargetState::new(4.0, PI - 0.4).unwrap();
        let da: Vec<f64> = g.positions().iter().map(|p| element_delay(&a, p)).collect();
        let db: Vec<f64> = g.positions().iter().rev().map(|p| element_delay(&b, p)).collect();
        for (x, y) in da.iter().zip(&db) {
            assert!((x - y).abs() <= 1e-15);
        }
    }
}
