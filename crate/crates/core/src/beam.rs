//! Near-field beamfocusing (spatial, one subcarrier) versus wideband
//! temporal beamforming (one antenna, many subcarriers).
//!
//! Gains are `|w^T a|^2` where `a` is the unit-modulus steering vector of a
//! probe point and `w` already carries the conjugate focal phase.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::OfdmGrid;
use crate::error::{Error, Result};
use crate::geometry::{element_delay, ArrayGeometry, TargetState, SPEED_OF_LIGHT};
use crate::format::Num;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeamKind {
    SpatialFocusing,
    TemporalBeamforming,
}

impl BeamKind {
    pub fn name(self) -> &'static str {
        match self {
            BeamKind::SpatialFocusing => "focusing",
            BeamKind::TemporalBeamforming => "temporal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BeamWeights {
    Focusing {
        geometry: ArrayGeometry,
        frequency: f64,
        focal_range: f64,
        focal_angle: f64,
        coefficients: Vec<Complex64>,
    },
    Temporal {
        grid: OfdmGrid,
        focal_delay: f64,
        coefficients: Vec<Complex64>,
    },
}

/// Conjugate-phase weights focusing `geometry` on `(range, angle)` at
/// frequency `frequency`.
pub fn focusing_weights(geometry: &ArrayGeometry, focal: (f64, f64), frequency: f64) -> Result<BeamWeights> {
    if !(frequency.is_finite() && frequency > 0.0) {
        return Err(Error::InvalidInput(format!("frequency must be positive, got {frequency}")));
    }
    let target = TargetState::new(focal.0, focal.1)?;
    let scale = 1.0 / (geometry.len() as f64).sqrt();
    let coefficients = geometry
        .positions()
        .iter()
        .map(|q| Complex64::from_polar(scale, TAU * frequency * element_delay(&target, q)))
        .collect();
    Ok(BeamWeights::Focusing {
        geometry: geometry.clone(),
        frequency,
        focal_range: focal.0,
        focal_angle: focal.1,
        coefficients,
    })
}

/// Subcarrier weights steering a single antenna towards `focal_delay`.
/// With one subcarrier the result has no delay selectivity.
pub fn temporal_weights(grid: &OfdmGrid, focal_delay: f64) -> Result<BeamWeights> {
    if !(focal_delay.is_finite() && focal_delay > 0.0) {
        return Err(Error::InvalidInput(format!("focal delay must be positive, got {focal_delay}")));
    }
    let scale = 1.0 / (grid.subcarriers as f64).sqrt();
    let coefficients = grid
        .frequencies()
        .iter()
        .map(|f| Complex64::from_polar(scale, TAU * f * focal_delay))
        .collect();
    Ok(BeamWeights::Temporal { grid: *grid, focal_delay, coefficients })
}

impl BeamWeights {
    pub fn kind(&self) -> BeamKind {
        match self {
            BeamWeights::Focusing { .. } => BeamKind::SpatialFocusing,
            BeamWeights::Temporal { .. } => BeamKind::TemporalBeamforming,
        }
    }

    pub fn coefficients(&self) -> &[Complex64] {
        match self {
            BeamWeights::Focusing { coefficients, .. } | BeamWeights::Temporal { coefficients, .. } => {
                coefficients
            }
        }
    }

    /// Focal point expressed as a distance in meters.
    pub fn focal_distance(&self) -> f64 {
        match self {
            BeamWeights::Focusing { focal_range, .. } => *focal_range,
            BeamWeights::Temporal { focal_delay, .. } => focal_delay * SPEED_OF_LIGHT,
        }
    }

    /// Array gain `|w^T a(r)|^2` towards distance `range` (at the focal
    /// angle for focusing weights).
    pub fn gain_at(&self, range: f64) -> f64 {
        match self {
            BeamWeights::Focusing { geometry, frequency, focal_angle, coefficients, .. } => {
                let target = TargetState { range, angle: *focal_angle, ..TargetState::new(1.0, 1.0).unwrap() };
                let sum: Complex64 = geometry
                    .positions()
                    .iter()
                    .zip(coefficients)
                    .map(|(q, w)| w * Complex64::from_polar(1.0, -TAU * frequency * element_delay(&target, q)))
                    .sum();
                sum.norm_sqr()
            }
            BeamWeights::Temporal { grid, coefficients, .. } => {
                let delay = range / SPEED_OF_LIGHT;
                let sum: Complex64 = grid
                    .frequencies()
                    .iter()
                    .zip(coefficients)
                    .map(|(f, w)| w * Complex64::from_polar(1.0, -TAU * f * delay))
                    .sum();
                sum.norm_sqr()
            }
        }
    }

    pub fn focal_gain(&self) -> f64 {
        self.gain_at(self.focal_distance())
    }

    /// Normalized cross gain `|w(self)^T a|^2 / len` towards the focal
    /// point of `other`; 1 when both focus on the same point.
    pub fn cross_gain(&self, other: &BeamWeights) -> f64 {
        self.gain_at(other.focal_distance()) / self.coefficients().len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamPattern {
    pub kind: BeamKind,
    pub focal_distance: f64,
    /// Unnormalized gain at the focal point.
    pub focal_gain: f64,
    pub distances: Vec<f64>,
    /// Gain relative to the focal gain, dB.
    pub gain_db: Vec<f64>,
}

pub fn gain_profile(weights: &BeamWeights, distances: &[f64]) -> Result<BeamPattern> {
    if distances.is_empty() {
        return Err(Error::InvalidInput("probe axis is empty".into()));
    }
    if distances.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidInput("probe distances must be positive".into()));
    }
    let focal_gain = weights.focal_gain();
    let gain_db = distances
        .iter()
        .map(|r| 10.0 * (weights.gain_at(*r) / focal_gain).log10())
        .collect();
    Ok(BeamPattern {
        kind: weights.kind(),
        focal_distance: weights.focal_distance(),
        focal_gain,
        distances: distances.to_vec(),
        gain_db,
    })
}

/// `points` log-spaced samples from `lo` to `hi` inclusive.
pub fn log_axis(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..points)
                .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
                .collect()
        }
    }
}

/// `distance_m,gain_db,kind,focal_distance_m` rows for every pattern.
pub fn write_patterns_csv<W: Write>(patterns: &[BeamPattern], mut w: W) -> std::io::Result<()> {
    writeln!(w, "distance_m,gain_db,kind,focal_distance_m")?;
    for p in patterns {
        for (r, g) in p.distances.iter().zip(&p.gain_db) {
            writeln!(w, "{},{},{},{}", Num(*r), Num(*g), p.kind.name(), Num(p.focal_distance))?;
        }
    }
    Ok(())
}

/// Distances where the gain first falls 3 dB below the focal gain on each
/// side of the focal point. `upper` is infinite when the gain never drops
/// below half power within `1000x` the focal distance; `lower` is 0 when
/// it holds all the way down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPowerInterval {
    pub lower: f64,
    pub upper: f64,
}

impl HalfPowerInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

const SEARCH_STEP: f64 = 1e-4;
const SEARCH_SPAN: f64 = 1e3;

pub fn half_power_interval(weights: &BeamWeights) -> HalfPowerInterval {
    let focal = weights.focal_distance();
    let half = 0.5 * weights.focal_gain();
    let below = |r: f64| weights.gain_at(r) < half;
    let crossing = |ratio: f64, limit: f64| -> Option<f64> {
        let mut inside = focal;
        loop {
            let next = inside * ratio;
            let past_limit = if ratio > 1.0 { next > limit } else { next < limit };
            if past_limit {
                return None;
            }
            if below(next) {
                let (mut a, mut b) = (inside, next);
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    if below(mid) {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                return Some(0.5 * (a + b));
            }
            inside = next;
        }
    };
    HalfPowerInterval {
        lower: crossing(1.0 - SEARCH_STEP, focal / SEARCH_SPAN).unwrap_or(0.0),
        upper: crossing(1.0 + SEARCH_STEP, focal * SEARCH_SPAN).unwrap_or(f64::INFINITY),
    }
}
