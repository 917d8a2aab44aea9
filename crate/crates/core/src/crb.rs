//! Fisher information and Cramer-Rao bounds for a point target observed in
//! circularly-symmetric complex Gaussian noise.
//!
//! The mean signal is the noiseless channel tensor `mu[n, m, k] = beta *
//! exp(-j 2 pi f_m (D_n + k T_s v_n) / c)`. Every derivative has the form
//! `mu_unit * c_i(k)` with `c_i(k) = a_i + k b_i`, so the sum over symbols
//! reduces to closed-form power sums and the FIM costs O(N M p^2).

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, OfdmGrid};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, ElementView, TargetState, SPEED_OF_LIGHT};
use crate::format::Num;

/// Condition number (of the diagonally scaled FIM) above which the
/// parameters are declared unidentifiable.
pub const IDENTIFIABILITY_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Param {
    /// Distance r in meters.
    Range,
    /// Distance expressed as the one-way delay r/c in seconds.
    Delay,
    Angle,
    RadialVelocity,
    TransverseVelocity,
    GainRe,
    GainIm,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::Range => "range",
            Param::Delay => "delay",
            Param::Angle => "angle",
            Param::RadialVelocity => "v-radial",
            Param::TransverseVelocity => "v-transverse",
            Param::GainRe => "gain-re",
            Param::GainIm => "gain-im",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationScenario {
    pub grid: OfdmGrid,
    pub geometry: ArrayGeometry,
    pub target: TargetState,
    pub snr_db: f64,
    pub model: ChannelModel,
    pub unknowns: Vec<Param>,
}

impl EstimationScenario {
    pub fn new(
        grid: OfdmGrid,
        geometry: ArrayGeometry,
        target: TargetState,
        snr_db: f64,
        model: ChannelModel,
        unknowns: Vec<Param>,
    ) -> Result<Self> {
        let s = Self { grid, geometry, target, snr_db, model, unknowns };
        s.validate()?;
        Ok(s)
    }

    /// Static target with unknowns `{r, theta, Re beta, Im beta}` under the
    /// spherical-wave model.
    pub fn distance_sensing(
        grid: OfdmGrid,
        geometry: ArrayGeometry,
        target: TargetState,
        snr_db: f64,
    ) -> Result<Self> {
        Self::new(
            grid,
            geometry,
            target,
            snr_db,
            ChannelModel::NearField,
            vec![Param::Range, Param::Angle, Param::GainRe, Param::GainIm],
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidInput(format!("snr_db must be finite, got {}", self.snr_db)));
        }
        if self.target.gain.norm() == 0.0 {
            return Err(Error::Degenerate("target gain is zero".into()));
        }
        if !self.unknowns.contains(&Param::GainRe) || !self.unknowns.contains(&Param::GainIm) {
            return Err(Error::InvalidInput("unknowns must include gain-re and gain-im".into()));
        }
        for (i, p) in self.unknowns.iter().enumerate() {
            if self.unknowns[..i].contains(p) {
                return Err(Error::InvalidInput(format!("duplicate unknown {}", p.name())));
            }
        }
        if self.unknowns.contains(&Param::Range) && self.unknowns.contains(&Param::Delay) {
            return Err(Error::InvalidInput("range and delay describe the same unknown".into()));
        }
        if self.model == ChannelModel::FarField && !self.geometry.kind().is_linear() {
            return Err(Error::UnsupportedGeometry(
                "the planar-wave model is only defined for linear arrays".into(),
            ));
        }
        Ok(())
    }

    /// Per-entry noise variance `|beta|^2 / 10^(snr/10)`.
    pub fn noise_variance(&self) -> f64 {
        self.target.gain.norm_sqr() / 10f64.powf(self.snr_db / 10.0)
    }

    fn with_target(&self, range: f64, angle: f64) -> Result<Self> {
        let mut s = self.clone();
        s.target.range = range;
        s.target.angle = angle;
        s.validate()?;
        Ok(s)
    }
}

/// Derivatives of an element's propagation distance and velocity
/// projection with respect to one unknown.
#[derive(Debug, Clone, Copy)]
struct Sensitivity {
    distance: f64,
    velocity: f64,
}

/// Sensitivities of one element, in the scenario's unknown order. `None`
/// marks the gain parameters.
fn element_sensitivities(
    model: ChannelModel,
    target: &TargetState,
    element: &crate::geometry::Point,
    unknowns: &[Param],
) -> Result<(f64, f64, Vec<Option<Sensitivity>>)> {
    let view = ElementView::new(target, element);
    if !(view.distance > 0.0) {
        return Err(Error::Degenerate("target is collocated with an array element".into()));
    }
    let r = target.range;
    let (vr, vt) = (target.v_radial, target.v_transverse);
    let (d, cos, sin) = (view.distance, view.cos_offset, view.sin_offset);
    let (distance, velocity) = match model {
        ChannelModel::FarField => (r - view.along, vr),
        ChannelModel::NearField => (d, view.doppler_projection(target)),
    };
    let sens = unknowns
        .iter()
        .map(|p| {
            let (dd, dv) = match (model, p) {
                (_, Param::GainRe | Param::GainIm) => return None,
                (ChannelModel::FarField, Param::Range) => (1.0, 0.0),
                (ChannelModel::FarField, Param::Delay) => (SPEED_OF_LIGHT, 0.0),
                (ChannelModel::FarField, Param::Angle) => (-view.across, 0.0),
                (ChannelModel::FarField, Param::RadialVelocity) => (0.0, 1.0),
                (ChannelModel::FarField, Param::TransverseVelocity) => (0.0, 0.0),
                (ChannelModel::NearField, Param::Range | Param::Delay) => {
                    let dv = (vr * sin * sin + vt * sin * cos) / d;
                    let scale = if *p == Param::Delay { SPEED_OF_LIGHT } else { 1.0 };
                    (scale * cos, scale * dv)
                }
                (ChannelModel::NearField, Param::Angle) => {
                    let dcos = -sin + sin * cos * r / d;
                    let dsin = -view.along / d + sin * sin * r / d;
                    (-r * sin, vr * dcos - vt * dsin)
                }
                (ChannelModel::NearField, Param::RadialVelocity) => (0.0, cos),
                (ChannelModel::NearField, Param::TransverseVelocity) => (0.0, -sin),
            };
            Some(Sensitivity { distance: dd, velocity: dv })
        })
        .collect();
    Ok((distance, velocity, sens))
}

/// `(a_i, b_i)` with `d mu / d eta_i = unit_phasor * (a_i + k b_i)`.
fn coefficients(
    sens: &[Option<Sensitivity>],
    unknowns: &[Param],
    gain: Complex64,
    wavenumber: f64,
    symbol_duration: f64,
    out: &mut Vec<(Complex64, Complex64)>,
) {
    out.clear();
    let minus_j_beta = Complex64::new(0.0, -1.0) * gain * wavenumber;
    for (s, p) in sens.iter().zip(unknowns) {
        out.push(match (s, p) {
            (_, Param::GainRe) => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
            (_, Param::GainIm) => (Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)),
            (Some(s), _) => (minus_j_beta * s.distance, minus_j_beta * (symbol_duration * s.velocity)),
            (None, _) => unreachable!("only gain parameters lack a sensitivity"),
        });
    }
}

/// Complex gradient of the mean signal, shape N x M x K x p, `p` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTensor {
    pub shape: (usize, usize, usize, usize),
    pub data: Vec<Complex64>,
}

impl GradientTensor {
    pub fn get(&self, n: usize, m: usize, k: usize, i: usize) -> Complex64 {
        let (_, ml, kl, pl) = self.shape;
        self.data[((n * ml + m) * kl + k) * pl + i]
    }
}

/// Closed-form derivative of every channel entry with respect to every
/// unknown, by the chain rule through the element distance and Doppler.
pub fn mean_signal_gradient(scenario: &EstimationScenario) -> Result<GradientTensor> {
    scenario.validate()?;
    let EstimationScenario { grid, geometry, target, model, unknowns, .. } = scenario;
    let p = unknowns.len();
    let (nl, ml, kl) = (geometry.len(), grid.subcarriers, grid.symbols);
    let ts = grid.symbol_duration();
    let mut data = Vec::with_capacity(nl * ml * kl * p);
    let mut coeff = Vec::with_capacity(p);
    for q in geometry.positions() {
        let (distance, velocity, sens) = element_sensitivities(*model, target, q, unknowns)?;
        for m in 0..ml {
            let w = TAU * grid.frequency(m) / SPEED_OF_LIGHT;
            coefficients(&sens, unknowns, target.gain, w, ts, &mut coeff);
            for k in 0..kl {
                let phase = w * (distance + k as f64 * ts * velocity);
                let unit = Complex64::from_polar(1.0, -phase);
                data.extend(coeff.iter().map(|(a, b)| unit * (a + b * k as f64)));
            }
        }
    }
    Ok(GradientTensor { shape: (nl, ml, kl, p), data })
}

/// `(2 / sigma^2) Re sum conj(g_i) g_j` straight from a gradient tensor.
pub fn fim_from_gradient(gradient: &GradientTensor, noise_variance: f64) -> DMatrix<f64> {
    let p = gradient.shape.3;
    let mut fim = DMatrix::zeros(p, p);
    for g in gradient.data.chunks_exact(p) {
        for i in 0..p {
            for j in 0..p {
                fim[(i, j)] += (g[i].conj() * g[j]).re;
            }
        }
    }
    fim * (2.0 / noise_variance)
}

/// Fisher information matrix, bounds and identifiability verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbReport {
    pub unknowns: Vec<Param>,
    pub fim: DMatrix<f64>,
    /// Condition number of `D^-1/2 F D^-1/2` with `D = diag(F)`; infinite
    /// when that matrix is not positive definite.
    pub condition_number: f64,
    /// Diagonal of the inverse FIM, `None` when unidentifiable.
    pub crb: Option<Vec<f64>>,
}

impl CrbReport {
    pub fn from_fim(unknowns: Vec<Param>, fim: DMatrix<f64>) -> Self {
        let (condition_number, crb) = invert_diagonal(&fim);
        Self { unknowns, fim, condition_number, crb }
    }

    /// Builds the report from the noise-free information `2 Re(G^H G)` and
    /// the noise variance. The inversion runs on the noise-free matrix so
    /// that bounds scale with the noise variance to the last bit.
    pub fn from_unit_fim(unknowns: Vec<Param>, unit: DMatrix<f64>, noise_variance: f64) -> Self {
        let (condition_number, crb) = invert_diagonal(&unit);
        let crb = crb.map(|c| c.into_iter().map(|v| v * noise_variance).collect());
        let fim = unit / noise_variance;
        Self { unknowns, fim, condition_number, crb }
    }

    pub fn is_identifiable(&self) -> bool {
        self.crb.is_some()
    }

    pub fn crb_of(&self, param: Param) -> Option<f64> {
        let i = self.unknowns.iter().position(|p| *p == param)?;
        self.crb.as_ref().map(|c| c[i])
    }
}

fn invert_diagonal(fim: &DMatrix<f64>) -> (f64, Option<Vec<f64>>) {
    let p = fim.nrows();
    let diag: Vec<f64> = (0..p).map(|i| fim[(i, i)]).collect();
    if diag.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return (f64::INFINITY, None);
    }
    let scale: Vec<f64> = diag.iter().map(|d| d.sqrt().recip()).collect();
    let scaled = DMatrix::from_fn(p, p, |i, j| {
        // symmetrize while scaling
        0.5 * (fim[(i, j)] + fim[(j, i)]) * scale[i] * scale[j]
    });
    let eig = SymmetricEigen::new(scaled.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(cond <= IDENTIFIABILITY_THRESHOLD) {
        return (cond, None);
    }
    let Some(chol) = scaled.cholesky() else {
        return (f64::INFINITY, None);
    };
    let inv = chol.inverse();
    let crb = (0..p).map(|i| inv[(i, i)] * scale[i] * scale[i]).collect();
    (cond, Some(crb))
}

const fn power_sums(k: usize) -> (f64, f64, f64) {
    let kf = k as f64;
    (kf, kf * (kf - 1.0) / 2.0, (kf - 1.0) * kf * (2.0 * kf - 1.0) / 6.0)
}

/// FIM `(2 / sigma^2) Re sum_{n,m,k} conj(d mu / d eta_i) (d mu / d eta_j)`
/// and the resulting bounds.
pub fn fisher_information(scenario: &EstimationScenario) -> Result<CrbReport> {
    scenario.validate()?;
    let EstimationScenario { grid, geometry, target, model, unknowns, .. } = scenario;
    let p = unknowns.len();
    let ts = grid.symbol_duration();
    let (s0, s1, s2) = power_sums(grid.symbols);
    let freqs = grid.frequencies();
    let per_element: Vec<DMatrix<f64>> = geometry
        .positions()
        .par_iter()
        .map(|q| -> Result<DMatrix<f64>> {
            let (_, _, sens) = element_sensitivities(*model, target, q, unknowns)?;
            let mut acc = DMatrix::zeros(p, p);
            let mut coeff = Vec::with_capacity(p);
            for &f in &freqs {
                coefficients(&sens, unknowns, target.gain, TAU * f / SPEED_OF_LIGHT, ts, &mut coeff);
                for i in 0..p {
                    let (ai, bi) = coeff[i];
                    for j in i..p {
                        let (aj, bj) = coeff[j];
                        let v = s0 * (ai.conj() * aj).re
                            + s1 * ((ai.conj() * bj).re + (bi.conj() * aj).re)
                            + s2 * (bi.conj() * bj).re;
                        acc[(i, j)] += v;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut fim = DMatrix::zeros(p, p);
    for part in &per_element {
        fim += part;
    }
    for i in 0..p {
        for j in i..p {
            fim[(i, j)] *= 2.0;
            fim[(j, i)] = fim[(i, j)];
        }
    }
    Ok(CrbReport::from_unit_fim(unknowns.clone(), fim, scenario.noise_variance()))
}

/// Cells of a polar map: every range paired with every angle.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarRegion {
    pub ranges: Vec<f64>,
    pub angles: Vec<f64>,
}

impl PolarRegion {
    /// `ranges` and `angles` points evenly spaced over the closed intervals.
    pub fn uniform(range: (f64, f64), range_points: usize, angle: (f64, f64), angle_points: usize) -> Self {
        Self { ranges: linspace(range.0, range.1, range_points), angles: linspace(angle.0, angle.1, angle_points) }
    }
}

pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// CRB(r) over a polar region; `values[i * angles.len() + j]` belongs to
/// `(ranges[i], angles[j])` and is `+inf` where r is unidentifiable.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbMap {
    pub ranges: Vec<f64>,
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
}

impl CrbMap {
    pub fn at(&self, range_index: usize, angle_index: usize) -> f64 {
        self.values[range_index * self.angles.len() + angle_index]
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "r_m,theta_rad,crb_r_m2")?;
        for (i, r) in self.ranges.iter().enumerate() {
            for (j, a) in self.angles.iter().enumerate() {
                writeln!(w, "{},{},{}", Num(*r), Num(*a), Num(self.at(i, j)))?;
            }
        }
        Ok(())
    }
}

/// Moves the template's target across `region` and records CRB(r) per cell.
pub fn crb_map(template: &EstimationScenario, region: &PolarRegion) -> Result<CrbMap> {
    if !template.unknowns.contains(&Param::Range) {
        return Err(Error::InvalidInput("crb map needs range among the unknowns".into()));
    }
    let cells: Vec<(f64, f64)> = region
        .ranges
        .iter()
        .flat_map(|&r| region.angles.iter().map(move |&a| (r, a)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(r, a)| {
            let s = template.with_target(r, a)?;
            Ok(fisher_information(&s)?.crb_of(Param::Range).unwrap_or(f64::INFINITY))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CrbMap { ranges: region.ranges.clone(), angles: region.angles.clone(), values })
}
