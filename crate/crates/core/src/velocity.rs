//! Radial/transverse velocity profiles from non-uniform Doppler.
//!
//! A normalized matched filter is evaluated over a 2-D grid of candidate
//! `(v_radial, v_transverse)` pairs with the target position held fixed.
//! Each template is the unit-gain channel the candidate would produce.

use std::f64::consts::TAU;
use std::io::Write;

use rayon::prelude::*;

use crate::channel::{element_terms, ChannelModel, ChannelTensor, OfdmGrid};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, ElementView, TargetState, SPEED_OF_LIGHT};
use crate::format::Num;

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    radial: Vec<f64>,
    transverse: Vec<f64>,
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::InvalidInput(format!("{name} axis is empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{name} axis has non-finite samples")));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(format!("{name} axis must be strictly increasing")));
    }
    if !axis.contains(&0.0) {
        return Err(Error::InvalidInput(format!("{name} axis must contain 0")));
    }
    Ok(())
}

/// Samples `lo, lo + step, ...` up to `hi` inclusive, built from integer
/// multiples of `step` so 0 is hit exactly when `lo / step` is integral.
pub fn stepped_axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || !(hi >= lo) {
        return Vec::new();
    }
    let first = (lo / step).round() as i64;
    let last = (hi / step).round() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

impl VelocityGrid {
    pub fn new(radial: Vec<f64>, transverse: Vec<f64>) -> Result<Self> {
        check_axis("radial", &radial)?;
        check_axis("transverse", &transverse)?;
        Ok(Self { radial, transverse })
    }

    /// Square grid `[-limit, limit]` on both axes.
    pub fn symmetric(limit: f64, step: f64) -> Result<Self> {
        Self::new(stepped_axis(-limit, limit, step), stepped_axis(-limit, limit, step))
    }

    pub fn radial(&self) -> &[f64] {
        &self.radial
    }

    pub fn transverse(&self) -> &[f64] {
        &self.transverse
    }

    pub fn cells(&self) -> usize {
        self.radial.len() * self.transverse.len()
    }
}

impl Default for VelocityGrid {
    fn default() -> Self {
        Self::symmetric(20.0, 0.25).expect("default grid is valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    pub grid: VelocityGrid,
    /// Normalized so the peak is 1; `values[i * nt + j]` belongs to
    /// `(radial[i], transverse[j])`.
    pub values: Vec<f64>,
    /// Unnormalized correlation coefficient at the peak, in [0, 1].
    pub peak_correlation: f64,
    pub peak_index: (usize, usize),
    pub peak: (f64, f64),
    /// Values along the radial axis at the peak's transverse velocity.
    pub radial_cut: Vec<f64>,
    /// Values along the transverse axis at the peak's radial velocity.
    pub transverse_cut: Vec<f64>,
}

impl VelocityProfile {
    pub fn at(&self, radial_index: usize, transverse_index: usize) -> f64 {
        self.values[radial_index * self.grid.transverse.len() + transverse_index]
    }

    /// `v_r,v_t,value` long format.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "v_r,v_t,value")?;
        for (i, vr) in self.grid.radial.iter().enumerate() {
            for (j, vt) in self.grid.transverse.iter().enumerate() {
                writeln!(w, "{},{},{}", Num(*vr), Num(*vt), Num(self.at(i, j)))?;
            }
        }
        Ok(())
    }

    pub fn write_radial_cut<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_cut(w, "v_r", &self.grid.radial, &self.radial_cut)
    }

    pub fn write_transverse_cut<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_cut(w, "v_t", &self.grid.transverse, &self.transverse_cut)
    }
}

fn write_cut<W: Write>(mut w: W, axis_name: &str, axis: &[f64], values: &[f64]) -> std::io::Result<()> {
    writeln!(w, "{axis_name},value")?;
    for (a, v) in axis.iter().zip(values) {
        writeln!(w, "{},{}", Num(*a), Num(*v))?;
    }
    Ok(())
}

/// Matched-filter velocity surface for an observation of a target at the
/// known position `(range, angle)`.
///
/// `model` selects the template family; far-field templates share one
/// Doppler across the array and are therefore blind to transverse motion.
pub fn velocity_profile(
    observation: &ChannelTensor,
    ofdm: &OfdmGrid,
    geometry: &ArrayGeometry,
    position: (f64, f64),
    grid: &VelocityGrid,
    model: ChannelModel,
) -> Result<VelocityProfile> {
    let (nl, ml, kl) = observation.shape();
    if kl < 2 {
        return Err(Error::InvalidInput("velocity profiling needs at least 2 symbols".into()));
    }
    if (nl, ml, kl) != (geometry.len(), ofdm.subcarriers, ofdm.symbols) {
        return Err(Error::InvalidInput(format!(
            "observation is {nl}x{ml}x{kl}, scenario expects {}x{}x{}",
            geometry.len(),
            ofdm.subcarriers,
            ofdm.symbols
        )));
    }
    if grid.cells() == 0 {
        return Err(Error::InvalidInput("velocity grid has no cells".into()));
    }
    if model == ChannelModel::FarField && !geometry.kind().is_linear() {
        return Err(Error::UnsupportedGeometry(
            "the planar-wave model is only defined for linear arrays".into(),
        ));
    }
    let energy = observation.squared_norm();
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::InvalidInput("observation has no finite energy".into()));
    }
    let target = TargetState::new(position.0, position.1)?;

    // Doppler projection = v_r * radial_weight - v_t * transverse_weight
    let weights: Vec<(f64, f64)> = geometry
        .positions()
        .iter()
        .map(|q| match model {
            ChannelModel::FarField => (1.0, 0.0),
            ChannelModel::NearField => {
                let v = ElementView::new(&target, q);
                (v.cos_offset, v.sin_offset)
            }
        })
        .collect();
    let distances: Vec<f64> = element_terms(model, geometry, &target).into_iter().map(|(d, _)| d).collect();
    let wavenumbers: Vec<f64> = ofdm.frequencies().iter().map(|f| TAU * f / SPEED_OF_LIGHT).collect();
    let ts = ofdm.symbol_duration();

    // undo the static propagation phase once; only Doppler remains per cell
    let mut derotated_re = vec![0.0; nl * ml * kl];
    let mut derotated_im = vec![0.0; nl * ml * kl];
    for n in 0..nl {
        for (m, w) in wavenumbers.iter().enumerate() {
            let rot = num_complex::Complex64::from_polar(1.0, w * distances[n]);
            for k in 0..kl {
                let i = observation.index(n, m, k);
                let z = observation.as_slice()[i] * rot;
                derotated_re[i] = z.re;
                derotated_im[i] = z.im;
            }
        }
    }

    let radial = &grid.radial;
    let nr = radial.len();
    let rows: Vec<Vec<f64>> = grid
        .transverse
        .par_iter()
        .map(|&vt| {
            let mut total_re = vec![0.0; nr];
            let mut total_im = vec![0.0; nr];
            let mut z_re = vec![0.0; nr];
            let mut z_im = vec![0.0; nr];
            let mut acc_re = vec![0.0; nr];
            let mut acc_im = vec![0.0; nr];
            for n in 0..nl {
                let (wr, wt) = weights[n];
                for (m, w) in wavenumbers.iter().enumerate() {
                    let step = w * ts;
                    for (i, vr) in radial.iter().enumerate() {
                        let (s, c) = (step * (vr * wr - vt * wt)).sin_cos();
                        z_re[i] = c;
                        z_im[i] = s;
                    }
                    acc_re.fill(0.0);
                    acc_im.fill(0.0);
                    let base = observation.index(n, m, 0);
                    // Horner over symbols, vectorized across radial candidates
                    for k in (0..kl).rev() {
                        let (yr, yi) = (derotated_re[base + k], derotated_im[base + k]);
                        for i in 0..nr {
                            let re = acc_re[i] * z_re[i] - acc_im[i] * z_im[i] + yr;
                            let im = acc_re[i] * z_im[i] + acc_im[i] * z_re[i] + yi;
                            acc_re[i] = re;
                            acc_im[i] = im;
                        }
                    }
                    for i in 0..nr {
                        total_re[i] += acc_re[i];
                        total_im[i] += acc_im[i];
                    }
                }
            }
            let norm = energy * (nl * ml * kl) as f64;
            (0..nr)
                .map(|i| (total_re[i] * total_re[i] + total_im[i] * total_im[i]) / norm)
                .collect()
        })
        .collect();

    let nt = grid.transverse.len();
    let mut raw = vec![0.0; nr * nt];
    for (j, row) in rows.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            raw[i * nt + j] = *v;
        }
    }
    let (best, peak_correlation) = raw
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let values: Vec<f64> = if peak_correlation > 0.0 {
        raw.iter().map(|v| v / peak_correlation).collect()
    } else {
        vec![0.0; raw.len()]
    };
    let peak_index = (best / nt, best % nt);
    let radial_cut = (0..nr).map(|i| values[i * nt + peak_index.1]).collect();
    let transverse_cut = values[peak_index.0 * nt..(peak_index.0 + 1) * nt].to_vec();
    Ok(VelocityProfile {
        peak: (grid.radial[peak_index.0], grid.transverse[peak_index.1]),
        grid: grid.clone(),
        values,
        peak_correlation,
        peak_index,
        radial_cut,
        transverse_cut,
    })
}

/// Samples further than this many grid steps from the peak count as
/// background.
pub const OFF_PEAK_GUARD: usize = 3;

/// `10 log10(peak / median background)` of a 1-D cut, where background is
/// every sample more than [`OFF_PEAK_GUARD`] steps from the peak. A flat
/// cut is 0 dB by convention.
pub fn profile_dynamic_range(cut: &[f64]) -> Result<f64> {
    if cut.is_empty() || cut.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("cut must be non-empty and finite".into()));
    }
    let max = cut.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if cut.iter().all(|v| *v == max) {
        return Ok(0.0);
    }
    let at: Vec<usize> = (0..cut.len()).filter(|&i| cut[i] == max).collect();
    if at.len() > 1 {
        return Err(Error::InvalidInput("cut has no unique maximum".into()));
    }
    let peak = at[0];
    let mut background: Vec<f64> = cut
        .iter()
        .enumerate()
        .filter(|(i, _)| i.abs_diff(peak) > OFF_PEAK_GUARD)
        .map(|(_, v)| *v)
        .collect();
    if background.is_empty() {
        return Err(Error::InvalidInput("cut is too short to have background samples".into()));
    }
    background.sort_by(f64::total_cmp);
    let mid = background.len() / 2;
    let median = if background.len().is_multiple_of(2) {
        0.5 * (background[mid - 1] + background[mid])
    } else {
        background[mid]
    };
    Ok(10.0 * (max / median).log10())
}
