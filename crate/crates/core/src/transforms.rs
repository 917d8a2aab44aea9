//! Unitary DFT transforms between the spatial/angular and frequency/delay
//! representations of a per-symbol channel matrix.
//!
//! With `F_N` the unitary N-point DFT matrix, the angular-frequency view is
//! `F_N^H H`, the spatial-delay view is `H F_M^H` and the angular-delay view
//! is `F_N^H H F_M^H`. All math here is unshifted; [`heatmap_db`] applies
//! fftshift-style centering for display only.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::channel::OfdmGrid;
use crate::geometry::ArrayGeometry;
use crate::format::Num;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    SpatialFrequency,
    SpatialDelay,
    AngularFrequency,
    AngularDelay,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::SpatialFrequency => "spatial-frequency",
            Domain::SpatialDelay => "spatial-delay",
            Domain::AngularFrequency => "angular-frequency",
            Domain::AngularDelay => "angular-delay",
        }
    }

    pub fn is_angular(self) -> bool {
        matches!(self, Domain::AngularFrequency | Domain::AngularDelay)
    }

    pub fn is_delay(self) -> bool {
        matches!(self, Domain::SpatialDelay | Domain::AngularDelay)
    }
}

/// N x M channel matrix tagged with the domain its axes live in.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMatrix {
    pub data: DMatrix<Complex64>,
    pub domain: Domain,
}

impl DomainMatrix {
    pub fn spatial_frequency(data: DMatrix<Complex64>) -> Self {
        Self { data, domain: Domain::SpatialFrequency }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Moves the matrix into `target`, applying `F_N`/`F_N^H` on the antenna
    /// axis and `F_M`/`F_M^H` on the subcarrier axis as needed.
    pub fn into_domain(self, target: Domain) -> Self {
        let mut data = self.data;
        if self.domain.is_angular() != target.is_angular() {
            // F_N^H is an inverse DFT; F_N brings angular back to spatial
            let dir = if target.is_angular() { FftDirection::Inverse } else { FftDirection::Forward };
            transform_columns(&mut data, dir);
        }
        if self.domain.is_delay() != target.is_delay() {
            let dir = if target.is_delay() { FftDirection::Inverse } else { FftDirection::Forward };
            let mut t = data.transpose();
            transform_columns(&mut t, dir);
            data = t.transpose();
        }
        Self { data, domain: target }
    }
}

/// Unitary DFT along every column (contiguous in nalgebra's column-major
/// storage).
fn transform_columns(data: &mut DMatrix<Complex64>, direction: FftDirection) {
    let rows = data.nrows();
    if rows == 0 || data.ncols() == 0 {
        return;
    }
    let fft = FftPlanner::new().plan_fft(rows, direction);
    let scale = 1.0 / (rows as f64).sqrt();
    let slice = data.as_mut_slice();
    fft.process(slice);
    slice.iter_mut().for_each(|z| *z *= scale);
}

/// `H F_M^H`.
pub fn to_spatial_delay(h: &DMatrix<Complex64>) -> DomainMatrix {
    DomainMatrix::spatial_frequency(h.clone()).into_domain(Domain::SpatialDelay)
}

/// `F_N^H H`.
pub fn to_angular_frequency(h: &DMatrix<Complex64>) -> DomainMatrix {
    DomainMatrix::spatial_frequency(h.clone()).into_domain(Domain::AngularFrequency)
}

/// `F_N^H H F_M^H`.
pub fn to_angular_delay(h: &DMatrix<Complex64>) -> DomainMatrix {
    DomainMatrix::spatial_frequency(h.clone()).into_domain(Domain::AngularDelay)
}

/// Normalized spatial frequency in [-1/2, 1/2) of angular bin `p` out of
/// `n`; a planar wave from angle theta lands at `(d / lambda) cos(theta)`.
pub fn angular_bin_spatial_frequency(p: usize, n: usize) -> f64 {
    let nu = -(p as f64) / n as f64;
    nu - (nu + 0.5).floor()
}

/// Arrival angle (from the array axis) of angular bin `p`. Only defined for
/// the dense ULA; sparse arrays alias and are reported in bins.
pub fn angular_bin_angle(p: usize, geometry: &ArrayGeometry) -> Option<f64> {
    if geometry.kind() != crate::geometry::ArrayKind::DenseUla {
        return None;
    }
    let ratio = geometry.wavelength() / geometry.spacing()?;
    let c = angular_bin_spatial_frequency(p, geometry.len()) * ratio;
    (c.abs() <= 1.0).then(|| c.acos())
}

/// Delay (seconds) represented by delay bin `q`.
pub fn delay_bin_seconds(q: usize, grid: &OfdmGrid) -> f64 {
    q as f64 / grid.bandwidth()
}

/// fftshift source index: display position `j` shows bin `(j - n/2) mod n`.
pub fn shifted_index(j: usize, n: usize) -> usize {
    (j + n - n / 2) % n
}

/// Magnitude in dB relative to the matrix peak, clamped at `floor_db`, with
/// fftshift centering on the transformed axes. Returns rows x cols.
pub fn heatmap_db(m: &DomainMatrix, floor_db: f64) -> Vec<Vec<f64>> {
    let (rows, cols) = m.data.shape();
    let peak = m.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let shift_rows = m.domain.is_angular();
    let shift_cols = m.domain.is_delay();
    (0..rows)
        .map(|i| {
            let src_i = if shift_rows { shifted_index(i, rows) } else { i };
            (0..cols)
                .map(|j| {
                    let src_j = if shift_cols { shifted_index(j, cols) } else { j };
                    let mag = m.data[(src_i, src_j)].norm();
                    if peak > 0.0 && mag > 0.0 {
                        (20.0 * (mag / peak).log10()).max(floor_db)
                    } else {
                        floor_db
                    }
                })
                .collect()
        })
        .collect()
}

fn axis_labels(n: usize, shifted: bool) -> Vec<i64> {
    (0..n)
        .map(|j| if shifted { j as i64 - (n / 2) as i64 } else { j as i64 })
        .collect()
}

/// Heatmap CSV: header `row,<col labels>`, then one line per row with its
/// label followed by dB values. Shifted axes carry signed bin labels.
pub fn write_heatmap_csv<W: Write>(m: &DomainMatrix, floor_db: f64, mut w: W) -> std::io::Result<()> {
    let (rows, cols) = m.data.shape();
    let values = heatmap_db(m, floor_db);
    let col_labels = axis_labels(cols, m.domain.is_delay());
    let row_labels = axis_labels(rows, m.domain.is_angular());
    write!(w, "row")?;
    for c in &col_labels {
        write!(w, ",{c}")?;
    }
    writeln!(w)?;
    for (label, row) in row_labels.iter().zip(values) {
        write!(w, "{label}")?;
        for v in row {
            write!(w, ",{}", Num(v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Per-column (delay or frequency bin) count of rows whose magnitude is
/// within `threshold_db` of the global peak. Columns with no such row are
/// reported as 0.
pub fn spread_per_column(m: &DomainMatrix, threshold_db: f64) -> Vec<usize> {
    let peak = m.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let level = peak * 10f64.powf(threshold_db / 20.0);
    m.data
        .column_iter()
        .map(|col| col.iter().filter(|z| z.norm() >= level).count())
        .collect()
}

/// Max/min ratio of the nonzero entries of a spread profile; `None` when
/// no column is occupied.
pub fn spread_variation(spread: &[usize]) -> Option<f64> {
    let occupied: Vec<usize> = spread.iter().copied().filter(|&s| s > 0).collect();
    let max = *occupied.iter().max()?;
    let min = *occupied.iter().min()?;
    Some(max as f64 / min as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    /// Unitary DFT matrix built entry by entry.
    fn dft_matrix(n: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |i, j| {
            Complex64::from_polar(1.0 / (n as f64).sqrt(), -TAU * (i * j) as f64 / n as f64)
        })
    }

    fn sample(n: usize, m: usize, seed: u64) -> DMatrix<Complex64> {
        // cheap deterministic pseudo-random fill
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        DMatrix::from_fn(n, m, |_, _| {
            let mut next = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            };
            Complex64::new(next(), next())
        })
    }

    fn rel(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn matches_explicit_matrix_products() {
        let h = sample(12, 20, 3);
        let fan = dft_matrix(12);
        let fm = dft_matrix(20);
        assert!(rel(&to_spatial_delay(&h).data, &(&h * fm.adjoint())) < 1e-12);
        assert!(rel(&to_angular_frequency(&h).data, &(fan.adjoint() * &h)) < 1e-12);
        assert!(rel(&to_angular_delay(&h).data, &(fan.adjoint() * &h * fm.adjoint())) < 1e-12);
    }

    #[test]
    fn pure_tone_lands_in_one_delay_bin() {
        let (n, m, p) = (4, 32, 5);
        let h = DMatrix::from_fn(n, m, |i, j| {
            if i == 2 {
                Complex64::from_polar(1.0, -TAU * (j * p) as f64 / m as f64)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let sd = to_spatial_delay(&h);
        for q in 0..m {
            let v = sd.data[(2, q)].norm();
            if q == p {
                assert!((v - (m as f64).sqrt()).abs() < 1e-12);
            } else {
                assert!(v < 1e-12);
            }
        }
    }

    #[test]
    fn all_ones_sits_in_delay_bin_zero() {
        let h = DMatrix::from_element(3, 16, Complex64::new(1.0, 0.0));
        let sd = to_spatial_delay(&h);
        for i in 0..3 {
            assert!((sd.data[(i, 0)].norm() - 4.0).abs() < 1e-12);
            assert!((1..16).all(|q| sd.data[(i, q)].norm() < 1e-12));
        }
    }

    #[test]
    fn rank_one_tone_is_single_bin() {
        let (n, m) = (16, 8);
        let h = DMatrix::from_fn(n, m, |i, j| {
            Complex64::from_polar(1.0, -TAU * (3 * i) as f64 / n as f64)
                * Complex64::from_polar(1.0, -TAU * (6 * j) as f64 / m as f64)
        });
        let ad = to_angular_delay(&h);
        let energy: f64 = ad.data.iter().map(|z| z.norm_sqr()).sum();
        assert!((ad.data[(3, 6)].norm_sqr() - energy).abs() < 1e-9 * energy);
    }

    #[test]
    fn round_trip_and_norm() {
        let h = sample(31, 17, 9);
        let ad = to_angular_delay(&h);
        assert!((ad.frobenius_norm() - h.norm()).abs() < 1e-12 * h.norm());
        let back = ad.into_domain(Domain::SpatialFrequency);
        assert!(rel(&back.data, &h) < 1e-12);
    }

    #[test]
    fn spatial_frequency_of_bins() {
        assert_eq!(angular_bin_spatial_frequency(0, 8), 0.0);
        assert_eq!(angular_bin_spatial_frequency(1, 8), -0.125);
        assert_eq!(angular_bin_spatial_frequency(7, 8), 0.125);
        assert_eq!(angular_bin_spatial_frequency(4, 8), -0.5);
    }

    #[test]
    fn fftshift_centering() {
        assert_eq!((0..4).map(|j| shifted_index(j, 4)).collect::<Vec<_>>(), [2, 3, 0, 1]);
        assert_eq!((0..5).map(|j| shifted_index(j, 5)).collect::<Vec<_>>(), [3, 4, 0, 1, 2]);
        assert_eq!(axis_labels(4, true), [-2, -1, 0, 1]);
    }

    #[test]
    fn heatmap_floor_and_peak() {
        let mut h = DMatrix::from_element(2, 2, Complex64::new(0.0, 0.0));
        h[(0, 0)] = Complex64::new(2.0, 0.0);
        h[(1, 1)] = Complex64::new(0.2, 0.0);
        let m = DomainMatrix::spatial_frequency(h);
        let db = heatmap_db(&m, -60.0);
        assert_eq!(db[0][0], 0.0);
        assert!((db[1][1] + 20.0).abs() < 1e-12);
        assert_eq!(db[0][1], -60.0);
        let mut out = Vec::new();
        write_heatmap_csv(&m, -60.0, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().next().unwrap(), "row,0,1");
    }
}
