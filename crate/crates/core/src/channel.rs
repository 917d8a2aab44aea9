//! Wideband channel synthesis under the planar-wave and spherical-wave models.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, ElementView, TargetState, SPEED_OF_LIGHT};
use crate::format::Num;

/// OFDM sampling lattice: `subcarriers` centered on `carrier`, `symbols`
/// symbols of duration `1 / spacing` (no cyclic prefix).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmGrid {
    pub carrier: f64,
    pub subcarriers: usize,
    pub spacing: f64,
    pub symbols: usize,
}

pub fn grid_violations(carrier: f64, subcarriers: usize, spacing: f64, symbols: usize) -> Vec<String> {
    let mut out = Vec::new();
    if subcarriers == 0 {
        out.push("subcarrier count must be at least 1".into());
    }
    if symbols == 0 {
        out.push("symbol count must be at least 1".into());
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        out.push(format!("subcarrier spacing must be positive, got {spacing}"));
    }
    if !(carrier.is_finite() && carrier > 0.0) {
        out.push(format!("carrier frequency must be positive, got {carrier}"));
    } else if spacing.is_finite() && subcarriers > 0 {
        let lowest = carrier - (subcarriers as f64 - 1.0) / 2.0 * spacing;
        if lowest <= 0.0 {
            out.push(format!("lowest subcarrier frequency {lowest} Hz is not positive"));
        }
    }
    out
}

impl OfdmGrid {
    pub fn new(carrier: f64, subcarriers: usize, spacing: f64, symbols: usize) -> Result<Self> {
        let v = grid_violations(carrier, subcarriers, spacing, symbols);
        if !v.is_empty() {
            return Err(Error::InvalidGrid(v.join("; ")));
        }
        Ok(Self { carrier, subcarriers, spacing, symbols })
    }

    /// Single-subcarrier, single-symbol grid.
    pub fn narrowband(carrier: f64) -> Result<Self> {
        Self::new(carrier, 1, 1.0, 1)
    }

    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.spacing
    }

    pub fn bandwidth(&self) -> f64 {
        self.subcarriers as f64 * self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier
    }

    /// Frequency of subcarrier `m` (0-based).
    pub fn frequency(&self, m: usize) -> f64 {
        self.carrier + (m as f64 - (self.subcarriers as f64 - 1.0) / 2.0) * self.spacing
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.subcarriers).map(|m| self.frequency(m)).collect()
    }
}

/// Number of whole symbols that fit into `duration` seconds.
pub fn symbols_for_duration(duration: f64, spacing: f64) -> usize {
    // the small slack keeps exact ratios such as 1 ms / 1 us from rounding to 999
    (duration * spacing * (1.0 + 1e-12)).floor().max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelModel {
    /// Planar wavefront, uniform Doppler.
    FarField,
    /// Spherical wavefront, per-element Doppler.
    NearField,
}

impl ChannelModel {
    pub fn name(self) -> &'static str {
        match self {
            ChannelModel::FarField => "far-field",
            ChannelModel::NearField => "near-field",
        }
    }
}

/// Complex samples `h[n, m, k]` stored row-major (`k` fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    antennas: usize,
    subcarriers: usize,
    symbols: usize,
    data: Vec<Complex64>,
}

impl ChannelTensor {
    pub fn from_vec(
        antennas: usize,
        subcarriers: usize,
        symbols: usize,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        let len = antennas
            .checked_mul(subcarriers)
            .and_then(|x| x.checked_mul(symbols))
            .ok_or_else(|| Error::InvalidInput("tensor shape overflows".into()))?;
        if len != data.len() {
            return Err(Error::InvalidInput(format!(
                "shape {antennas}x{subcarriers}x{symbols} needs {len} samples, got {}",
                data.len()
            )));
        }
        Ok(Self { antennas, subcarriers, symbols, data })
    }

    pub fn zeros(antennas: usize, subcarriers: usize, symbols: usize) -> Self {
        Self {
            antennas,
            subcarriers,
            symbols,
            data: vec![Complex64::new(0.0, 0.0); antennas * subcarriers * symbols],
        }
    }

    /// `(N, M, K)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.antennas, self.subcarriers, self.symbols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, n: usize, m: usize, k: usize) -> usize {
        (n * self.subcarriers + m) * self.symbols + k
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize, k: usize) -> Complex64 {
        self.data[self.index(n, m, k)]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Samples of antenna `n`, subcarrier `m` across all symbols.
    pub fn symbol_series(&self, n: usize, m: usize) -> &[Complex64] {
        let start = self.index(n, m, 0);
        &self.data[start..start + self.symbols]
    }

    /// The N x M channel matrix of symbol `k`.
    pub fn symbol_matrix(&self, k: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.antennas, self.subcarriers, |n, m| self.get(n, m, k))
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn mean_power(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.squared_norm() / self.data.len() as f64
        }
    }

    /// Long-format CSV: `n,m,k,re,im` with 1-based `n`, `m` and 0-based `k`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,m,k,re,im")?;
        for n in 0..self.antennas {
            for m in 0..self.subcarriers {
                for k in 0..self.symbols {
                    let z = self.get(n, m, k);
                    writeln!(w, "{},{},{},{},{}", n + 1, m + 1, k, Num(z.re), Num(z.im))?;
                }
            }
        }
        Ok(())
    }

    /// Parses the long-format CSV written by [`ChannelTensor::write_csv`].
    /// Rows may come in any order but every cell must appear exactly once.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let headers = reader
            .headers()
            .map_err(|e| Error::Decode(e.to_string()))?
            .clone();
        let expected = ["n", "m", "k", "re", "im"];
        if headers.len() != expected.len() || headers.iter().zip(expected).any(|(a, b)| a.trim() != b) {
            return Err(Error::Decode(format!("unexpected header {:?}", headers)));
        }
        let mut rows = Vec::new();
        let (mut nmax, mut mmax, mut kmax) = (0usize, 0usize, 0usize);
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Decode(e.to_string()))?;
            if rec.len() != 5 {
                return Err(Error::Decode(format!("row {}: expected 5 fields", line + 2)));
            }
            let idx = |i: usize| -> Result<usize> {
                rec[i]
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Decode(format!("row {}: {}: {e}", line + 2, expected[i])))
            };
            let val = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Decode(format!("row {}: {}: {e}", line + 2, expected[i])))
            };
            let (n, m, k) = (idx(0)?, idx(1)?, idx(2)?);
            if n == 0 || m == 0 {
                return Err(Error::Decode(format!("row {}: n and m are 1-based", line + 2)));
            }
            nmax = nmax.max(n);
            mmax = mmax.max(m);
            kmax = kmax.max(k + 1);
            rows.push((n - 1, m - 1, k, Complex64::new(val(3)?, val(4)?)));
        }
        let len = nmax
            .checked_mul(mmax)
            .and_then(|x| x.checked_mul(kmax))
            .ok_or_else(|| Error::Decode("tensor shape overflows".into()))?;
        if len != rows.len() {
            return Err(Error::Decode(format!(
                "{} rows do not cover a {nmax}x{mmax}x{kmax} tensor",
                rows.len()
            )));
        }
        let mut out = Self::zeros(nmax, mmax, kmax);
        let mut seen = vec![false; len];
        for (n, m, k, z) in rows {
            let i = out.index(n, m, k);
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Decode(format!("duplicate cell ({}, {}, {k})", n + 1, m + 1)));
            }
            out.data[i] = z;
        }
        Ok(out)
    }

    /// Binary dump: magic `NFCH`, version, N, M, K as little-endian u32,
    /// then interleaved little-endian f64 re/im in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        for v in [BINARY_VERSION, self.antennas as u32, self.subcarriers as u32, self.symbols as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for z in &self.data {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(BINARY_HEADER_LEN + 16 * self.data.len());
        self.write_binary(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < BINARY_HEADER_LEN {
            return Err(Error::Decode(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..4] != BINARY_MAGIC {
            return Err(Error::Decode("bad magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let version = word(0);
        if version != BINARY_VERSION {
            return Err(Error::Decode(format!("unsupported version {version}")));
        }
        let (n, m, k) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let payload = n
            .checked_mul(m)
            .and_then(|x| x.checked_mul(k))
            .and_then(|x| x.checked_mul(16))
            .ok_or_else(|| Error::Decode("tensor shape overflows".into()))?;
        let body = &bytes[BINARY_HEADER_LEN..];
        if body.len() != payload {
            return Err(Error::Decode(format!(
                "payload is {} bytes, shape {n}x{m}x{k} needs {payload}",
                body.len()
            )));
        }
        let data = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Self { antennas: n, subcarriers: m, symbols: k, data })
    }
}

pub const BINARY_MAGIC: &[u8; 4] = b"NFCH";
pub const BINARY_VERSION: u32 = 1;
pub const BINARY_HEADER_LEN: usize = 20;

/// Per-element propagation distance (m) and velocity projection (m/s)
/// under `model`.
pub(crate) fn element_terms(
    model: ChannelModel,
    geometry: &ArrayGeometry,
    target: &TargetState,
) -> Vec<(f64, f64)> {
    geometry
        .positions()
        .iter()
        .map(|q| match model {
            ChannelModel::FarField => (target.range - q.dot(&target.los_unit()), target.v_radial),
            ChannelModel::NearField => {
                let view = ElementView::new(target, q);
                (view.distance, view.doppler_projection(target))
            }
        })
        .collect()
}

fn synthesize_terms(grid: &OfdmGrid, terms: &[(f64, f64)], gain: Complex64) -> ChannelTensor {
    let (m_len, k_len) = (grid.subcarriers, grid.symbols);
    let ts = grid.symbol_duration();
    let freqs = grid.frequencies();
    let mut out = ChannelTensor::zeros(terms.len(), m_len, k_len);
    out.data
        .par_chunks_mut(m_len * k_len)
        .zip(terms.par_iter())
        .for_each(|(chunk, &(distance, velocity))| {
            for (m, &f) in freqs.iter().enumerate() {
                for k in 0..k_len {
                    let path = distance + k as f64 * ts * velocity;
                    let phase = TAU * f * path / SPEED_OF_LIGHT;
                    chunk[m * k_len + k] = gain * Complex64::from_polar(1.0, -phase);
                }
            }
        });
    out
}

/// Planar-wave channel with uniform Doppler. Only defined for linear arrays.
pub fn far_field_channel(
    grid: &OfdmGrid,
    geometry: &ArrayGeometry,
    target: &TargetState,
) -> Result<ChannelTensor> {
    synthesize(ChannelModel::FarField, grid, geometry, target)
}

/// Spherical-wave channel with per-element Doppler; any geometry.
pub fn near_field_channel(
    grid: &OfdmGrid,
    geometry: &ArrayGeometry,
    target: &TargetState,
) -> Result<ChannelTensor> {
    synthesize(ChannelModel::NearField, grid, geometry, target)
}

pub fn synthesize(
    model: ChannelModel,
    grid: &OfdmGrid,
    geometry: &ArrayGeometry,
    target: &TargetState,
) -> Result<ChannelTensor> {
    target.validate()?;
    if model == ChannelModel::FarField && !geometry.kind().is_linear() {
        return Err(Error::UnsupportedGeometry(
            "the planar-wave model is only defined for linear arrays".into(),
        ));
    }
    let terms = element_terms(model, geometry, target);
    Ok(synthesize_terms(grid, &terms, target.gain))
}

/// Adds circularly-symmetric complex Gaussian noise at `snr_db` relative to
/// the tensor's mean power (|beta|^2 for a noiseless synthesis).
///
/// `f64::INFINITY` is the noiseless sentinel and returns the input unchanged.
pub fn add_noise(tensor: &ChannelTensor, snr_db: f64, seed: u64) -> Result<ChannelTensor> {
    if snr_db == f64::INFINITY {
        return Ok(tensor.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidInput(format!("snr_db must be finite or +inf, got {snr_db}")));
    }
    let variance = tensor.mean_power() / 10f64.powf(snr_db / 10.0);
    let scale = (variance / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = tensor.clone();
    for z in out.data.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *z += Complex64::new(scale * re, scale * im);
    }
    Ok(out)
}

/// Largest wrapped phase difference (radians) between two equally shaped
/// tensors.
pub fn max_phase_gap(a: &ChannelTensor, b: &ChannelTensor) -> f64 {
    assert_eq!(a.shape(), b.shape(), "tensor shapes differ");
    a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x * y.conj()).arg().abs())
        .fold(0.0, f64::max)
}
