//! Executes a validated experiment plan, writes its CSVs and a manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::beam::{focusing_weights, gain_profile, half_power_interval, log_axis, temporal_weights, write_patterns_csv};
use crate::channel::{add_noise, synthesize, ChannelModel, OfdmGrid};
use crate::config::{
    BeamPlan, Diagnostic, ExperimentConfig, GalleryPlan, MapPlan, Plan, SweepPlan, VelocityPlan,
};
use crate::crb::{crb_map, fisher_information, EstimationScenario, Param};
use crate::geometry::{ArrayGeometry, TargetState, SPEED_OF_LIGHT};
use crate::transforms::{spread_per_column, spread_variation, write_heatmap_csv, Domain, DomainMatrix};
use crate::velocity::{profile_dynamic_range, velocity_profile};
use crate::format::Num;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n{}", format_diagnostics(.0))]
    Config(Vec<Diagnostic>),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io { .. } => 3,
            RunError::Numerical(_) => 4,
        }
    }
}

pub fn format_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

impl From<crate::Error> for RunError {
    fn from(e: crate::Error) -> Self {
        RunError::Numerical(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub duration_s: f64,
    pub outputs: Vec<OutputFile>,
}

/// Rendered output files, in write order.
type Outputs = Vec<(String, Vec<u8>)>;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs `config` into its `output_dir`.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest, RunError> {
    let plan = config.plan().map_err(RunError::Config)?;
    let start = Instant::now();
    let outputs = match &plan {
        Plan::Gallery(p) => gallery(p)?,
        Plan::Sweep(p) => sweep(p)?,
        Plan::Velocity(p) => velocity(p)?,
        Plan::Beam(p) => beam(p)?,
        Plan::Map(p) => map(p)?,
    };
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
    let mut files = Vec::with_capacity(outputs.len());
    for (name, bytes) in &outputs {
        write_file(&dir.join(name), bytes)?;
        files.push(OutputFile { path: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
    }
    let manifest = RunManifest {
        tool: "nfisac".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        duration_s: start.elapsed().as_secs_f64(),
        outputs: files,
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| RunError::Numerical(e.to_string()))?;
    write_file(&dir.join(MANIFEST_NAME), &json)?;
    Ok(manifest)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    // writing into a Vec cannot fail
    f(&mut buf).expect("in-memory write");
    buf
}

fn gallery(p: &GalleryPlan) -> Result<Outputs, RunError> {
    let mut out = Vec::new();
    let mut support = String::from("model,range_m,spread_variation\n");
    for (model, label, range) in [
        (ChannelModel::FarField, "far", p.far_range),
        (ChannelModel::NearField, "near", p.near_range),
    ] {
        let target = TargetState::new(range, p.angle)?;
        let h = synthesize(model, &p.grid, &p.geometry, &target)?.symbol_matrix(0);
        for domain in [Domain::SpatialDelay, Domain::AngularFrequency, Domain::AngularDelay] {
            let m = DomainMatrix::spatial_frequency(h.clone()).into_domain(domain);
            let name = format!("{label}_{}.csv", domain.name().replace('-', "_"));
            out.push((name, render(|w| write_heatmap_csv(&m, p.floor_db, w))));
            if domain == Domain::AngularDelay {
                let v = spread_variation(&spread_per_column(&m, -20.0)).unwrap_or(f64::NAN);
                support.push_str(&format!("{},{},{}\n", model.name(), Num(range), Num(v)));
            }
        }
    }
    out.push(("support.csv".into(), support.into_bytes()));
    Ok(out)
}

fn sweep(p: &SweepPlan) -> Result<Outputs, RunError> {
    let wavelength = SPEED_OF_LIGHT / p.carrier;
    let cells: Vec<(usize, f64, usize)> = p
        .antennas
        .iter()
        .flat_map(|&n| p.bandwidths.iter().map(move |&(bw, m)| (n, bw, m)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(n, _, m)| {
            let grid = OfdmGrid::new(p.carrier, m, p.spacing, p.symbols)?;
            let geometry = ArrayGeometry::new(p.kind, n, wavelength)?;
            let s = EstimationScenario::distance_sensing(grid, geometry, p.target, p.snr_db)?;
            Ok(fisher_information(&s)?.crb_of(Param::Range).unwrap_or(f64::INFINITY))
        })
        .collect::<crate::Result<Vec<f64>>>()?;
    if values.iter().all(|v| v.is_infinite()) {
        return Err(RunError::Numerical("distance is unidentifiable in every sweep cell".into()));
    }
    let mut csv = String::from("bandwidth_hz,n_antennas,crb_r_m2,sqrt_crb_m\n");
    for ((n, bw, _), v) in cells.iter().zip(&values) {
        csv.push_str(&format!("{},{n},{},{}\n", Num(*bw), Num(*v), Num(v.sqrt())));
    }
    Ok(vec![("sweep.csv".into(), csv.into_bytes())])
}

fn range_label(r: f64) -> String {
    format!("r{}m", Num(r)).replace('.', "p")
}

/// Noise seed for the `index`-th distance of a velocity run.
pub fn velocity_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

fn velocity(p: &VelocityPlan) -> Result<Outputs, RunError> {
    let mut out = Vec::new();
    let mut summary = String::from(
        "distance_m,peak_v_radial_mps,peak_v_transverse_mps,peak_correlation,radial_dynamic_range_db,transverse_dynamic_range_db\n",
    );
    for (i, &range) in p.ranges.iter().enumerate() {
        let target = TargetState::moving(range, p.angle, p.v_radial, p.v_transverse)?.with_gain(p.gain);
        let clean = synthesize(ChannelModel::NearField, &p.grid, &p.geometry, &target)?;
        let observation = if p.snr_db.is_finite() {
            add_noise(&clean, p.snr_db, velocity_seed(p.seed, i))?
        } else {
            clean
        };
        let profile = velocity_profile(
            &observation,
            &p.grid,
            &p.geometry,
            (range, p.angle),
            &p.velocity_grid,
            ChannelModel::NearField,
        )?;
        let label = range_label(range);
        out.push((format!("profile_{label}.csv"), render(|w| profile.write_csv(w))));
        out.push((format!("radial_cut_{label}.csv"), render(|w| profile.write_radial_cut(w))));
        out.push((format!("transverse_cut_{label}.csv"), render(|w| profile.write_transverse_cut(w))));
        summary.push_str(&format!(
            "{},{},{},{},{},{}\n",
            Num(range),
            Num(profile.peak.0),
            Num(profile.peak.1),
            Num(profile.peak_correlation),
            Num(profile_dynamic_range(&profile.radial_cut)?),
            Num(profile_dynamic_range(&profile.transverse_cut)?)
        ));
    }
    out.push(("summary.csv".into(), summary.into_bytes()));
    Ok(out)
}

fn beam(p: &BeamPlan) -> Result<Outputs, RunError> {
    let mut patterns = Vec::new();
    let mut widths = String::from("kind,focal_distance_m,lower_m,upper_m,width_m,width_s\n");
    let mut focusing = Vec::new();
    for &r in &p.focal_ranges {
        let spatial = focusing_weights(&p.geometry, (r, p.angle), p.grid.carrier)?;
        let temporal = temporal_weights(&p.grid, r / SPEED_OF_LIGHT)?;
        for w in [&spatial, &temporal] {
            patterns.push(gain_profile(w, &p.probe)?);
            let hp = half_power_interval(w);
            widths.push_str(&format!(
                "{},{},{},{},{},{}\n",
                w.kind().name(),
                Num(r),
                Num(hp.lower),
                Num(hp.upper),
                Num(hp.width()),
                Num(hp.width() / SPEED_OF_LIGHT)
            ));
        }
        focusing.push(spatial);
    }
    if let Some(r) = p.far_focal_range {
        let w = focusing_weights(&p.geometry, (r, p.angle), p.grid.carrier)?;
        patterns.push(gain_profile(&w, &log_axis(r, 10.0 * r, p.probe.len().max(2)))?);
    }
    let mut cross = String::from("focal_a_m,focal_b_m,cross_gain\n");
    for a in &focusing {
        for b in &focusing {
            if a.focal_distance() != b.focal_distance() {
                cross.push_str(&format!("{},{},{}\n", Num(a.focal_distance()), Num(b.focal_distance()), Num(a.cross_gain(b))));
            }
        }
    }
    Ok(vec![
        ("beam.csv".into(), render(|w| write_patterns_csv(&patterns, w))),
        ("widths.csv".into(), widths.into_bytes()),
        ("cross_gain.csv".into(), cross.into_bytes()),
    ])
}

fn map(p: &MapPlan) -> Result<Outputs, RunError> {
    let mut out = Vec::new();
    let (r0, a0) = (p.region.ranges[0], p.region.angles[0]);
    for &kind in &p.arrays {
        let geometry = ArrayGeometry::new(kind, p.elements, p.grid.wavelength())?;
        let template = EstimationScenario::distance_sensing(p.grid, geometry, TargetState::new(r0, a0)?, p.snr_db)?;
        let m = crb_map(&template, &p.region)?;
        if m.values.iter().all(|v| v.is_infinite()) {
            return Err(RunError::Numerical(format!("distance is unidentifiable in every {kind} map cell")));
        }
        out.push((format!("map_{}.csv", kind.name().replace('-', "_")), render(|w| m.write_csv(w))));
    }
    Ok(out)
}

/// Loads a config file, mapping read failures to I/O errors and parse or
/// validation failures to line-numbered diagnostics.
pub fn load(path: &Path) -> Result<(ExperimentConfig, String), RunError> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })?;
    let config = parse(&text)?;
    Ok((config, text))
}

pub fn parse(text: &str) -> Result<ExperimentConfig, RunError> {
    let config = ExperimentConfig::from_toml(text).map_err(RunError::Config)?;
    let diagnostics = crate::config::validate_text(text);
    if !diagnostics.is_empty() {
        return Err(RunError::Config(diagnostics));
    }
    Ok(config)
}
