//! Experiment configuration: a strict TOML schema plus semantic checks that
//! report every violation with the offending field and line.

use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{grid_violations, symbols_for_duration, OfdmGrid};
use crate::crb::PolarRegion;
use crate::geometry::{geometry_violations, ArrayGeometry, ArrayKind, TargetState, SPEED_OF_LIGHT};
use crate::velocity::{stepped_axis, VelocityGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ChannelGallery,
    CrbSweep,
    VelocityProfiles,
    BeamCompare,
    CrbMap,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::ChannelGallery,
        ExperimentKind::CrbSweep,
        ExperimentKind::VelocityProfiles,
        ExperimentKind::BeamCompare,
        ExperimentKind::CrbMap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ChannelGallery => "channel-gallery",
            ExperimentKind::CrbSweep => "crb-sweep",
            ExperimentKind::VelocityProfiles => "velocity-profiles",
            ExperimentKind::BeamCompare => "beam-compare",
            ExperimentKind::CrbMap => "crb-map",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Per-entry signal-to-noise ratio in dB; `inf` disables noise.
    pub snr_db: Option<f64>,
    pub grid: GridSection,
    pub geometry: GeometrySection,
    pub target: Option<TargetSection>,
    pub gallery: Option<GallerySection>,
    pub sweep: Option<SweepSection>,
    pub velocity: Option<VelocitySection>,
    pub beam: Option<BeamSection>,
    pub map: Option<MapSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub carrier_hz: f64,
    pub subcarriers: Option<usize>,
    pub subcarrier_spacing_hz: Option<f64>,
    pub bandwidth_hz: Option<f64>,
    pub symbols: Option<usize>,
    pub sensing_duration_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub kind: Option<ArrayKind>,
    pub elements: Option<usize>,
    pub spacing_m: Option<f64>,
    pub spacing_wavelengths: Option<f64>,
    pub radius_m: Option<f64>,
    pub orientation_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub range_m: Option<f64>,
    pub angle_deg: f64,
    pub v_radial_mps: Option<f64>,
    pub v_transverse_mps: Option<f64>,
    pub gain_re: Option<f64>,
    pub gain_im: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GallerySection {
    pub far_range_m: f64,
    pub near_range_m: f64,
    pub floor_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub bandwidths_hz: Vec<f64>,
    pub antennas: Vec<usize>,
}

fn default_velocity_limits() -> [f64; 2] {
    [-20.0, 20.0]
}

fn default_velocity_step() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocitySection {
    pub ranges_m: Vec<f64>,
    #[serde(default = "default_velocity_limits")]
    pub radial_mps: [f64; 2],
    #[serde(default = "default_velocity_limits")]
    pub transverse_mps: [f64; 2],
    #[serde(default = "default_velocity_step")]
    pub step_mps: f64,
}

fn default_probe_min() -> f64 {
    1.0
}

fn default_probe_max() -> f64 {
    200.0
}

fn default_probe_points() -> usize {
    400
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    pub focal_ranges_m: Vec<f64>,
    /// Extra focusing beam evaluated over one decade beyond its focus.
    pub far_focal_range_m: Option<f64>,
    #[serde(default = "default_probe_min")]
    pub probe_min_m: f64,
    #[serde(default = "default_probe_max")]
    pub probe_max_m: f64,
    #[serde(default = "default_probe_points")]
    pub probe_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub arrays: Vec<ArrayKind>,
    pub range_min_m: f64,
    pub range_max_m: f64,
    pub range_points: usize,
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub angle_points: usize,
}

/// One configuration problem, located by dotted field path and, when the
/// field appears in the source text, its 1-based line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

/// Fully resolved inputs of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Gallery(GalleryPlan),
    Sweep(SweepPlan),
    Velocity(VelocityPlan),
    Beam(BeamPlan),
    Map(MapPlan),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryPlan {
    pub grid: OfdmGrid,
    pub geometry: ArrayGeometry,
    pub angle: f64,
    pub far_range: f64,
    pub near_range: f64,
    pub floor_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub carrier: f64,
    pub spacing: f64,
    pub symbols: usize,
    pub kind: ArrayKind,
    pub antennas: Vec<usize>,
    /// `(bandwidth, subcarriers)` pairs.
    pub bandwidths: Vec<(f64, usize)>,
    pub target: TargetState,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityPlan {
    pub grid: OfdmGrid,
    pub geometry: ArrayGeometry,
    pub angle: f64,
    pub ranges: Vec<f64>,
    pub v_radial: f64,
    pub v_transverse: f64,
    pub gain: Complex64,
    pub snr_db: f64,
    pub velocity_grid: VelocityGrid,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamPlan {
    pub grid: OfdmGrid,
    pub geometry: ArrayGeometry,
    pub angle: f64,
    pub focal_ranges: Vec<f64>,
    pub far_focal_range: Option<f64>,
    pub probe: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapPlan {
    pub grid: OfdmGrid,
    pub elements: usize,
    pub arrays: Vec<ArrayKind>,
    pub region: PolarRegion,
    pub snr_db: f64,
}

impl Plan {
    pub fn experiment(&self) -> ExperimentKind {
        match self {
            Plan::Gallery(_) => ExperimentKind::ChannelGallery,
            Plan::Sweep(_) => ExperimentKind::CrbSweep,
            Plan::Velocity(_) => ExperimentKind::VelocityProfiles,
            Plan::Beam(_) => ExperimentKind::BeamCompare,
            Plan::Map(_) => ExperimentKind::CrbMap,
        }
    }
}

struct Checker {
    diagnostics: Vec<Diagnostic>,
}

impl Checker {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic { path: path.to_string(), line: None, message: message.into() });
    }

    fn positive(&mut self, path: &str, v: f64) -> Option<f64> {
        if v.is_finite() && v > 0.0 {
            Some(v)
        } else {
            self.push(path, format!("must be positive and finite, got {v}"));
            None
        }
    }

    fn required<T: Copy>(&mut self, path: &str, v: Option<T>) -> Option<T> {
        if v.is_none() {
            self.push(path, "is required for this experiment");
        }
        v
    }

    fn forbidden<T>(&mut self, path: &str, v: &Option<T>, why: &str) {
        if v.is_some() {
            self.push(path, format!("must not be set: {why}"));
        }
    }

    fn positive_list(&mut self, path: &str, values: &[f64], increasing: bool) -> bool {
        let before = self.diagnostics.len();
        if values.is_empty() {
            self.push(path, "must not be empty");
        }
        for (i, v) in values.iter().enumerate() {
            if !(v.is_finite() && *v > 0.0) {
                self.push(path, format!("entry {i} must be positive and finite, got {v}"));
            }
        }
        if increasing && values.windows(2).any(|w| w[1] <= w[0]) {
            self.push(path, "must be strictly increasing");
        }
        self.diagnostics.len() == before
    }

    fn section<'a, T>(&mut self, path: &str, s: &'a Option<T>) -> Option<&'a T> {
        if s.is_none() {
            self.push(path, "section is required for this experiment");
        }
        s.as_ref()
    }
}

fn angle_in_open_half_plane(c: &mut Checker, path: &str, deg: f64) -> Option<f64> {
    if deg.is_finite() && deg > 0.0 && deg < 180.0 {
        Some(deg.to_radians())
    } else {
        c.push(path, format!("must lie strictly between 0 and 180 degrees, got {deg}"));
        None
    }
}

impl ExperimentConfig {
    /// Parses strict TOML; syntax and schema errors carry their line.
    pub fn from_toml(text: &str) -> Result<Self, Vec<Diagnostic>> {
        toml::from_str::<Self>(text).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(text, s.start));
            vec![Diagnostic { path: "config".into(), line, message: e.message().trim().to_string() }]
        })
    }

    /// Resolves every section into the plan `run` executes, or returns
    /// every violation found.
    pub fn plan(&self) -> Result<Plan, Vec<Diagnostic>> {
        let mut c = Checker { diagnostics: Vec::new() };
        let plan = self.check(&mut c);
        match plan {
            Some(p) if c.diagnostics.is_empty() => Ok(p),
            _ => Err(c.diagnostics),
        }
    }

    fn check(&self, c: &mut Checker) -> Option<Plan> {
        let kind = self.experiment;
        let sections: [(&str, bool, ExperimentKind); 5] = [
            ("gallery", self.gallery.is_some(), ExperimentKind::ChannelGallery),
            ("sweep", self.sweep.is_some(), ExperimentKind::CrbSweep),
            ("velocity", self.velocity.is_some(), ExperimentKind::VelocityProfiles),
            ("beam", self.beam.is_some(), ExperimentKind::BeamCompare),
            ("map", self.map.is_some(), ExperimentKind::CrbMap),
        ];
        for (name, present, owner) in sections {
            if present && owner != kind {
                c.push(name, format!("section belongs to {owner}, not {kind}"));
            }
        }
        match kind {
            ExperimentKind::ChannelGallery => self.check_gallery(c).map(Plan::Gallery),
            ExperimentKind::CrbSweep => self.check_sweep(c).map(Plan::Sweep),
            ExperimentKind::VelocityProfiles => self.check_velocity(c).map(Plan::Velocity),
            ExperimentKind::BeamCompare => self.check_beam(c).map(Plan::Beam),
            ExperimentKind::CrbMap => self.check_map(c).map(Plan::Map),
        }
    }

    fn carrier(&self, c: &mut Checker) -> Option<f64> {
        c.positive("grid.carrier_hz", self.grid.carrier_hz)
    }

    fn spacing(&self, c: &mut Checker, subcarriers: Option<usize>) -> Option<f64> {
        let g = &self.grid;
        match (g.subcarrier_spacing_hz, g.bandwidth_hz) {
            (Some(_), Some(_)) => {
                c.push("grid.bandwidth_hz", "set either subcarrier_spacing_hz or bandwidth_hz, not both");
                None
            }
            (None, None) => {
                c.push("grid.subcarrier_spacing_hz", "one of subcarrier_spacing_hz or bandwidth_hz is required");
                None
            }
            (Some(s), None) => c.positive("grid.subcarrier_spacing_hz", s),
            (None, Some(bw)) => {
                let bw = c.positive("grid.bandwidth_hz", bw)?;
                match subcarriers {
                    Some(m) if m > 0 => Some(bw / m as f64),
                    _ => {
                        c.push("grid.bandwidth_hz", "needs grid.subcarriers to derive the spacing");
                        None
                    }
                }
            }
        }
    }

    fn symbols(&self, c: &mut Checker, spacing: Option<f64>) -> Option<usize> {
        let g = &self.grid;
        match (g.symbols, g.sensing_duration_s) {
            (Some(_), Some(_)) => {
                c.push("grid.sensing_duration_s", "set either symbols or sensing_duration_s, not both");
                None
            }
            (None, None) => {
                c.push("grid.symbols", "one of symbols or sensing_duration_s is required");
                None
            }
            (Some(k), None) => Some(k),
            (None, Some(t)) => {
                let t = c.positive("grid.sensing_duration_s", t)?;
                let k = symbols_for_duration(t, spacing?);
                if k == 0 {
                    c.push("grid.sensing_duration_s", format!("{t} s is shorter than one symbol"));
                    return None;
                }
                Some(k)
            }
        }
    }

    fn ofdm(&self, c: &mut Checker) -> Option<OfdmGrid> {
        let m = c.required("grid.subcarriers", self.grid.subcarriers);
        let carrier = self.carrier(c);
        let spacing = self.spacing(c, m);
        let k = self.symbols(c, spacing);
        let (carrier, m, spacing, k) = (carrier?, m?, spacing?, k?);
        let problems = grid_violations(carrier, m, spacing, k);
        for p in &problems {
            c.push("grid", p.clone());
        }
        if problems.is_empty() {
            OfdmGrid::new(carrier, m, spacing, k).ok()
        } else {
            None
        }
    }

    fn array(&self, c: &mut Checker, kind: ArrayKind, elements: usize, wavelength: f64) -> Option<ArrayGeometry> {
        let g = &self.geometry;
        let spacing = match (g.spacing_m, g.spacing_wavelengths) {
            (Some(_), Some(_)) => {
                c.push("geometry.spacing_m", "set either spacing_m or spacing_wavelengths, not both");
                return None;
            }
            (Some(d), None) => Some(d),
            (None, Some(w)) => Some(w * wavelength),
            (None, None) => None,
        };
        let problems = geometry_violations(kind, elements, wavelength, spacing, g.radius_m);
        for p in &problems {
            c.push("geometry", p.clone());
        }
        let orientation = match g.orientation_deg {
            Some(o) if !o.is_finite() => {
                c.push("geometry.orientation_deg", format!("must be finite, got {o}"));
                return None;
            }
            Some(o) => {
                if kind.is_linear() {
                    c.push("geometry.orientation_deg", "only applies to uca");
                    return None;
                }
                o.to_radians()
            }
            None => 0.0,
        };
        if !problems.is_empty() {
            return None;
        }
        ArrayGeometry::with_orientation(kind, elements, wavelength, orientation).ok()
    }

    fn geometry(&self, c: &mut Checker, wavelength: Option<f64>) -> Option<ArrayGeometry> {
        let kind = c.required("geometry.kind", self.geometry.kind);
        let elements = c.required("geometry.elements", self.geometry.elements);
        self.array(c, kind?, elements?, wavelength?)
    }

    fn target(&self, c: &mut Checker) -> Option<&TargetSection> {
        c.section("target", &self.target)
    }

    fn gain(&self, c: &mut Checker) -> Option<Complex64> {
        let t = self.target.as_ref()?;
        let g = Complex64::new(t.gain_re.unwrap_or(1.0), t.gain_im.unwrap_or(0.0));
        if !(g.re.is_finite() && g.im.is_finite()) || g.norm_sqr() == 0.0 {
            c.push("target.gain_re", format!("target gain must be finite and nonzero, got {g}"));
            return None;
        }
        Some(g)
    }

    fn snr(&self, c: &mut Checker, allow_noiseless: bool) -> Option<f64> {
        let s = c.required("snr_db", self.snr_db)?;
        if s.is_nan() || s == f64::NEG_INFINITY || (s == f64::INFINITY && !allow_noiseless) {
            let msg = if allow_noiseless { "must be a number or inf" } else { "must be finite" };
            c.push("snr_db", format!("{msg}, got {s}"));
            return None;
        }
        Some(s)
    }

    fn check_gallery(&self, c: &mut Checker) -> Option<GalleryPlan> {
        let grid = self.ofdm(c);
        let geometry = self.geometry(c, grid.map(|g| g.wavelength()));
        let angle = self.target(c).and_then(|t| angle_in_open_half_plane(c, "target.angle_deg", t.angle_deg));
        let s = c.section("gallery", &self.gallery)?;
        let far = c.positive("gallery.far_range_m", s.far_range_m);
        let near = c.positive("gallery.near_range_m", s.near_range_m);
        if !(s.floor_db.is_finite() && s.floor_db < 0.0) {
            c.push("gallery.floor_db", format!("must be negative, got {}", s.floor_db));
        }
        if let Some(g) = &geometry {
            if !g.kind().is_linear() {
                c.push("geometry.kind", "the far-field panel needs a linear array");
            }
        }
        Some(GalleryPlan {
            grid: grid?,
            geometry: geometry?,
            angle: angle?,
            far_range: far?,
            near_range: near?,
            floor_db: s.floor_db,
        })
    }

    fn check_sweep(&self, c: &mut Checker) -> Option<SweepPlan> {
        let why = "the sweep sets the subcarrier count from [sweep].bandwidths_hz";
        c.forbidden("grid.subcarriers", &self.grid.subcarriers, why);
        c.forbidden("grid.bandwidth_hz", &self.grid.bandwidth_hz, why);
        c.forbidden("geometry.elements", &self.geometry.elements, "the sweep takes antenna counts from [sweep].antennas");
        let carrier = self.carrier(c);
        let spacing = match self.grid.subcarrier_spacing_hz {
            Some(s) => c.positive("grid.subcarrier_spacing_hz", s),
            None => {
                c.push("grid.subcarrier_spacing_hz", "is required for this experiment");
                None
            }
        };
        let symbols = self.symbols(c, spacing);
        let kind = c.required("geometry.kind", self.geometry.kind);
        let snr = self.snr(c, false);
        let target = self.static_target(c);
        let s = c.section("sweep", &self.sweep)?;
        let mut bandwidths = Vec::new();
        if c.positive_list("sweep.bandwidths_hz", &s.bandwidths_hz, true) {
            if let Some(df) = spacing {
                for bw in &s.bandwidths_hz {
                    let m = (bw / df).round();
                    if m < 1.0 || ((bw / df) - m).abs() > 1e-9 * m {
                        c.push("sweep.bandwidths_hz", format!("{bw} Hz is not a whole number of {df} Hz subcarriers"));
                    } else {
                        bandwidths.push((*bw, m as usize));
                    }
                }
            }
        }
        let antennas: Vec<f64> = s.antennas.iter().map(|&n| n as f64).collect();
        c.positive_list("sweep.antennas", &antennas, true);
        let (carrier, spacing, symbols, kind) = (carrier?, spacing?, symbols?, kind?);
        let wavelength = SPEED_OF_LIGHT / carrier;
        for &(_, m) in &bandwidths {
            for p in grid_violations(carrier, m, spacing, symbols) {
                c.push("sweep.bandwidths_hz", p);
            }
        }
        for &n in &s.antennas {
            if n > 0 {
                self.array(c, kind, n, wavelength);
            }
        }
        Some(SweepPlan {
            carrier,
            spacing,
            symbols,
            kind,
            antennas: s.antennas.clone(),
            bandwidths,
            target: target?,
            snr_db: snr?,
        })
    }

    fn static_target(&self, c: &mut Checker) -> Option<TargetState> {
        let t = self.target(c)?;
        let angle = angle_in_open_half_plane(c, "target.angle_deg", t.angle_deg);
        let range = c.required("target.range_m", t.range_m).and_then(|r| c.positive("target.range_m", r));
        let gain = self.gain(c);
        for (path, v) in [("target.v_radial_mps", t.v_radial_mps), ("target.v_transverse_mps", t.v_transverse_mps)] {
            if v.is_some_and(|v| v != 0.0) {
                c.push(path, "distance sensing assumes a static target");
            }
        }
        Some(TargetState::new(range?, angle?).ok()?.with_gain(gain?))
    }

    fn check_velocity(&self, c: &mut Checker) -> Option<VelocityPlan> {
        let grid = self.ofdm(c);
        if let Some(g) = &grid {
            if g.symbols < 2 {
                c.push("grid.symbols", "velocity profiling needs at least 2 symbols");
            }
        }
        let geometry = self.geometry(c, grid.map(|g| g.wavelength()));
        let snr = self.snr(c, true);
        let t = self.target(c);
        let angle = t.and_then(|t| angle_in_open_half_plane(c, "target.angle_deg", t.angle_deg));
        let vr = t.and_then(|t| c.required("target.v_radial_mps", t.v_radial_mps));
        let vt = t.and_then(|t| c.required("target.v_transverse_mps", t.v_transverse_mps));
        for (path, v) in [("target.v_radial_mps", vr), ("target.v_transverse_mps", vt)] {
            if v.is_some_and(|v| !v.is_finite()) {
                c.push(path, "must be finite");
            }
        }
        if t.is_some_and(|t| t.range_m.is_some()) {
            c.push("target.range_m", "velocity profiles take their distances from [velocity].ranges_m");
        }
        let gain = self.gain(c);
        let s = c.section("velocity", &self.velocity)?;
        c.positive_list("velocity.ranges_m", &s.ranges_m, false);
        let step = c.positive("velocity.step_mps", s.step_mps);
        let mut axis = |path: &str, lim: [f64; 2]| -> Option<Vec<f64>> {
            if !(lim[0].is_finite() && lim[1].is_finite() && lim[0] <= 0.0 && lim[1] >= 0.0 && lim[0] < lim[1]) {
                c.push(path, format!("must be a finite interval [lo, hi] with lo <= 0 <= hi, got {lim:?}"));
                return None;
            }
            let a = stepped_axis(lim[0], lim[1], step?);
            if !a.contains(&0.0) {
                c.push(path, "the stepped axis must contain 0; make both limits multiples of step_mps");
                return None;
            }
            Some(a)
        };
        let radial = axis("velocity.radial_mps", s.radial_mps);
        let transverse = axis("velocity.transverse_mps", s.transverse_mps);
        let velocity_grid = match (radial, transverse) {
            (Some(r), Some(t)) => match VelocityGrid::new(r, t) {
                Ok(g) => Some(g),
                Err(e) => {
                    c.push("velocity", e.to_string());
                    None
                }
            },
            _ => None,
        };
        Some(VelocityPlan {
            grid: grid?,
            geometry: geometry?,
            angle: angle?,
            ranges: s.ranges_m.clone(),
            v_radial: vr?,
            v_transverse: vt?,
            gain: gain?,
            snr_db: snr?,
            velocity_grid: velocity_grid?,
            seed: self.seed,
        })
    }

    fn check_beam(&self, c: &mut Checker) -> Option<BeamPlan> {
        let grid = self.ofdm(c);
        let geometry = self.geometry(c, grid.map(|g| g.wavelength()));
        let angle = self.target(c).and_then(|t| angle_in_open_half_plane(c, "target.angle_deg", t.angle_deg));
        let s = c.section("beam", &self.beam)?;
        c.positive_list("beam.focal_ranges_m", &s.focal_ranges_m, false);
        if let Some(f) = s.far_focal_range_m {
            c.positive("beam.far_focal_range_m", f);
        }
        let lo = c.positive("beam.probe_min_m", s.probe_min_m);
        let hi = c.positive("beam.probe_max_m", s.probe_max_m);
        if s.probe_points == 0 {
            c.push("beam.probe_points", "must be at least 1");
        }
        if let (Some(lo), Some(hi)) = (lo, hi) {
            if hi < lo {
                c.push("beam.probe_max_m", format!("must not be below probe_min_m ({lo})"));
            }
        }
        Some(BeamPlan {
            grid: grid?,
            geometry: geometry?,
            angle: angle?,
            focal_ranges: s.focal_ranges_m.clone(),
            far_focal_range: s.far_focal_range_m,
            probe: crate::beam::log_axis(lo?, hi?, s.probe_points),
        })
    }

    fn check_map(&self, c: &mut Checker) -> Option<MapPlan> {
        c.forbidden("geometry.kind", &self.geometry.kind, "the map takes its arrays from [map].arrays");
        let grid = self.ofdm(c);
        let elements = c.required("geometry.elements", self.geometry.elements);
        let snr = self.snr(c, false);
        let s = c.section("map", &self.map)?;
        if s.arrays.is_empty() {
            c.push("map.arrays", "must list at least one array kind");
        }
        if let (Some(g), Some(n)) = (&grid, elements) {
            for kind in &s.arrays {
                self.array(c, *kind, n, g.wavelength());
            }
        }
        let rmin = c.positive("map.range_min_m", s.range_min_m);
        let rmax = c.positive("map.range_max_m", s.range_max_m);
        if let (Some(a), Some(b)) = (rmin, rmax) {
            if b < a {
                c.push("map.range_max_m", format!("must not be below range_min_m ({a})"));
            }
        }
        let amin = angle_in_open_half_plane(c, "map.angle_min_deg", s.angle_min_deg);
        let amax = angle_in_open_half_plane(c, "map.angle_max_deg", s.angle_max_deg);
        if let (Some(a), Some(b)) = (amin, amax) {
            if b < a {
                c.push("map.angle_max_deg", format!("must not be below angle_min_deg ({})", s.angle_min_deg));
            }
        }
        for (path, n) in [("map.range_points", s.range_points), ("map.angle_points", s.angle_points)] {
            if n == 0 {
                c.push(path, "must be at least 1");
            }
        }
        Some(MapPlan {
            grid: grid?,
            elements: elements?,
            arrays: s.arrays.clone(),
            region: PolarRegion::uniform((rmin?, rmax?), s.range_points, (amin?, amax?), s.angle_points),
            snr_db: snr?,
        })
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Line holding `path` (`section.key` or a top-level `key`) in `text`,
/// falling back to the section header when the key itself is absent.
pub fn locate(text: &str, path: &str) -> Option<usize> {
    let (section, key) = match path.split_once('.') {
        Some((s, k)) => (Some(s), Some(k)),
        None if text.lines().any(|l| header(l) == Some(path)) => (Some(path), None),
        None => (None, Some(path)),
    };
    let mut current: Option<&str> = None;
    let mut header_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = header(line) {
            current = Some(h);
            if Some(h) == section {
                header_line = Some(i + 1);
            }
            continue;
        }
        if current != section {
            continue;
        }
        if let Some(k) = key {
            if let Some((lhs, _)) = line.split_once('=') {
                if lhs.trim() == k {
                    return Some(i + 1);
                }
            }
        }
    }
    header_line
}

fn header(line: &str) -> Option<&str> {
    let line = line.trim();
    let inner = line.strip_prefix('[')?.split(']').next()?;
    Some(inner.trim())
}

/// Parses and checks `text`, returning every problem with its line.
pub fn validate_text(text: &str) -> Vec<Diagnostic> {
    match ExperimentConfig::from_toml(text) {
        Err(d) => d,
        Ok(cfg) => match cfg.plan() {
            Ok(_) => Vec::new(),
            Err(mut d) => {
                for x in &mut d {
                    x.line = locate(text, &x.path);
                }
                d
            }
        },
    }
}

pub const PRESET_NAMES: [&str; 5] = ["fig1", "fig2", "fig3", "fig4", "fig5"];

/// Built-in configuration text for `name`.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "fig1" => Some(include_str!("../presets/fig1.toml")),
        "fig2" => Some(include_str!("../presets/fig2.toml")),
        "fig3" => Some(include_str!("../presets/fig3.toml")),
        "fig4" => Some(include_str!("../presets/fig4.toml")),
        "fig5" => Some(include_str!("../presets/fig5.toml")),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"
experiment = "crb-sweep"
snr_db = 0.0

[grid]
carrier_hz = 60e9
subcarrier_spacing_hz = 1e6
sensing_duration_s = 1e-3

[geometry]
kind = "dense-ula"

[target]
range_m = 20.0
angle_deg = 60.0

[sweep]
bandwidths_hz = [1e6, 1e7]
antennas = [64, 128]
"#;

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            let d = validate_text(preset(name).unwrap());
            assert!(d.is_empty(), "{name}: {d:?}");
        }
    }

    #[test]
    fn sweep_resolves_symbols_from_duration() {
        let Plan::Sweep(p) = ExperimentConfig::from_toml(SWEEP).unwrap().plan().unwrap() else {
            panic!("wrong plan");
        };
        assert_eq!(p.symbols, 1000);
        assert_eq!(p.bandwidths, vec![(1e6, 1), (1e7, 10)]);
    }

    #[test]
    fn zero_spacing_is_named_with_its_line() {
        let text = SWEEP.replace("subcarrier_spacing_hz = 1e6", "subcarrier_spacing_hz = 0.0");
        let d = validate_text(&text);
        let hit = d.iter().find(|d| d.path == "grid.subcarrier_spacing_hz").unwrap();
        assert_eq!(hit.line, Some(7));
        assert!(hit.message.contains("positive"));
    }

    #[test]
    fn dense_spacing_violation_is_reported() {
        let text = SWEEP.replace("kind = \"dense-ula\"", "kind = \"dense-ula\"\nspacing_wavelengths = 0.7");
        let d = validate_text(&text);
        assert!(d.iter().any(|d| d.path == "geometry" && d.message.contains("0.5 wavelength")), "{d:?}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let text = SWEEP.replace("angle_deg = 60.0", "angle_deg = 60.0\nelevation = 3");
        let d = validate_text(&text);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].line, Some(16));
        assert!(d[0].message.contains("elevation"));
    }

    #[test]
    fn all_problems_are_reported() {
        let text = SWEEP
            .replace("carrier_hz = 60e9", "carrier_hz = -1.0")
            .replace("range_m = 20.0", "range_m = 0.0")
            .replace("antennas = [64, 128]", "antennas = [128, 64]");
        let d = validate_text(&text);
        let paths: Vec<&str> = d.iter().map(|d| d.path.as_str()).collect();
        for want in ["grid.carrier_hz", "target.range_m", "sweep.antennas"] {
            assert!(paths.contains(&want), "{paths:?}");
        }
    }

    #[test]
    fn foreign_section_is_rejected() {
        let text = format!("{SWEEP}\n[beam]\nfocal_ranges_m = [4.0]\n");
        let d = validate_text(&text);
        assert!(d.iter().any(|d| d.path == "beam" && d.line.is_some()), "{d:?}");
    }

    #[test]
    fn locate_finds_keys_and_headers() {
        let text = "a = 1\n[grid]\nb = 2\n[target]\nb = 3\n";
        assert_eq!(locate(text, "a"), Some(1));
        assert_eq!(locate(text, "grid.b"), Some(3));
        assert_eq!(locate(text, "target.b"), Some(5));
        assert_eq!(locate(text, "target.c"), Some(4));
        assert_eq!(locate(text, "grid"), Some(2));
        assert_eq!(locate(text, "map.x"), None);
    }
}
