use std::collections::BTreeSet;
use std::path::Path;

use nfisac::config::{preset, ExperimentConfig};
use nfisac::runner::{self, sha256_hex, RunManifest, MANIFEST_NAME};

/// Preset text with its array and grids shrunk so the run takes milliseconds.
fn small(name: &str) -> ExperimentConfig {
    let text = preset(name)
        .unwrap()
        .replace("elements = 512", "elements = 16")
        .replace("subcarriers = 512", "subcarriers = 16")
        .replace("bandwidth_hz = 6e9", "bandwidth_hz = 1.6e9")
        .replace("step_mps = 0.25", "step_mps = 2.0")
        .replace("points = 64", "points = 5")
        .replace("probe_points = 400", "probe_points = 20");
    ExperimentConfig::from_toml(&text).unwrap()
}

fn run_into(mut cfg: ExperimentConfig, dir: &Path) -> RunManifest {
    cfg.output_dir = dir.to_path_buf();
    runner::run(&cfg).unwrap()
}

fn header(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn manifest_lists_exactly_the_written_files() {
    for name in nfisac::config::PRESET_NAMES {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = run_into(small(name), tmp.path());
        let on_disk: BTreeSet<String> = std::fs::read_dir(tmp.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n != MANIFEST_NAME)
            .collect();
        let listed: BTreeSet<String> = manifest.outputs.iter().map(|f| f.path.clone()).collect();
        assert_eq!(on_disk, listed, "{name}");
        for f in &manifest.outputs {
            let bytes = std::fs::read(tmp.path().join(&f.path)).unwrap();
            assert_eq!(f.sha256, sha256_hex(&bytes));
            assert_eq!(f.bytes, bytes.len() as u64);
        }
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(tmp.path().join(MANIFEST_NAME)).unwrap()).unwrap();
        assert_eq!(json["tool"], "nfisac");
        assert_eq!(json["outputs"].as_array().unwrap().len(), manifest.outputs.len());
        assert!(json["config"]["experiment"].is_string());
    }
}

#[test]
fn gallery_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(small("fig1"), tmp.path());
    for model in ["far", "near"] {
        for domain in ["spatial_delay", "angular_frequency", "angular_delay"] {
            assert!(header(tmp.path(), &format!("{model}_{domain}.csv")).starts_with("row,"));
        }
    }
    assert_eq!(header(tmp.path(), "support.csv"), "model,range_m,spread_variation");
}

#[test]
fn sweep_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(small("fig2"), tmp.path());
    let text = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "bandwidth_hz,n_antennas,crb_r_m2,sqrt_crb_m");
    assert_eq!(text.lines().count(), 17);
}

#[test]
fn velocity_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(small("fig3"), tmp.path());
    for r in ["r5m", "r20m"] {
        assert_eq!(header(tmp.path(), &format!("profile_{r}.csv")), "v_r,v_t,value");
        assert!(tmp.path().join(format!("radial_cut_{r}.csv")).is_file());
        assert!(tmp.path().join(format!("transverse_cut_{r}.csv")).is_file());
    }
    assert_eq!(
        header(tmp.path(), "summary.csv"),
        "distance_m,peak_v_radial_mps,peak_v_transverse_mps,peak_correlation,radial_dynamic_range_db,transverse_dynamic_range_db"
    );
}

#[test]
fn seed_changes_noisy_outputs_only() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = small("fig3");
    let first = run_into(cfg.clone(), a.path());
    cfg.seed = 99;
    let second = run_into(cfg, b.path());
    assert_ne!(first.outputs, second.outputs);
}

#[test]
fn beam_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(small("fig4"), tmp.path());
    assert_eq!(header(tmp.path(), "beam.csv"), "distance_m,gain_db,kind,focal_distance_m");
    assert_eq!(header(tmp.path(), "widths.csv"), "kind,focal_distance_m,lower_m,upper_m,width_m,width_s");
    assert_eq!(header(tmp.path(), "cross_gain.csv"), "focal_a_m,focal_b_m,cross_gain");
}

#[test]
fn map_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(small("fig5"), tmp.path());
    for kind in ["dense_ula", "sparse_ula", "uca"] {
        let text = std::fs::read_to_string(tmp.path().join(format!("map_{kind}.csv"))).unwrap();
        assert_eq!(text.lines().next().unwrap(), "r_m,theta_rad,crb_r_m2");
        assert_eq!(text.lines().count(), 26);
    }
}
