use std::path::PathBuf;

use nfisac::channel::ChannelTensor;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn config_seeds() {
    for (path, bytes) in seeds("fuzz_config") {
        let text = std::str::from_utf8(&bytes).unwrap();
        let problems = nfisac::config::validate_text(text);
        let is_preset = path.file_name().unwrap().to_str().unwrap().starts_with("seed_fig");
        assert_eq!(problems.is_empty(), is_preset, "{}: {problems:?}", path.display());
    }
}

#[test]
fn binary_seeds() {
    let mut decoded = 0;
    for (_, bytes) in seeds("fuzz_binary") {
        if let Ok(t) = ChannelTensor::from_binary(&bytes) {
            assert_eq!(t.to_binary(), bytes);
            decoded += 1;
        }
    }
    assert_eq!(decoded, 2);
}

#[test]
fn csv_seeds() {
    let ok: Vec<bool> = seeds("fuzz_csv").iter().map(|(_, b)| ChannelTensor::read_csv(b.as_slice()).is_ok()).collect();
    assert_eq!(ok, [false, false, true]);
}
