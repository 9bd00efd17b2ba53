use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gfm_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfm-sim")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn list_presets_names_every_case() {
    let o = gfm_sim(&["list-presets"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["validate", "sag40", "bolted200ms", "bolted1s", "surface"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing from\n{text}");
    }
    assert!(text.contains("I_max"));
}

#[test]
fn simulate_writes_identical_files_on_rerun() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = gfm_sim(&["simulate", "--preset", "sag40", "--out", dir.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("adaptive"));
    }
    let (fa, fb) = (read_dir(a.path()), read_dir(b.path()));
    assert!(fa.len() >= 5, "{:?}", fa.keys());
    assert_eq!(fa, fb);
    let trace = fa.iter().find(|(k, _)| k.contains("adaptive") && k.ends_with(".csv")).unwrap();
    let text = String::from_utf8_lossy(trace.1);
    assert!(text.starts_with('#'));
    assert!(text.contains("scr = 5.0"));
}

#[test]
fn surface_on_a_custom_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = gfm_sim(&[
        "surface",
        "--preset",
        "surface",
        "--v-grid",
        "0.6,0.8",
        "--values",
        "0.3,0.6",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let files = read_dir(dir.path());
    let adaptive = files.iter().find(|(k, _)| k.contains("adaptive") && k.ends_with(".csv")).unwrap();
    let rows = String::from_utf8_lossy(adaptive.1).lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 4);
}

#[test]
fn unknown_preset_lists_the_valid_ones() {
    let o = gfm_sim(&["simulate", "--preset", "nope"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("nope") && err.contains("sag40") && err.contains("bolted1s"), "{err}");
}

#[test]
fn invalid_surface_grids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = gfm_sim(&["surface", "--preset", "surface", "--v-grid", "1.5", "--out", out]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("1.5"));
    let o = gfm_sim(&["surface", "--preset", "surface", "--values", "", "--out", out]);
    assert!(!o.status.success());
}

#[test]
fn fault_free_config_exceeds_the_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("clean.toml");
    fs::write(&cfg, "[scenario]\nfault = { kind = \"none\" }\n").unwrap();
    let out = dir.path().join("out");
    let o = gfm_sim(&[
        "find-cct",
        "--config",
        cfg.to_str().unwrap(),
        "--horizon",
        "0.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("exceeds horizon"), "{}", stdout(&o));
}

#[test]
fn config_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[grid]\nv_g = 1.0\n").unwrap();
    let o = gfm_sim(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("grid.x_g"), "{}", stderr(&o));

    let o = gfm_sim(&["simulate", "--preset", "sag40", "--strategy", "fancy"]);
    assert!(!o.status.success());
}
