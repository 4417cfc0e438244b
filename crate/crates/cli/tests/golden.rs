//! Golden files. Set UPDATE_GOLDEN=1 to rewrite them after an intended change.

use std::fs;
use std::path::PathBuf;

use ofgnss_cli::records::rows_from_records;
use ofgnss_cli::{emit_plot, parse_scenario_config, scenario_to_json, PlotKind};
use ofgnss_core::scenario::{
    canonical_degraded_scenario, canonical_figure_xi_scenario, canonical_spoof_scenario, run_scenario,
};
use ofgnss_core::RunMode;

fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn check_golden(rel: &str, actual: &str) {
    let path = repo_path(rel);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{} differs from the generated output", path.display());
}

#[test]
fn canonical_degraded_config_parses_to_defaults() {
    let doc = scenario_to_json(&canonical_degraded_scenario());
    check_golden("configs/canonical_degraded.json", &doc);
    let parsed = parse_scenario_config(&fs::read_to_string(repo_path("configs/canonical_degraded.json")).unwrap()).unwrap();
    assert_eq!(parsed, canonical_degraded_scenario());
}

#[test]
fn shipped_configs_match_their_builders() {
    for (rel, s) in [
        ("configs/canonical_spoof.json", canonical_spoof_scenario()),
        ("configs/figure_xi_walk.json", canonical_figure_xi_scenario()),
    ] {
        check_golden(rel, &scenario_to_json(&s));
        assert_eq!(parse_scenario_config(&fs::read_to_string(repo_path(rel)).unwrap()).unwrap(), s);
    }
}

#[test]
fn canonical_ground_track_svg_is_stable() {
    let s = canonical_degraded_scenario();
    let render = || {
        let out = run_scenario(&s, RunMode::OfGnss).unwrap();
        emit_plot(&rows_from_records(&out.records), PlotKind::GroundTrack).unwrap()
    };
    let first = render();
    assert_eq!(first, render());
    check_golden("crates/cli/tests/golden/canonical_ground_track.svg", &first);
}
