use std::path::{Path, PathBuf};

use lnpr_core::config::{parse_config, parse_str};

fn path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/waveguide_circuits.toml")
}

#[test]
fn parses_strictly_with_the_quoted_geometry() {
    let parsed = parse_config(&path(), true).unwrap();
    assert!(parsed.warnings.is_empty());
    let c = parsed.config;
    let fpi = c.fpi.as_ref().unwrap();
    assert_eq!(
        (fpi.length_mm, fpi.facet_reflectivity_probe, fpi.facet_reflectivity_pump),
        (15.0, 0.14, 0.13)
    );
    assert_eq!(c.coupler_geometry(30.0).unwrap().coupling_constant, 0.46);
    assert_eq!(c.coupler_geometry(30.0).unwrap().interaction_length_mm, 4.3);
}

#[test]
fn round_trips_through_serialization() {
    let c = parse_config(&path(), true).unwrap().config;
    let text = c.to_toml().unwrap();
    let again = parse_str(&text, "round-trip", true).unwrap().config;
    assert_eq!(again.to_toml().unwrap(), text);
    assert_eq!(again.hash().unwrap(), c.hash().unwrap());
}

#[test]
fn hash_tracks_every_value() {
    let base = parse_config(&path(), true).unwrap().config;
    let h = base.hash().unwrap();
    let mut changed = base.clone();
    changed.run.seed += 1;
    assert_ne!(changed.hash().unwrap(), h);
    let mut changed = base.clone();
    changed.photorefraction[2].a *= 1.0 + 1e-12;
    assert_ne!(changed.hash().unwrap(), h);
    let mut changed = base.clone();
    changed.squeeze_budget.initial_db.push(-1.0);
    assert_ne!(changed.hash().unwrap(), h);
    // the directory a file was read from is not a config value
    let mut moved = base.clone();
    moved.base_dir = PathBuf::from("/elsewhere");
    assert_eq!(moved.hash().unwrap(), h);
}
