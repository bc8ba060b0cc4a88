use crate::error::{Error, Result};

use super::SceneSpec;

pub const PRESET_NAMES: [&str; 4] = ["single-plane", "wedge", "staircase", "box-on-ground"];

const SOURCES: [(&str, &str); 4] = [
    (
        "single-plane",
        include_str!("../../presets/single-plane.json"),
    ),
    ("wedge", include_str!("../../presets/wedge.json")),
    ("staircase", include_str!("../../presets/staircase.json")),
    (
        "box-on-ground",
        include_str!("../../presets/box-on-ground.json"),
    ),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESET_NAMES.iter().copied()
}

/// Loads a named preset scene shipped with the crate.
pub fn preset(name: &str) -> Result<SceneSpec> {
    let (_, src) = SOURCES.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        Error::Config(format!(
            "unknown scene preset '{name}' (known: {})",
            PRESET_NAMES.join(", ")
        ))
    })?;
    serde_json::from_str(src).map_err(|e| Error::Config(format!("preset '{name}': {e}")))
}
