//! Checked-in experiment presets, embedded at build time.

use super::config::ExperimentConfig;
use crate::{Error, Result};

const PRESETS: [(&str, &str); 5] = [
    ("fig2-small-drm", include_str!("../../../../presets/fig2-small-drm.json")),
    ("fig3-dynamic-drm", include_str!("../../../../presets/fig3-dynamic-drm.json")),
    ("fig5-small-nbrf", include_str!("../../../../presets/fig5-small-nbrf.json")),
    ("fig6-dynamic-nbrf", include_str!("../../../../presets/fig6-dynamic-nbrf.json")),
    ("cycle-demo", include_str!("../../../../presets/cycle-demo.json")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

pub fn preset_json(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, json)| *json)
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let json = preset_json(name).ok_or_else(|| {
        let known = preset_names().collect::<Vec<_>>().join(", ");
        Error::config("preset", format!("unknown preset {name:?} (known: {known})"))
    })?;
    ExperimentConfig::from_json(json)
}
