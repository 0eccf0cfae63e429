//! Built-in run configurations. `mcmd-desk-*` are reduced image runs used
//! for quick checks; the others are the full-size experiments.

use std::path::Path;

use crate::config::{load_config, parse_config, RunConfig};
use crate::error::{CliError, Result};

pub const PRESETS: &[(&str, &str)] = &[
    ("mcsd-star", include_str!("../presets/mcsd-star.toml")),
    ("mcsd-ring", include_str!("../presets/mcsd-ring.toml")),
    ("mcmd-star-varying", include_str!("../presets/mcmd-star-varying.toml")),
    ("mcmd-star-equal", include_str!("../presets/mcmd-star-equal.toml")),
    ("mcmd-ring-varying", include_str!("../presets/mcmd-ring-varying.toml")),
    ("mcmd-ring-equal", include_str!("../presets/mcmd-ring-equal.toml")),
    ("mcmd-desk-star", include_str!("../presets/mcmd-desk-star.toml")),
    ("mcmd-desk-ring", include_str!("../presets/mcmd-desk-ring.toml")),
];

pub fn preset(name: &str) -> Result<RunConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::Config(format!("unknown preset `{name}`")))?;
    parse_config(text, &format!("preset {name}"))
}

/// A config file path, or a preset name when no such file exists.
pub fn resolve(arg: &str) -> Result<RunConfig> {
    let path = Path::new(arg);
    if path.exists() {
        return load_config(path);
    }
    if PRESETS.iter().any(|(n, _)| *n == arg) {
        return preset(arg);
    }
    Err(CliError::Config(format!("`{arg}` is neither a config file nor a preset name")))
}
