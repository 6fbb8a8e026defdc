//! Bundled motor presets and lookup by name.
//!
//! Three machines are shipped, chosen so their rotor time constants are
//! 0.065 s, 0.238 s and 0.404 s; the remaining constants are plausible
//! catalogue-style values for 0.37 kW, 4 kW and 11 kW four-pole machines
//! (the presets are calibration points, not datasheet transcriptions).
//!
//! Setting `FLUXOPT_PRESET_DIR` makes [`resolve`] look for `<name>.json` in
//! that directory before falling back to the bundled set.

use std::path::Path;

use thiserror::Error;

use crate::motor::{MotorError, MotorParams};

/// Environment variable holding an override directory for preset files.
pub const PRESET_DIR_ENV: &str = "FLUXOPT_PRESET_DIR";

const BUILTIN: &[(&str, &str)] = &[
    ("DRS71S4", include_str!("../presets/DRS71S4.json")),
    ("DRS112M4", include_str!("../presets/DRS112M4.json")),
    ("DRS160M4", include_str!("../presets/DRS160M4.json")),
];

#[derive(Debug, Error)]
pub enum PresetError {
    #[error("unknown preset '{0}' (bundled: DRS71S4, DRS112M4, DRS160M4)")]
    Unknown(String),
    #[error("preset file {path}: {source}")]
    Bad { path: String, source: MotorError },
    #[error("preset file {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Names of the bundled presets, in rotor-time-constant order.
pub fn names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

/// Looks a preset up in the bundled set only.
pub fn builtin(name: &str) -> Result<MotorParams, PresetError> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| PresetError::Unknown(name.to_string()))?;
    MotorParams::from_json(text).map_err(|source| PresetError::Bad { path: name.into(), source })
}

/// Resolves a preset name, honouring `FLUXOPT_PRESET_DIR` when set: a file
/// `<dir>/<name>.json` takes precedence over the bundled definition.
pub fn resolve(name: &str) -> Result<MotorParams, PresetError> {
    if let Ok(dir) = std::env::var(PRESET_DIR_ENV) {
        let path = Path::new(&dir).join(format!("{name}.json"));
        if path.is_file() {
            let text = std::fs::read_to_string(&path)
                .map_err(|source| PresetError::Io { path: path.display().to_string(), source })?;
            return MotorParams::from_json(&text)
                .map_err(|source| PresetError::Bad { path: path.display().to_string(), source });
        }
    }
    builtin(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_presets_validate_and_pin_time_constants() {
        let expected = [("DRS71S4", 0.065), ("DRS112M4", 0.238), ("DRS160M4", 0.404)];
        for (name, tau) in expected {
            let p = builtin(name).unwrap();
            p.validate().unwrap();
            assert!(
                (p.tau_r() - tau).abs() < 1e-12,
                "{name}: tau_r = {} expected {tau}",
                p.tau_r()
            );
            assert_eq!(p.name, name);
        }
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(matches!(builtin("DRS999"), Err(PresetError::Unknown(_))));
    }
}
