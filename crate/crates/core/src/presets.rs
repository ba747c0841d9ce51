//! Bundled scenarios reproducing the published illustrative case.
//!
//! Files live in `presets/` and are stored in canonical serialized form, so
//! `serialize_scenario(parse_scenario(file)) == file` byte for byte.

use std::path::PathBuf;

use thiserror::Error;

use crate::io::{parse_scenario, ParseError, ScenarioDocument};
use crate::model::Scenario;

/// Environment variable naming a directory whose `<name>.toml` files take
/// precedence over the bundled presets.
pub const PRESET_DIR_ENV: &str = "MEDIATE_PRESET_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Units-preferred case with the fastest supplier reassessment.
    Fig2Red,
    /// Same parameters; used for the reimbursement peak.
    Fig3,
    /// Same parameters; used for the value decomposition. Carries an
    /// alternate-supplier offer.
    Fig4,
    /// Second installment delayed to 4, which flips the regime.
    Fig5,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fig2Red, Preset::Fig3, Preset::Fig4, Preset::Fig5];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2Red => "fig2_red",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }

    /// The bundled file contents.
    pub fn text(self) -> &'static str {
        match self {
            Preset::Fig2Red => include_str!("../presets/fig2_red.toml"),
            Preset::Fig3 => include_str!("../presets/fig3.toml"),
            Preset::Fig4 => include_str!("../presets/fig4.toml"),
            Preset::Fig5 => include_str!("../presets/fig5.toml"),
        }
    }

    /// The bundled document. Bundled files are covered by tests, so parsing
    /// cannot fail.
    pub fn document(self) -> ScenarioDocument {
        parse_scenario(self.text()).expect("bundled preset parses")
    }

    pub fn scenario(self) -> Scenario {
        self.document().scenario
    }
}

#[derive(Debug, Error)]
pub enum PresetError {
    #[error("unknown preset `{0}` (expected one of fig2_red, fig3, fig4, fig5)")]
    Unknown(String),
    #[error("cannot read preset override {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("preset override {path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
}

/// Load a preset by name, honouring `MEDIATE_PRESET_DIR`.
pub fn load_preset(name: &str) -> Result<ScenarioDocument, PresetError> {
    if let Some(dir) = std::env::var_os(PRESET_DIR_ENV) {
        let path = PathBuf::from(dir).join(format!("{name}.toml"));
        if path.is_file() {
            let text = std::fs::read_to_string(&path).map_err(|source| PresetError::Io {
                path: path.clone(),
                source,
            })?;
            return parse_scenario(&text).map_err(|source| PresetError::Parse { path, source });
        }
    }
    Preset::from_name(name)
        .map(Preset::document)
        .ok_or_else(|| PresetError::Unknown(name.to_string()))
}

/// Names of all bundled presets, in order.
pub fn preset_names() -> Vec<&'static str> {
    Preset::ALL.iter().map(|p| p.name()).collect()
}
