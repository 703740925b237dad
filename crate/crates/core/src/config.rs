//! Named parameter presets and parameter files (TOML or JSON).

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{transform_params, OlsenParams, ScaledParams};

/// `eps` used by the figure presets.
pub const FIGURE_EPS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "olsen-0.16")]
    Olsen016,
    #[serde(rename = "olsen-0.35")]
    Olsen035,
    #[serde(rename = "olsen-0.41")]
    Olsen041,
    #[serde(rename = "fig6")]
    Fig6,
    #[serde(rename = "fig10")]
    Fig10,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Olsen016, Preset::Olsen035, Preset::Olsen041, Preset::Fig6, Preset::Fig10];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Olsen016 => "olsen-0.16",
            Preset::Olsen035 => "olsen-0.35",
            Preset::Olsen041 => "olsen-0.41",
            Preset::Fig6 => "fig6",
            Preset::Fig10 => "fig10",
        }
    }

    /// Rate constants, for the presets that come from the original model.
    pub fn original(&self) -> Option<OlsenParams> {
        match self {
            Preset::Olsen016 => Some(OlsenParams::standard(0.16)),
            Preset::Olsen035 => Some(OlsenParams::standard(0.35)),
            Preset::Olsen041 => Some(OlsenParams::standard(0.41)),
            Preset::Fig6 | Preset::Fig10 => None,
        }
    }

    /// Scaled parameters. The figure presets use `eps = 0.05`; `fig6` has
    /// `delta = 0` (canard) and `fig10` has `delta = 2 eps^2` (jump).
    pub fn scaled(&self) -> Result<ScaledParams> {
        match self.original() {
            Some(p) => transform_params(&p),
            None => {
                let e = FIGURE_EPS;
                let delta = if *self == Preset::Fig10 { 2.0 * e * e } else { 0.0 };
                ScaledParams::new(1.3, 0.37, 0.062, e, 0.98, delta, 3.93)
            }
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}'")))
    }
}

/// Parameter file contents; exactly one source must be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamFile {
    pub preset: Option<Preset>,
    pub original: Option<OlsenParams>,
    pub scaled: Option<ScaledParams>,
}

/// Resolved parameters and, when known, the rate constants they came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub scaled: ScaledParams,
    pub original: Option<OlsenParams>,
}

impl ParamFile {
    pub fn resolve(&self) -> Result<ResolvedParams> {
        match (self.preset, self.original, self.scaled) {
            (Some(p), None, None) => Ok(ResolvedParams { scaled: p.scaled()?, original: p.original() }),
            (None, Some(o), None) => Ok(ResolvedParams { scaled: transform_params(&o)?, original: Some(o) }),
            (None, None, Some(s)) => {
                s.validate()?;
                Ok(ResolvedParams { scaled: s, original: None })
            }
            _ => Err(Error::Config("give exactly one of preset, original, scaled".into())),
        }
    }

    pub fn parse(text: &str, json: bool) -> Result<Self> {
        if json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    /// Load by extension: `.json` is JSON, anything else TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, json)
    }
}
