//! JSON run configuration.
//!
//! Frequencies in the file are ordinary frequencies (GHz, MHz); they are
//! converted to angular units on load. Every field is optional: a missing
//! circuit falls back to the named preset, missing sections to defaults.
//!
//! ```json
//! {
//!   "preset": "exp2_al",
//!   "modes": [
//!     {"label": "T", "freq_ghz": 4.774, "anharm_mhz": -280.0, "levels": 4,
//!      "t1_us": 14.0, "t2_us": 8.0}
//!   ],
//!   "j_zz_mhz": 70.5,
//!   "j_xx_mhz": 2.76,
//!   "lambda": 0.0,
//!   "spectator": 0,
//!   "drive": {"amp_mhz": 15.0, "freq_ghz": null, "phase_rad": 0.0,
//!             "crosstalk_m": 0.0, "crosstalk_phase_rad": 0.0},
//!   "sweep": {"start": -1.0, "stop": 2.0, "points": 121},
//!   "ht": {"tau_max_us": 12.0, "points": 241},
//!   "rb": {"lengths": [1, 5, 10, 20, 40], "n_seq": 17, "shots": 1000},
//!   "gate_time_ns": 220.0
//! }
//! ```
//!
//! Mode entries override the preset mode with the same label. `freq_ghz`
//! is the bare 0 -> 1 transition with the partner modes in their ground
//! state; `t2_us` is the echo T2.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{load_preset_with, DriveSpec, ModeCoherence, ModeLabel, Preset, PresetName, DEFAULT_J_ZZ, DEFAULT_LEVELS, GHZ, MHZ};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub label: String,
    pub freq_ghz: f64,
    pub anharm_mhz: f64,
    pub levels: Option<usize>,
    pub t1_us: Option<f64>,
    pub t2_us: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub amp_mhz: f64,
    /// `None` drives at the mean conditional target frequency.
    #[serde(default)]
    pub freq_ghz: Option<f64>,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default)]
    pub crosstalk_m: f64,
    #[serde(default)]
    pub crosstalk_phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridConfig {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points == 0 || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::Config("grid needs finite bounds and at least one point".into()));
        }
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        Ok((0..self.points).map(|k| self.start + step * k as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HtConfig {
    pub tau_max_us: f64,
    pub points: usize,
    /// Gaussian edge of each CR pulse; 0 gives square pulses.
    #[serde(default)]
    pub rise_ns: f64,
}

impl Default for HtConfig {
    fn default() -> Self {
        Self {
            tau_max_us: 12.0,
            points: 241,
            rise_ns: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbConfig {
    pub lengths: Vec<usize>,
    pub n_seq: usize,
    #[serde(default)]
    pub shots: Option<u64>,
}

impl Default for RbConfig {
    fn default() -> Self {
        Self {
            lengths: vec![1, 3, 5, 8, 12, 16, 20, 25, 30, 35, 40],
            n_seq: 17,
            shots: Some(1000),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub modes: Option<Vec<ModeConfig>>,
    pub j_zz_mhz: Option<f64>,
    pub j_xx_mhz: Option<f64>,
    pub lambda: Option<f64>,
    pub levels: Option<usize>,
    pub spectator: Option<usize>,
    pub drive: Option<DriveConfig>,
    pub sweep: Option<GridConfig>,
    pub amplitude_sweep: Option<GridConfig>,
    pub ht: Option<HtConfig>,
    pub rb: Option<RbConfig>,
    pub gate_time_ns: Option<f64>,
}

/// Drive amplitude used when the configuration names none.
pub const DEFAULT_DRIVE_MHZ: f64 = 15.0;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn preset_name(&self) -> Result<PresetName> {
        self.preset.as_deref().unwrap_or("exp2_al").parse()
    }

    /// Preset with every override applied; `levels` wins over the file.
    pub fn resolve_preset(&self, levels: Option<usize>) -> Result<Preset> {
        let j_zz = self.j_zz_mhz.map_or(DEFAULT_J_ZZ, |v| v * MHZ);
        let levels = levels.or(self.levels).unwrap_or(DEFAULT_LEVELS);
        let mut preset = load_preset_with(self.preset_name()?, j_zz, levels);
        if let Some(j) = self.j_xx_mhz {
            preset.circuit.j_xx = j * MHZ;
        }
        if let Some(l) = self.lambda {
            preset.circuit.lambda = l;
        }
        for m in self.modes.iter().flatten() {
            let label = match m.label.as_str() {
                "T" | "t" => ModeLabel::T,
                "A" | "a" => ModeLabel::A,
                "B" | "b" => ModeLabel::B,
                other => return Err(Error::Config(format!("modes.label: unknown mode `{other}`"))),
            };
            let k = label.index();
            let mode = &mut preset.circuit.modes[k];
            mode.frequency = m.freq_ghz * GHZ;
            mode.anharmonicity = m.anharm_mhz * MHZ;
            if let Some(l) = m.levels.filter(|_| self.levels.is_none()) {
                mode.levels = l;
            }
            let old = preset.coherence[k];
            preset.coherence[k] = ModeCoherence {
                t1: m.t1_us.map_or(old.t1, |v| v * 1e-6),
                t2_echo: m.t2_us.map_or(old.t2_echo, |v| v * 1e-6),
                ..old
            };
        }
        preset
            .circuit
            .validate()
            .map_err(|e| Error::Config(format!("circuit: {e}")))?;
        Ok(preset)
    }

    pub fn spectator(&self) -> usize {
        self.spectator.unwrap_or(0)
    }

    /// Drive with the frequency resolved by `default_frequency` when unset.
    pub fn drive(&self, default_frequency: impl FnOnce() -> Result<f64>) -> Result<DriveSpec> {
        let d = self.drive.clone().unwrap_or(DriveConfig {
            amp_mhz: DEFAULT_DRIVE_MHZ,
            freq_ghz: None,
            phase_rad: 0.0,
            crosstalk_m: 0.0,
            crosstalk_phase_rad: 0.0,
        });
        let freq = match d.freq_ghz {
            Some(f) => f * GHZ,
            None => default_frequency()?,
        };
        DriveSpec::new(d.amp_mhz * MHZ, freq, d.phase_rad)
            .with_crosstalk(d.crosstalk_m, d.crosstalk_phase_rad)
            .normalized()
            .map_err(|e| Error::Config(format!("drive: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_exp2() {
        let c = RunConfig::from_json("{}").unwrap();
        let p = c.resolve_preset(None).unwrap();
        assert_eq!(p.name, PresetName::Exp2Al);
        assert_eq!(p.circuit.levels(), [4, 4, 4]);
        let d = c.drive(|| Ok(1.0)).unwrap();
        assert_eq!(d.amplitude, DEFAULT_DRIVE_MHZ * MHZ);
    }

    #[test]
    fn overrides_apply() {
        let c = RunConfig::from_json(
            r#"{"preset": "exp1_cu", "levels": 3, "j_xx_mhz": 2.0,
                "modes": [{"label": "T", "freq_ghz": 5.0, "anharm_mhz": -250.0, "t1_us": 20.0}],
                "drive": {"amp_mhz": 4.0, "freq_ghz": 4.5}}"#,
        )
        .unwrap();
        let p = c.resolve_preset(None).unwrap();
        assert_eq!(p.name, PresetName::Exp1Cu);
        assert_eq!(p.circuit.levels(), [3, 3, 3]);
        assert_eq!(p.circuit.j_xx, 2.0 * MHZ);
        assert_eq!(p.circuit.modes[0].frequency, 5.0 * GHZ);
        assert!((p.coherence[0].t1 - 20e-6).abs() < 1e-18);
        assert_eq!(c.resolve_preset(Some(2)).unwrap().circuit.levels(), [2, 2, 2]);
        let d = c.drive(|| unreachable!()).unwrap();
        assert_eq!(d.frequency, 4.5 * GHZ);
    }

    #[test]
    fn errors_name_location() {
        let e = RunConfig::from_json("{\n  \"drive\": {\"amp_mhz\": 1.0, \"bogus\": 2}\n}").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 2") && msg.contains("bogus"), "{msg}");
        let bad = RunConfig::from_json(r#"{"modes": [{"label": "Q", "freq_ghz": 5.0, "anharm_mhz": -200.0}]}"#).unwrap();
        assert!(bad.resolve_preset(None).unwrap_err().to_string().contains("modes.label"));
        assert!(RunConfig::from_json(r#"{"preset": "nope"}"#).unwrap().resolve_preset(None).is_err());
    }

    #[test]
    fn grid_values() {
        let g = GridConfig { start: 0.0, stop: 1.0, points: 3 };
        assert_eq!(g.values().unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(GridConfig { start: 0.0, stop: 1.0, points: 0 }.values().is_err());
    }
}
