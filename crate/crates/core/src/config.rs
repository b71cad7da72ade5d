//! TOML run configuration.
//!
//! ```toml
//! [game]
//! n = 50
//! c = 0.0
//! gamma = 0.6
//!
//! [energy]
//! p_tx_dbm = 9.0
//!
//! [wifi]
//! model_size_mb = 44.73
//!
//! [sim]
//! mode = "progress"
//! reps = 100
//! ```
//!
//! Every key is optional. Unknown keys are rejected.

use serde::Deserialize;
use std::path::Path;

use crate::empirics::{FitMode, TableKind, DEFAULT_RESAMPLES};
use crate::energy::{dbm_to_watts, EnergyParams, TrainTime, WifiParams, BITS_PER_MB};
use crate::simulate::ConvergenceMode;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default)]
    pub game: GameSection,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub wifi: WifiSection,
    #[serde(default)]
    pub sim: SimSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModeName {
    Wls,
    Resample,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub n: Option<usize>,
    pub c: Option<f64>,
    pub gamma: Option<f64>,
    pub degree: Option<usize>,
    pub fit_mode: Option<FitModeName>,
    pub resample_count: Option<usize>,
    pub seed: Option<u64>,
    pub table: Option<TableKind>,
    pub d_cap: Option<f64>,
    pub grid_points: Option<usize>,
    pub refine_tol: Option<f64>,
    pub p_min: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub p_hw_w: Option<f64>,
    pub p_idle_w: Option<f64>,
    pub p_tx_dbm: Option<f64>,
    pub t_round_s: Option<f64>,
    /// Constant training time; excludes the min/max pair.
    pub t_train_s: Option<f64>,
    pub t_train_min_s: Option<f64>,
    pub t_train_max_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WifiSection {
    pub model_size_mb: Option<f64>,
    pub model_size_bits: Option<f64>,
    pub legacy_symbol_s: Option<f64>,
    pub legacy_bits_per_symbol: Option<f64>,
    pub subcarriers: Option<u32>,
    pub spatial_streams: Option<u32>,
    pub bits_per_subcarrier: Option<u32>,
    pub coding_rate: Option<f64>,
    pub he_symbol_s: Option<f64>,
    pub t_empty_slot: Option<f64>,
    pub t_sifs: Option<f64>,
    pub t_difs: Option<f64>,
    pub t_phy: Option<f64>,
    pub t_he_su: Option<f64>,
    pub l_rts: Option<f64>,
    pub l_cts: Option<f64>,
    pub l_ack: Option<f64>,
    pub l_sf: Option<f64>,
    pub l_mac: Option<f64>,
    pub cw: Option<u32>,
    pub max_ampdu_bits: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub mode: Option<String>,
    pub reps: Option<usize>,
    pub max_rounds: Option<usize>,
    pub p: Option<f64>,
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunConfigFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| {
                text[..s.start.min(text.len())].matches('\n').count() + 1
            });
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn fit_mode(&self, seed: u64) -> FitMode {
        match self.game.fit_mode {
            Some(FitModeName::Resample) => FitMode::StochasticResample {
                seed,
                samples_per_row: self.game.resample_count.unwrap_or(DEFAULT_RESAMPLES),
            },
            _ => FitMode::DeterministicWls,
        }
    }

    pub fn sim_mode(&self) -> Result<Option<ConvergenceMode>> {
        self.sim
            .mode
            .as_deref()
            .map(|m| m.parse().map_err(Error::InvalidConfig))
            .transpose()
    }

    /// Defaults overlaid with the `[wifi]` section.
    pub fn wifi_params(&self) -> Result<WifiParams> {
        let s = &self.wifi;
        let mut w = WifiParams::default();
        match (s.model_size_mb, s.model_size_bits) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "wifi: give model_size_mb or model_size_bits, not both".into(),
                ))
            }
            (Some(mb), None) => w.model_size_bits = mb * BITS_PER_MB,
            (None, bits) => set(&mut w.model_size_bits, bits),
        }
        set(&mut w.legacy_symbol_s, s.legacy_symbol_s);
        set(&mut w.legacy_bits_per_symbol, s.legacy_bits_per_symbol);
        set(&mut w.subcarriers, s.subcarriers);
        set(&mut w.spatial_streams, s.spatial_streams);
        set(&mut w.bits_per_subcarrier, s.bits_per_subcarrier);
        set(&mut w.coding_rate, s.coding_rate);
        set(&mut w.he_symbol_s, s.he_symbol_s);
        set(&mut w.t_empty_slot, s.t_empty_slot);
        set(&mut w.t_sifs, s.t_sifs);
        set(&mut w.t_difs, s.t_difs);
        set(&mut w.t_phy, s.t_phy);
        set(&mut w.t_he_su, s.t_he_su);
        set(&mut w.l_rts, s.l_rts);
        set(&mut w.l_cts, s.l_cts);
        set(&mut w.l_ack, s.l_ack);
        set(&mut w.l_sf, s.l_sf);
        set(&mut w.l_mac, s.l_mac);
        set(&mut w.cw, s.cw);
        set(&mut w.max_ampdu_bits, s.max_ampdu_bits);
        w.validate()?;
        Ok(w)
    }

    /// Defaults overlaid with the `[energy]` section.
    pub fn energy_params(&self) -> Result<EnergyParams> {
        let s = &self.energy;
        let mut ep = EnergyParams::default();
        set(&mut ep.p_hw, s.p_hw_w);
        set(&mut ep.p_idle, s.p_idle_w);
        set(&mut ep.p_tx, s.p_tx_dbm.map(dbm_to_watts));
        set(&mut ep.t_round, s.t_round_s);
        ep.t_train = match (s.t_train_s, s.t_train_min_s, s.t_train_max_s) {
            (Some(t), None, None) => TrainTime::Constant(t),
            (Some(_), _, _) => {
                return Err(Error::InvalidConfig(
                    "energy: t_train_s excludes t_train_min_s/t_train_max_s".into(),
                ))
            }
            (None, lo, hi) => match ep.t_train {
                TrainTime::Uniform { min, max } => TrainTime::Uniform {
                    min: lo.unwrap_or(min),
                    max: hi.unwrap_or(max),
                },
                constant => constant,
            },
        };
        ep.validate()?;
        Ok(ep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        let cfg = RunConfigFile::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfigFile::default());
        assert_eq!(cfg.wifi_params().unwrap(), WifiParams::default());
        assert_eq!(cfg.energy_params().unwrap(), EnergyParams::default());
    }

    #[test]
    fn sections_override_defaults() {
        let text = r#"
[game]
n = 20
gamma = 0.6
fit_mode = "resample"
resample_count = 5
table = "single_seed"

[energy]
p_tx_dbm = 20.0
t_train_s = 6.0

[wifi]
model_size_mb = 10.0
cw = 31

[sim]
mode = "static"
reps = 7
"#;
        let cfg = RunConfigFile::from_toml_str(text).unwrap();
        assert_eq!(cfg.game.n, Some(20));
        assert_eq!(cfg.game.table, Some(TableKind::SingleSeed));
        assert_eq!(
            cfg.fit_mode(3),
            FitMode::StochasticResample {
                seed: 3,
                samples_per_row: 5
            }
        );
        let ep = cfg.energy_params().unwrap();
        assert!((ep.p_tx - 0.1).abs() < 1e-12);
        assert_eq!(ep.t_train, TrainTime::Constant(6.0));
        let w = cfg.wifi_params().unwrap();
        assert_eq!(w.model_size_bits, 80e6);
        assert_eq!(w.cw, 31);
        assert_eq!(cfg.sim_mode().unwrap(), Some(ConvergenceMode::StaticDraw));
        assert_eq!(cfg.sim.reps, Some(7));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfigFile::from_toml_str("[game]\nn = 5\nbogus_key = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");

        let err = RunConfigFile::from_toml_str("[mystery]\nx = 1\n").unwrap_err();
        assert!(err.to_string().contains("mystery"), "{err}");
    }

    #[test]
    fn conflicting_keys() {
        let cfg =
            RunConfigFile::from_toml_str("[wifi]\nmodel_size_mb = 1.0\nmodel_size_bits = 8.0\n")
                .unwrap();
        assert!(cfg.wifi_params().is_err());
        let cfg = RunConfigFile::from_toml_str("[energy]\nt_train_s = 5.0\nt_train_min_s = 4.0\n")
            .unwrap();
        assert!(cfg.energy_params().is_err());
        let cfg = RunConfigFile::from_toml_str("[sim]\nmode = \"fast\"\n").unwrap();
        assert!(cfg.sim_mode().is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let cfg = RunConfigFile::from_toml_str("[energy]\nt_train_max_s = 12.0\n").unwrap();
        assert!(cfg.energy_params().is_err());
        let cfg = RunConfigFile::from_toml_str("[wifi]\nt_sifs = -1.0\n").unwrap();
        assert!(cfg.wifi_params().is_err());
    }
}
