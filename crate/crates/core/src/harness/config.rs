//! Simulation configuration, as read from JSON.
//!
//! ```json
//! {
//!   "bits": 30, "slots": 3, "active_users": 8, "antennas": 16,
//!   "power": { "snr_db": 40.0 },
//!   "large_scale": "unit",
//!   "blocklength": { "n0": 256 },
//!   "mobility": { "delta": 0.0 },
//!   "trials": 50, "master_seed": 1
//! }
//! ```
//!
//! `power` is either `{"pt_dbm": x}` or `{"snr_db": x}` (transmit power set
//! to `x` dB above the noise power). `large_scale` is `"unit"` or
//! `{"pathloss": {...}}`. `blocklength` is `{"mu_tot": x}` or `{"n0": x}`.
//! `mobility` is `{"delta": x}` or `{"velocity_kmh": v, "carrier_hz": f}`,
//! the latter converted with a lag of one slot (`n0` samples).

use serde::{Deserialize, Serialize};

use crate::channel::{jakes_delta, kmh_to_ms, ChannelParams};
use crate::clustering::ClusterConfig;
use crate::hygamp::HyGampConfig;
use crate::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerSpec {
    PtDbm(f64),
    SnrDb(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pathloss {
    pub alpha_db: f64,
    pub beta: f64,
    pub r_in: f64,
    pub r_out: f64,
}

impl Default for Pathloss {
    fn default() -> Self {
        Pathloss {
            alpha_db: -15.3,
            beta: 3.76,
            r_in: 5.0,
            r_out: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LargeScaleSpec {
    /// Every user has gain 1.
    Unit,
    Pathloss(Pathloss),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlocklengthSpec {
    /// Total spectral efficiency `B Ka / n`.
    MuTot(f64),
    /// Samples per slot.
    N0(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MobilitySpec {
    Delta { delta: f64 },
    Speed { velocity_kmh: f64, carrier_hz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Message length `B`.
    pub bits: u32,
    /// Slots `L`; must divide `B`.
    pub slots: usize,
    pub active_users: usize,
    /// Population size; bookkeeping only.
    #[serde(default)]
    pub total_users: Option<usize>,
    pub antennas: usize,
    pub power: PowerSpec,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    /// Noise power in watts; defaults to `10^-19.9 * bandwidth`.
    #[serde(default)]
    pub noise_power: Option<f64>,
    #[serde(default = "default_large_scale")]
    pub large_scale: LargeScaleSpec,
    pub blocklength: BlocklengthSpec,
    #[serde(default = "default_mobility")]
    pub mobility: MobilitySpec,
    /// Solver settings; `sigma_w2` is replaced by the configured noise.
    #[serde(default)]
    pub hygamp: HyGampConfig,
    #[serde(default)]
    pub clustering: ClusterConfig,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Codebook generator seed; derived from `master_seed` when absent.
    #[serde(default)]
    pub codebook_seed: Option<u64>,
}

fn default_bandwidth() -> f64 {
    1e7
}

fn default_large_scale() -> LargeScaleSpec {
    LargeScaleSpec::Pathloss(Pathloss::default())
}

fn default_mobility() -> MobilitySpec {
    MobilitySpec::Delta { delta: 0.0 }
}

fn default_trials() -> usize {
    10
}

/// Quantities derived from a validated [`SimConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bits_per_slot: u32,
    pub n0: usize,
    /// `B Ka / (n0 L)`, after rounding `n0`.
    pub mu_tot: f64,
    pub pt_watts: f64,
    pub pt_dbm: f64,
    pub noise_power: f64,
    pub delta: f64,
    pub codebook_seed: u64,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("bad config: {e}")))
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
            .unwrap_or_else(|| 10f64.powf(-19.9) * self.bandwidth_hz)
    }

    /// Checks every field and derives the scenario.
    pub fn resolve(&self) -> Result<Scenario> {
        if self.slots == 0 || self.bits == 0 || self.bits as usize % self.slots != 0 {
            return Err(Error::config(format!(
                "L = {} must divide B = {}",
                self.slots, self.bits
            )));
        }
        let j = self.bits / self.slots as u32;
        if j > 30 {
            return Err(Error::config(format!("J = {j} bits per slot is too large")));
        }
        let columns = 1usize << j;
        if self.active_users == 0 {
            return Err(Error::config("need at least one active user"));
        }
        if self.active_users >= columns {
            return Err(Error::config(format!(
                "Ka = {} must be below 2^J = {columns}",
                self.active_users
            )));
        }
        if let Some(k) = self.total_users {
            if k < self.active_users {
                return Err(Error::config("total_users below active_users"));
            }
        }
        if self.antennas == 0 {
            return Err(Error::config("need at least one antenna"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::config("bandwidth must be positive"));
        }
        let noise_power = self.noise_power();
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(Error::config("noise power must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::config("need at least one trial"));
        }
        let n0 = match self.blocklength {
            BlocklengthSpec::N0(n0) => n0,
            BlocklengthSpec::MuTot(mu) => {
                if !(mu > 0.0 && mu.is_finite()) {
                    return Err(Error::config("mu_tot must be positive"));
                }
                // n rounded down to a multiple of L.
                let n = (self.bits as f64 * self.active_users as f64 / mu).floor() as usize;
                n / self.slots
            }
        };
        if n0 == 0 || n0 > columns {
            return Err(Error::config(format!(
                "n0 = {n0} must lie in [1, 2^J = {columns}]"
            )));
        }
        let mu_tot = self.bits as f64 * self.active_users as f64 / (n0 * self.slots) as f64;
        let pt_watts = match self.power {
            PowerSpec::PtDbm(dbm) => dbm_to_watts(dbm),
            PowerSpec::SnrDb(snr) => noise_power * 10f64.powf(snr / 10.0),
        };
        if !(pt_watts > 0.0 && pt_watts.is_finite()) {
            return Err(Error::config("transmit power must be positive"));
        }
        if let LargeScaleSpec::Pathloss(p) = self.large_scale {
            if !(p.r_in > 0.0 && p.r_in < p.r_out) {
                return Err(Error::config("annulus needs 0 < r_in < r_out"));
            }
        }
        let delta = match self.mobility {
            MobilitySpec::Delta { delta } => delta,
            MobilitySpec::Speed {
                velocity_kmh,
                carrier_hz,
            } => {
                if !(velocity_kmh >= 0.0 && carrier_hz > 0.0) {
                    return Err(Error::config("velocity must be >= 0 and carrier > 0"));
                }
                jakes_delta(kmh_to_ms(velocity_kmh), carrier_hz, self.bandwidth_hz, n0 as f64)
            }
        };
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::config("delta must lie in [0, 1]"));
        }
        self.hygamp.validate()?;
        Ok(Scenario {
            bits_per_slot: j,
            n0,
            mu_tot,
            pt_watts,
            pt_dbm: watts_to_dbm(pt_watts),
            noise_power,
            delta,
            codebook_seed: self
                .codebook_seed
                .unwrap_or(self.master_seed ^ 0x00C0_DEB0_0C5E_ED00),
        })
    }

    /// Channel parameters for the pathloss model (unit gains use only the
    /// noise, antenna and delta fields).
    pub fn channel_params(&self, scenario: &Scenario) -> ChannelParams {
        let p = match self.large_scale {
            LargeScaleSpec::Pathloss(p) => p,
            LargeScaleSpec::Unit => Pathloss::default(),
        };
        ChannelParams {
            alpha_db: p.alpha_db,
            beta: p.beta,
            r_in: p.r_in,
            r_out: p.r_out,
            noise_power: scenario.noise_power,
            antennas: self.antennas,
            delta: scenario.delta,
        }
    }
}
