//! Fading multiple-access channel.
//!
//! Users sit uniformly on an annulus around the base station. A user's
//! large-scale gain follows the log-distance law
//! `g[dB] = -alpha - 10 beta log10(r)`, and its small-scale coefficients are
//! i.i.d. `CN(0, 1)` per receive antenna. With `delta > 0` the small-scale
//! coefficients evolve between slots as a Gauss-Markov process with lag-one
//! correlation `sqrt(1 - delta)`.
//!
//! Note the sign convention: the intercept enters negated, so the usual
//! `alpha = -15.3 dB` yields `+15.3 dB` at one meter.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::special::bessel_j0;
use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Pathloss intercept in dB (enters as `-alpha`).
    pub alpha_db: f64,
    /// Pathloss exponent.
    pub beta: f64,
    pub r_in: f64,
    pub r_out: f64,
    /// Noise variance per complex sample, watts.
    pub noise_power: f64,
    pub antennas: usize,
    /// Inter-slot decorrelation in `[0, 1]`.
    pub delta: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_in > 0.0 && self.r_in < self.r_out) {
            return Err(Error::config("annulus needs 0 < R_in < R_out"));
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::config("noise power must be positive"));
        }
        if self.antennas == 0 {
            return Err(Error::config("need at least one receive antenna"));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::config("delta must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// CDF of a user's distance on the annulus.
pub fn radius_cdf(r: f64, r_in: f64, r_out: f64) -> f64 {
    ((r * r - r_in * r_in) / (r_out * r_out - r_in * r_in)).clamp(0.0, 1.0)
}

/// Distances of `count` users placed uniformly on the annulus.
pub fn draw_radii<R: Rng + ?Sized>(count: usize, r_in: f64, r_out: f64, rng: &mut R) -> Vec<f64> {
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            (r_in * r_in + u * (r_out * r_out - r_in * r_in)).sqrt()
        })
        .collect()
}

/// Linear large-scale gain at distance `r` meters.
pub fn large_scale_gain(r: f64, alpha_db: f64, beta: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::config(format!("distance must be positive, got {r}")));
    }
    Ok(10f64.powf((-alpha_db - 10.0 * beta * r.log10()) / 10.0))
}

/// Inter-slot decorrelation from the Clarke-Jakes correlation at lag `lag`
/// samples: `delta = 1 - J0(2 pi fc lag v / (W c))^2`.
///
/// Only meaningful while the Bessel argument stays inside its first lobe
/// (below about 2.405); the result is clamped to `[0, 1]`.
pub fn jakes_delta(velocity: f64, carrier_hz: f64, bandwidth_hz: f64, lag: f64) -> f64 {
    let arg = 2.0 * PI * carrier_hz * lag * velocity / (bandwidth_hz * SPEED_OF_LIGHT);
    let r = bessel_j0(arg);
    (1.0 - r * r).clamp(0.0, 1.0)
}

pub fn kmh_to_ms(kmh: f64) -> f64 {
    kmh / 3.6
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Small-scale coefficients: one row of `antennas` entries per user.
pub type FadingMatrix = Vec<Vec<Complex64>>;

pub fn draw_fading<R: Rng + ?Sized>(users: usize, antennas: usize, rng: &mut R) -> FadingMatrix {
    (0..users)
        .map(|_| (0..antennas).map(|_| complex_normal(rng)).collect())
        .collect()
}

/// One Gauss-Markov step `H' = sqrt(1 - delta) H + sqrt(delta) E`.
pub fn evolve_channel<R: Rng + ?Sized>(h: &FadingMatrix, delta: f64, rng: &mut R) -> FadingMatrix {
    let delta = delta.clamp(0.0, 1.0);
    if delta == 0.0 {
        return h.clone();
    }
    let keep = (1.0 - delta).sqrt();
    let fresh = delta.sqrt();
    h.iter()
        .map(|row| row.iter().map(|&c| c * keep + complex_normal(rng) * fresh).collect())
        .collect()
}

/// Realized channels of the active users.
#[derive(Debug, Clone, PartialEq)]
pub struct UserChannelSet {
    pub radii: Vec<f64>,
    pub gains: Vec<f64>,
    /// Small-scale fading per slot; a single entry when `delta = 0`.
    pub fading: Vec<FadingMatrix>,
}

impl UserChannelSet {
    /// Places `users` users and draws their fading for `slots` slots.
    pub fn draw<R: Rng + ?Sized>(
        params: &ChannelParams,
        users: usize,
        slots: usize,
        rng: &mut R,
    ) -> Result<Self> {
        params.validate()?;
        let radii = draw_radii(users, params.r_in, params.r_out, rng);
        let gains = radii
            .iter()
            .map(|&r| large_scale_gain(r, params.alpha_db, params.beta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::with_gains(radii, gains, params.antennas, params.delta, slots, rng))
    }

    /// Uses the given large-scale gains and draws only the fading.
    pub fn with_gains<R: Rng + ?Sized>(
        radii: Vec<f64>,
        gains: Vec<f64>,
        antennas: usize,
        delta: f64,
        slots: usize,
        rng: &mut R,
    ) -> Self {
        let first = draw_fading(gains.len(), antennas, rng);
        let mut fading = vec![first];
        if delta > 0.0 {
            for _ in 1..slots {
                let next = evolve_channel(fading.last().expect("nonempty"), delta, rng);
                fading.push(next);
            }
        }
        UserChannelSet {
            radii,
            gains,
            fading,
        }
    }

    pub fn fading_in_slot(&self, slot: usize) -> &FadingMatrix {
        &self.fading[slot.min(self.fading.len() - 1)]
    }

    /// Effective channel `sqrt(g_k) h_k` of user `k` in `slot`.
    pub fn effective(&self, user: usize, slot: usize) -> Vec<Complex64> {
        let s = self.gains[user].sqrt();
        self.fading_in_slot(slot)[user].iter().map(|h| h * s).collect()
    }
}

/// Received samples of one slot, stored per antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotObservation {
    /// `per_antenna[m][t]` is sample `t` at antenna `m`.
    pub per_antenna: Vec<Vec<Complex64>>,
}

impl SlotObservation {
    pub fn zeros(n0: usize, antennas: usize) -> Self {
        SlotObservation {
            per_antenna: vec![vec![Complex64::new(0.0, 0.0); n0]; antennas],
        }
    }

    pub fn antennas(&self) -> usize {
        self.per_antenna.len()
    }

    pub fn n0(&self) -> usize {
        self.per_antenna.first().map_or(0, Vec::len)
    }

    pub fn energy(&self) -> f64 {
        self.per_antenna
            .iter()
            .flat_map(|a| a.iter())
            .map(|c| c.norm_sqr())
            .sum()
    }

    /// Real vectorized view `[Re vec(Y^T); Im vec(Y^T)]`, where
    /// `vec(Y^T)[t * Mr + m] = Y[t, m]`.
    pub fn to_real_vector(&self) -> Vec<f64> {
        let (n0, mr) = (self.n0(), self.antennas());
        let mut out = vec![0.0; 2 * n0 * mr];
        for (m, col) in self.per_antenna.iter().enumerate() {
            for (t, c) in col.iter().enumerate() {
                out[t * mr + m] = c.re;
                out[n0 * mr + t * mr + m] = c.im;
            }
        }
        out
    }
}

/// Slot MAC: `Y = Ã X + W`, where row `j` of `X` sums the effective
/// channels of all users that picked column `j`.
///
/// `channels[k]` is user `k`'s effective channel (length `Mr`).
pub fn apply_mac<R: Rng + ?Sized>(
    codebook: &Codebook,
    indices: &[usize],
    channels: &[Vec<Complex64>],
    noise_power: f64,
    rng: &mut R,
) -> Result<SlotObservation> {
    if indices.len() != channels.len() {
        return Err(Error::Dimension {
            expected: indices.len(),
            actual: channels.len(),
        });
    }
    let antennas = match channels.first() {
        Some(c) => c.len(),
        None => return Err(Error::config("apply_mac needs the antenna count; use apply_mac_with_antennas")),
    };
    apply_mac_with_antennas(codebook, indices, channels, antennas, noise_power, rng)
}

/// [`apply_mac`] with an explicit antenna count, valid for zero users.
pub fn apply_mac_with_antennas<R: Rng + ?Sized>(
    codebook: &Codebook,
    indices: &[usize],
    channels: &[Vec<Complex64>],
    antennas: usize,
    noise_power: f64,
    rng: &mut R,
) -> Result<SlotObservation> {
    if indices.len() != channels.len() {
        return Err(Error::Dimension {
            expected: indices.len(),
            actual: channels.len(),
        });
    }
    let n0 = codebook.num_rows();
    let mut obs = SlotObservation::zeros(n0, antennas);
    for (&j, h) in indices.iter().zip(channels) {
        if h.len() != antennas {
            return Err(Error::Dimension {
                expected: antennas,
                actual: h.len(),
            });
        }
        let col = codebook.column(j)?;
        for (m, hm) in h.iter().enumerate() {
            for (y, a) in obs.per_antenna[m].iter_mut().zip(&col) {
                *y += a * hm;
            }
        }
    }
    if noise_power > 0.0 {
        let sd = noise_power.sqrt();
        for col in &mut obs.per_antenna {
            for y in col.iter_mut() {
                *y += complex_normal(rng) * sd;
            }
        }
    }
    Ok(obs)
}
