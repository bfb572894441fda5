//! Scalar Bernoulli-Laplacian denoiser.
//!
//! Prior `(1 - rho) delta(x) + rho / (2 sigma) exp(-|x| / sigma)`, pseudo
//! observation `r = x + N(0, mu)`. Completing the square splits the slab
//! posterior into two truncated Gaussians, `N(gamma+, mu)` on `x > 0` and
//! `N(gamma-, mu)` on `x < 0`, with `gamma+- = r -+ mu / sigma`. Their masses
//! are proportional to `nu+-` = `Q(b) exp(b^2 / 2)` (with `b+ = -gamma+ /
//! sqrt(mu)`, `b- = gamma- / sqrt(mu)`) and the spike's mass to `theta`.
//!
//! At most one of `b+`, `b-` is negative since `b+ + b- = 2 sqrt(mu) / sigma`.
//! When one is, `exp(b^2 / 2)` of that side is factored out of every weight,
//! so arguments where it would overflow are handled.

use std::f64::consts::PI;

use crate::special::{q_function, scaled_tail};
use crate::{Error, Result};

/// Named intermediate quantities of the closed-form denoiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserIntermediates {
    pub theta: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
}

pub fn intermediates(r: f64, mu_r: f64, rho: f64, sigma_x: f64) -> DenoiserIntermediates {
    let sd = mu_r.sqrt();
    let gamma_plus = r - mu_r / sigma_x;
    let gamma_minus = r + mu_r / sigma_x;
    let nu = |b: f64| {
        if b >= 0.0 {
            scaled_tail(b)
        } else {
            q_function(b) * (0.5 * b * b).exp()
        }
    };
    DenoiserIntermediates {
        theta: 2.0 * sigma_x * (1.0 - rho) / (rho * (2.0 * PI * mu_r).sqrt()),
        alpha_minus: -r / sigma_x - mu_r / (2.0 * sigma_x * sigma_x),
        alpha_plus: r / sigma_x - mu_r / (2.0 * sigma_x * sigma_x),
        gamma_minus,
        gamma_plus,
        nu_plus: nu(-gamma_plus / sd),
        nu_minus: nu(gamma_minus / sd),
    }
}

/// The rho-independent part of the denoiser for one component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Tails {
    pub b_plus: f64,
    pub b_minus: f64,
    /// Inverse Mills ratios at `b+` and `b-`.
    pub lam_plus: f64,
    pub lam_minus: f64,
    pub mu_r: f64,
    /// `ln(sqrt(2 pi mu) / (2 sigma) (nu+ + nu-))`.
    pub llr: f64,
    /// `nu+ / (nu+ + nu-)`.
    pub frac_plus: f64,
}

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

impl Tails {
    pub fn new(r: f64, mu_r: f64, sigma_x: f64) -> Self {
        let shift = mu_r / sigma_x;
        let sd = mu_r.sqrt();
        let b_plus = (shift - r) / sd;
        let b_minus = (r + shift) / sd;
        // exp(low^2 / 2) of a negative side is factored out of both masses.
        let low = b_plus.min(b_minus);
        let (offset, shrink) = if low < 0.0 {
            let h = 0.5 * low * low;
            (h, (-h).exp())
        } else {
            (0.0, 1.0)
        };
        // (mass / exp(offset), inverse Mills ratio) of one side.
        let side = |b: f64| {
            if b >= 0.0 {
                let nu = scaled_tail(b);
                (nu * shrink, 1.0 / (SQRT_2PI * nu))
            } else {
                // Q(b) = 1 - Q(-b); here exp(-b^2 / 2) = shrink.
                let q = 1.0 - scaled_tail(-b) * shrink;
                (q, shrink / (SQRT_2PI * q))
            }
        };
        let (m_plus, lam_plus) = side(b_plus);
        let (m_minus, lam_minus) = side(b_minus);
        let mass = m_plus + m_minus;
        Tails {
            b_plus,
            b_minus,
            lam_plus,
            lam_minus,
            mu_r,
            llr: offset + (mass * SQRT_2PI * sd / (2.0 * sigma_x)).ln(),
            frac_plus: m_plus / mass,
        }
    }

    /// Posterior mixture split into spike, positive and negative parts.
    pub fn posterior(&self, rho: f64) -> PosteriorParts {
        self.posterior_logit(rho.ln() - (-rho).ln_1p())
    }

    /// As [`Tails::posterior`] with the prior given as `ln(rho / (1 - rho))`.
    pub fn posterior_logit(&self, prior_logit: f64) -> PosteriorParts {
        // The posterior activity logit is the prior logit plus the LLR.
        let a = prior_logit + self.llr;
        let e = (-a.abs()).exp();
        let (active, spike) = if a >= 0.0 {
            (1.0 / (1.0 + e), e / (1.0 + e))
        } else {
            (e / (1.0 + e), 1.0 / (1.0 + e))
        };
        let plus = active * self.frac_plus;
        let sd = self.mu_r.sqrt();
        // gamma+ = -sd b+ and gamma- = sd b-, so the means are sd (lambda - b).
        let (ex_p, var_p) = truncated_unit_moments(self.b_plus, self.lam_plus);
        let (ex_m, var_m) = truncated_unit_moments(self.b_minus, self.lam_minus);
        PosteriorParts {
            spike,
            plus,
            minus: active - plus,
            mean_plus: sd * ex_p,
            mean_minus: -sd * ex_m,
            var_plus: self.mu_r * var_p,
            var_minus: self.mu_r * var_m,
        }
    }
}

/// Posterior of one component as a three-part mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PosteriorParts {
    pub spike: f64,
    pub plus: f64,
    pub minus: f64,
    pub mean_plus: f64,
    pub mean_minus: f64,
    pub var_plus: f64,
    pub var_minus: f64,
}

impl PosteriorParts {
    pub fn mean(&self) -> f64 {
        self.plus * self.mean_plus + self.minus * self.mean_minus
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let dp = self.mean_plus - m;
        let dm = self.mean_minus - m;
        self.plus * (self.var_plus + dp * dp)
            + self.minus * (self.var_minus + dm * dm)
            + self.spike * m * m
    }

    /// `E[|x| 1{active}]` under the posterior.
    pub fn active_abs_mean(&self) -> f64 {
        self.plus * self.mean_plus - self.minus * self.mean_minus
    }
}

/// Mean excess `E[z] - b = lambda - b` and variance of a standard normal
/// truncated to `[b, inf)`, given the inverse Mills ratio `lambda` at `b`.
fn truncated_unit_moments(b: f64, lambda: f64) -> (f64, f64) {
    if b > 8.0 {
        // lambda - b and 1 + b lambda - lambda^2 cancel badly here; use the
        // continued fraction of the Mills ratio, lambda = b + 1/(b + e),
        // e = 2/(b + f), which gives the variance as
        // (b + 2e - f) / ((b + f)(b + e)^2).
        let mut tail = 0.0;
        for k in (3..=20).rev() {
            tail = k as f64 / (b + tail);
        }
        let f = tail;
        let e = 2.0 / (b + f);
        return (1.0 / (b + e), (b + 2.0 * e - f) / ((b + f) * (b + e) * (b + e)));
    }
    (lambda - b, (1.0 + b * lambda - lambda * lambda).max(0.0))
}

fn check_finite(vals: &[f64], what: &'static str) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Posterior mean and variance of one component. The variance is clamped
/// below at `floor`.
pub fn denoise(r: f64, mu_r: f64, rho: f64, sigma_x: f64, floor: f64) -> Result<(f64, f64)> {
    check_finite(&[r, mu_r, rho, sigma_x], "denoiser input")?;
    if !(mu_r > 0.0 && sigma_x > 0.0 && rho > 0.0 && rho < 1.0) {
        return Err(Error::config("denoiser needs mu_r > 0, sigma_x > 0, 0 < rho < 1"));
    }
    let post = Tails::new(r, mu_r, sigma_x).posterior(rho);
    Ok((post.mean(), post.variance().max(floor)))
}

/// Log-likelihood ratio of the active versus inactive hypothesis for one
/// component: `ln(sqrt(2 pi mu) / (2 sigma) (nu+ + nu-))`.
pub fn llr_component(r: f64, mu_r: f64, sigma_x: f64) -> Result<f64> {
    check_finite(&[r, mu_r, sigma_x], "llr input")?;
    if !(mu_r > 0.0 && sigma_x > 0.0) {
        return Err(Error::config("llr needs mu_r > 0 and sigma_x > 0"));
    }
    Ok(Tails::new(r, mu_r, sigma_x).llr)
}

/// Gaussian output channel: posterior mean and variance of `z` given
/// `y = z + N(0, sigma_w2)` and the prior `z ~ N(p, mu_p)`.
pub fn output_update(y: f64, p: f64, mu_p: f64, sigma_w2: f64) -> (f64, f64) {
    let denom = mu_p + sigma_w2;
    ((mu_p * y + sigma_w2 * p) / denom, mu_p * sigma_w2 / denom)
}

/// Maximum-likelihood noise variance `(1/M) sum((y - z)^2 + mu_z)`.
pub fn ml_sigma_w(y: &[f64], z: &[f64], mu_z: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::config("noise variance estimate needs at least one sample"));
    }
    if z.len() != y.len() || mu_z.len() != y.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            actual: z.len().min(mu_z.len()),
        });
    }
    let sum: f64 = y
        .iter()
        .zip(z)
        .zip(mu_z)
        .map(|((y, z), v)| (y - z) * (y - z) + v)
        .sum();
    Ok(sum / y.len() as f64)
}

/// Activity posterior `lambda / (lambda + (1 - lambda) exp(-s))` of a group
/// whose component LLRs sum to `s`.
pub fn activity_posterior(llr_sum: f64, lambda: f64) -> f64 {
    crate::special::sigmoid(llr_sum + (lambda / (1.0 - lambda)).ln())
}
