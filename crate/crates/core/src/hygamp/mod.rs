//! Per-slot group-sparse recovery with sum-product HyGAMP.
//!
//! The unknown of one slot is the real vector `x` made of `2^J` groups, one
//! per codebook column. Group `j` holds `2Mr` components: the real parts of
//! row `j` of `X` at the `Mr` antennas, then the imaginary parts. Each group
//! is active or not through one Bernoulli latent variable with prior
//! `lambda = Ka / 2^J`; active components follow a Laplacian slab.
//!
//! The real sensing matrix is never formed. A measurement at antenna `m`
//! only touches components of antenna `m`, and every block product is a
//! complex product with the circulant codebook or with the real circulants
//! generated by the squared real and imaginary parts of its generator.
//!
//! Component index `q` runs over `0..2Mr`: `q < Mr` is the real part at
//! antenna `q`, `q >= Mr` the imaginary part at antenna `q - Mr`.
//! Measurements use the same convention, `[q][t]` being the real (or
//! imaginary) part of sample `t` at that antenna.

pub mod denoiser;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::SlotObservation;
use crate::codebook::{Codebook, Workspace};
use crate::special::sigmoid;
use crate::{Error, Result};

pub use denoiser::{
    activity_posterior, denoise, intermediates, llr_component, ml_sigma_w, output_update,
    DenoiserIntermediates,
};
use denoiser::Tails;

/// Range of the prior logit seen by the denoiser, so that `rho` stays
/// strictly inside (0, 1).
const LOGIT_MIN: f64 = -690.0;
const LOGIT_MAX: f64 = 36.0;

/// How the `|A_iq|^2`-weighted sums of the variance updates are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// Exact, through the squared circulants.
    #[default]
    Exact,
    /// Every `|A_iq|^2` replaced by its average.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyGampConfig {
    /// Group activity prior; `None` means `Ka / 2^J`.
    pub lambda: Option<f64>,
    /// Laplacian scale; `None` starts from a method-of-moments guess.
    pub sigma_x: Option<f64>,
    /// Noise variance per real component, in the units of the observation.
    pub sigma_w2: f64,
    /// Relative change tolerance on `x`.
    pub xi: f64,
    pub t_max: usize,
    /// Weight of the new value in the `x`, `mu_x`, `s` and `mu_s` updates;
    /// 1 disables damping.
    pub damping: f64,
    pub learn_sigma_x: bool,
    pub learn_sigma_w: bool,
    /// Laplacian-scale EM steps per HyGAMP iteration.
    pub em_inner_iters: usize,
    /// Iterations before EM learning starts.
    pub em_warmup: usize,
    pub variance_floor: f64,
    pub variance_mode: VarianceMode,
    pub noise_reference: NoiseReference,
    /// Clamp on the learned Laplacian scale, relative to its initial value.
    pub sigma_x_range: (f64, f64),
}

impl Default for HyGampConfig {
    fn default() -> Self {
        HyGampConfig {
            lambda: None,
            sigma_x: None,
            sigma_w2: 1.0,
            xi: 1e-7,
            t_max: 150,
            damping: 0.5,
            learn_sigma_x: true,
            learn_sigma_w: true,
            em_inner_iters: 1,
            em_warmup: 5,
            variance_floor: 1e-12,
            variance_mode: VarianceMode::Exact,
            noise_reference: NoiseReference::Posterior,
            sigma_x_range: (1e-4, 1e4),
        }
    }
}

impl HyGampConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::config("lambda must lie in (0, 1)"));
            }
        }
        if let Some(s) = self.sigma_x {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config("sigma_x must be positive"));
            }
        }
        if !(self.sigma_w2 > 0.0 && self.sigma_w2.is_finite()) {
            return Err(Error::config("sigma_w2 must be positive"));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::config("xi must lie in (0, 1)"));
        }
        if self.t_max == 0 {
            return Err(Error::config("t_max must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::config("damping must lie in (0, 1]"));
        }
        if !(self.variance_floor >= 0.0) {
            return Err(Error::config("variance floor must be nonnegative"));
        }
        Ok(())
    }
}

/// All per-iteration quantities. Component arrays are `[q][j]`,
/// measurement arrays `[q][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GampState {
    pub x_hat: Vec<Vec<f64>>,
    pub mu_x: Vec<Vec<f64>>,
    pub r_hat: Vec<Vec<f64>>,
    pub mu_r: Vec<Vec<f64>>,
    pub rho: Vec<Vec<f64>>,
    pub llr_to_group: Vec<Vec<f64>>,
    pub llr_from_group: Vec<Vec<f64>>,
    pub z_hat: Vec<Vec<f64>>,
    pub mu_p: Vec<Vec<f64>>,
    pub p_hat: Vec<Vec<f64>>,
    pub z0: Vec<Vec<f64>>,
    pub mu_z: Vec<Vec<f64>>,
    pub s_hat: Vec<Vec<f64>>,
    pub mu_s: Vec<Vec<f64>>,
    pub iteration: usize,
}

impl GampState {
    fn new(components: usize, groups: usize, n0: usize, lambda: f64) -> Self {
        let comp = |v: f64| vec![vec![v; groups]; components];
        let meas = |v: f64| vec![vec![v; n0]; components];
        let prior_llr = (lambda / (1.0 - lambda)).ln();
        GampState {
            x_hat: comp(0.0),
            mu_x: comp(0.0),
            r_hat: comp(0.0),
            mu_r: comp(1.0),
            rho: comp(sigmoid(prior_llr)),
            llr_to_group: comp(0.0),
            llr_from_group: comp(prior_llr),
            z_hat: meas(0.0),
            mu_p: meas(0.0),
            p_hat: meas(0.0),
            z0: meas(0.0),
            mu_z: meas(0.0),
            s_hat: meas(0.0),
            mu_s: meas(0.0),
            iteration: 0,
        }
    }

    /// Per-group sums of the outgoing component LLRs.
    pub fn group_llr_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.llr_to_group[0].len()];
        self.group_llr_sums_into(&mut sums);
        sums
    }

    fn group_llr_sums_into(&self, sums: &mut [f64]) {
        sums.fill(0.0);
        for row in &self.llr_to_group {
            for (s, l) in sums.iter_mut().zip(row) {
                *s += l;
            }
        }
    }
}

/// Which estimate of `z` the noise-variance update measures the residual
/// against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseReference {
    /// Output-channel posterior mean `z0`.
    #[default]
    Posterior,
    /// Linear estimate `A x`.
    Linear,
}

/// One line of the optional per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub residual_norm: f64,
    pub sigma_w2: f64,
    pub sigma_x: f64,
    pub max_activity: f64,
    /// `||x(t) - x(t-1)||^2 / ||x(t-1)||^2`, infinite while `x(t-1) = 0`.
    pub x_change: f64,
}

/// Iterative HyGAMP solver for one slot.
pub struct HyGamp<'a> {
    codebook: &'a Codebook,
    y: Vec<Vec<f64>>,
    cfg: HyGampConfig,
    lambda: f64,
    sigma_x: f64,
    sigma_x_bounds: (f64, f64),
    sigma_w2: f64,
    state: GampState,
    mr: usize,
    prev_x: Vec<Vec<f64>>,
    /// Tails of the last LLR pass and the scale they were built with.
    tails: Vec<Vec<Tails>>,
    tails_sigma: Option<f64>,
    mean_sq: (f64, f64),
    y_norm: f64,
    ws: Workspace,
    llr_sums: Vec<f64>,
    /// A Laplacian scale update is due with the next denoising pass.
    em_pending: bool,
}

/// Outcome of one [`HyGamp::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub converged: bool,
    pub trace: TraceRecord,
}

impl<'a> HyGamp<'a> {
    /// Sets up the solver in the initial state (`mu_r = 1`, `r = 0`,
    /// `LLR = ln(lambda / (1 - lambda))`).
    pub fn new(
        codebook: &'a Codebook,
        obs: &SlotObservation,
        cfg: &HyGampConfig,
        lambda: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::config(format!("lambda = {lambda} must lie in (0, 1)")));
        }
        let n0 = codebook.num_rows();
        if obs.n0() != n0 {
            return Err(Error::Dimension {
                expected: n0,
                actual: obs.n0(),
            });
        }
        let mr = obs.antennas();
        if mr == 0 {
            return Err(Error::config("observation has no antennas"));
        }
        let mut y = vec![vec![0.0; n0]; 2 * mr];
        for (m, col) in obs.per_antenna.iter().enumerate() {
            for (t, c) in col.iter().enumerate() {
                if !(c.re.is_finite() && c.im.is_finite()) {
                    return Err(Error::NonFinite("observation"));
                }
                y[m][t] = c.re;
                y[mr + m][t] = c.im;
            }
        }
        let sigma_x = match cfg.sigma_x {
            Some(s) => s,
            None => moment_sigma_x(codebook, obs, cfg.sigma_w2, lambda),
        };
        let (lo, hi) = cfg.sigma_x_range;
        Ok(HyGamp {
            codebook,
            y,
            cfg: *cfg,
            lambda,
            sigma_x,
            sigma_x_bounds: (sigma_x * lo, sigma_x * hi),
            sigma_w2: cfg.sigma_w2,
            state: GampState::new(2 * mr, codebook.num_columns(), n0, lambda),
            mr,
            prev_x: vec![vec![0.0; codebook.num_columns()]; 2 * mr],
            tails: vec![vec![Tails::default(); codebook.num_columns()]; 2 * mr],
            tails_sigma: None,
            mean_sq: codebook.mean_component_power(),
            y_norm: obs.energy().sqrt(),
            ws: codebook.workspace(),
            llr_sums: vec![0.0; codebook.num_columns()],
            em_pending: false,
        })
    }

    pub fn state(&self) -> &GampState {
        &self.state
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x
    }

    pub fn sigma_w2(&self) -> f64 {
        self.sigma_w2
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Activity posterior of every group from the current outgoing LLRs.
    pub fn activity_posterior(&self) -> Vec<f64> {
        self.state
            .group_llr_sums()
            .into_iter()
            .map(|s| activity_posterior(s, self.lambda))
            .collect()
    }

    /// Runs one full iteration.
    pub fn step(&mut self) -> Result<StepReport> {
        let floor = self.cfg.variance_floor;
        let groups = self.codebook.num_columns();
        let comps = 2 * self.mr;
        let n0 = self.codebook.num_rows();
        let first = self.state.iteration == 0;
        let damp = if first { 1.0 } else { self.cfg.damping };

        // Denoise with r(t-1), mu_r(t-1), rho(t). The tails of the last LLR
        // pass are reused while the scale is unchanged. A pending Laplacian
        // scale update shares this pass: its posterior is the same one.
        for (p, x) in self.prev_x.iter_mut().zip(&self.state.x_hat) {
            p.copy_from_slice(x);
        }
        let em_now = self.em_pending && self.cfg.learn_sigma_x;
        self.em_pending = false;
        let (mut num, mut den) = (0.0, 0.0);
        {
            let reuse = self.tails_sigma == Some(self.sigma_x);
            let st = &mut self.state;
            for q in 0..comps {
                for j in 0..groups {
                    let tails = if reuse {
                        self.tails[q][j]
                    } else {
                        Tails::new(st.r_hat[q][j], st.mu_r[q][j], self.sigma_x)
                    };
                    let post = tails.posterior_logit(st.llr_from_group[q][j].clamp(LOGIT_MIN, LOGIT_MAX));
                    if em_now {
                        num += post.active_abs_mean();
                        den += st.rho[q][j];
                    }
                    let fresh = post.mean();
                    st.x_hat[q][j] = damp * fresh + (1.0 - damp) * st.x_hat[q][j];
                    let var = post.variance().max(floor);
                    st.mu_x[q][j] = damp * var + (1.0 - damp) * st.mu_x[q][j];
                }
            }
        }
        if em_now {
            self.sigma_x = self.em_ratio(num, den, self.sigma_x);
            for _ in 1..self.cfg.em_inner_iters {
                self.sigma_x = self.em_sigma_x_step(self.sigma_x);
            }
        }

        // Output linear step: z = A x, mu_p = |A|^2 mu_x, p = z - mu_p s(t-1).
        for m in 0..self.mr {
            let st = &mut self.state;
            for (b, (re, im)) in self.ws.buf.iter_mut().zip(st.x_hat[m].iter().zip(&st.x_hat[self.mr + m])) {
                *b = Complex64::new(*re, *im);
            }
            self.codebook.forward_in_place(&mut self.ws);
            for t in 0..n0 {
                st.z_hat[m][t] = self.ws.buf[t].re;
                st.z_hat[self.mr + m][t] = self.ws.buf[t].im;
            }
        }
        let residual_sq: f64 = self
            .y
            .iter()
            .zip(&self.state.z_hat)
            .flat_map(|(y, z)| y.iter().zip(z).map(|(a, b)| (a - b) * (a - b)))
            .sum();
        let residual = residual_sq.sqrt();
        self.forward_variance();
        let st = &mut self.state;
        for q in 0..comps {
            for t in 0..n0 {
                st.mu_p[q][t] = st.mu_p[q][t].max(floor);
                st.p_hat[q][t] = st.z_hat[q][t] - st.mu_p[q][t] * st.s_hat[q][t];
            }
        }

        // Output channel and the s update.
        for q in 0..comps {
            for t in 0..n0 {
                let (z0, mu_z) = output_update(self.y[q][t], st.p_hat[q][t], st.mu_p[q][t], self.sigma_w2);
                st.z0[q][t] = z0;
                st.mu_z[q][t] = mu_z;
                let mu_p = st.mu_p[q][t];
                let s_new = (z0 - st.p_hat[q][t]) / mu_p;
                st.s_hat[q][t] = damp * s_new + (1.0 - damp) * st.s_hat[q][t];
                let mu_s = ((1.0 - mu_z / mu_p) / mu_p).max(floor);
                st.mu_s[q][t] = damp * mu_s + (1.0 - damp) * st.mu_s[q][t];
            }
        }

        // Input linear step: mu_r = 1 / (|A|^2)^T mu_s, r = x + mu_r A^T s.
        self.adjoint_variance();
        let mr = self.mr;
        for m in 0..mr {
            let st = &mut self.state;
            self.ws.buf.fill(Complex64::new(0.0, 0.0));
            for t in 0..n0 {
                self.ws.buf[t] = Complex64::new(st.s_hat[m][t], st.s_hat[mr + m][t]);
            }
            self.codebook.adjoint_in_place(&mut self.ws);
            for j in 0..groups {
                let c = self.ws.buf[j];
                st.r_hat[m][j] = st.x_hat[m][j] + st.mu_r[m][j] * c.re;
                st.r_hat[mr + m][j] = st.x_hat[mr + m][j] + st.mu_r[mr + m][j] * c.im;
            }
        }
        let st = &mut self.state;

        // Latent-variable LLR exchange.
        for q in 0..comps {
            for j in 0..groups {
                let tails = Tails::new(st.r_hat[q][j], st.mu_r[q][j], self.sigma_x);
                st.llr_to_group[q][j] = tails.llr;
                self.tails[q][j] = tails;
            }
        }
        self.tails_sigma = Some(self.sigma_x);
        st.group_llr_sums_into(&mut self.llr_sums);
        let prior_llr = (self.lambda / (1.0 - self.lambda)).ln();
        for q in 0..comps {
            for j in 0..groups {
                let incoming = prior_llr + self.llr_sums[j] - st.llr_to_group[q][j];
                st.llr_from_group[q][j] = incoming;
                st.rho[q][j] = sigmoid(incoming.clamp(LOGIT_MIN, LOGIT_MAX));
            }
        }

        self.check_finite()?;

        let t = self.state.iteration;
        if t >= self.cfg.em_warmup && residual <= self.y_norm {
            if self.cfg.learn_sigma_w {
                self.update_sigma_w();
            }
            self.em_pending = true;
        }

        let (diff, norm) = self
            .state
            .x_hat
            .iter()
            .zip(&self.prev_x)
            .flat_map(|(a, b)| a.iter().zip(b))
            .fold((0.0, 0.0), |(d, n), (a, b)| (d + (a - b) * (a - b), n + b * b));
        let x_change = if norm > 0.0 { diff / norm } else { f64::INFINITY };
        let converged = !first && diff <= self.cfg.xi * norm;
        let trace = self.trace_record(residual, x_change);
        self.state.iteration += 1;
        Ok(StepReport { converged, trace })
    }

    fn trace_record(&self, residual: f64, x_change: f64) -> TraceRecord {
        let max_llr = self.llr_sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        TraceRecord {
            t: self.state.iteration,
            residual_norm: residual,
            sigma_w2: self.sigma_w2,
            sigma_x: self.sigma_x,
            max_activity: activity_posterior(max_llr, self.lambda),
            x_change,
        }
    }

    /// `mu_p[i] = sum_{q,j} |A_iq^(j)|^2 mu_x[q][j]`.
    fn forward_variance(&mut self) {
        let (mr, n0) = (self.mr, self.codebook.num_rows());
        let st = &mut self.state;
        match self.cfg.variance_mode {
            VarianceMode::Exact => {
                for m in 0..mr {
                    for (b, (re, im)) in self.ws.buf.iter_mut().zip(st.mu_x[m].iter().zip(&st.mu_x[mr + m])) {
                        *b = Complex64::new(*re, *im);
                    }
                    self.codebook.squared_forward_in_place(&mut self.ws);
                    for t in 0..n0 {
                        st.mu_p[m][t] = self.ws.buf[t].re;
                        st.mu_p[mr + m][t] = self.ws.buf[t].im;
                    }
                }
            }
            VarianceMode::Uniform => {
                let (pr, pi) = self.mean_sq;
                for m in 0..mr {
                    let re_sum: f64 = st.mu_x[m].iter().sum();
                    let im_sum: f64 = st.mu_x[mr + m].iter().sum();
                    let (a, b) = (pr * re_sum + pi * im_sum, pi * re_sum + pr * im_sum);
                    st.mu_p[m].iter_mut().for_each(|v| *v = a);
                    st.mu_p[mr + m].iter_mut().for_each(|v| *v = b);
                }
            }
        }
    }

    /// `mu_r[q][j] = 1 / sum_i |A_iq^(j)|^2 mu_s[i]`.
    fn adjoint_variance(&mut self) {
        let (mr, groups, n0) = (self.mr, self.codebook.num_columns(), self.codebook.num_rows());
        let floor = self.cfg.variance_floor;
        let st = &mut self.state;
        match self.cfg.variance_mode {
            VarianceMode::Exact => {
                for m in 0..mr {
                    self.ws.buf.fill(Complex64::new(0.0, 0.0));
                    for t in 0..n0 {
                        self.ws.buf[t] = Complex64::new(st.mu_s[m][t], st.mu_s[mr + m][t]);
                    }
                    self.codebook.squared_adjoint_in_place(&mut self.ws);
                    for j in 0..groups {
                        let Complex64 { re, im } = self.ws.buf[j];
                        st.mu_r[m][j] = (1.0 / re.max(f64::MIN_POSITIVE)).max(floor);
                        st.mu_r[mr + m][j] = (1.0 / im.max(f64::MIN_POSITIVE)).max(floor);
                    }
                }
            }
            VarianceMode::Uniform => {
                let (pr, pi) = self.mean_sq;
                for m in 0..mr {
                    let re_sum: f64 = st.mu_s[m].iter().sum();
                    let im_sum: f64 = st.mu_s[mr + m].iter().sum();
                    let a = 1.0 / (pr * re_sum + pi * im_sum);
                    let b = 1.0 / (pi * re_sum + pr * im_sum);
                    st.mu_r[m].iter_mut().for_each(|v| *v = a.max(floor));
                    st.mu_r[mr + m].iter_mut().for_each(|v| *v = b.max(floor));
                }
            }
        }
    }

    fn update_sigma_w(&mut self) {
        let z_ref = match self.cfg.noise_reference {
            NoiseReference::Posterior => &self.state.z0,
            NoiseReference::Linear => &self.state.z_hat,
        };
        let (mut est, mut energy, mut count) = (0.0, 0.0, 0usize);
        for ((y, z), mu_z) in self.y.iter().zip(z_ref).zip(&self.state.mu_z) {
            // Row by row through the same formula as `ml_sigma_w`.
            if let Ok(v) = ml_sigma_w(y, z, mu_z) {
                est += v * y.len() as f64;
                energy += y.iter().map(|v| v * v).sum::<f64>();
                count += y.len();
            }
        }
        if count > 0 {
            let energy = energy / count as f64;
            let floor = (1e-10 * energy).max(self.cfg.variance_floor).max(f64::MIN_POSITIVE);
            self.sigma_w2 = (est / count as f64).max(floor);
        }
    }

    /// One EM update of the Laplacian scale from the current `r`, `mu_r`
    /// and `rho`:
    /// `sigma' = sum_{q,j} E[|x_qj| 1{active}] / sum_{q,j} rho_qj`,
    /// clamped to the configured range.
    pub fn em_sigma_x_step(&self, sigma_x: f64) -> f64 {
        let st = &self.state;
        let reuse = self.tails_sigma == Some(sigma_x);
        let mut num = 0.0;
        let mut den = 0.0;
        for q in 0..st.r_hat.len() {
            for j in 0..st.r_hat[q].len() {
                let tails = if reuse {
                    self.tails[q][j]
                } else {
                    Tails::new(st.r_hat[q][j], st.mu_r[q][j], sigma_x)
                };
                let logit = st.llr_from_group[q][j].clamp(LOGIT_MIN, LOGIT_MAX);
                let post = tails.posterior_logit(logit);
                num += post.active_abs_mean();
                den += st.rho[q][j];
            }
        }
        self.em_ratio(num, den, sigma_x)
    }

    fn em_ratio(&self, num: f64, den: f64, sigma_x: f64) -> f64 {
        if !(den > 0.0) || !num.is_finite() {
            log::warn!("sigma_x EM step skipped: degenerate activity weights");
            return sigma_x;
        }
        let (lo, hi) = self.sigma_x_bounds;
        (num / den).clamp(lo, hi)
    }

    fn check_finite(&self) -> Result<()> {
        let st = &self.state;
        let bad = |arr: &Vec<Vec<f64>>| arr.iter().flatten().any(|v| !v.is_finite());
        for (name, arr) in [
            ("x_hat", &st.x_hat),
            ("mu_x", &st.mu_x),
            ("r_hat", &st.r_hat),
            ("mu_r", &st.mu_r),
            ("s_hat", &st.s_hat),
        ] {
            if bad(arr) {
                return Err(Error::Numerical {
                    stage: "hygamp",
                    detail: format!(
                        "non-finite {name} at iteration {} (sigma_x = {:.3e}, sigma_w2 = {:.3e})",
                        st.iteration, self.sigma_x, self.sigma_w2
                    ),
                });
            }
        }
        Ok(())
    }

    /// Block `j` of the current estimate, `[Re x_j; Im x_j]`.
    pub fn group_estimate(&self, j: usize) -> Vec<f64> {
        self.state.x_hat.iter().map(|row| row[j]).collect()
    }
}

/// Method-of-moments starting point `sqrt(v / (2 lambda))` for the Laplacian
/// scale, where `v` is the noise-corrected average energy per real
/// component: `(||Y||^2 - n0 Mr sigma_w2) / (mean column energy * 2^J * 2Mr)`.
fn moment_sigma_x(codebook: &Codebook, obs: &SlotObservation, sigma_w2_real: f64, lambda: f64) -> f64 {
    let (n0, mr) = (obs.n0() as f64, obs.antennas() as f64);
    let signal = (obs.energy() - 2.0 * n0 * mr * sigma_w2_real).max(0.0);
    let per_component =
        signal / (codebook.mean_column_energy() * codebook.num_columns() as f64 * 2.0 * mr);
    let guess = (per_component / (2.0 * lambda)).sqrt();
    if guess > 0.0 && guess.is_finite() {
        guess
    } else {
        // Nothing above the noise: fall back to the noise level per column.
        (sigma_w2_real / codebook.mean_column_energy()).sqrt().max(f64::MIN_POSITIVE)
    }
}

/// Result of decoding one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotEstimate {
    pub activity_posterior: Vec<f64>,
    /// The `Ka` columns with the largest activity evidence, strongest first.
    pub decoded_indices: Vec<usize>,
    /// `[Re h; Im h]` estimate for each decoded column.
    pub channel_estimates: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub sigma_x: f64,
    pub sigma_w2: f64,
}

/// Indices of the `k` largest values, ties broken by lower index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

pub fn run_hygamp(
    obs: &SlotObservation,
    codebook: &Codebook,
    cfg: &HyGampConfig,
    active_users: usize,
) -> Result<SlotEstimate> {
    run_hygamp_traced(obs, codebook, cfg, active_users, |_| {})
}

/// [`run_hygamp`] that reports every iteration to `on_iter`.
///
/// Works on a copy of the observation scaled to unit average energy per
/// real measurement; estimates and learned parameters are mapped back to
/// the original units, including in the trace.
pub fn run_hygamp_traced(
    obs: &SlotObservation,
    codebook: &Codebook,
    cfg: &HyGampConfig,
    active_users: usize,
    mut on_iter: impl FnMut(&TraceRecord),
) -> Result<SlotEstimate> {
    cfg.validate()?;
    let groups = codebook.num_columns();
    if active_users == 0 || active_users >= groups {
        return Err(Error::config(format!(
            "need 0 < Ka < 2^J, got Ka = {active_users}"
        )));
    }
    let lambda = cfg.lambda.unwrap_or(active_users as f64 / groups as f64);

    let measurements = 2.0 * (obs.n0() * obs.antennas()) as f64;
    let mean_energy = obs.energy() / measurements;
    let scale = if mean_energy > 0.0 {
        mean_energy.sqrt()
    } else {
        cfg.sigma_w2.sqrt()
    };
    let scaled_obs = SlotObservation {
        per_antenna: obs
            .per_antenna
            .iter()
            .map(|col| col.iter().map(|c| c / scale).collect())
            .collect(),
    };
    let mut scaled_cfg = *cfg;
    scaled_cfg.sigma_w2 = cfg.sigma_w2 / (scale * scale);
    scaled_cfg.sigma_x = cfg.sigma_x.map(|s| s / scale);

    let mut solver = HyGamp::new(codebook, &scaled_obs, &scaled_cfg, lambda)?;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.t_max {
        let report = solver.step()?;
        iterations += 1;
        let tr = report.trace;
        on_iter(&TraceRecord {
            t: tr.t,
            residual_norm: tr.residual_norm * scale,
            sigma_w2: tr.sigma_w2 * scale * scale,
            sigma_x: tr.sigma_x * scale,
            ..tr
        });
        if report.converged {
            converged = true;
            break;
        }
    }

    let activity = solver.activity_posterior();
    // Ranked on the log scale: the posterior saturates at 1 for strong groups.
    let decoded = top_k(&solver.state().group_llr_sums(), active_users);
    let channels = decoded
        .iter()
        .map(|&j| solver.group_estimate(j).into_iter().map(|v| v * scale).collect())
        .collect();
    Ok(SlotEstimate {
        activity_posterior: activity,
        decoded_indices: decoded,
        channel_estimates: channels,
        converged,
        iterations,
        sigma_x: solver.sigma_x() * scale,
        sigma_w2: solver.sigma_w2() * scale * scale,
    })
}
