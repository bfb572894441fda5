//! Gaussian mixture fitted by EM.
//!
//! Covariances are regularized with an inverse-Wishart-like penalty
//! `-eps/2 * tr(Sigma_k^-1)` per component, which turns the M-step into
//! `Sigma_k = S_k + (eps / N_k) I` and makes EM ascend the penalized
//! log-likelihood exactly. With `eps = floor * N` every eigenvalue stays at
//! or above `floor`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::special::log_add_exp;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    #[default]
    Full,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    /// Stop when the log-likelihood changes by less than `tol * |LLF|`.
    pub tol: f64,
    pub max_iters: usize,
    pub covariance: CovarianceKind,
    /// Eigenvalue floor relative to the average per-dimension variance.
    pub cov_floor: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            tol: 1e-10,
            max_iters: 300,
            covariance: CovarianceKind::Full,
            cov_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    /// `N x K` posterior memberships.
    pub membership: DMatrix<f64>,
    /// Plain log-likelihood after each E-step.
    pub log_likelihood: Vec<f64>,
    /// Penalized log-likelihood, the quantity EM ascends.
    pub objective: Vec<f64>,
    /// E-step indices that followed a component re-seed.
    pub reseeds: Vec<usize>,
    pub converged: bool,
    /// Absolute covariance eigenvalue floor used.
    pub cov_floor: f64,
}

impl GmmModel {
    pub fn final_log_likelihood(&self) -> f64 {
        self.log_likelihood.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Component densities prepared for repeated evaluation.
struct Factor {
    chol: DMatrix<f64>,
    log_det: f64,
    inv_trace: f64,
}

fn factor(cov: &DMatrix<f64>, kind: CovarianceKind) -> Result<Factor> {
    let d = cov.nrows();
    match kind {
        CovarianceKind::Diagonal => {
            let mut chol = DMatrix::zeros(d, d);
            let mut log_det = 0.0;
            let mut inv_trace = 0.0;
            for i in 0..d {
                let v = cov[(i, i)];
                if !(v > 0.0) {
                    return Err(Error::Numerical {
                        stage: "gmm",
                        detail: format!("nonpositive variance {v}"),
                    });
                }
                chol[(i, i)] = v.sqrt();
                log_det += v.ln();
                inv_trace += 1.0 / v;
            }
            Ok(Factor { chol, log_det, inv_trace })
        }
        CovarianceKind::Full => {
            let ch = cov.clone().cholesky().ok_or_else(|| Error::Numerical {
                stage: "gmm",
                detail: "covariance lost positive definiteness".into(),
            })?;
            let l = ch.l();
            let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let inv_trace = ch.inverse().trace();
            Ok(Factor { chol: l, log_det, inv_trace })
        }
    }
}

fn log_density(x: &DVector<f64>, mean: &DVector<f64>, f: &Factor, kind: CovarianceKind) -> f64 {
    let d = x.len() as f64;
    let diff = x - mean;
    let maha = match kind {
        CovarianceKind::Diagonal => diff
            .iter()
            .enumerate()
            .map(|(i, v)| (v / f.chol[(i, i)]).powi(2))
            .sum(),
        CovarianceKind::Full => {
            let z = f
                .chol
                .solve_lower_triangular(&diff)
                .expect("Cholesky factor has a positive diagonal");
            z.norm_squared()
        }
    };
    -0.5 * (d * (2.0 * PI).ln() + f.log_det + maha)
}

/// k-means++ seeding: first centre uniform, then proportional to the
/// squared distance to the nearest chosen centre.
pub fn kmeans_plus_plus<R: Rng + ?Sized>(points: &[DVector<f64>], k: usize, rng: &mut R) -> Vec<DVector<f64>> {
    let n = points.len();
    let mut centres = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| (p - &centres[0]).norm_squared()).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min((p - &c).norm_squared());
        }
        centres.push(c);
    }
    centres
}

/// Fits a `k`-component mixture to `points`.
pub fn gmm_em<R: Rng + ?Sized>(points: &[DVector<f64>], k: usize, cfg: &GmmConfig, rng: &mut R) -> Result<GmmModel> {
    let n = points.len();
    if k == 0 {
        return Err(Error::config("mixture needs at least one component"));
    }
    if n < k {
        return Err(Error::config(format!("{k} components for {n} points")));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::config("points must share a positive dimension"));
    }
    if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("clustering input"));
    }
    if !(cfg.cov_floor > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::config("cov_floor and tol must be positive"));
    }

    let nf = n as f64;
    let mean_all = points.iter().fold(DVector::zeros(d), |acc, p| acc + p) / nf;
    let var_all: DVector<f64> = points
        .iter()
        .fold(DVector::zeros(d), |acc: DVector<f64>, p| acc + (p - &mean_all).map(|v| v * v))
        / nf;
    let avg_var = var_all.mean();
    let floor = cfg.cov_floor * if avg_var > 0.0 { avg_var } else { 1.0 };
    let eps = floor * nf;
    let init_cov = DMatrix::from_diagonal(&var_all.map(|v| v + floor));

    let mut means = kmeans_plus_plus(points, k, rng);
    let mut covs = vec![init_cov.clone(); k];
    let mut weights = vec![1.0 / k as f64; k];
    let mut resp = DMatrix::zeros(n, k);
    let mut log_likelihood = Vec::new();
    let mut objective = Vec::new();
    let mut reseeds = Vec::new();
    let mut converged = false;

    for iter in 0..cfg.max_iters.max(1) {
        // E-step.
        let factors = covs
            .iter()
            .map(|c| factor(c, cfg.covariance))
            .collect::<Result<Vec<_>>>()?;
        let mut llf = 0.0;
        for (i, x) in points.iter().enumerate() {
            let mut norm = f64::NEG_INFINITY;
            for c in 0..k {
                let v = weights[c].ln() + log_density(x, &means[c], &factors[c], cfg.covariance);
                resp[(i, c)] = v;
                norm = log_add_exp(norm, v);
            }
            for c in 0..k {
                resp[(i, c)] = (resp[(i, c)] - norm).exp();
            }
            llf += norm;
        }
        let penalty: f64 = factors.iter().map(|f| 0.5 * eps * f.inv_trace).sum();
        if !llf.is_finite() {
            return Err(Error::Numerical {
                stage: "gmm",
                detail: format!("log-likelihood {llf} at iteration {iter}"),
            });
        }
        let prev = log_likelihood.last().copied();
        log_likelihood.push(llf);
        objective.push(llf - penalty);
        if let Some(p) = prev {
            if (llf - p).abs() < cfg.tol * llf.abs() && !reseeds.contains(&(iter)) {
                converged = true;
                break;
            }
        }
        if iter + 1 == cfg.max_iters.max(1) {
            break;
        }

        // M-step.
        let mut reseeded = false;
        for c in 0..k {
            let nk: f64 = resp.column(c).sum();
            if nk < 1e-6 {
                means[c] = farthest_point(points, &means).clone();
                covs[c] = init_cov.clone();
                weights[c] = 1.0 / k as f64;
                reseeded = true;
                continue;
            }
            let mu = points
                .iter()
                .enumerate()
                .fold(DVector::zeros(d), |acc, (i, p)| acc + p * resp[(i, c)])
                / nk;
            let mut s = DMatrix::zeros(d, d);
            for (i, p) in points.iter().enumerate() {
                let diff = p - &mu;
                match cfg.covariance {
                    CovarianceKind::Full => s.ger(resp[(i, c)], &diff, &diff, 1.0),
                    CovarianceKind::Diagonal => {
                        for j in 0..d {
                            s[(j, j)] += resp[(i, c)] * diff[j] * diff[j];
                        }
                    }
                }
            }
            s /= nk;
            for j in 0..d {
                s[(j, j)] += eps / nk;
            }
            // Symmetrize away rounding.
            if cfg.covariance == CovarianceKind::Full {
                s = (&s + s.transpose()) * 0.5;
            }
            means[c] = mu;
            covs[c] = s;
            weights[c] = nk / nf;
        }
        if reseeded {
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            reseeds.push(iter + 1);
        }
    }

    Ok(GmmModel {
        weights,
        means,
        covariances: covs,
        membership: resp,
        log_likelihood,
        objective,
        reseeds,
        converged,
        cov_floor: floor,
    })
}

fn farthest_point<'a>(points: &'a [DVector<f64>], means: &[DVector<f64>]) -> &'a DVector<f64> {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = means
            .iter()
            .map(|m| (p - m).norm_squared())
            .fold(f64::INFINITY, f64::min);
        if d > best.1 {
            best = (i, d);
        }
    }
    &points[best.0]
}
