//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use quadrature::double_exponential::integrate;
use rand::{Rng, SeedableRng};
use rand_distr::Distribution;
use rand_chacha::ChaCha8Rng;
use ura::channel::{complex_normal, SlotObservation};
use ura::codebook::{Codebook, CodebookConfig};
use ura::hygamp::{denoise, llr_component, output_update, GampState, HyGampConfig};
use ura::special::sigmoid;

// Numerical integration of the scalar Bernoulli-Laplacian posterior.

pub struct Moments {
    pub mean: f64,
    pub var: f64,
    pub llr: f64,
}

/// `int x^k (1/(2s)) e^{-|x|/s} N(r; x, mu) dx` for `k = 0, 1, 2`, split at
/// the kink and at the peak.
fn slab_integrals(r: f64, mu: f64, s: f64) -> [f64; 3] {
    let sd = mu.sqrt();
    let density = |x: f64| {
        let d = r - x;
        (-(x.abs()) / s).exp() / (2.0 * s) * (-(d * d) / (2.0 * mu)).exp() / (2.0 * PI * mu).sqrt()
    };
    let mut cuts = vec![r - 40.0 * sd - 40.0 * s, 0.0, r, r + 40.0 * sd + 40.0 * s];
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = [0.0; 3];
    for k in 0..3 {
        for w in cuts.windows(2) {
            if w[1] > w[0] {
                out[k] += integrate(|x| density(x) * x.powi(k as i32), w[0], w[1], 1e-15).integral;
            }
        }
    }
    out
}

pub fn posterior_moments(r: f64, mu: f64, rho: f64, s: f64) -> Moments {
    let [i0, i1, i2] = slab_integrals(r, mu, s);
    let spike = (-(r * r) / (2.0 * mu)).exp() / (2.0 * PI * mu).sqrt();
    let z = (1.0 - rho) * spike + rho * i0;
    let mean = rho * i1 / z;
    Moments {
        mean,
        var: rho * i2 / z - mean * mean,
        llr: (i0 / spike).ln(),
    }
}


// Exhaustive assignment search.

/// Minimum total cost over all permutations; ties go to the
/// lexicographically smallest permutation.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    fn recurse(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, acc: f64, best: &mut (Vec<usize>, f64)) {
        let n = cost.len();
        if row == n {
            if acc < best.1 {
                *best = (cur.clone(), acc);
            }
            return;
        }
        for c in 0..n {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                recurse(cost, row + 1, used, cur, acc + cost[row][c], best);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut best = (Vec::new(), f64::INFINITY);
    recurse(cost, 0, &mut vec![false; cost.len()], &mut Vec::new(), 0.0, &mut best);
    best
}

// Plain GAMP on the explicit real sensing matrix.

pub const BITS: u32 = 8;
pub const N0: usize = 64;
pub const MR: usize = 2;

/// Component `q * 2^J + j` of the real unknown; row `q * n0 + t` of `y`.
pub fn real_matrix(cb: &Codebook) -> DMatrix<f64> {
    let a = cb.dense().unwrap();
    let n = cb.num_columns();
    let mut out = DMatrix::zeros(2 * MR * N0, 2 * MR * n);
    for m in 0..MR {
        for t in 0..N0 {
            for j in 0..n {
                let v = a[(t, j)];
                out[(m * N0 + t, m * n + j)] = v.re;
                out[(m * N0 + t, (MR + m) * n + j)] = -v.im;
                out[((MR + m) * N0 + t, m * n + j)] = v.im;
                out[((MR + m) * N0 + t, (MR + m) * n + j)] = v.re;
            }
        }
    }
    out
}

pub struct Dense {
    pub x: DVector<f64>,
    pub mu_x: DVector<f64>,
    pub r: DVector<f64>,
    pub mu_r: DVector<f64>,
    pub s: DVector<f64>,
    pub mu_s: DVector<f64>,
    pub z: DVector<f64>,
    pub rho: Vec<f64>,
    pub llr: Vec<f64>,
}

pub fn dense_gamp(a: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, cfg: &HyGampConfig, iters: usize) -> Vec<Dense> {
    let (m, nn) = a.shape();
    let groups = nn / (2 * MR);
    let a2 = a.map(|v| v * v);
    let sx = cfg.sigma_x.unwrap();
    let prior = (lambda / (1.0 - lambda)).ln();
    let mut st = Dense {
        x: DVector::zeros(nn),
        mu_x: DVector::zeros(nn),
        r: DVector::zeros(nn),
        mu_r: DVector::from_element(nn, 1.0),
        s: DVector::zeros(m),
        mu_s: DVector::zeros(m),
        z: DVector::zeros(m),
        rho: vec![lambda; nn],
        llr: vec![0.0; nn],
    };
    let mut out = Vec::new();
    for it in 0..iters {
        let d = if it == 0 { 1.0 } else { cfg.damping };
        for c in 0..nn {
            let (xm, v) = denoise(st.r[c], st.mu_r[c], st.rho[c], sx, cfg.variance_floor).unwrap();
            st.x[c] = d * xm + (1.0 - d) * st.x[c];
            st.mu_x[c] = d * v + (1.0 - d) * st.mu_x[c];
        }
        st.z = a * &st.x;
        let mu_p = &a2 * &st.mu_x;
        let p = &st.z - mu_p.component_mul(&st.s);
        for i in 0..m {
            let (z0, mu_z) = output_update(y[i], p[i], mu_p[i], cfg.sigma_w2);
            st.s[i] = d * (z0 - p[i]) / mu_p[i] + (1.0 - d) * st.s[i];
            st.mu_s[i] = d * (1.0 - mu_z / mu_p[i]) / mu_p[i] + (1.0 - d) * st.mu_s[i];
        }
        st.mu_r = (a2.transpose() * &st.mu_s).map(|v| 1.0 / v);
        st.r = &st.x + st.mu_r.component_mul(&(a.transpose() * &st.s));
        let mut sums = vec![0.0; groups];
        for c in 0..nn {
            st.llr[c] = llr_component(st.r[c], st.mu_r[c], sx).unwrap();
            sums[c % groups] += st.llr[c];
        }
        for c in 0..nn {
            // Same logit range as the solver, keeping rho inside (0, 1).
            st.rho[c] = sigmoid((prior + sums[c % groups] - st.llr[c]).clamp(-690.0, 36.0));
        }
        out.push(Dense {
            x: st.x.clone(),
            mu_x: st.mu_x.clone(),
            r: st.r.clone(),
            mu_r: st.mu_r.clone(),
            s: st.s.clone(),
            mu_s: st.mu_s.clone(),
            z: st.z.clone(),
            rho: st.rho.clone(),
            llr: st.llr.clone(),
        });
    }
    out
}

pub fn flat(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(1e-300)).sqrt()
}

pub fn compare(state: &GampState, dense: &Dense) -> Vec<(&'static str, f64)> {
    vec![
        ("x_hat", rel_err(&flat(&state.x_hat), dense.x.as_slice())),
        ("mu_x", rel_err(&flat(&state.mu_x), dense.mu_x.as_slice())),
        ("r_hat", rel_err(&flat(&state.r_hat), dense.r.as_slice())),
        ("mu_r", rel_err(&flat(&state.mu_r), dense.mu_r.as_slice())),
        ("s_hat", rel_err(&flat(&state.s_hat), dense.s.as_slice())),
        ("mu_s", rel_err(&flat(&state.mu_s), dense.mu_s.as_slice())),
        ("z_hat", rel_err(&flat(&state.z_hat), dense.z.as_slice())),
        ("rho", rel_err(&flat(&state.rho), &dense.rho)),
        ("llr", rel_err(&flat(&state.llr_to_group), &dense.llr)),
    ]
}

pub fn planted(seed: u64, users: usize, noise: f64) -> (Codebook, SlotObservation, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cb = Codebook::build(CodebookConfig::new(BITS, N0, 1.0, seed + 100)).unwrap();
    let n = cb.num_columns();
    let mut x = vec![vec![Complex64::new(0.0, 0.0); n]; MR];
    for _ in 0..users {
        let j = rng.random_range(0..n);
        for row in x.iter_mut() {
            row[j] += complex_normal(&mut rng);
        }
    }
    let mut obs = SlotObservation::zeros(N0, MR);
    let mut y = DVector::zeros(2 * MR * N0);
    for m in 0..MR {
        let clean = cb.matvec(&x[m]).unwrap();
        for t in 0..N0 {
            let v = clean[t] + complex_normal(&mut rng) * noise.sqrt();
            obs.per_antenna[m][t] = v;
            y[m * N0 + t] = v.re;
            y[(MR + m) * N0 + t] = v.im;
        }
    }
    (cb, obs, y)
}


/// Worst per-state relative error between the solver and dense GAMP over
/// three iterations of a planted instance.
pub fn dense_gamp_worst_error(seed: u64, damping: f64) -> (f64, &'static str) {
    let noise = 0.05;
    let (cb, obs, y) = planted(seed, 6, noise);
    let cfg = HyGampConfig {
        sigma_x: Some(0.6),
        sigma_w2: noise / 2.0,
        damping,
        learn_sigma_x: false,
        learn_sigma_w: false,
        variance_floor: 0.0,
        ..Default::default()
    };
    let lambda = 6.0 / cb.num_columns() as f64;
    let dense = dense_gamp(&real_matrix(&cb), &y, lambda, &cfg, 3);
    let mut solver = ura::hygamp::HyGamp::new(&cb, &obs, &cfg, lambda).unwrap();
    let mut worst = (0.0, "");
    for d in &dense {
        solver.step().unwrap();
        for (name, err) in compare(solver.state(), d) {
            if err > worst.0 {
                worst = (err, name);
            }
        }
    }
    worst
}

/// Worst relative errors (mean, variance, LLR) of the closed-form denoiser
/// against quadrature on the grid `r in -3..=3`, `mu in {0.1, 1, 10}`,
/// `rho in {0.01, 0.5, 0.99}`, `sigma in {0.5, 1, 2}`. The error of a
/// value `b` is `|a - b| / (|b| + 1e-8)`.
pub fn denoiser_grid_errors() -> [f64; 3] {
    let rel = |a: f64, b: f64| (a - b).abs() / (b.abs() + 1e-8);
    let mut worst = [0.0f64; 3];
    for r in -3..=3 {
        let r = r as f64;
        for &mu in &[0.1, 1.0, 10.0] {
            for &rho in &[0.01, 0.5, 0.99] {
                for &s in &[0.5, 1.0, 2.0] {
                    let want = posterior_moments(r, mu, rho, s);
                    let (mean, var) = denoise(r, mu, rho, s, 0.0).unwrap();
                    let llr = llr_component(r, mu, s).unwrap();
                    worst[0] = worst[0].max(rel(mean, want.mean));
                    worst[1] = worst[1].max(rel(var, want.var));
                    worst[2] = worst[2].max(rel(llr, want.llr));
                }
            }
        }
    }
    worst
}

fn laplace(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    let mag: f64 = rand_distr::Exp::new(1.0 / scale).unwrap().sample(rng);
    if rng.random::<bool>() { mag } else { -mag }
}

/// One slot with `ka` distinct active rows whose real and imaginary parts
/// are i.i.d. Laplacian with scale `sigma_x`. Also returns the sample mean
/// of `|x|` over the active entries, the best any scale estimate can do.
pub fn laplacian_slot(
    seed: u64,
    (bits, n0, mr, ka): (u32, usize, usize, usize),
    sigma_x: f64,
    noise_power: f64,
) -> (Codebook, SlotObservation, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cb = Codebook::build(CodebookConfig::new(bits, n0, 1.0, seed + 100)).unwrap();
    let idx = rand::seq::index::sample(&mut rng, 1 << bits, ka).into_vec();
    let channels: Vec<Vec<Complex64>> = (0..ka)
        .map(|_| {
            (0..mr)
                .map(|_| Complex64::new(laplace(&mut rng, sigma_x), laplace(&mut rng, sigma_x)))
                .collect()
        })
        .collect();
    let sample_scale = channels.iter().flatten().map(|c| c.re.abs() + c.im.abs()).sum::<f64>() / (2 * ka * mr) as f64;
    let obs = ura::channel::apply_mac(&cb, &idx, &channels, noise_power, &mut rng).unwrap();
    (cb, obs, sample_scale)
}

pub const EM_SHAPE: (u32, usize, usize, usize) = (8, 128, 16, 12);
pub const EM_TRUTH: f64 = 0.8;

/// Learned and sample Laplacian scales for one easy instance.
pub fn em_calibration(seed: u64) -> (f64, f64) {
    let noise_power = 1e-3;
    let (cb, obs, sample_scale) = laplacian_slot(seed, EM_SHAPE, EM_TRUTH, noise_power);
    let cfg = HyGampConfig {
        sigma_w2: noise_power / 2.0,
        ..Default::default()
    };
    let est = ura::hygamp::run_hygamp(&obs, &cb, &cfg, EM_SHAPE.3).unwrap();
    (est.sigma_x, sample_scale)
}

fn blob(rng: &mut ChaCha8Rng, centre: &DVector<f64>, count: usize) -> Vec<DVector<f64>> {
    (0..count)
        .map(|_| {
            centre.map(|c| {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                c + z
            })
        })
        .collect()
}

/// 2 to 4 unit-variance clusters with random centres in dimension 2 to 6.
pub fn random_mixture(rng: &mut ChaCha8Rng) -> (Vec<DVector<f64>>, usize) {
    let dim = rng.random_range(2..=6);
    let k = rng.random_range(2..=4);
    let mut points = Vec::new();
    for _ in 0..k {
        let centre = DVector::from_fn(dim, |_, _| rng.random::<f64>() * 6.0 - 3.0);
        let count = rng.random_range(4..=12);
        points.extend(blob(rng, &centre, count));
    }
    (points, k)
}

/// Five points around `10 * 1` followed by five around `-10 * 1` in R^4.
pub fn separated_pair(rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let mut points = blob(rng, &DVector::from_element(4, 10.0), 5);
    points.extend(blob(rng, &DVector::from_element(4, -10.0), 5));
    points
}

/// Smallest membership of a point in the cluster of its own half.
pub fn worst_separated_membership(membership: &DMatrix<f64>) -> f64 {
    let first = if membership[(0, 0)] > 0.5 { 0 } else { 1 };
    (0..10)
        .map(|n| membership[(n, if n < 5 { first } else { 1 - first })])
        .fold(1.0, f64::min)
}

/// Largest drop between consecutive values, relative to `max(1, |value|)`.
pub fn worst_relative_drop(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| (w[0] - w[1]) / w[0].abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max)
}
