//! Partial circulant Gaussian codebook.
//!
//! The codebook `Ã` has `n0` rows and `2^J` columns. It is the top `n0` rows
//! of the `2^J x 2^J` circulant matrix generated by one i.i.d. `CN(0, Pt)`
//! sequence `g`, so `Ã[t, j] = g[(t - j) mod 2^J]` and column `j` is `g`
//! cyclically shifted down by `j`. Products with `Ã`, `Ã^H` and with the
//! entrywise-squared real and imaginary parts all reduce to one length-`2^J`
//! circular convolution and run through the FFT.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest `J` for which [`Codebook::dense`] will materialize the matrix.
pub const DENSE_MAX_BITS: u32 = 12;

fn default_max_bits() -> u32 {
    24
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodebookConfig {
    /// Bits per slot; the codebook has `2^bits` columns.
    pub bits: u32,
    /// Per-slot blocklength in channel uses.
    pub n0: usize,
    /// Per-entry variance of the codewords, in watts.
    pub transmit_power: f64,
    pub seed: u64,
    /// Memory guard on `bits`.
    #[serde(default = "default_max_bits")]
    pub max_bits: u32,
}

impl CodebookConfig {
    pub fn new(bits: u32, n0: usize, transmit_power: f64, seed: u64) -> Self {
        CodebookConfig {
            bits,
            n0,
            transmit_power,
            seed,
            max_bits: default_max_bits(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 {
            return Err(Error::config("codebook needs at least one bit per slot"));
        }
        if self.bits > self.max_bits {
            return Err(Error::config(format!(
                "J = {} exceeds the memory guard of {}",
                self.bits, self.max_bits
            )));
        }
        if self.n0 == 0 || self.n0 > 1usize << self.bits {
            return Err(Error::config(format!(
                "n0 = {} must lie in [1, 2^J = {}]",
                self.n0,
                1usize << self.bits
            )));
        }
        if !(self.transmit_power > 0.0 && self.transmit_power.is_finite()) {
            return Err(Error::config("transmit power must be positive"));
        }
        Ok(())
    }
}

/// A circulant operator of size `len`, stored by the spectrum of its
/// generator. Row truncation to `rows` happens on output.
#[derive(Clone)]
struct Circulant {
    spectrum: Vec<Complex64>,
}

/// Shared FFT plans for one transform length.
#[derive(Clone)]
struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    len: usize,
}

impl Plans {
    fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Plans {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    fn spectrum_of(&self, seq: &[Complex64]) -> Vec<Complex64> {
        let mut buf = seq.to_vec();
        self.forward.process(&mut buf);
        buf
    }

    /// `buf <- IFFT(kernel .* FFT(buf)) / len`, or with `conj(kernel)` when
    /// `adjoint` is set.
    fn convolve_in_place(
        &self,
        kernel: &Circulant,
        buf: &mut [Complex64],
        scratch: &mut [Complex64],
        adjoint: bool,
    ) {
        debug_assert_eq!(buf.len(), self.len);
        self.forward.process_with_scratch(buf, scratch);
        let scale = 1.0 / self.len as f64;
        if adjoint {
            for (b, k) in buf.iter_mut().zip(&kernel.spectrum) {
                *b *= k.conj() * scale;
            }
        } else {
            for (b, k) in buf.iter_mut().zip(&kernel.spectrum) {
                *b *= k * scale;
            }
        }
        self.inverse.process_with_scratch(buf, scratch);
    }

    /// For `buf = a + ib` with real `a`, `b` and real-valued circulants
    /// `R`, `I`: `buf <- (R a + I b) + i (I a + R b)`, transposed when
    /// `adjoint` is set. Splitting the spectrum of `a + ib` into those of
    /// `a` and `b` gives the output spectrum `R_k Z_k + i I_k conj(Z_{-k})`.
    fn paired_in_place(
        &self,
        r: &Circulant,
        i: &Circulant,
        buf: &mut [Complex64],
        scratch: &mut [Complex64],
        adjoint: bool,
    ) {
        let n = self.len;
        debug_assert_eq!(buf.len(), n);
        self.forward.process_with_scratch(buf, scratch);
        let scale = 1.0 / n as f64;
        let kern = |c: &Circulant, k: usize| {
            let v = c.spectrum[k] * scale;
            if adjoint {
                v.conj()
            } else {
                v
            }
        };
        let iu = Complex64::new(0.0, 1.0);
        for k in 0..=n / 2 {
            let m = (n - k) % n;
            let (zk, zm) = (buf[k], buf[m]);
            buf[k] = kern(r, k) * zk + iu * kern(i, k) * zm.conj();
            if m != k {
                buf[m] = kern(r, m) * zm + iu * kern(i, m) * zk.conj();
            }
        }
        self.inverse.process_with_scratch(buf, scratch);
    }
}

/// Reusable buffers for the in-place products of one codebook.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

/// The common codebook. Immutable after construction and `Sync`, so trial
/// workers can share one instance.
#[derive(Clone)]
pub struct Codebook {
    config: CodebookConfig,
    generator: Vec<Complex64>,
    main: Circulant,
    // Generators (Re g)^2 and (Im g)^2: the squared-magnitude operators used
    // by the HyGAMP variance updates.
    re_sq: Circulant,
    im_sq: Circulant,
    plans: Plans,
    column_energy: f64,
}

impl std::fmt::Debug for Codebook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Codebook")
            .field("config", &self.config)
            .field("column_energy", &self.column_energy)
            .finish_non_exhaustive()
    }
}

impl Codebook {
    /// Draws the generator from `cfg.seed` and caches its spectra.
    pub fn build(cfg: CodebookConfig) -> Result<Self> {
        cfg.validate()?;
        let len = 1usize << cfg.bits;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, (cfg.transmit_power / 2.0).sqrt())
            .map_err(|e| Error::config(e.to_string()))?;
        let generator: Vec<Complex64> = (0..len)
            .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        Ok(Self::from_generator(cfg, generator))
    }

    fn from_generator(config: CodebookConfig, generator: Vec<Complex64>) -> Self {
        let plans = Plans::new(generator.len());
        let main = Circulant {
            spectrum: plans.spectrum_of(&generator),
        };
        let re: Vec<Complex64> = generator
            .iter()
            .map(|g| Complex64::new(g.re * g.re, 0.0))
            .collect();
        let im: Vec<Complex64> = generator
            .iter()
            .map(|g| Complex64::new(g.im * g.im, 0.0))
            .collect();
        let re_sq = Circulant {
            spectrum: plans.spectrum_of(&re),
        };
        let im_sq = Circulant {
            spectrum: plans.spectrum_of(&im),
        };
        // Every column holds n0 consecutive (cyclic) generator entries; the
        // average column energy is n0 times the mean entry energy.
        let mean_energy =
            generator.iter().map(|g| g.norm_sqr()).sum::<f64>() / generator.len() as f64;
        Codebook {
            column_energy: mean_energy * config.n0 as f64,
            config,
            generator,
            main,
            re_sq,
            im_sq,
            plans,
        }
    }

    pub fn config(&self) -> &CodebookConfig {
        &self.config
    }

    /// Number of columns, `2^J`.
    pub fn num_columns(&self) -> usize {
        self.generator.len()
    }

    /// Number of rows, `n0`.
    pub fn num_rows(&self) -> usize {
        self.config.n0
    }

    pub fn generator(&self) -> &[Complex64] {
        &self.generator
    }

    /// Average squared column norm.
    pub fn mean_column_energy(&self) -> f64 {
        self.column_energy
    }

    /// Mean of `(Re g)^2` and `(Im g)^2` over the generator, used by the
    /// uniform-variance mode of HyGAMP.
    pub fn mean_component_power(&self) -> (f64, f64) {
        let n = self.generator.len() as f64;
        let re = self.generator.iter().map(|g| g.re * g.re).sum::<f64>() / n;
        let im = self.generator.iter().map(|g| g.im * g.im).sum::<f64>() / n;
        (re, im)
    }

    pub fn column(&self, j: usize) -> Result<Vec<Complex64>> {
        let len = self.num_columns();
        if j >= len {
            return Err(Error::IndexOutOfRange { index: j, limit: len });
        }
        Ok((0..self.config.n0)
            .map(|t| self.generator[(t + len - j) % len])
            .collect())
    }

    /// Buffers sized for this codebook.
    pub fn workspace(&self) -> Workspace {
        Workspace {
            buf: vec![Complex64::new(0.0, 0.0); self.num_columns()],
            scratch: vec![Complex64::new(0.0, 0.0); self.plans.scratch_len()],
        }
    }

    /// `Ã v` for `v` of length `2^J`.
    pub fn matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(v.len(), self.num_columns())?;
        let mut ws = self.workspace();
        ws.buf.copy_from_slice(v);
        self.forward_in_place(&mut ws);
        ws.buf.truncate(self.config.n0);
        Ok(ws.buf)
    }

    /// `Ã^H u` for `u` of length `n0`.
    pub fn adjoint_matvec(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(u.len(), self.config.n0)?;
        let mut ws = self.workspace();
        ws.buf[..u.len()].copy_from_slice(u);
        self.adjoint_in_place(&mut ws);
        Ok(ws.buf)
    }

    /// Forward product on `ws.buf` (length `2^J`); the first `n0` entries
    /// hold the result afterwards.
    pub fn forward_in_place(&self, ws: &mut Workspace) {
        self.plans.convolve_in_place(&self.main, &mut ws.buf, &mut ws.scratch, false);
    }

    /// Adjoint product on `ws.buf`, which holds the input in its first `n0`
    /// entries and zeros elsewhere.
    pub fn adjoint_in_place(&self, ws: &mut Workspace) {
        self.plans.convolve_in_place(&self.main, &mut ws.buf, &mut ws.scratch, true);
    }

    /// Variance product of one antenna. With `ws.buf = a + ib`, where `a`
    /// and `b` are the weights of the real and imaginary components, the
    /// first `n0` entries become `(R a + I b) + i (I a + R b)`. `R` and `I`
    /// are the real circulants generated by `(Re g)^2` and `(Im g)^2`.
    pub fn squared_forward_in_place(&self, ws: &mut Workspace) {
        self.plans
            .paired_in_place(&self.re_sq, &self.im_sq, &mut ws.buf, &mut ws.scratch, false);
    }

    /// Transposed variance product; the input occupies the first `n0`
    /// entries of `ws.buf` and zeros elsewhere.
    pub fn squared_adjoint_in_place(&self, ws: &mut Workspace) {
        self.plans
            .paired_in_place(&self.re_sq, &self.im_sq, &mut ws.buf, &mut ws.scratch, true);
    }

    /// Dense `n0 x 2^J` matrix, for tests and small-scale checks only.
    pub fn dense(&self) -> Result<DMatrix<Complex64>> {
        if self.config.bits > DENSE_MAX_BITS {
            return Err(Error::config(format!(
                "dense codebook limited to J <= {DENSE_MAX_BITS}"
            )));
        }
        let len = self.num_columns();
        Ok(DMatrix::from_fn(self.config.n0, len, |t, j| {
            self.generator[(t + len - j) % len]
        }))
    }
}

fn check_len(actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::Dimension { expected, actual });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_vec(len: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = CodebookConfig::new(8, 32, 1.0, 99);
        let a = Codebook::build(cfg).unwrap();
        let b = Codebook::build(cfg).unwrap();
        let bytes = |cb: &Codebook| {
            cb.generator()
                .iter()
                .flat_map(|g| [g.re.to_bits(), g.im.to_bits()])
                .collect::<Vec<_>>()
        };
        assert_eq!(bytes(&a), bytes(&b));
    }

    #[test]
    fn full_square_case_is_circulant() {
        let cb = Codebook::build(CodebookConfig::new(3, 8, 1.0, 1)).unwrap();
        let dense = cb.dense().unwrap();
        let g = cb.generator();
        for t in 0..8 {
            for j in 0..8 {
                assert_eq!(dense[(t, j)], g[(t + 8 - j) % 8]);
            }
        }
    }

    #[test]
    fn entry_power_matches_configured_variance() {
        let cb = Codebook::build(CodebookConfig::new(10, 256, 1.0, 5)).unwrap();
        let mean = cb.generator().iter().map(|g| g.norm_sqr()).sum::<f64>() / 1024.0;
        assert!((0.9..=1.1).contains(&mean), "mean |g|^2 = {mean}");
    }

    #[test]
    fn column_zero_is_generator_prefix() {
        let cb = Codebook::build(CodebookConfig::new(6, 16, 2.0, 3)).unwrap();
        assert_eq!(cb.column(0).unwrap(), cb.generator()[..16].to_vec());
        for j in 0..64 {
            let energy: f64 = cb.column(j).unwrap().iter().map(|c| c.norm_sqr()).sum();
            assert!(energy > 0.0);
        }
    }

    #[test]
    fn column_matches_dense_and_basis_product() {
        let cb = Codebook::build(CodebookConfig::new(6, 16, 1.0, 11)).unwrap();
        let dense = cb.dense().unwrap();
        let col = cb.column(5).unwrap();
        let dense_col: Vec<Complex64> = dense.column(5).iter().copied().collect();
        assert_eq!(col, dense_col);
        let mut e5 = vec![Complex64::new(0.0, 0.0); 64];
        e5[5] = Complex64::new(1.0, 0.0);
        assert!(max_abs_diff(&cb.matvec(&e5).unwrap(), &col) < 1e-12);
    }

    #[test]
    fn matvec_matches_dense_product() {
        let cb = Codebook::build(CodebookConfig::new(8, 64, 1.0, 21)).unwrap();
        let dense = cb.dense().unwrap();
        let v = random_vec(256, 4);
        let fast = cb.matvec(&v).unwrap();
        let slow = &dense * nalgebra::DVector::from_vec(v);
        assert!(max_abs_diff(&fast, slow.as_slice()) < 1e-10);
        let zero = cb.matvec(&vec![Complex64::new(0.0, 0.0); 256]).unwrap();
        assert!(zero.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn adjoint_matches_dense_product() {
        let cb = Codebook::build(CodebookConfig::new(8, 64, 1.0, 22)).unwrap();
        let dense = cb.dense().unwrap();
        let u = random_vec(64, 5);
        let fast = cb.adjoint_matvec(&u).unwrap();
        let slow = dense.adjoint() * nalgebra::DVector::from_vec(u);
        assert!(max_abs_diff(&fast, slow.as_slice()) < 1e-10);
    }

    #[test]
    fn rejects_bad_configs_and_dimensions() {
        assert!(Codebook::build(CodebookConfig::new(3, 9, 1.0, 0)).is_err());
        assert!(Codebook::build(CodebookConfig::new(25, 16, 1.0, 0)).is_err());
        assert!(Codebook::build(CodebookConfig::new(4, 4, 0.0, 0)).is_err());
        let cb = Codebook::build(CodebookConfig::new(4, 4, 1.0, 0)).unwrap();
        assert!(cb.matvec(&[Complex64::new(1.0, 0.0); 3]).is_err());
        assert!(cb.adjoint_matvec(&[Complex64::new(1.0, 0.0); 16]).is_err());
        assert!(matches!(cb.column(16), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn squared_operators_match_dense() {
        let cb = Codebook::build(CodebookConfig::new(5, 12, 1.0, 8)).unwrap();
        let dense = cb.dense().unwrap();
        let a: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let b: Vec<f64> = (0..32).map(|i| (i as f64 * 0.11).cos().abs()).collect();
        let packed: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| Complex64::new(*x, *y)).collect();
        let mut ws = cb.workspace();
        ws.buf.copy_from_slice(&packed);
        cb.squared_forward_in_place(&mut ws);
        for t in 0..12 {
            let (mut want_re, mut want_im) = (0.0, 0.0);
            for j in 0..32 {
                let d = dense[(t, j)];
                want_re += d.re * d.re * a[j] + d.im * d.im * b[j];
                want_im += d.im * d.im * a[j] + d.re * d.re * b[j];
            }
            assert!((ws.buf[t] - Complex64::new(want_re, want_im)).norm() < 1e-10);
        }
        ws.buf.fill(Complex64::new(0.0, 0.0));
        ws.buf[..12].copy_from_slice(&packed[..12]);
        cb.squared_adjoint_in_place(&mut ws);
        for j in 0..32 {
            let (mut want_re, mut want_im) = (0.0, 0.0);
            for t in 0..12 {
                let d = dense[(t, j)];
                want_re += d.re * d.re * a[t] + d.im * d.im * b[t];
                want_im += d.im * d.im * a[t] + d.re * d.re * b[t];
            }
            assert!((ws.buf[j] - Complex64::new(want_re, want_im)).norm() < 1e-10);
        }
    }
}
