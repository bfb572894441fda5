//! Decodes one planted slot with HyGAMP and prints the trace.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ura::channel::{apply_mac, complex_normal};
use ura::codebook::{Codebook, CodebookConfig};
use ura::hygamp::{run_hygamp_traced, HyGampConfig};

fn main() -> ura::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (bits, n0, antennas, ka) = (10, 256, 16, 8);
    let cb = Codebook::build(CodebookConfig::new(bits, n0, 1.0, 42))?;
    let mut truth: Vec<usize> = Vec::new();
    while truth.len() < ka {
        let j = rng.random_range(0..cb.num_columns());
        if !truth.contains(&j) {
            truth.push(j);
        }
    }
    let h: Vec<Vec<_>> = (0..ka)
        .map(|_| (0..antennas).map(|_| complex_normal(&mut rng)).collect())
        .collect();
    // 40 dB per-sample SNR for unit-gain users.
    let noise = 1e-4;
    let obs = apply_mac(&cb, &truth, &h, noise, &mut rng)?;

    let cfg = HyGampConfig {
        sigma_w2: noise / 2.0,
        ..Default::default()
    };
    let est = run_hygamp_traced(&obs, &cb, &cfg, ka, |t| {
        println!(
            "t {:2} residual {:.3e} sigma_w2 {:.3e} sigma_x {:.3e} dx {:.1e}",
            t.t, t.residual_norm, t.sigma_w2, t.sigma_x, t.x_change
        );
    })?;
    let mut found = est.decoded_indices.clone();
    found.sort_unstable();
    truth.sort_unstable();
    println!("converged {} after {} iterations", est.converged, est.iterations);
    println!("truth   {truth:?}\ndecoded {found:?}");
    Ok(())
}
