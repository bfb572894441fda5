//! Draws users on the annulus, prints their large-scale gains and passes
//! one slot through the fading MAC.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ura::channel::{apply_mac, ChannelParams, UserChannelSet};
use ura::codebook::{Codebook, CodebookConfig};
use ura::harness::dbm_to_watts;

fn main() -> ura::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = 10f64.powf(-19.9) * 1e7;
    let params = ChannelParams {
        alpha_db: -15.3,
        beta: 3.76,
        r_in: 5.0,
        r_out: 1000.0,
        noise_power: noise,
        antennas: 4,
        delta: 0.0,
    };
    let users = 5;
    let set = UserChannelSet::draw(&params, users, 1, &mut rng)?;
    let pt = dbm_to_watts(15.0);
    for k in 0..users {
        let snr = 10.0 * (set.gains[k] * pt / noise).log10();
        println!("user {k}: r = {:7.1} m, per-sample SNR {snr:6.1} dB", set.radii[k]);
    }

    let cb = Codebook::build(CodebookConfig::new(10, 128, pt, 1))?;
    let indices = [3, 500, 77, 1000, 12];
    let h: Vec<_> = (0..users).map(|k| set.effective(k, 0)).collect();
    let obs = apply_mac(&cb, &indices, &h, noise, &mut rng)?;
    println!(
        "received {} x {} samples, mean energy per sample {:.3e} W",
        obs.n0(),
        obs.antennas(),
        obs.energy() / (obs.n0() * obs.antennas()) as f64
    );
    Ok(())
}
