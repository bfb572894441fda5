//! Clusters noisy copies of per-user channels across slots and stitches
//! the slot indices back into messages.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ura::channel::complex_normal;
use ura::clustering::{cluster_and_stitch, ClusterConfig};
use ura::encoder::{assemble_message, ChunkIndexSeq};

fn main() -> ura::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (ka, slots, antennas, bits_per_slot) = (5, 3, 8, 8u32);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let users: Vec<Vec<f64>> = (0..ka)
        .map(|_| {
            let h: Vec<_> = (0..antennas).map(|_| complex_normal(&mut rng)).collect();
            h.iter().map(|c| c.re).chain(h.iter().map(|c| c.im)).collect()
        })
        .collect();
    // Slot l decodes user k at position (k + l) mod Ka, with index 10 k + l.
    let mut estimates = vec![vec![Vec::new(); ka]; slots];
    let mut indices = vec![vec![0; ka]; slots];
    for l in 0..slots {
        for k in 0..ka {
            let pos = (k + l) % ka;
            estimates[l][pos] = users[k].iter().map(|v| v + noise.sample(&mut rng)).collect();
            indices[l][pos] = 10 * k + l;
        }
    }
    let out = cluster_and_stitch(&estimates, &indices, bits_per_slot, &ClusterConfig::default(), &mut rng)?;
    println!("log-likelihood {:.2}", out.model.final_log_likelihood());
    for k in 0..ka {
        let want = assemble_message(&ChunkIndexSeq::new((0..slots).map(|l| 10 * k + l).collect()), bits_per_slot)?;
        println!("user {k} recovered: {}", out.messages.contains(&want));
    }
    Ok(())
}
