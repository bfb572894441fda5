//! Empirical per-slot collisions against their analytic mean.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ura::harness::collision_probe;

fn main() -> ura::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (ka, bits, slots) in [(100, 17, 6), (150, 17, 6), (40, 12, 4)] {
        let s = collision_probe(ka, bits, slots, 100_000, &mut rng)?;
        println!(
            "Ka {ka:3} J {bits}: pairs {:.5} (analytic {:.5}), slots hit {:.4}, union term {:.3e}",
            s.empirical_pairs, s.analytic_pairs, s.slots_with_collision, s.union_bound_term
        );
    }
    Ok(())
}
