use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::collisions_among;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionStats {
    pub samples: usize,
    /// Mean number of colliding user pairs per slot.
    pub empirical_pairs: f64,
    /// `C(Ka, 2) / 2^J`.
    pub analytic_pairs: f64,
    /// Fraction of slots with at least one collision.
    pub slots_with_collision: f64,
    /// `2 L C(Ka, 2) / (Ka 2^J)`.
    pub union_bound_term: f64,
}

/// `C(Ka, 2) / 2^J`: expected colliding pairs in one slot.
pub fn expected_colliding_pairs(ka: usize, bits_per_slot: u32) -> f64 {
    (ka * ka.saturating_sub(1)) as f64 / 2.0 / 2f64.powi(bits_per_slot as i32)
}

/// `2 L C(Ka, 2) / (Ka 2^J)`: collision contribution to the error bound.
pub fn union_bound_term(ka: usize, bits_per_slot: u32, slots: usize) -> f64 {
    2.0 * slots as f64 * expected_colliding_pairs(ka, bits_per_slot) / ka as f64
}

/// Samples `samples` slots of `ka` uniform indices in `[0, 2^J)`.
pub fn collision_probe<R: Rng + ?Sized>(
    ka: usize,
    bits_per_slot: u32,
    slots: usize,
    samples: usize,
    rng: &mut R,
) -> Result<CollisionStats> {
    if samples < 1000 {
        return Err(Error::config("collision probe needs at least 1000 samples"));
    }
    if ka == 0 || bits_per_slot == 0 || bits_per_slot > 40 {
        return Err(Error::config("collision probe needs Ka >= 1 and 1 <= J <= 40"));
    }
    let columns = 1u64 << bits_per_slot;
    let mut pairs = 0usize;
    let mut hit = 0usize;
    for _ in 0..samples {
        let idx: Vec<usize> = (0..ka).map(|_| rng.random_range(0..columns) as usize).collect();
        let s = collisions_among(idx);
        pairs += s.colliding_pairs;
        hit += usize::from(s.colliding_pairs > 0);
    }
    Ok(CollisionStats {
        samples,
        empirical_pairs: pairs as f64 / samples as f64,
        analytic_pairs: expected_colliding_pairs(ka, bits_per_slot),
        slots_with_collision: hit as f64 / samples as f64,
        union_bound_term: union_bound_term(ka, bits_per_slot, slots),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_values() {
        assert_eq!(expected_colliding_pairs(2, 1), 0.5);
        let t = union_bound_term(150, 17, 6);
        assert!((t - 2.0 * 6.0 * 11175.0 / (150.0 * 131072.0)).abs() < 1e-15);
        assert!((t - 6.82e-3).abs() < 5e-6);
    }
}
