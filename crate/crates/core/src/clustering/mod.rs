//! Stitching slot decodes into messages by clustering channel estimates.
//!
//! A user's channel changes little across its `L` slots, so the `L * Ka`
//! channel estimates returned by the slot decoder form `Ka` clusters of `L`
//! points. A Gaussian mixture fitted by EM gives soft memberships, and each
//! slot is then assigned to clusters one-to-one by a Hungarian solve on the
//! log-memberships.

pub mod gmm;
pub mod hungarian;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{assemble_message, ChunkIndexSeq, Message};
use crate::{Error, Result};

pub use gmm::{gmm_em, kmeans_plus_plus, CovarianceKind, GmmConfig, GmmModel};
pub use hungarian::{assignment_cost, hungarian};

/// `||h||^2 / Mr` for a real `[Re h; Im h]` vector of length `2Mr`.
pub fn estimate_large_scale(h: &[f64]) -> f64 {
    let mr = h.len() / 2;
    if mr == 0 {
        return 0.0;
    }
    h.iter().map(|v| v * v).sum::<f64>() / mr as f64
}

/// Channel estimates of all slots, slot-major, normalized by their
/// large-scale estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPointSet {
    pub points: Vec<DVector<f64>>,
    pub gains: Vec<f64>,
    /// Points whose gain estimate fell under the floor and were scaled by
    /// the floor instead.
    pub degenerate: Vec<bool>,
    slots: usize,
    per_slot: usize,
}

impl ChannelPointSet {
    /// `estimates[l][k]` is the `k`-th decoded channel of slot `l`.
    pub fn from_slots(estimates: &[Vec<Vec<f64>>]) -> Result<Self> {
        let slots = estimates.len();
        let per_slot = estimates.first().map_or(0, |s| s.len());
        if slots == 0 || per_slot == 0 {
            return Err(Error::config("no channel estimates to cluster"));
        }
        if estimates.iter().any(|s| s.len() != per_slot) {
            return Err(Error::config("every slot needs the same number of estimates"));
        }
        let dim = estimates[0][0].len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::config("channel estimates must have even, nonzero length"));
        }
        let raw: Vec<&Vec<f64>> = estimates.iter().flatten().collect();
        if raw.iter().any(|h| h.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                actual: raw.iter().map(|h| h.len()).find(|&l| l != dim).unwrap_or(dim),
            });
        }
        let gains: Vec<f64> = raw.iter().map(|h| estimate_large_scale(h)).collect();
        let top = gains.iter().cloned().fold(0.0, f64::max);
        let floor = if top > 0.0 { 1e-12 * top } else { 1.0 };
        let degenerate: Vec<bool> = gains.iter().map(|&g| g < floor).collect();
        let points = raw
            .iter()
            .zip(&gains)
            .map(|(h, &g)| DVector::from_iterator(dim, h.iter().map(|v| v / g.max(floor).sqrt())))
            .collect();
        Ok(ChannelPointSet {
            points,
            gains,
            degenerate,
            slots,
            per_slot,
        })
    }

    pub fn num_slots(&self) -> usize {
        self.slots
    }

    pub fn per_slot(&self) -> usize {
        self.per_slot
    }

    pub fn slot_of(&self, n: usize) -> usize {
        n / self.per_slot
    }

    pub fn within_slot_rank(&self, n: usize) -> usize {
        n % self.per_slot
    }
}

/// Per-slot one-to-one maps from decode rank to cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    /// `permutations[l][k]` is the cluster of the `k`-th decode of slot `l`.
    pub permutations: Vec<Vec<usize>>,
    /// Sum of the chosen log-memberships in each slot.
    pub objectives: Vec<f64>,
}

impl AssignmentResult {
    pub fn permutation_matrix(&self, slot: usize) -> DMatrix<f64> {
        let perm = &self.permutations[slot];
        let n = perm.len();
        DMatrix::from_fn(n, n, |k, c| if perm[k] == c { 1.0 } else { 0.0 })
    }
}

pub const DEFAULT_P_FLOOR: f64 = 1e-300;

/// Solves each slot's assignment on the slot-major membership matrix
/// `P` (`L * Ka` rows, `Ka` columns).
pub fn constrained_assign(p: &DMatrix<f64>, slots: usize, ka: usize, p_floor: f64) -> Result<AssignmentResult> {
    if p.nrows() != slots * ka || p.ncols() != ka {
        return Err(Error::Dimension {
            expected: slots * ka,
            actual: p.nrows(),
        });
    }
    for (n, row) in p.row_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite() || *v < -1e-6) || (row.sum() - 1.0).abs() > 1e-6 {
            return Err(Error::config(format!("membership row {n} is not a distribution")));
        }
    }
    let mut permutations = Vec::with_capacity(slots);
    let mut objectives = Vec::with_capacity(slots);
    for l in 0..slots {
        let alpha: Vec<Vec<f64>> = (0..ka)
            .map(|k| (0..ka).map(|c| p[(l * ka + k, c)].max(p_floor).ln()).collect())
            .collect();
        let cost: Vec<Vec<f64>> = alpha.iter().map(|r| r.iter().map(|a| -a).collect()).collect();
        let perm = hungarian(&cost)?;
        objectives.push(perm.iter().enumerate().map(|(k, &c)| alpha[k][c]).sum());
        permutations.push(perm);
    }
    Ok(AssignmentResult {
        permutations,
        objectives,
    })
}

/// Column index sequence of each cluster, in slot order.
pub fn stitch_indices(assign: &AssignmentResult, slot_indices: &[Vec<usize>]) -> Result<Vec<ChunkIndexSeq>> {
    let slots = assign.permutations.len();
    if slot_indices.len() != slots {
        return Err(Error::Dimension {
            expected: slots,
            actual: slot_indices.len(),
        });
    }
    let ka = assign.permutations.first().map_or(0, |p| p.len());
    let mut seqs = vec![Vec::with_capacity(slots); ka];
    for (perm, decoded) in assign.permutations.iter().zip(slot_indices) {
        if decoded.len() != ka || perm.len() != ka {
            return Err(Error::Dimension {
                expected: ka,
                actual: decoded.len(),
            });
        }
        let mut owner = vec![usize::MAX; ka];
        for (k, &c) in perm.iter().enumerate() {
            owner[c] = k;
        }
        for (c, seq) in seqs.iter_mut().enumerate() {
            seq.push(decoded[owner[c]]);
        }
    }
    Ok(seqs.into_iter().map(ChunkIndexSeq::new).collect())
}

/// Reassembled message of each cluster.
pub fn stitch(assign: &AssignmentResult, slot_indices: &[Vec<usize>], bits_per_slot: u32) -> Result<Vec<Message>> {
    stitch_indices(assign, slot_indices)?
        .iter()
        .map(|s| assemble_message(s, bits_per_slot))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub gmm: GmmConfig,
    pub p_floor: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            gmm: GmmConfig::default(),
            p_floor: DEFAULT_P_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub model: GmmModel,
    pub assignment: AssignmentResult,
    pub messages: Vec<Message>,
}

/// Normalize, fit, assign and stitch in one call. `estimates[l][k]` and
/// `slot_indices[l][k]` describe the `k`-th decode of slot `l`.
pub fn cluster_and_stitch<R: Rng + ?Sized>(
    estimates: &[Vec<Vec<f64>>],
    slot_indices: &[Vec<usize>],
    bits_per_slot: u32,
    cfg: &ClusterConfig,
    rng: &mut R,
) -> Result<ClusterOutcome> {
    let set = ChannelPointSet::from_slots(estimates)?;
    let ka = set.per_slot();
    let model = gmm_em(&set.points, ka, &cfg.gmm, rng)?;
    let assignment = constrained_assign(&model.membership, set.num_slots(), ka, cfg.p_floor)?;
    let messages = stitch(&assignment, slot_indices, bits_per_slot)?;
    Ok(ClusterOutcome {
        model,
        assignment,
        messages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_scale_of_ones_and_zero() {
        assert_eq!(estimate_large_scale(&[1.0; 8]), 2.0);
        assert_eq!(estimate_large_scale(&[0.0; 8]), 0.0);
    }

    #[test]
    fn zero_estimate_is_flagged_not_divided() {
        let est = vec![vec![vec![1.0, 1.0], vec![0.0, 0.0]]];
        let set = ChannelPointSet::from_slots(&est).unwrap();
        assert_eq!(set.degenerate, vec![false, true]);
        assert!(set.points.iter().flatten().all(|v| v.is_finite()));
        assert_eq!(set.slot_of(1), 0);
        assert_eq!(set.within_slot_rank(1), 1);
    }

    #[test]
    fn identity_and_permutation_memberships() {
        let ka = 4;
        let perm = [2usize, 0, 3, 1];
        let mut p = DMatrix::zeros(2 * ka, ka);
        for k in 0..ka {
            p[(k, k)] = 1.0;
            p[(ka + k, perm[k])] = 1.0;
        }
        let a = constrained_assign(&p, 2, ka, DEFAULT_P_FLOOR).unwrap();
        assert_eq!(a.permutations[0], vec![0, 1, 2, 3]);
        assert_eq!(a.permutations[1], perm.to_vec());
        assert_eq!(a.objectives, vec![0.0, 0.0]);
        let m = a.permutation_matrix(1);
        for i in 0..ka {
            assert_eq!(m.row(i).sum(), 1.0);
            assert_eq!(m.column(i).sum(), 1.0);
        }
    }

    #[test]
    fn rejects_rows_off_the_simplex() {
        let p = DMatrix::from_element(2, 2, 0.6);
        assert!(constrained_assign(&p, 1, 2, DEFAULT_P_FLOOR).is_err());
    }

    #[test]
    fn stitch_identity_and_transposition() {
        let slot_indices = vec![vec![10, 11, 12], vec![20, 21, 22]];
        let id = AssignmentResult {
            permutations: vec![vec![0, 1, 2], vec![0, 1, 2]],
            objectives: vec![0.0; 2],
        };
        let seqs = stitch_indices(&id, &slot_indices).unwrap();
        assert_eq!(seqs[1].indices, vec![11, 21]);
        let swapped = AssignmentResult {
            permutations: vec![vec![0, 1, 2], vec![1, 0, 2]],
            objectives: vec![0.0; 2],
        };
        let seqs = stitch_indices(&swapped, &slot_indices).unwrap();
        assert_eq!(seqs[0].indices, vec![10, 21]);
        assert_eq!(seqs[1].indices, vec![11, 20]);
        assert_eq!(seqs[2].indices, vec![12, 22]);
        let msgs = stitch(&swapped, &slot_indices, 5).unwrap();
        assert_eq!(msgs[0].len(), 10);
    }
}
