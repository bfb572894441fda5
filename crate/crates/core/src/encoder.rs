//! Message chunking.
//!
//! A `B`-bit message is cut into `L` chunks of `J = B / L` bits. Chunk `l`
//! is read big-endian (its first bit is the most significant) and the
//! resulting integer is the codebook column sent in slot `l`.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A user's message as a bit string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    bits: Vec<bool>,
}

impl Message {
    pub fn new(bits: Vec<bool>) -> Self {
        Message { bits }
    }

    pub fn zeros(len: usize) -> Self {
        Message {
            bits: vec![false; len],
        }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Message {
            bits: (0..len).map(|_| rng.random::<bool>()).collect(),
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Column indices of one message, one per slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChunkIndexSeq {
    pub indices: Vec<usize>,
}

impl ChunkIndexSeq {
    pub fn new(indices: Vec<usize>) -> Self {
        ChunkIndexSeq { indices }
    }

    pub fn num_slots(&self) -> usize {
        self.indices.len()
    }
}

pub fn partition_message(message: &Message, slots: usize) -> Result<ChunkIndexSeq> {
    if slots == 0 || message.len() % slots != 0 {
        return Err(Error::config(format!(
            "message length {} is not divisible by L = {}",
            message.len(),
            slots
        )));
    }
    let chunk = message.len() / slots;
    if chunk >= usize::BITS as usize {
        return Err(Error::config(format!("chunk of {chunk} bits does not fit an index")));
    }
    let indices = message
        .bits
        .chunks(chunk)
        .map(|c| c.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize))
        .collect();
    Ok(ChunkIndexSeq { indices })
}

pub fn assemble_message(seq: &ChunkIndexSeq, bits_per_slot: u32) -> Result<Message> {
    let limit = 1usize << bits_per_slot;
    let mut bits = Vec::with_capacity(seq.indices.len() * bits_per_slot as usize);
    for &index in &seq.indices {
        if index >= limit {
            return Err(Error::IndexOutOfRange { index, limit });
        }
        bits.extend((0..bits_per_slot).rev().map(|b| (index >> b) & 1 == 1));
    }
    Ok(Message { bits })
}

/// Indices chosen in one slot and the values picked by two or more users.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSupport {
    pub indices: Vec<usize>,
    /// Colliding index values, ascending.
    pub collisions: Vec<usize>,
    /// Number of unordered user pairs that share an index.
    pub colliding_pairs: usize,
}

pub fn slot_support(seqs: &[ChunkIndexSeq], slot: usize) -> SlotSupport {
    let indices: Vec<usize> = seqs.iter().map(|s| s.indices[slot]).collect();
    collisions_among(indices)
}

pub(crate) fn collisions_among(indices: Vec<usize>) -> SlotSupport {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &i in &indices {
        *counts.entry(i).or_default() += 1;
    }
    let mut collisions: Vec<usize> = counts
        .iter()
        .filter(|(_, &c)| c >= 2)
        .map(|(&i, _)| i)
        .collect();
    collisions.sort_unstable();
    let colliding_pairs = counts.values().map(|&c| c * (c.saturating_sub(1)) / 2).sum();
    SlotSupport {
        indices,
        collisions,
        colliding_pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::strategy::Strategy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> Message {
        Message::new(s.chars().filter(|c| !c.is_whitespace()).map(|c| c == '1').collect())
    }

    #[test]
    fn paper_sized_message_gives_six_17_bit_chunks() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = Message::random(102, &mut rng);
        let seq = partition_message(&m, 6).unwrap();
        assert_eq!(seq.num_slots(), 6);
        assert!(seq.indices.iter().all(|&i| i < 1 << 17));
    }

    #[test]
    fn big_endian_chunks() {
        let seq = partition_message(&bits("01 10 11"), 3).unwrap();
        assert_eq!(seq.indices, vec![1, 2, 3]);
        let zero = partition_message(&Message::zeros(12), 4).unwrap();
        assert_eq!(zero.indices, vec![0; 4]);
    }

    #[test]
    fn assemble_single_low_bit_of_first_chunk() {
        let mut idx = vec![0; 6];
        idx[0] = 1;
        let m = assemble_message(&ChunkIndexSeq::new(idx), 17).unwrap();
        let set: Vec<usize> = m.bits().iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        assert_eq!(set, vec![16]);
        let z = assemble_message(&ChunkIndexSeq::new(vec![0; 3]), 5).unwrap();
        assert_eq!(z, Message::zeros(15));
    }

    #[test]
    fn round_trip_random_messages() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let m = Message::random(102, &mut rng);
            let seq = partition_message(&m, 6).unwrap();
            assert_eq!(assemble_message(&seq, 17).unwrap(), m);
        }
    }

    #[test]
    fn errors() {
        assert!(partition_message(&Message::zeros(10), 3).is_err());
        assert!(partition_message(&Message::zeros(10), 0).is_err());
        assert!(matches!(
            assemble_message(&ChunkIndexSeq::new(vec![4]), 2),
            Err(Error::IndexOutOfRange { index: 4, limit: 4 })
        ));
    }

    #[test]
    fn collision_report() {
        let seqs = vec![
            ChunkIndexSeq::new(vec![5, 1]),
            ChunkIndexSeq::new(vec![5, 2]),
            ChunkIndexSeq::new(vec![7, 3]),
        ];
        let s0 = slot_support(&seqs, 0);
        assert_eq!(s0.collisions, vec![5]);
        assert_eq!(s0.colliding_pairs, 1);
        let s1 = slot_support(&seqs, 1);
        assert!(s1.collisions.is_empty());
        assert_eq!(s1.indices, vec![1, 2, 3]);
    }

    #[test]
    fn collision_rate_follows_birthday_approximation() {
        let (ka, j, slots) = (100usize, 17u32, 10_000usize);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut hit = 0usize;
        for _ in 0..slots {
            let idx: Vec<usize> = (0..ka).map(|_| rng.random_range(0..1usize << j)).collect();
            if !collisions_among(idx).collisions.is_empty() {
                hit += 1;
            }
        }
        let empirical = hit as f64 / slots as f64;
        let pairs = (ka * (ka - 1) / 2) as f64;
        let approx = 1.0 - (-pairs / (1u64 << j) as f64).exp();
        assert!((empirical - approx).abs() / approx < 0.2, "{empirical} vs {approx}");
    }

    proptest::proptest! {
        #[test]
        fn partition_assemble_bijection(
            raw in proptest::collection::vec(proptest::bool::ANY, 1..8usize)
                .prop_flat_map(|chunk| proptest::collection::vec(proptest::bool::ANY, chunk.len() * 5))
        ) {
            let m = Message::new(raw);
            let seq = partition_message(&m, 5).unwrap();
            let j = (m.len() / 5) as u32;
            proptest::prop_assert_eq!(assemble_message(&seq, j).unwrap(), m);
        }
    }
}
