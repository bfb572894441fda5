use std::collections::HashSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{LargeScaleSpec, Scenario, SimConfig};
use crate::channel::{apply_mac, SlotObservation, UserChannelSet};
use crate::clustering::cluster_and_stitch;
use crate::codebook::{Codebook, CodebookConfig};
use crate::encoder::{partition_message, slot_support, ChunkIndexSeq, Message};
use crate::hygamp::{run_hygamp, HyGampConfig};
use crate::Result;

/// Fraction of transmitted messages absent from the decoded list; each
/// transmitted copy counts separately. `NaN` when nothing was sent.
pub fn compute_pe(transmitted: &[Message], decoded: &[Message]) -> f64 {
    if transmitted.is_empty() {
        return f64::NAN;
    }
    let found: HashSet<&Message> = decoded.iter().collect();
    let missed = transmitted.iter().filter(|m| !found.contains(m)).count();
    missed as f64 / transmitted.len() as f64
}

/// RNG of one trial: ChaCha8 seeded with `master_seed ^ trial_id`.
pub fn trial_rng(master_seed: u64, trial_id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(master_seed ^ trial_id)
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub simulate_s: f64,
    pub hygamp_s: f64,
    pub clustering_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_id: u64,
    pub pe: f64,
    /// Transmitted messages not recovered.
    pub errors: usize,
    /// Per slot, the fraction of distinct transmitted indices among the decodes.
    pub support_recovery: Vec<f64>,
    /// Colliding user pairs summed over slots.
    pub collisions: usize,
    pub hygamp_converged: Vec<bool>,
    pub hygamp_iterations: Vec<usize>,
    pub clustering_llf: f64,
    pub timings: StageTimings,
}

impl PartialEq for TrialResult {
    /// Timings are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.trial_id == other.trial_id
            && self.pe.to_bits() == other.pe.to_bits()
            && self.errors == other.errors
            && self.support_recovery == other.support_recovery
            && self.collisions == other.collisions
            && self.hygamp_converged == other.hygamp_converged
            && self.hygamp_iterations == other.hygamp_iterations
            && self.clustering_llf.to_bits() == other.clustering_llf.to_bits()
    }
}

/// Everything drawn for one trial before decoding.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub messages: Vec<Message>,
    pub sequences: Vec<ChunkIndexSeq>,
    pub channels: UserChannelSet,
    pub observations: Vec<SlotObservation>,
}

/// A configuration with its codebook, ready to run trials.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: SimConfig,
    pub scenario: Scenario,
    pub codebook: Codebook,
}

impl Experiment {
    pub fn new(config: SimConfig) -> Result<Self> {
        let scenario = config.resolve()?;
        let codebook = Codebook::build(CodebookConfig {
            max_bits: scenario.bits_per_slot.max(24),
            ..CodebookConfig::new(
                scenario.bits_per_slot,
                scenario.n0,
                scenario.pt_watts,
                scenario.codebook_seed,
            )
        })
        .map_err(|e| e.in_stage("codebook"))?;
        Ok(Experiment {
            config,
            scenario,
            codebook,
        })
    }

    /// Solver settings with the noise variance per real component.
    pub fn hygamp_config(&self) -> HyGampConfig {
        HyGampConfig {
            sigma_w2: self.scenario.noise_power / 2.0,
            ..self.config.hygamp
        }
    }

    /// Draws messages, channels and the received slots of one trial.
    pub fn simulate(&self, trial_id: u64, rng: &mut ChaCha8Rng) -> Result<TrialData> {
        let cfg = &self.config;
        let ka = cfg.active_users;
        let messages: Vec<Message> = (0..ka)
            .map(|_| Message::random(cfg.bits as usize, rng))
            .collect();
        let sequences = messages
            .iter()
            .map(|m| partition_message(m, cfg.slots))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("encoder"))?;
        let params = cfg.channel_params(&self.scenario);
        let channels = match cfg.large_scale {
            LargeScaleSpec::Unit => UserChannelSet::with_gains(
                vec![0.0; ka],
                vec![1.0; ka],
                cfg.antennas,
                self.scenario.delta,
                cfg.slots,
                rng,
            ),
            LargeScaleSpec::Pathloss(_) => UserChannelSet::draw(&params, ka, cfg.slots, rng)
                .map_err(|e| e.in_stage("channel"))?,
        };
        let mut observations = Vec::with_capacity(cfg.slots);
        for l in 0..cfg.slots {
            let indices: Vec<usize> = sequences.iter().map(|s| s.indices[l]).collect();
            let h: Vec<_> = (0..ka).map(|k| channels.effective(k, l)).collect();
            let obs = apply_mac(&self.codebook, &indices, &h, self.scenario.noise_power, rng)
                .map_err(|e| e.in_stage("channel"))?;
            observations.push(obs);
        }
        log::debug!("trial {trial_id}: simulated {} slots", cfg.slots);
        Ok(TrialData {
            messages,
            sequences,
            channels,
            observations,
        })
    }

    /// Runs the full pipeline of trial `trial_id`.
    pub fn run_trial(&self, trial_id: u64) -> Result<TrialResult> {
        let start = Instant::now();
        let mut rng = trial_rng(self.config.master_seed, trial_id);
        let data = self.simulate(trial_id, &mut rng)?;
        let simulated = Instant::now();

        let ka = self.config.active_users;
        let hycfg = self.hygamp_config();
        let mut estimates = Vec::with_capacity(self.config.slots);
        let mut decoded = Vec::with_capacity(self.config.slots);
        let mut support_recovery = Vec::with_capacity(self.config.slots);
        let mut converged = Vec::with_capacity(self.config.slots);
        let mut iterations = Vec::with_capacity(self.config.slots);
        let mut collisions = 0;
        for (l, obs) in data.observations.iter().enumerate() {
            let est = run_hygamp(obs, &self.codebook, &hycfg, ka).map_err(|e| e.in_stage("hygamp"))?;
            let support = slot_support(&data.sequences, l);
            collisions += support.colliding_pairs;
            let truth: HashSet<usize> = support.indices.iter().copied().collect();
            let hit = est.decoded_indices.iter().filter(|j| truth.contains(j)).count();
            support_recovery.push(hit as f64 / truth.len() as f64);
            converged.push(est.converged);
            iterations.push(est.iterations);
            decoded.push(est.decoded_indices);
            estimates.push(est.channel_estimates);
        }
        let decoded_at = Instant::now();

        let outcome = cluster_and_stitch(
            &estimates,
            &decoded,
            self.scenario.bits_per_slot,
            &self.config.clustering,
            &mut rng,
        )
        .map_err(|e| e.in_stage("clustering"))?;
        let done = Instant::now();

        let pe = compute_pe(&data.messages, &outcome.messages);
        let errors = (pe * ka as f64).round() as usize;
        Ok(TrialResult {
            trial_id,
            pe,
            errors,
            support_recovery,
            collisions,
            hygamp_converged: converged,
            hygamp_iterations: iterations,
            clustering_llf: outcome.model.final_log_likelihood(),
            timings: StageTimings {
                simulate_s: (simulated - start).as_secs_f64(),
                hygamp_s: (decoded_at - simulated).as_secs_f64(),
                clustering_s: (done - decoded_at).as_secs_f64(),
                total_s: (done - start).as_secs_f64(),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(bits: &[u8]) -> Message {
        Message::new(bits.iter().map(|&b| b == 1).collect())
    }

    #[test]
    fn pe_accounting() {
        let a = msg(&[0, 0]);
        let b = msg(&[0, 1]);
        let c = msg(&[1, 0]);
        let d = msg(&[1, 1]);
        let sent = vec![a.clone(), b.clone(), c.clone(), d.clone()];
        assert_eq!(compute_pe(&sent, &[d.clone(), c.clone(), b.clone(), a.clone()]), 0.0);
        assert_eq!(compute_pe(&sent, &[a.clone(), b.clone(), c.clone(), a.clone()]), 0.25);
        // Two users with the same message both count as decoded.
        assert_eq!(compute_pe(&[a.clone(), a.clone()], &[a.clone(), b]), 0.0);
        assert!(compute_pe(&[], &[a]).is_nan());
    }
}
