//! Monte-Carlo trials and sweeps.
//!
//! A trial draws `Ka` random messages, places the users, sends every slot
//! through the fading MAC, decodes each slot with HyGAMP, stitches the
//! slots by clustering and counts the transmitted messages that are
//! missing from the decoded list. Trial `i` uses its own ChaCha8 stream
//! seeded with `master_seed ^ i`, so results do not depend on scheduling.

pub mod config;
pub mod probe;
pub mod sweep;
pub mod trial;

pub use config::{
    dbm_to_watts, watts_to_dbm, BlocklengthSpec, LargeScaleSpec, MobilitySpec, Pathloss, PowerSpec,
    Scenario, SimConfig,
};
pub use probe::{collision_probe, expected_colliding_pairs, union_bound_term, CollisionStats};
pub use sweep::{
    aggregate, run_trials, sweep, sweep_configs, write_csv, write_ndjson_line, SweepGrid, SweepRow,
    TrialRecord, CSV_HEADER,
};
pub use trial::{compute_pe, trial_rng, Experiment, StageTimings, TrialData, TrialResult};
