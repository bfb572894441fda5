//! One full trial: encode, fade, decode every slot, cluster and stitch.
//! Takes an optional config path; defaults to the planted small case.

use ura::harness::{Experiment, SimConfig};

fn main() -> ura::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/planted.json").into());
    let text = std::fs::read_to_string(&path).map_err(|e| ura::Error::Io(e.to_string()))?;
    let exp = Experiment::new(SimConfig::from_json(&text)?)?;
    println!("{:?}", exp.scenario);
    for id in 0..exp.config.trials.min(3) as u64 {
        let r = exp.run_trial(id)?;
        println!(
            "trial {id}: pe {:.3}, support recovery {:?}, iterations {:?}, {:.2} s",
            r.pe, r.support_recovery, r.hygamp_iterations, r.timings.total_s
        );
    }
    Ok(())
}
