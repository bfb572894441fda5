//! Inter-slot decorrelation from user speed and the resulting channel
//! drift over the slots of one message.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ura::channel::{draw_fading, evolve_channel, jakes_delta, kmh_to_ms};

fn main() {
    let (carrier, bandwidth, lag) = (2e9, 1e7, 1133.0);
    for kmh in [5.0, 30.0, 60.0, 120.0] {
        let d = jakes_delta(kmh_to_ms(kmh), carrier, bandwidth, lag);
        println!("{kmh:5.0} km/h -> delta {d:.3e}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let delta = jakes_delta(kmh_to_ms(120.0), carrier, bandwidth, lag);
    let first = draw_fading(1, 64, &mut rng);
    let mut h = first.clone();
    for l in 1..6 {
        h = evolve_channel(&h, delta, &mut rng);
        let (mut dot, mut a, mut b) = (0.0, 0.0, 0.0);
        for (x, y) in first[0].iter().zip(&h[0]) {
            dot += (x.conj() * y).re;
            a += x.norm_sqr();
            b += y.norm_sqr();
        }
        println!("slot {l}: correlation with slot 0 = {:.4}", dot / (a * b).sqrt());
    }
}
