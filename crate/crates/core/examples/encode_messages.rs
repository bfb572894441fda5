//! Splits random messages into per-slot codeword indices and reassembles
//! them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ura::encoder::{assemble_message, partition_message, slot_support, Message};

fn main() -> ura::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (bits, slots) = (48, 4);
    let messages: Vec<Message> = (0..6).map(|_| Message::random(bits, &mut rng)).collect();
    let seqs = messages
        .iter()
        .map(|m| partition_message(m, slots))
        .collect::<ura::Result<Vec<_>>>()?;
    for (m, s) in messages.iter().zip(&seqs) {
        let back = assemble_message(s, (bits / slots) as u32)?;
        println!("indices {:?} round trip {}", s.indices, back == *m);
    }
    for l in 0..slots {
        let sup = slot_support(&seqs, l);
        println!("slot {l}: {} distinct indices, {} colliding pairs", sup.indices.len(), sup.colliding_pairs);
    }
    Ok(())
}
