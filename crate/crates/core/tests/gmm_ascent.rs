//! EM ascent and separated-cluster behaviour of the mixture fit.

mod common;

use common::{random_mixture, separated_pair, worst_relative_drop, worst_separated_membership};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ura::clustering::{gmm_em, GmmConfig};

#[test]
fn objective_never_decreases_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut plain_drops = 0;
    for inst in 0..100 {
        let (points, k) = random_mixture(&mut rng);
        let model = gmm_em(&points, k, &GmmConfig::default(), &mut rng).unwrap();
        assert!(worst_relative_drop(&model.objective) <= 1e-9, "instance {inst}");
        plain_drops += usize::from(worst_relative_drop(&model.log_likelihood) > 1e-9);
    }
    println!("instances where the unpenalized log-likelihood drops: {plain_drops}");
}

#[test]
fn separated_clusters_are_confident() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let points = separated_pair(&mut rng);
        let model = gmm_em(&points, 2, &GmmConfig::default(), &mut rng).unwrap();
        assert!(worst_separated_membership(&model.membership) >= 0.999);
    }
}
