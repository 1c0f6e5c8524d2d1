//! Deterministic RNG derivation. Every stochastic component draws from a
//! ChaCha stream derived from (master seed, domain, index) so results are
//! reproducible and independent of evaluation order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stochastic domains that need independent streams.
#[derive(Debug, Clone, Copy)]
pub enum Domain {
    SimTrial,
    Surrogate,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::SimTrial => 0x7472_69616c,
            Domain::Surrogate => 0x7375_7272,
        }
    }
}

/// RNG for stream `index` of `domain` under `master`.
pub fn derive_rng(master: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ domain.tag().rotate_left(17));
    rng.set_stream(index.wrapping_add(1));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_stable_and_distinct() {
        let a1: Vec<u64> = (0..4).map(|_| derive_rng(7, Domain::SimTrial, 0).next_u64()).collect();
        assert!(a1.iter().all(|&v| v == a1[0]));
        let b = derive_rng(7, Domain::SimTrial, 1).next_u64();
        let c = derive_rng(7, Domain::Surrogate, 0).next_u64();
        assert_ne!(a1[0], b);
        assert_ne!(a1[0], c);
    }
}
