use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` in an ensemble; independent of scheduling.
pub fn trajectory_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn trajectory_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn seeds_are_distinct_and_stable() {
        let seeds: BTreeSet<u64> = (0..10_000).map(|i| trajectory_seed(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_eq!(trajectory_seed(42, 7), trajectory_seed(42, 7));
        assert_ne!(trajectory_seed(42, 7), trajectory_seed(43, 7));
    }
}
