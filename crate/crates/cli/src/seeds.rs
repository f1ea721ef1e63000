//! Named random sub-streams derived from the master seed.

use lcswitch_core::qjump::trajectory_seed;

/// FNV-1a hash of a stream name.
fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of the stream `name`, e.g. `simulate/aleph=3`.
pub fn substream(master: u64, name: &str) -> u64 {
    trajectory_seed(master, name_hash(name))
}

pub fn simulation(master: u64, aleph: f64) -> u64 {
    substream(master, &format!("simulate/aleph={aleph}"))
}

pub fn kmeans(master: u64, aleph: f64) -> u64 {
    substream(master, &format!("kmeans/aleph={aleph}"))
}

pub fn bootstrap(master: u64, aleph: f64, direction: &str) -> u64 {
    substream(master, &format!("bootstrap/aleph={aleph}/{direction}"))
}
