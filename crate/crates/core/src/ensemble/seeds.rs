//! Per-realization seeds derived from the master seed.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(master + GOLDEN·(index + 1))`, stable across platforms.
pub fn realization_seed(master: u64, index: usize) -> u64 {
    splitmix64(master.wrapping_add(GOLDEN.wrapping_mul(index as u64 + 1)))
}
