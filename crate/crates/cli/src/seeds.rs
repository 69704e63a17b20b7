//! Per-stage seed derivation.
//!
//! Every random draw in the pipeline is seeded from the single config seed:
//! `derive_seed(seed, label) = splitmix64(seed ^ fnv1a64(label))`, with labels
//! `detect` for the EM random restarts and `fit/<TICKER>` for the perturbed
//! EGARCH restart of each index. Changing one label never moves another
//! stage's stream, and adding or reordering targets leaves existing fits alone.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(label: &str) -> u64 {
    label.bytes().fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, label: &str) -> u64 {
    splitmix64(base ^ fnv1a64(label))
}

pub fn detect_seed(base: u64) -> u64 {
    derive_seed(base, "detect")
}

pub fn fit_seed(base: u64, ticker: &str) -> u64 {
    derive_seed(base, &format!("fit/{ticker}"))
}
