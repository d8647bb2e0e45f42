//! Per-cell seeds.
//!
//! A cell is `(plan seed, case, method, n, replicate)`. Its seed folds each
//! field into a splitmix64 state: integers directly, strings through 64-bit
//! FNV-1a. Cells are therefore independent of each other and of execution
//! order, and any single cell can be re-run on its own.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xCBF2_9CE4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3))
}

pub fn cell_seed(seed: u64, case: &str, method: &str, n: usize, replicate: usize) -> u64 {
    [fnv1a(case), fnv1a(method), n as u64, replicate as u64]
        .into_iter()
        .fold(splitmix64(seed), |h, v| splitmix64(h ^ v))
}

/// Seed of the dataset shared by every method in an `(n, replicate)` cell.
pub fn data_seed(seed: u64, case: &str, n: usize, replicate: usize) -> u64 {
    cell_seed(seed, case, "data", n, replicate)
}
