//! Reference implementations written for clarity rather than speed. They
//! share no code with the tracker and work on plain numbers.

pub mod eigen;
pub mod filter;
pub mod moments;

pub use eigen::{bisection_eigenvalues, nalgebra_eigen};
pub use filter::{NaiveFilter, NaiveFilterParams};
pub use moments::batch_moments;

/// Longest run of occupied bins, measured in bins from first to last, where
/// consecutive occupied bins are at most two apart. Tries every pair.
pub fn brute_force_bin_chain(bins: &[i64]) -> usize {
    let occupied: std::collections::BTreeSet<i64> = bins.iter().copied().collect();
    let mut best = 0;
    for &a in &occupied {
        for &b in occupied.range(a..) {
            let gap_free = (a..b).all(|k| occupied.contains(&k) || occupied.contains(&(k + 1)));
            if gap_free {
                best = best.max((b - a + 1) as usize);
            }
        }
    }
    best
}
