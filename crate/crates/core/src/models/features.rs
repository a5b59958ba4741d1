//! Shared input encodings for the sequence models.

use crate::dataset::ObservedSequence;

/// Per-step infection arrivals including the seeds at step 0 (the node lists
/// carry the seeds there; `new_counts[0]` itself is zero by convention).
pub fn step_counts(observed: &ObservedSequence) -> Vec<u32> {
    observed
        .infected_nodes_per_step
        .iter()
        .map(|nodes| nodes.len() as u32)
        .collect()
}

/// Log-banded count token with a 32-entry vocabulary: counts up to 15 are
/// their own token, larger counts fall into doubling bands.
pub fn count_token(count: u32) -> usize {
    if count <= 15 {
        count as usize
    } else {
        let band = (count / 16).ilog2() as usize;
        (16 + band).min(31)
    }
}

pub const COUNT_VOCAB: usize = 32;

pub fn tokenize(observed: &ObservedSequence) -> Vec<usize> {
    step_counts(observed).iter().map(|&c| count_token(c)).collect()
}
