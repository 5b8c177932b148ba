use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;

use super::samples::TrajectorySample;
use crate::diffcore::rng::stream;
use crate::error::{Error, Result};

/// Distinct source ids in order of first appearance.
pub fn source_ids(samples: &[TrajectorySample]) -> Vec<i64> {
    let mut seen = BTreeSet::new();
    samples.iter().map(|s| s.source_id).filter(|id| seen.insert(*id)).collect()
}

/// Seeded shuffle of the distinct pedestrian ids.
pub(crate) fn shuffled_ids(samples: &[TrajectorySample], seed: u64, label: u64) -> Vec<i64> {
    let mut ids: Vec<i64> = source_ids(samples);
    ids.sort_unstable();
    ids.shuffle(&mut stream(seed, &[label]));
    ids
}

/// Split windows into (train, test) so that every pedestrian lands on one side.
///
/// Ids are shuffled under `seed` and assigned to train until the train side holds at
/// least `train_fraction` of all windows. Input order is kept within each side.
pub fn split_dataset(
    samples: &[TrajectorySample],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<TrajectorySample>, Vec<TrajectorySample>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Parameter(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for s in samples {
        *counts.entry(s.source_id).or_default() += 1;
    }
    let target = train_fraction * samples.len() as f64;
    let mut train_ids = BTreeSet::new();
    let mut filled = 0usize;
    for id in shuffled_ids(samples, seed, 0x5911) {
        if filled as f64 >= target {
            break;
        }
        filled += counts[&id];
        train_ids.insert(id);
    }
    Ok(samples.iter().cloned().partition(|s| train_ids.contains(&s.source_id)))
}
