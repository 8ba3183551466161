use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FadError, Result};

/// Assignment of every instance to one of `k` test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    /// `counts[fold][class]`.
    pub fn class_counts(&self, labels: &[usize], class_count: usize) -> Vec<Vec<usize>> {
        let mut counts = vec![vec![0; class_count]; self.k];
        for (&f, &y) in self.assignment.iter().zip(labels) {
            counts[f][y] += 1;
        }
        counts
    }
}

/// Seeded shuffle inside each class followed by round-robin assignment.
///
/// The round-robin position carries over from one class to the next so
/// overall fold sizes also stay within one of each other.
pub fn stratified_kfold(labels: &[usize], class_count: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    let mut sizes = vec![0usize; class_count];
    for &y in labels {
        if y >= class_count {
            return Err(FadError::Index(format!("label {y} beyond {class_count} classes")));
        }
        sizes[y] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(FadError::Config(format!("class {empty} has no instances")));
    }
    assign_folds(labels, class_count, k, seed)
}

/// Like [`stratified_kfold`] but tolerates classes without instances.
pub(crate) fn assign_folds(labels: &[usize], class_count: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(FadError::Config(format!("k = {k}; cross-validation needs at least 2 folds")));
    }
    if labels.len() < k {
        return Err(FadError::Config(format!("{} instances cannot fill {k} folds", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    let mut next = 0usize;
    for class in 0..class_count {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            log::warn!("class {class} has {} instances for {k} folds; some folds will lack it", members.len());
        }
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldPlan { k, assignment, seed })
}
