//! Stratified train/test splits and folds.

use gazeforge_core::domain::{rng_stream, stream_id, EmotionLabel, StreamDomain, NUM_EMOTIONS};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Stream index reserved for splitting within the pipeline domain.
const SPLIT_STREAM: u64 = (1 << 47) + 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn shuffled_classes(labels: &[EmotionLabel], seed: u64) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); NUM_EMOTIONS];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.ordinal()].push(i);
    }
    let mut rng = rng_stream(seed, stream_id(StreamDomain::Pipeline, SPLIT_STREAM));
    for c in &mut by_class {
        c.shuffle(&mut rng);
    }
    by_class
}

/// Each class contributes `round(n_c * fraction)` training samples; indices
/// come back sorted.
pub fn stratified_split(labels: &[EmotionLabel], fraction: f64, seed: u64) -> Split {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in shuffled_classes(labels, seed) {
        let n_train = ((c.len() as f64) * fraction).round() as usize;
        train.extend_from_slice(&c[..n_train.min(c.len())]);
        test.extend_from_slice(&c[n_train.min(c.len())..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}

/// `k` stratified folds; fold `f` is the test set of split `f`.
pub fn stratified_folds(labels: &[EmotionLabel], k: usize, seed: u64) -> Vec<Split> {
    let mut fold_of = vec![0usize; labels.len()];
    let mut offset = 0;
    for c in shuffled_classes(labels, seed) {
        for (j, &i) in c.iter().enumerate() {
            fold_of[i] = (offset + j) % k;
        }
        // continue the round robin so small classes do not all start at fold 0
        offset += c.len();
    }
    (0..k)
        .map(|f| Split {
            train: (0..labels.len()).filter(|&i| fold_of[i] != f).collect(),
            test: (0..labels.len()).filter(|&i| fold_of[i] == f).collect(),
        })
        .collect()
}
