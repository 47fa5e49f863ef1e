//! Seeded train/test split protocols.
//!
//! All shuffles run on an explicitly seeded ChaCha8 stream, so splits are
//! identical across runs and platforms. A master seed derives one seed per
//! repetition through SplitMix64.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::dataset::Dataset;
use crate::config::SplitKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitProtocol {
    pub kind: SplitKind,
    pub repetitions: usize,
    pub seed: u64,
    /// Training images per class for the k-per-class protocol.
    pub k: Option<usize>,
    /// Training groups for group-holdout; empty means one split per group.
    pub train_groups: Vec<usize>,
}

impl SplitProtocol {
    pub fn random_half(repetitions: usize, seed: u64) -> Self {
        SplitProtocol {
            kind: SplitKind::RandomHalf,
            repetitions,
            seed,
            k: None,
            train_groups: Vec::new(),
        }
    }

    pub fn k_per_class(k: usize, repetitions: usize, seed: u64) -> Self {
        SplitProtocol {
            kind: SplitKind::KPerClass,
            repetitions,
            seed,
            k: Some(k),
            train_groups: Vec::new(),
        }
    }

    pub fn group_holdout(train_groups: Vec<usize>) -> Self {
        SplitProtocol {
            kind: SplitKind::GroupHoldout,
            repetitions: 1,
            seed: 0,
            k: None,
            train_groups,
        }
    }

    pub fn from_config(cfg: &crate::config::PipelineConfig) -> Self {
        SplitProtocol {
            kind: cfg.protocol,
            repetitions: cfg.repetitions,
            seed: cfg.seed,
            k: cfg.k_per_class,
            train_groups: cfg.train_groups.clone(),
        }
    }
}

/// Sample indices of one train/test partition, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Fixed per-repetition seed derivation.
pub fn repetition_seed(master: u64, repetition: usize) -> u64 {
    splitmix64(master.wrapping_add((repetition as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds every train/test partition requested by the protocol.
pub fn make_splits(ds: &Dataset, proto: &SplitProtocol) -> Result<Vec<Split>> {
    if proto.repetitions == 0 {
        return Err(Error::InvalidParameter("repetitions must be >= 1".into()));
    }
    match proto.kind {
        SplitKind::RandomHalf => stratified_random(ds, proto, None),
        SplitKind::KPerClass => {
            let k = proto.k.ok_or_else(|| {
                Error::InvalidParameter("k-per-class protocol requires k".into())
            })?;
            stratified_random(ds, proto, Some(k))
        }
        SplitKind::GroupHoldout => group_holdout(ds, proto),
    }
}

fn class_indices(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut per_class = vec![Vec::new(); ds.n_classes()];
    for (idx, sample) in ds.samples.iter().enumerate() {
        per_class[sample.class_id].push(idx);
    }
    per_class
}

fn stratified_random(
    ds: &Dataset,
    proto: &SplitProtocol,
    k: Option<usize>,
) -> Result<Vec<Split>> {
    let per_class = class_indices(ds);
    for (class_id, members) in per_class.iter().enumerate() {
        let needed = match k {
            Some(k) => {
                if k > members.len() {
                    return Err(Error::InvalidParameter(format!(
                        "k = {k} exceeds class '{}' size {}",
                        ds.class_names[class_id],
                        members.len()
                    )));
                }
                k
            }
            // Random-half needs at least one sample on each side.
            None => {
                if members.len() < 2 {
                    return Err(Error::InsufficientData(format!(
                        "class '{}' has {} sample(s); random-half needs at least 2",
                        ds.class_names[class_id],
                        members.len()
                    )));
                }
                members.len() / 2
            }
        };
        let _ = needed;
    }

    let mut splits = Vec::with_capacity(proto.repetitions);
    for rep in 0..proto.repetitions {
        let mut rng = ChaCha8Rng::seed_from_u64(repetition_seed(proto.seed, rep));
        let mut train = Vec::new();
        let mut test = Vec::new();
        for members in &per_class {
            let mut shuffled = members.clone();
            shuffled.shuffle(&mut rng);
            let n_train = k.unwrap_or(members.len() / 2);
            train.extend_from_slice(&shuffled[..n_train]);
            test.extend_from_slice(&shuffled[n_train..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        splits.push(Split { train, test });
    }
    Ok(splits)
}

fn group_holdout(ds: &Dataset, proto: &SplitProtocol) -> Result<Vec<Split>> {
    if ds.samples.iter().any(|s| s.group_id.is_none()) {
        return Err(Error::Dataset(
            "group-holdout protocol requires a dataset with sample groups".into(),
        ));
    }
    let mut groups: Vec<usize> = ds.samples.iter().filter_map(|s| s.group_id).collect();
    groups.sort_unstable();
    groups.dedup();

    let train_group_sets: Vec<Vec<usize>> = if proto.train_groups.is_empty() {
        // One repetition per group, each group once as the training sample.
        groups.iter().map(|&g| vec![g]).collect()
    } else {
        for &g in &proto.train_groups {
            if !groups.contains(&g) {
                return Err(Error::InvalidParameter(format!(
                    "train group {g} not present (groups: {groups:?})"
                )));
            }
        }
        vec![proto.train_groups.clone()]
    };

    Ok(train_group_sets
        .into_iter()
        .map(|train_groups| {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (idx, sample) in ds.samples.iter().enumerate() {
                if train_groups.contains(&sample.group_id.expect("checked above")) {
                    train.push(idx);
                } else {
                    test.push(idx);
                }
            }
            Split { train, test }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::dataset::{DatasetLayout, Sample};
    use std::path::PathBuf;

    /// In-memory dataset shape; file contents never touched by the splitter.
    fn synthetic_dataset(
        classes: usize,
        per_class: usize,
        groups: Option<usize>,
    ) -> Dataset {
        let mut samples = Vec::new();
        for class_id in 0..classes {
            for n in 0..per_class {
                samples.push(Sample {
                    path: PathBuf::from(format!("c{class_id}/im{n}.pgm")),
                    class_id,
                    group_id: groups.map(|g| n % g),
                });
            }
        }
        Dataset {
            name: "synthetic".into(),
            root: PathBuf::from("synthetic"),
            layout: DatasetLayout::ClassDirs,
            samples,
            class_names: (0..classes).map(|c| format!("c{c}")).collect(),
            group_names: groups
                .map(|g| (0..g).map(|i| format!("g{i}")).collect())
                .unwrap_or_default(),
        }
    }

    #[test]
    fn random_half_is_stratified_and_disjoint() {
        let ds = synthetic_dataset(25, 40, None);
        let splits = make_splits(&ds, &SplitProtocol::random_half(10, 7)).unwrap();
        assert_eq!(splits.len(), 10);
        for split in &splits {
            assert_eq!(split.train.len(), 500);
            assert_eq!(split.test.len(), 500);
            for class in 0..25 {
                let in_train = split
                    .train
                    .iter()
                    .filter(|&&i| ds.samples[i].class_id == class)
                    .count();
                assert_eq!(in_train, 20);
            }
            let mut all: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
            all.sort_unstable();
            all.dedup();
            assert_eq!(all.len(), 1000);
        }
    }

    #[test]
    fn odd_class_sizes_put_the_extra_sample_in_test() {
        let ds = synthetic_dataset(3, 7, None);
        let splits = make_splits(&ds, &SplitProtocol::random_half(1, 3)).unwrap();
        assert_eq!(splits[0].train.len(), 9);
        assert_eq!(splits[0].test.len(), 12);
    }

    #[test]
    fn same_seed_reproduces_splits_and_different_seeds_differ() {
        let ds = synthetic_dataset(5, 10, None);
        let a = make_splits(&ds, &SplitProtocol::random_half(5, 11)).unwrap();
        let b = make_splits(&ds, &SplitProtocol::random_half(5, 11)).unwrap();
        assert_eq!(a, b);
        let c = make_splits(&ds, &SplitProtocol::random_half(5, 12)).unwrap();
        assert_ne!(a, c);
        // Repetitions differ from each other.
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn k_per_class_counts() {
        let ds = synthetic_dataset(4, 10, None);
        for k in [5, 10] {
            let splits = make_splits(&ds, &SplitProtocol::k_per_class(k, 3, 1)).unwrap();
            for split in &splits {
                assert_eq!(split.train.len(), 4 * k);
                assert_eq!(split.test.len(), 4 * (10 - k));
            }
        }
        assert!(make_splits(&ds, &SplitProtocol::k_per_class(11, 1, 1)).is_err());
    }

    #[test]
    fn group_holdout_counts_match_the_kth_shape() {
        // 11 classes x 4 groups x 108 images = 4752 samples.
        let ds = synthetic_dataset(11, 432, Some(4));
        assert_eq!(ds.samples.len(), 4752);
        let splits = make_splits(&ds, &SplitProtocol::group_holdout(vec![0])).unwrap();
        assert_eq!(splits.len(), 1);
        assert_eq!(splits[0].train.len(), 1188);
        assert_eq!(splits[0].test.len(), 3564);
    }

    #[test]
    fn group_holdout_enumerates_groups_when_unspecified() {
        let ds = synthetic_dataset(3, 8, Some(4));
        let splits = make_splits(&ds, &SplitProtocol::group_holdout(Vec::new())).unwrap();
        assert_eq!(splits.len(), 4);
        for (g, split) in splits.iter().enumerate() {
            assert!(split
                .train
                .iter()
                .all(|&i| ds.samples[i].group_id == Some(g)));
            assert_eq!(split.train.len(), 6);
            assert_eq!(split.test.len(), 18);
        }
    }

    #[test]
    fn group_holdout_requires_groups() {
        let ds = synthetic_dataset(3, 8, None);
        assert!(make_splits(&ds, &SplitProtocol::group_holdout(vec![0])).is_err());
        let ds = synthetic_dataset(3, 8, Some(2));
        assert!(make_splits(&ds, &SplitProtocol::group_holdout(vec![5])).is_err());
    }
}
