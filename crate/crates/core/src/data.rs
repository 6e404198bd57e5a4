//! Synthetic datasets and retain/forget splitting.
//!
//! Blobs datasets place class means on an exact geometric layout (a
//! line for one feature, a circle otherwise) so that the minimum
//! inter-mean distance equals the requested separation instead of being
//! a random byproduct. Samples are unit-variance Gaussian around their
//! mean, drawn from a seeded generator, so a dataset's provenance is
//! sufficient to regenerate it bit-exactly.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, CoreError, Result};
use crate::problem::LabeledBatch;

/// How a dataset came to be; enough detail to rebuild it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Provenance {
    /// Generated by [`gen_blobs`] with these exact arguments.
    Blobs {
        seed: u64,
        class_count: usize,
        samples_per_class: usize,
        feature_dim: usize,
        separation: f64,
    },
    /// Loaded or constructed externally.
    External { label: String },
    /// A subset of another dataset, with the selection rule spelled out.
    Subset {
        source: Box<Provenance>,
        rule: String,
    },
}

/// An immutable labeled dataset, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    labels: Vec<usize>,
    class_count: usize,
    feature_dim: usize,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        inputs: Vec<f64>,
        labels: Vec<usize>,
        class_count: usize,
        feature_dim: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if class_count == 0 || feature_dim == 0 {
            return Err(invalid("class_count and feature_dim must be positive"));
        }
        if labels.is_empty() {
            return Err(invalid("dataset must be non-empty"));
        }
        if inputs.len() != labels.len() * feature_dim {
            return Err(CoreError::DimensionMismatch {
                expected: labels.len() * feature_dim,
                got: inputs.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(invalid(alloc::format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        if let Some(i) = inputs.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NumericalFailure {
                context: "dataset construction",
                coordinate: Some(i),
            });
        }
        Ok(Self {
            inputs,
            labels,
            class_count,
            feature_dim,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    /// Copies the given rows into a batch, in the given order.
    pub fn batch(&self, indices: &[usize]) -> Result<LabeledBatch> {
        if indices.is_empty() {
            return Err(invalid("batch must be non-empty"));
        }
        let mut inputs = Vec::with_capacity(indices.len() * self.feature_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(invalid(alloc::format!("row index {i} out of range")));
            }
            inputs.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        LabeledBatch::new(inputs, labels, self.feature_dim)
    }

    /// The whole dataset as one batch, in source order.
    pub fn full_batch(&self) -> Result<LabeledBatch> {
        let indices: Vec<usize> = (0..self.len()).collect();
        self.batch(&indices)
    }

    /// A materialized subset preserving the order of `indices`.
    pub fn subset(&self, indices: &[usize], rule: &str) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(invalid("subset must be non-empty"));
        }
        let mut inputs = Vec::with_capacity(indices.len() * self.feature_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(invalid(alloc::format!("row index {i} out of range")));
            }
            inputs.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(
            inputs,
            labels,
            self.class_count,
            self.feature_dim,
            Provenance::Subset {
                source: Box::new(self.provenance.clone()),
                rule: rule.to_owned(),
            },
        )
    }
}

/// Which splitting protocol produced an [`UnlearnSplit`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SplitMode {
    /// Forget every sample of the target classes.
    ClassWise { target_classes: Vec<usize> },
    /// Forget a uniformly random fraction of all samples.
    Random { fraction: f64, seed: u64 },
}

/// Disjoint retain/forget datasets covering a source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlearnSplit {
    pub retain: Dataset,
    pub forget: Dataset,
    pub mode: SplitMode,
    /// Source-dataset row indices of the retain side, ascending.
    pub retain_indices: Vec<usize>,
    /// Source-dataset row indices of the forget side, ascending.
    pub forget_indices: Vec<usize>,
}

/// Gaussian blob classification data with exact mean separation.
///
/// Means sit on a line (one feature) or a circle embedded in the first
/// two coordinates (otherwise), scaled so the minimum pairwise mean
/// distance equals `separation`. Samples add unit-variance Gaussian
/// noise per coordinate. Identical arguments give identical datasets.
pub fn gen_blobs(
    seed: u64,
    class_count: usize,
    samples_per_class: usize,
    feature_dim: usize,
    separation: f64,
) -> Result<Dataset> {
    if class_count == 0 || samples_per_class == 0 || feature_dim == 0 {
        return Err(invalid("counts must be at least 1"));
    }
    if !(separation > 0.0) {
        return Err(invalid("separation must be positive"));
    }
    let means = class_means(class_count, feature_dim, separation);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(class_count * samples_per_class * feature_dim);
    let mut labels = Vec::with_capacity(class_count * samples_per_class);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..samples_per_class {
            for &m in mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                inputs.push(m + z);
            }
            labels.push(c);
        }
    }
    Dataset::new(
        inputs,
        labels,
        class_count,
        feature_dim,
        Provenance::Blobs {
            seed,
            class_count,
            samples_per_class,
            feature_dim,
            separation,
        },
    )
}

/// Class-mean layout used by [`gen_blobs`]; exposed so fixtures can
/// reason about geometry.
pub fn class_means(class_count: usize, feature_dim: usize, separation: f64) -> Vec<Vec<f64>> {
    use alloc::vec;
    let mut means = vec![vec![0.0; feature_dim]; class_count];
    if class_count == 1 {
        return means;
    }
    if feature_dim == 1 {
        for (c, m) in means.iter_mut().enumerate() {
            m[0] = c as f64 * separation;
        }
    } else {
        // Minimum chord of k evenly spaced points on a circle of
        // radius r is 2r·sin(π/k); solve for r.
        let k = class_count as f64;
        let r = separation / (2.0 * (core::f64::consts::PI / k).sin());
        for (c, m) in means.iter_mut().enumerate() {
            let angle = 2.0 * core::f64::consts::PI * c as f64 / k;
            m[0] = r * angle.cos();
            m[1] = r * angle.sin();
        }
    }
    means
}

/// Splits off every sample whose label is in `target_classes`.
///
/// Both sides preserve source order. The target set must be a
/// non-empty proper subset of the dataset's classes.
pub fn split_classwise(data: &Dataset, target_classes: &[usize]) -> Result<UnlearnSplit> {
    if target_classes.is_empty() {
        return Err(invalid("target class set must be non-empty"));
    }
    let mut targets: Vec<usize> = target_classes.to_vec();
    targets.sort_unstable();
    targets.dedup();
    if let Some(&bad) = targets.iter().find(|&&c| c >= data.class_count()) {
        return Err(invalid(alloc::format!("target class {bad} out of range")));
    }
    if targets.len() >= data.class_count() {
        return Err(invalid("target classes must be a proper subset"));
    }
    let mut forget_indices = Vec::new();
    let mut retain_indices = Vec::new();
    for i in 0..data.len() {
        if targets.binary_search(&data.label(i)).is_ok() {
            forget_indices.push(i);
        } else {
            retain_indices.push(i);
        }
    }
    if forget_indices.is_empty() || retain_indices.is_empty() {
        return Err(invalid(
            "split is degenerate: one side would be empty for this dataset",
        ));
    }
    let rule_f = alloc::format!("class-wise forget: classes {targets:?}");
    let rule_r = alloc::format!("class-wise retain: complement of {targets:?}");
    Ok(UnlearnSplit {
        retain: data.subset(&retain_indices, &rule_r)?,
        forget: data.subset(&forget_indices, &rule_f)?,
        mode: SplitMode::ClassWise {
            target_classes: targets,
        },
        retain_indices,
        forget_indices,
    })
}

/// Splits off `round(fraction·len)` uniformly random samples, without
/// replacement, deterministically in `seed`.
pub fn split_random(data: &Dataset, fraction: f64, seed: u64) -> Result<UnlearnSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(invalid("fraction must lie strictly between 0 and 1"));
    }
    let n = data.len();
    let m = (fraction * n as f64).round() as usize;
    if m == 0 || m == n {
        return Err(invalid(alloc::format!(
            "fraction {fraction} selects {m} of {n} samples; both sides must be non-empty"
        )));
    }
    // Partial Fisher-Yates: the first m positions end up holding a
    // uniform without-replacement sample.
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..m {
        let j = i + rand::Rng::random_range(&mut rng, 0..(n - i));
        order.swap(i, j);
    }
    let mut forget_indices: Vec<usize> = order[..m].to_vec();
    forget_indices.sort_unstable();
    let mut retain_indices = Vec::with_capacity(n - m);
    let mut next_forget = forget_indices.iter().peekable();
    for i in 0..n {
        match next_forget.peek() {
            Some(&&f) if f == i => {
                next_forget.next();
            }
            _ => retain_indices.push(i),
        }
    }
    let rule_f = alloc::format!("random forget: fraction {fraction}, seed {seed}");
    let rule_r = alloc::format!("random retain: complement, fraction {fraction}, seed {seed}");
    Ok(UnlearnSplit {
        retain: data.subset(&retain_indices, &rule_r)?,
        forget: data.subset(&forget_indices, &rule_f)?,
        mode: SplitMode::Random { fraction, seed },
        retain_indices,
        forget_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_counts_and_determinism() {
        let a = gen_blobs(3, 4, 5, 2, 6.0).unwrap();
        assert_eq!(a.len(), 20);
        let b = gen_blobs(3, 4, 5, 2, 6.0).unwrap();
        assert_eq!(a, b);
        let c = gen_blobs(4, 4, 5, 2, 6.0).unwrap();
        assert_ne!(a.inputs(), c.inputs());
    }

    #[test]
    fn mean_layout_separation_is_exact() {
        for (k, d) in [(2usize, 2usize), (5, 2), (10, 3), (3, 1)] {
            let means = class_means(k, d, 7.5);
            let mut min_dist = f64::INFINITY;
            for i in 0..k {
                for j in 0..i {
                    let dist: f64 = means[i]
                        .iter()
                        .zip(&means[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    min_dist = min_dist.min(dist);
                }
            }
            assert!(
                (min_dist - 7.5).abs() < 1e-9,
                "k={k}, d={d}: min distance {min_dist}"
            );
        }
    }

    #[test]
    fn classwise_split_partitions_by_label() {
        let data = gen_blobs(0, 10, 6, 2, 5.0).unwrap();
        let split = split_classwise(&data, &[0, 1]).unwrap();
        assert_eq!(split.forget.len(), data.len() / 5);
        // exhaustive membership scan
        for i in 0..split.forget.len() {
            assert!(split.forget.label(i) <= 1);
        }
        for i in 0..split.retain.len() {
            assert!(split.retain.label(i) > 1);
        }
        let mut all: Vec<usize> = split
            .retain_indices
            .iter()
            .chain(&split.forget_indices)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..data.len()).collect::<Vec<_>>());
    }

    #[test]
    fn classwise_split_rejects_degenerate_targets() {
        let data = gen_blobs(0, 3, 4, 2, 5.0).unwrap();
        assert!(split_classwise(&data, &[]).is_err());
        assert!(split_classwise(&data, &[0, 1, 2]).is_err());
        assert!(split_classwise(&data, &[7]).is_err());
    }

    #[test]
    fn random_split_sizes_and_determinism() {
        let data = gen_blobs(1, 10, 100, 2, 5.0).unwrap();
        let split = split_random(&data, 0.1, 9).unwrap();
        assert_eq!(split.forget.len(), 100);
        assert_eq!(split.retain.len(), 900);
        let again = split_random(&data, 0.1, 9).unwrap();
        assert_eq!(split.forget_indices, again.forget_indices);
        // union and disjointness by index scan
        let mut all: Vec<usize> = split
            .retain_indices
            .iter()
            .chain(&split.forget_indices)
            .copied()
            .collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), data.len());
    }

    #[test]
    fn random_split_rejects_empty_sides() {
        let data = gen_blobs(1, 2, 2, 2, 5.0).unwrap();
        assert!(split_random(&data, 0.01, 0).is_err()); // rounds to zero
        assert!(split_random(&data, 0.999, 0).is_err()); // rounds to all
        assert!(split_random(&data, 0.0, 0).is_err());
        assert!(split_random(&data, 1.0, 0).is_err());
    }

    #[test]
    fn provenance_regenerates_bit_exactly() {
        let data = gen_blobs(11, 3, 7, 4, 2.0).unwrap();
        if let Provenance::Blobs {
            seed,
            class_count,
            samples_per_class,
            feature_dim,
            separation,
        } = *data.provenance()
        {
            let again =
                gen_blobs(seed, class_count, samples_per_class, feature_dim, separation).unwrap();
            assert_eq!(data, again);
        } else {
            panic!("wrong provenance");
        }
    }
}
