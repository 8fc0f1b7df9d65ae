use crate::datamodel::{CorrespondenceSet, CorrespondenceSource, Keypoint};
use crate::error::{Error, Result};

/// Mutual nearest-neighbour matching under cosine distance.
///
/// Returns `(i, j)` pairs where `j` is the nearest descriptor to `a[i]` in `b`
/// and `i` is the nearest to `b[j]` in `a`. Ties resolve to the lowest index.
/// Zero-norm descriptors have similarity 0 to everything.
pub fn mutual_nn_pairs(a: &[Vec<f32>], b: &[Vec<f32>]) -> Result<Vec<(usize, usize)>> {
    if a.is_empty() || b.is_empty() {
        return Ok(Vec::new());
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|d| d.len() != dim) {
        return Err(Error::DimensionMismatch(
            "descriptor sets must share one dimension".into(),
        ));
    }
    let na = normalized(a);
    let nb = normalized(b);
    let m = b.len();
    let mut sim = vec![0.0f64; a.len() * m];
    for (i, da) in na.iter().enumerate() {
        for (j, db) in nb.iter().enumerate() {
            sim[i * m + j] = da.iter().zip(db).map(|(x, y)| x * y).sum();
        }
    }
    let best_in_b: Vec<usize> = (0..a.len())
        .map(|i| argmax((0..m).map(|j| sim[i * m + j])))
        .collect();
    let best_in_a: Vec<usize> = (0..m)
        .map(|j| argmax((0..a.len()).map(|i| sim[i * m + j])))
        .collect();
    Ok(best_in_b
        .iter()
        .enumerate()
        .filter(|&(i, &j)| best_in_a[j] == i)
        .map(|(i, &j)| (i, j))
        .collect())
}

/// Mutual-NN matches between two keypoint sets as pixel correspondences.
pub fn mutual_nn_matches(a: &[Keypoint], b: &[Keypoint]) -> Result<CorrespondenceSet> {
    let da: Vec<Vec<f32>> = a.iter().map(|k| k.descriptor.clone()).collect();
    let db: Vec<Vec<f32>> = b.iter().map(|k| k.descriptor.clone()).collect();
    let pairs = mutual_nn_pairs(&da, &db)?;
    Ok(CorrespondenceSet::new(
        pairs
            .into_iter()
            .map(|(i, j)| [a[i].x, a[i].y, b[j].x, b[j].y])
            .collect(),
        CorrespondenceSource::MutualNn,
    ))
}

fn normalized(set: &[Vec<f32>]) -> Vec<Vec<f64>> {
    set.iter()
        .map(|d| {
            let n = d.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
            if n == 0.0 {
                vec![0.0; d.len()]
            } else {
                d.iter().map(|&v| v as f64 / n).collect()
            }
        })
        .collect()
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (k, v) in values.enumerate() {
        if v > best_v {
            best_v = v;
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Reciprocal nearest neighbours by exhaustive search over cosine distance.
    fn oracle(a: &[Vec<f32>], b: &[Vec<f32>]) -> Vec<(usize, usize)> {
        let cos = |u: &[f32], v: &[f32]| {
            let dot: f64 = u.iter().zip(v).map(|(x, y)| *x as f64 * *y as f64).sum();
            let nu: f64 = u.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
            let nv: f64 = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
            1.0 - dot / (nu * nv)
        };
        let mut out = vec![];
        for i in 0..a.len() {
            let j = (0..b.len())
                .min_by(|&p, &q| cos(&a[i], &b[p]).partial_cmp(&cos(&a[i], &b[q])).unwrap())
                .unwrap();
            let back = (0..a.len())
                .min_by(|&p, &q| cos(&a[p], &b[j]).partial_cmp(&cos(&a[q], &b[j])).unwrap())
                .unwrap();
            if back == i {
                out.push((i, j));
            }
        }
        out
    }

    #[test]
    fn single_identical() {
        let a = vec![vec![0.2f32, 0.9]];
        assert_eq!(mutual_nn_pairs(&a, &a).unwrap(), vec![(0, 0)]);
    }

    #[test]
    fn swapped_basis() {
        let a = vec![vec![1.0f32, 0.0], vec![0.0, 1.0]];
        let b = vec![vec![0.0f32, 1.0], vec![1.0, 0.0]];
        assert_eq!(mutual_nn_pairs(&a, &b).unwrap(), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn empty_is_not_an_error() {
        let a: Vec<Vec<f32>> = vec![];
        let b = vec![vec![1.0f32]];
        assert!(mutual_nn_pairs(&a, &b).unwrap().is_empty());
        assert!(mutual_nn_pairs(&b, &a).unwrap().is_empty());
    }

    #[test]
    fn noisy_duplicates_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<Vec<f32>> = (0..50)
            .map(|_| (0..32).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
            .collect();
        let b: Vec<Vec<f32>> = a
            .iter()
            .map(|d| d.iter().map(|v| v + rng.gen_range(-1e-3f32..1e-3)).collect())
            .collect();
        let got = mutual_nn_pairs(&a, &b).unwrap();
        assert_eq!(got.len(), 50);
        assert_eq!(got, oracle(&a, &b));
    }

    proptest! {
        #[test]
        fn output_is_partial_matching(
            a in proptest::collection::vec(proptest::collection::vec(-1.0f32..1.0, 4), 0..15),
            b in proptest::collection::vec(proptest::collection::vec(-1.0f32..1.0, 4), 0..15),
        ) {
            let pairs = mutual_nn_pairs(&a, &b).unwrap();
            let mut left: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let mut right: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            left.sort_unstable();
            right.sort_unstable();
            left.dedup();
            right.dedup();
            prop_assert_eq!(left.len(), pairs.len());
            prop_assert_eq!(right.len(), pairs.len());
        }
    }
}
