//! Seeded k-means++ with Lloyd refinement, used as the vector quantizer for
//! RBFN center placement.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ModelError;
use crate::linalg::{sq_dist, RowMatrix};

const MAX_ITERATIONS: usize = 100;
const SINGLETON_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub centers: RowMatrix,
    pub assignments: Vec<usize>,
    /// Mean squared distance of members to their center, floored at
    /// `1e-12 * data variance` so singleton clusters keep a usable width.
    pub variances: Vec<f64>,
    /// Mean squared distance to the assigned center after each assignment
    /// pass; non-increasing across Lloyd iterations.
    pub distortion_history: Vec<f64>,
}

pub fn kmeans(x: &RowMatrix, m: usize, seed: u64) -> Result<KmeansResult, ModelError> {
    let p = x.nrows();
    let q = x.ncols();
    if m < 1 || m > p {
        return Err(ModelError::Precondition(format!(
            "cluster count must satisfy 1 <= M <= {p}, got {m}"
        )));
    }

    let global_mean: Vec<f64> = (0..q)
        .map(|j| (0..p).map(|i| x.get(i, j)).sum::<f64>() / p as f64)
        .collect();
    let data_variance = (0..p).map(|i| sq_dist(x.row(i), &global_mean)).sum::<f64>() / p as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(x, m, &mut rng);

    let mut assignments = vec![usize::MAX; p];
    let mut history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        // Assignment pass (ties to the lowest center index).
        let mut changed = false;
        let mut distortion = 0.0;
        for i in 0..p {
            let (best, dist) = nearest_center(&centers, x.row(i));
            distortion += dist;
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        history.push(distortion / p as f64);
        if !changed {
            break;
        }

        // Update pass.
        let mut sums = RowMatrix::zeros(m, q);
        let mut counts = vec![0usize; p.max(m)];
        for i in 0..p {
            let c = assignments[i];
            counts[c] += 1;
            let row = sums.row_mut(c);
            for (acc, v) in row.iter_mut().zip(x.row(i)) {
                *acc += v;
            }
        }
        for c in 0..m {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its
                // current center.
                let far = (0..p)
                    .max_by(|&a, &b| {
                        let da = sq_dist(x.row(a), centers.row(assignments[a]));
                        let db = sq_dist(x.row(b), centers.row(assignments[b]));
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap();
                centers.row_mut(c).copy_from_slice(x.row(far));
            } else {
                let row = sums.row(c).to_vec();
                let dst = centers.row_mut(c);
                for (d, s) in dst.iter_mut().zip(row) {
                    *d = s / counts[c] as f64;
                }
            }
        }
    }

    let mut variances = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for i in 0..p {
        let c = assignments[i];
        variances[c] += sq_dist(x.row(i), centers.row(c));
        counts[c] += 1;
    }
    let floor = SINGLETON_FLOOR * data_variance.max(f64::MIN_POSITIVE);
    for c in 0..m {
        variances[c] = if counts[c] > 0 {
            variances[c] / counts[c] as f64
        } else {
            0.0
        };
        variances[c] = variances[c].max(floor);
    }

    Ok(KmeansResult {
        centers,
        assignments,
        variances,
        distortion_history: history,
    })
}

fn nearest_center(centers: &RowMatrix, point: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for c in 0..centers.nrows() {
        let d = sq_dist(centers.row(c), point);
        if d < best_dist {
            best_dist = d;
            best = c;
        }
    }
    (best, best_dist)
}

fn plus_plus_init(x: &RowMatrix, m: usize, rng: &mut ChaCha8Rng) -> RowMatrix {
    let p = x.nrows();
    let mut centers = RowMatrix::zeros(m, x.ncols());
    let first = rng.random_range(0..p);
    centers.row_mut(0).copy_from_slice(x.row(first));

    let mut dist: Vec<f64> = (0..p).map(|i| sq_dist(x.row(i), centers.row(0))).collect();
    for c in 1..m {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut threshold = rng.random::<f64>() * total;
            let mut chosen = p - 1;
            for (i, &d) in dist.iter().enumerate() {
                threshold -= d;
                if threshold <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining points coincide with existing centers.
            rng.random_range(0..p)
        };
        centers.row_mut(c).copy_from_slice(x.row(pick));
        for i in 0..p {
            dist[i] = dist[i].min(sq_dist(x.row(i), centers.row(c)));
        }
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn single_cluster_is_the_mean() {
        let x = RowMatrix::from_rows(&[vec![1.0, 0.0], vec![3.0, 2.0], vec![5.0, 4.0]]);
        let result = kmeans(&x, 1, 0).unwrap();
        assert_abs_diff_eq!(result.centers.get(0, 0), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(result.centers.get(0, 1), 2.0, epsilon = 1e-12);
        // Mean squared deviation: ((8+8) + 0 + (4+4) + (4+4))/3 averaged over points
        let expected = (8.0 + 0.0 + 8.0) / 3.0;
        assert_abs_diff_eq!(result.variances[0], expected, epsilon = 1e-12);
    }

    #[test]
    fn each_point_its_own_center_when_m_equals_p() {
        let x = RowMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![5.0, 5.0],
        ]);
        let result = kmeans(&x, 4, 3).unwrap();
        assert_eq!(*result.distortion_history.last().unwrap(), 0.0);
        let mut seen: Vec<usize> = result.assignments.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn recovers_two_separated_blobs() {
        let normal = Normal::new(0.0, 0.4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        for _ in 0..200 {
            rows.push(vec![-5.0 + normal.sample(&mut rng)]);
            rows.push(vec![5.0 + normal.sample(&mut rng)]);
        }
        let x = RowMatrix::from_rows(&rows);
        let result = kmeans(&x, 2, 1).unwrap();
        let mut centers = vec![result.centers.get(0, 0), result.centers.get(1, 0)];
        centers.sort_by(f64::total_cmp);

        // Sample-mean oracle per true cluster.
        let neg_mean = rows.iter().map(|r| r[0]).filter(|v| *v < 0.0).sum::<f64>()
            / rows.iter().filter(|r| r[0] < 0.0).count() as f64;
        let pos_mean = rows.iter().map(|r| r[0]).filter(|v| *v > 0.0).sum::<f64>()
            / rows.iter().filter(|r| r[0] > 0.0).count() as f64;
        assert!((centers[0] - neg_mean).abs() < 0.5, "centers {centers:?}");
        assert!((centers[1] - pos_mean).abs() < 0.5, "centers {centers:?}");
    }

    #[test]
    fn distortion_never_increases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let x = RowMatrix::from_rows(&rows);
        let result = kmeans(&x, 7, 2).unwrap();
        for w in result.distortion_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "distortion rose: {:?}", w);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let x = RowMatrix::from_rows(&rows);
        let a = kmeans(&x, 5, 77).unwrap();
        let b = kmeans(&x, 5, 77).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.centers, b.centers);
    }

    #[test]
    fn rejects_m_larger_than_p() {
        let x = RowMatrix::from_rows(&[vec![0.0], vec![1.0]]);
        assert!(kmeans(&x, 3, 0).is_err());
        assert!(kmeans(&x, 0, 0).is_err());
    }

    use rand::SeedableRng;
}
