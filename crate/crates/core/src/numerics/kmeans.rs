//! Lloyd's k-means with k-means++ seeding.

use serde::{Deserialize, Serialize};

use super::{RngStream, Tensor};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    /// Cluster centers, `c x d`.
    pub centers: Tensor,
    /// Cluster index of every input row.
    pub assignments: Vec<usize>,
    /// Sum of squared distances of each point to its assigned center.
    pub inertia: f64,
    /// Inertia measured after every assignment step.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Partitions the rows of `x` into `c` clusters.
///
/// Seeding draws from `rng`; the result is deterministic for a given stream.
pub fn kmeans(x: &Tensor, c: usize, rng: &mut RngStream) -> Result<KMeansModel> {
    if x.ndim() != 2 {
        return Err(Error::invalid("kmeans expects a 2-D tensor"));
    }
    let (n, d) = (x.rows(), x.cols());
    if c == 0 || c > n {
        return Err(Error::invalid(format!("kmeans needs 1 <= c <= n, got c={c}, n={n}")));
    }
    x.ensure_finite("kmeans input")?;

    let mut centers = seed_plus_plus(x, c, rng);
    let mut assignments = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        let mut changed = false;
        let mut inertia = 0.0;
        for i in 0..n {
            let (best, dist) = nearest(x.row(i), &centers);
            inertia += dist;
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        update_centers(x, &assignments, &mut centers);
        repair_empty(x, &mut assignments, &mut centers);
    }

    let inertia = (0..n)
        .map(|i| sq_dist(x.row(i), centers.row(assignments[i])))
        .sum();
    debug_assert_eq!(centers.shape(), &[c, d]);
    Ok(KMeansModel {
        centers,
        assignments,
        inertia,
        inertia_trace: trace,
        iterations,
    })
}

fn nearest(p: &[f64], centers: &Tensor) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..centers.rows() {
        let dist = sq_dist(p, centers.row(j));
        if dist < best.1 {
            best = (j, dist);
        }
    }
    best
}

fn seed_plus_plus(x: &Tensor, c: usize, rng: &mut RngStream) -> Tensor {
    let (n, d) = (x.rows(), x.cols());
    let mut chosen = Vec::with_capacity(c);
    chosen.push(rng.below(n));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < c {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in dist.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just below `target`; take the last
            // positive-weight point.
            pick.unwrap_or_else(|| dist.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // All remaining points coincide with a chosen center.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.below(free.len())]
        };
        chosen.push(next);
        for (i, dv) in dist.iter_mut().enumerate() {
            *dv = dv.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    let mut centers = Tensor::zeros(&[c, d]);
    for (j, &i) in chosen.iter().enumerate() {
        centers.row_mut(j).copy_from_slice(x.row(i));
    }
    centers
}

fn update_centers(x: &Tensor, assignments: &[usize], centers: &mut Tensor) {
    let c = centers.rows();
    let mut counts = vec![0usize; c];
    let mut sums = Tensor::zeros(centers.shape());
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, v) in sums.row_mut(a).iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    for j in 0..c {
        if counts[j] > 0 {
            let inv = 1.0 / counts[j] as f64;
            for (dst, s) in centers.row_mut(j).iter_mut().zip(sums.row(j)) {
                *dst = s * inv;
            }
        }
    }
}

/// Moves each empty cluster's center onto the point farthest from its own
/// center, then recomputes the affected means.
fn repair_empty(x: &Tensor, assignments: &mut [usize], centers: &mut Tensor) {
    let c = centers.rows();
    loop {
        let mut counts = vec![0usize; c];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&k| k == 0) else {
            return;
        };
        let far = (0..x.rows())
            .filter(|&i| counts[assignments[i]] > 1)
            .max_by(|&a, &b| {
                let da = sq_dist(x.row(a), centers.row(assignments[a]));
                let db = sq_dist(x.row(b), centers.row(assignments[b]));
                da.total_cmp(&db).then(b.cmp(&a))
            });
        let Some(far) = far else { return };
        assignments[far] = empty;
        update_centers(x, assignments, centers);
    }
}
