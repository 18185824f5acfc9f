//! Spherical k-means: cosine assignment, renormalized mean centroids,
//! seeded k-means++ initialization on the unit sphere.

use rand::Rng;
use rayon::prelude::*;

use crate::embedding::{check_dims, dot, l2_normalize, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop once the mean centroid movement (Euclidean) falls below this.
    pub tol: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, max_iters: 50, seed, tol: 1e-4 }
    }
}

/// Output of [`spherical_kmeans`].
#[derive(Debug, Clone)]
pub struct SphericalKMeans {
    /// `K` unit-norm centroids.
    pub centroids: EmbeddingMatrix,
    /// Final cluster of every input point.
    pub assignments: Vec<usize>,
    /// Sum of cosine similarities to the assigned centroid, one entry per
    /// assignment pass.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

/// `argmax_k ⟨point, a_k⟩`, lowest `k` on ties.
pub fn hard_assign(point: &[f32], centroids: &EmbeddingMatrix) -> Result<usize> {
    if centroids.is_empty() {
        return Err(Error::InvalidArgument("no centroids".into()));
    }
    check_dims(centroids.dim(), point.len())?;
    Ok(nearest(point, centroids).0)
}

fn nearest(point: &[f32], centroids: &EmbeddingMatrix) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, a) in centroids.rows().enumerate() {
        let s = dot(point, a);
        if s > best.1 {
            best = (k, s);
        }
    }
    best
}

pub fn spherical_kmeans(points: &EmbeddingMatrix, cfg: &KMeansConfig) -> Result<SphericalKMeans> {
    let n = points.len();
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::InvalidArgument(format!(
            "K = {} must be in 1..={n} (point count)",
            cfg.k
        )));
    }
    if cfg.max_iters == 0 || !(cfg.tol >= 0.0) {
        return Err(Error::InvalidArgument("max_iters must be ≥ 1 and tol ≥ 0".into()));
    }
    let dim = points.dim();
    let mut unit = EmbeddingMatrix::new(dim)?;
    for (i, p) in points.rows().enumerate() {
        let v = l2_normalize(p).map_err(|_| {
            Error::InvalidArgument(format!("point {i} has zero norm"))
        })?;
        unit.push(&v)?;
    }

    let mut centroids = kmeanspp(&unit, cfg.k, cfg.seed)?;
    let mut objective = Vec::new();
    let mut assignments = vec![0usize; n];
    let mut sims = vec![0.0f64; n];
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        iterations += 1;
        assign_all(&unit, &centroids, &mut assignments, &mut sims);
        repair_empty(&unit, &mut centroids, &mut assignments, &mut sims)?;
        objective.push(sims.iter().sum());

        let updated = mean_directions(&unit, &assignments, &centroids)?;
        let movement: f64 = centroids
            .rows()
            .zip(updated.rows())
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum::<f64>()
            / cfg.k as f64;
        centroids = updated;
        if movement < cfg.tol {
            break;
        }
    }
    assign_all(&unit, &centroids, &mut assignments, &mut sims);
    repair_empty(&unit, &mut centroids, &mut assignments, &mut sims)?;
    objective.push(sims.iter().sum());

    Ok(SphericalKMeans { centroids, assignments, objective, iterations })
}

fn assign_all(unit: &EmbeddingMatrix, centroids: &EmbeddingMatrix, out: &mut [usize], sims: &mut [f64]) {
    out.par_iter_mut()
        .zip(sims.par_iter_mut())
        .enumerate()
        .for_each(|(i, (a, s))| {
            let (k, sim) = nearest(unit.row(i), centroids);
            *a = k;
            *s = sim;
        });
}

/// Reseeds every empty cluster with the point least similar to its current
/// centroid. That point moves to the reseeded cluster with similarity 1.
fn repair_empty(
    unit: &EmbeddingMatrix,
    centroids: &mut EmbeddingMatrix,
    assignments: &mut [usize],
    sims: &mut [f64],
) -> Result<()> {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    if counts.iter().all(|&c| c > 0) {
        return Ok(());
    }
    let dim = centroids.dim();
    let mut flat = centroids.as_slice().to_vec();
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        // only take points whose cluster can spare one
        let donor = (0..unit.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .min_by(|&a, &b| sims[a].total_cmp(&sims[b]).then(a.cmp(&b)))
            .ok_or_else(|| Error::InvalidArgument("cannot repair empty cluster".into()))?;
        counts[assignments[donor]] -= 1;
        counts[empty] += 1;
        assignments[donor] = empty;
        sims[donor] = dot(unit.row(donor), unit.row(donor));
        flat[empty * dim..(empty + 1) * dim].copy_from_slice(unit.row(donor));
    }
    *centroids = EmbeddingMatrix::from_flat(flat, dim)?;
    Ok(())
}

fn mean_directions(
    unit: &EmbeddingMatrix,
    assignments: &[usize],
    previous: &EmbeddingMatrix,
) -> Result<EmbeddingMatrix> {
    let dim = unit.dim();
    let k = previous.len();
    let mut sums = vec![0.0f64; k * dim];
    for (p, &a) in unit.rows().zip(assignments) {
        for (s, x) in sums[a * dim..(a + 1) * dim].iter_mut().zip(p) {
            *s += f64::from(*x);
        }
    }
    let mut out = EmbeddingMatrix::new(dim)?;
    for (c, sum) in sums.chunks_exact(dim).enumerate() {
        let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            let row: Vec<f32> = sum.iter().map(|x| (x / norm) as f32).collect();
            out.push(&row)?;
        } else {
            // antipodal members cancel exactly; keep the old direction
            out.push(previous.row(c))?;
        }
    }
    Ok(out)
}

/// k-means++ seeding on unit vectors with squared chord distance `2 − 2cos`.
fn kmeanspp(unit: &EmbeddingMatrix, k: usize, seed: u64) -> Result<EmbeddingMatrix> {
    let n = unit.len();
    let mut rng = rng::stream(seed, 0x6b6d_6561_6e73);
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.gen_range(0..n));
    let mut dist: Vec<f64> = (0..n)
        .map(|i| (2.0 - 2.0 * dot(unit.row(i), unit.row(chosen[0]))).max(0.0))
        .collect();
    dist[chosen[0]] = 0.0;
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &d) in dist.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < d {
                    break;
                }
                target -= d;
            }
            pick.expect("positive total weight")
        } else {
            // all remaining points coincide with chosen centers
            let rest: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            rest[rng.gen_range(0..rest.len())]
        };
        chosen.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            let nd = (2.0 - 2.0 * dot(unit.row(i), unit.row(next))).max(0.0);
            if nd < *d {
                *d = nd;
            }
        }
        dist[next] = 0.0;
    }
    unit.select(&chosen)
}
