//! Stage 3: k-means over the palm centers of the surviving line poses, and
//! the per-cluster point families of finger positions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{corners, LinePose};

pub type Point = (f64, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Convergence threshold on the largest squared centroid move, px^2.
    pub tol: f64,
    /// Independent seedings; the lowest final inertia wins, earliest on ties.
    pub n_init: usize,
}

impl Default for KmeansParams {
    fn default() -> Self {
        Self {
            k: 8,
            seed: 0,
            max_iter: 100,
            tol: 1e-4,
            n_init: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub centroids: Vec<Point>,
    /// Cluster index of every input point, in input order.
    pub assignment: Vec<usize>,
    /// Sum of squared distances to the assigned centroids, px^2.
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each Lloyd update and each transfer pass.
    pub inertia_history: Vec<f64>,
}

impl Clustering {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == cluster)
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFamily {
    pub cluster_index: usize,
    /// Both finger positions of every member pose, member by member.
    pub points: Vec<Point>,
    pub source_poses: Vec<usize>,
}

fn dist2(a: Point, b: Point) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

fn nearest(p: Point, centroids: &[Point]) -> (usize, f64) {
    let mut best = (0, dist2(p, centroids[0]));
    for (j, &c) in centroids.iter().enumerate().skip(1) {
        let d = dist2(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn cost(points: &[Point], assign: &[usize], centroids: &[Point]) -> f64 {
    points
        .iter()
        .zip(assign)
        .map(|(&p, &j)| dist2(p, centroids[j]))
        .sum()
}

/// Index drawn with probability proportional to `d2`.
fn draw_weighted(d2: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let n = d2.len();
    if total <= 0.0 {
        // every point coincides with a centroid already
        return rng.random_range(0..n);
    }
    let mut target = rng.random::<f64>() * total;
    let mut chosen = n - 1;
    for (i, &w) in d2.iter().enumerate() {
        if w > 0.0 && target < w {
            chosen = i;
            break;
        }
        target -= w;
    }
    while d2[chosen] == 0.0 {
        chosen -= 1;
    }
    chosen
}

/// Greedy k-means++: each new center is the best of `2 + ln k` candidates
/// drawn proportional to squared distance, by resulting potential.
fn plus_plus_init(points: &[Point], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let n = points.len();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centroids = vec![points[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut best: Option<(f64, Vec<f64>, Point)> = None;
        for _ in 0..trials {
            let c = points[draw_weighted(&d2, total, rng)];
            let next: Vec<f64> = d2.iter().zip(points).map(|(&w, &p)| w.min(dist2(p, c))).collect();
            let potential: f64 = next.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.0) {
                best = Some((potential, next, c));
            }
        }
        let (_, next, c) = best.expect("at least two trials");
        centroids.push(c);
        d2 = next;
    }
    centroids
}

struct Run {
    centroids: Vec<Point>,
    assign: Vec<usize>,
    inertia: f64,
    iterations: usize,
    history: Vec<f64>,
}

/// One k-means++ seeding refined by Lloyd updates.
fn lloyd(points: &[Point], k: usize, params: &KmeansParams, rng: &mut ChaCha8Rng) -> Run {
    let n = points.len();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut assign = vec![0usize; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < params.max_iter {
        for (a, &p) in assign.iter_mut().zip(points) {
            *a = nearest(p, &centroids).0;
        }

        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (&p, &j) in points.iter().zip(&assign) {
            sums[j].0 += p.0;
            sums[j].1 += p.1;
            sums[j].2 += 1;
        }
        let mut next: Vec<Point> = sums
            .iter()
            .zip(&centroids)
            .map(|(&(sx, sy, m), &old)| if m > 0 { (sx / m as f64, sy / m as f64) } else { old })
            .collect();
        // empty clusters restart at the point worst served by its centroid
        let mut taken = vec![false; n];
        for j in (0..k).filter(|&j| sums[j].2 == 0) {
            let far = (0..n)
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| {
                    dist2(points[a], next[assign[a]])
                        .total_cmp(&dist2(points[b], next[assign[b]]))
                        .then(b.cmp(&a))
                })
                .expect("k <= n leaves a free point");
            taken[far] = true;
            next[j] = points[far];
        }

        let moved = centroids
            .iter()
            .zip(&next)
            .map(|(&a, &b)| dist2(a, b))
            .fold(0.0, f64::max);
        centroids = next;
        iterations += 1;
        history.push(cost(points, &assign, &centroids));
        if moved < params.tol {
            break;
        }
    }
    if iterations == 0 {
        for (a, &p) in assign.iter_mut().zip(points) {
            *a = nearest(p, &centroids).0;
        }
    }

    hartigan(points, &mut assign, &mut centroids, &mut history);
    let inertia = cost(points, &assign, &centroids);
    Run { centroids, assign, inertia, iterations, history }
}

fn means(points: &[Point], assign: &[usize], centroids: &mut [Point]) -> Vec<usize> {
    let mut sums = vec![(0.0, 0.0, 0usize); centroids.len()];
    for (&p, &j) in points.iter().zip(assign) {
        sums[j].0 += p.0;
        sums[j].1 += p.1;
        sums[j].2 += 1;
    }
    for (c, &(sx, sy, m)) in centroids.iter_mut().zip(&sums) {
        if m > 0 {
            *c = (sx / m as f64, sy / m as f64);
        }
    }
    sums.iter().map(|s| s.2).collect()
}

/// Single-point transfers that strictly lower inertia, in passes over the
/// points until none applies. Leaves centroids at their cluster means.
fn hartigan(points: &[Point], assign: &mut [usize], centroids: &mut [Point], history: &mut Vec<f64>) {
    let k = centroids.len();
    let mut sizes = means(points, assign, centroids);
    if k < 2 {
        return;
    }
    loop {
        let mut moved = false;
        for (i, &p) in points.iter().enumerate() {
            let a = assign[i];
            if sizes[a] < 2 {
                continue;
            }
            let na = sizes[a] as f64;
            let remove = na / (na - 1.0) * dist2(p, centroids[a]);
            let mut best = (a, remove);
            for j in (0..k).filter(|&j| j != a) {
                let nj = sizes[j] as f64;
                let add = nj / (nj + 1.0) * dist2(p, centroids[j]);
                if add < best.1 {
                    best = (j, add);
                }
            }
            let b = best.0;
            if b == a || remove - best.1 <= 1e-12 * remove.max(1.0) {
                continue;
            }
            let nb = sizes[b] as f64;
            centroids[a] = ((na * centroids[a].0 - p.0) / (na - 1.0), (na * centroids[a].1 - p.1) / (na - 1.0));
            centroids[b] = ((nb * centroids[b].0 + p.0) / (nb + 1.0), (nb * centroids[b].1 + p.1) / (nb + 1.0));
            sizes[a] -= 1;
            sizes[b] += 1;
            assign[i] = b;
            moved = true;
        }
        if !moved {
            break;
        }
        sizes = means(points, assign, centroids);
        history.push(cost(points, assign, centroids));
    }
}

/// Lloyd's algorithm from `n_init` k-means++ seedings, each finished with
/// Hartigan single-point transfers.
///
/// Input points are sorted lexicographically before seeding, so the result
/// does not depend on input order. `k` is clamped to the number of points.
pub fn kmeans(centers: &[Point], params: &KmeansParams) -> Result<Clustering> {
    if centers.is_empty() {
        return Err(Error::EmptyInput("k-means needs at least one point".into()));
    }
    if params.k == 0 || params.n_init == 0 {
        return Err(Error::Config("k and n_init must be >= 1".into()));
    }
    if centers.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::Config("k-means input contains non-finite points".into()));
    }
    let n = centers.len();
    let k = params.k.min(n);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        centers[a]
            .0
            .total_cmp(&centers[b].0)
            .then(centers[a].1.total_cmp(&centers[b].1))
    });
    let points: Vec<Point> = order.iter().map(|&i| centers[i]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<Run> = None;
    for _ in 0..params.n_init {
        let run = lloyd(&points, k, params, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let Run { centroids, assign, inertia, iterations, history } = best.expect("n_init >= 1");
    let mut assignment = vec![0usize; n];
    for (pos, &orig) in order.iter().enumerate() {
        assignment[orig] = assign[pos];
    }
    Ok(Clustering {
        k,
        centroids,
        assignment,
        inertia,
        iterations,
        inertia_history: history,
    })
}

/// One family per non-empty cluster holding both corners of every member pose.
pub fn assign_families(clustering: &Clustering, poses: &[LinePose]) -> Vec<PointFamily> {
    (0..clustering.k)
        .filter_map(|j| {
            let source_poses: Vec<usize> = clustering.members(j).collect();
            if source_poses.is_empty() {
                return None;
            }
            let points = source_poses
                .iter()
                .flat_map(|&i| {
                    let (a, b) = corners(&poses[i]);
                    [a, b]
                })
                .collect();
            Some(PointFamily {
                cluster_index: j,
                points,
                source_poses,
            })
        })
        .collect()
}
