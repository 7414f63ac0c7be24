//! k-means in standardized log-hyperparameter space with medoid
//! representatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::KernelBank;

const N_INIT: usize = 4;
const MAX_LLOYD: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub bank: KernelBank,
    /// Cluster index of every input model, in input order.
    pub assignment: Vec<usize>,
    /// Set when the input was already small enough and returned as is.
    pub unchanged: bool,
}

fn features(bank: &KernelBank) -> Vec<[f64; 6]> {
    let raw: Vec<[f64; 6]> = bank
        .models
        .iter()
        .map(|m| {
            let s = m.speed_model.hyperparams().to_log();
            let h = m.heading_model.hyperparams().to_log();
            [s[0], s[1], s[2], h[0], h[1], h[2]]
        })
        .collect();
    let n = raw.len() as f64;
    let mut out = raw.clone();
    for d in 0..6 {
        let mean = raw.iter().map(|f| f[d]).sum::<f64>() / n;
        let var = raw.iter().map(|f| (f[d] - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 1e-24 { var.sqrt() } else { 1.0 };
        for (o, r) in out.iter_mut().zip(&raw) {
            o[d] = (r[d] - mean) / sd;
        }
    }
    out
}

fn dist2(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn kmeans_pp(points: &[[f64; 6]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 6]> {
    let mut centers = vec![points[rng.gen_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if r < *d {
                    chosen = i;
                    break;
                }
                r -= d;
            }
            chosen
        } else {
            rng.gen_range(0..points.len())
        };
        centers.push(points[idx]);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &points[idx]));
        }
    }
    centers
}

fn nearest(p: &[f64; 6], centers: &[[f64; 6]]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = dist2(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

fn lloyd(points: &[[f64; 6]], mut centers: Vec<[f64; 6]>) -> (Vec<usize>, f64) {
    let k = centers.len();
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..MAX_LLOYD {
        let mut sums = vec![[0.0; 6]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for d in 0..6 {
                sums[a][d] += p[d];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed an empty cluster at the point farthest from its centre.
                let far = (0..points.len())
                    .max_by(|&i, &j| {
                        dist2(&points[i], &centers[assign[i]]).total_cmp(&dist2(&points[j], &centers[assign[j]]))
                    })
                    .unwrap();
                centers[c] = points[far];
            } else {
                for d in 0..6 {
                    centers[c][d] = sums[c][d] / counts[c] as f64;
                }
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    let inertia = points.iter().zip(&assign).map(|(p, &a)| dist2(p, &centers[a])).sum();
    (assign, inertia)
}

/// Reduces the bank to at most `c_size` models. Each cluster is
/// represented by its medoid, so the output is a subset of the input.
pub fn cluster_bank(bank: &KernelBank, c_size: usize, seed: u64) -> ClusterOutcome {
    let n = bank.len();
    if n <= c_size || c_size == 0 {
        if c_size == 0 {
            log::warn!("cluster size 0 requested; bank returned unchanged");
        } else {
            log::info!("bank has {n} models, not more than {c_size}; returned unchanged");
        }
        return ClusterOutcome { bank: bank.clone(), assignment: (0..n).collect(), unchanged: true };
    }
    let points = features(bank);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..N_INIT {
        let centers = kmeans_pp(&points, c_size, &mut rng);
        let (assign, inertia) = lloyd(&points, centers);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((assign, inertia));
        }
    }
    let (assign, _) = best.unwrap();
    let mut chosen = Vec::new();
    for c in 0..c_size {
        let members: Vec<usize> = (0..n).filter(|&i| assign[i] == c).collect();
        let medoid = members.iter().copied().min_by(|&a, &b| {
            let ca: f64 = members.iter().map(|&j| dist2(&points[a], &points[j]).sqrt()).sum();
            let cb: f64 = members.iter().map(|&j| dist2(&points[b], &points[j]).sqrt()).sum();
            ca.total_cmp(&cb).then(bank.models[a].id.cmp(&bank.models[b].id))
        });
        if let Some(m) = medoid {
            chosen.push(m);
        }
    }
    chosen.sort_unstable();
    chosen.dedup();
    let mut out = bank.clone();
    out.models = chosen.iter().map(|&i| bank.models[i].clone()).collect();
    out.created = format!("{} | clustered to {} (seed {seed})", bank.created, out.models.len());
    ClusterOutcome { bank: out, assignment: assign, unchanged: false }
}
