//! k-means (k-means++ seeding, elbow selection) and fuzzy c-means.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Inertia drop (fraction of the k = 1 inertia) below which adding a cluster is not worth it.
pub const ELBOW_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMethod {
    Kmeans,
    Fcm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub method: ClusterMethod,
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Hard assignment per point (argmax membership for FCM).
    pub labels: Vec<usize>,
    /// FCM membership rows; each sums to 1.
    pub memberships: Option<Vec<Vec<f64>>>,
    pub fuzzifier: Option<f64>,
    pub inertia: f64,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn check_points(points: &[Vec<f64>], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if points.len() < k {
        return Err(Error::InsufficientData(format!("{} points for k = {k}", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch("points have different dimensions".into()));
    }
    Ok(dim)
}

impl ClusterModel {
    pub fn nearest(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, x).0
    }

    /// FCM membership of a new point against the fitted centroids.
    pub fn membership(&self, x: &[f64]) -> Vec<f64> {
        fcm_memberships(&self.centroids, x, self.fuzzifier.unwrap_or(2.0))
    }
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(i, c)| (i, sq_dist(c, x)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    while centroids.len() < k {
        let d: Vec<f64> = points.iter().map(|p| nearest(&centroids, p).1).collect();
        let total: f64 = d.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, di) in d.iter().enumerate() {
                if u < *di {
                    chosen = i;
                    break;
                }
                u -= di;
            }
            chosen
        } else {
            rng.gen_range(0..points.len())
        };
        centroids.push(points[idx].clone());
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iters: usize) -> (Vec<Vec<f64>>, Vec<usize>, f64) {
    let dim = points[0].len();
    let mut labels = vec![0; points.len()];
    for _ in 0..max_iters {
        let new_labels: Vec<usize> = points.iter().map(|p| nearest(&centroids, p).0).collect();
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (p, l) in points.iter().zip(&new_labels) {
            counts[*l] += 1;
            sums[*l].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for (c, (s, n)) in centroids.iter_mut().zip(sums.into_iter().zip(&counts)) {
            if *n > 0 {
                *c = s.into_iter().map(|v| v / *n as f64).collect();
            }
        }
        let changed = new_labels != labels;
        labels = new_labels;
        if !changed {
            break;
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, l)| sq_dist(p, &centroids[*l])).sum();
    (centroids, labels, inertia)
}

/// Lloyd's algorithm from the best of five k-means++ seedings.
pub fn fit_kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterModel> {
    check_points(points, k)?;
    let mut best: Option<(Vec<Vec<f64>>, Vec<usize>, f64)> = None;
    for restart in 0..5 {
        let mut rng = rng::indexed_stream(seed, &format!("kmeans/{k}"), restart);
        let init = kmeans_pp(points, k, &mut rng);
        let fit = lloyd(points, init, 300);
        if best.as_ref().is_none_or(|b| fit.2 < b.2) {
            best = Some(fit);
        }
    }
    let (centroids, labels, inertia) = best.expect("at least one restart");
    Ok(ClusterModel {
        method: ClusterMethod::Kmeans,
        k,
        centroids,
        labels,
        memberships: None,
        fuzzifier: None,
        inertia,
    })
}

/// Fits k = 1, 2, … and keeps the smallest k after which the inertia drop,
/// as a fraction of the single-cluster inertia, falls below [`ELBOW_THRESHOLD`].
pub fn fit_kmeans_elbow(points: &[Vec<f64>], k_max: usize, seed: u64) -> Result<ClusterModel> {
    check_points(points, 1)?;
    let k_max = k_max.clamp(1, points.len());
    let mut current = fit_kmeans(points, 1, seed)?;
    let total = current.inertia;
    for k in 2..=k_max {
        if current.inertia <= 0.0 {
            break;
        }
        let next = fit_kmeans(points, k, seed)?;
        let drop = (current.inertia - next.inertia) / total;
        if drop < ELBOW_THRESHOLD {
            break;
        }
        current = next;
    }
    Ok(current)
}

fn fcm_memberships(centroids: &[Vec<f64>], x: &[f64], m: f64) -> Vec<f64> {
    let d: Vec<f64> = centroids.iter().map(|c| sq_dist(c, x).sqrt()).collect();
    let zeros: Vec<usize> = (0..d.len()).filter(|i| d[*i] == 0.0).collect();
    if !zeros.is_empty() {
        let mut u = vec![0.0; d.len()];
        for i in &zeros {
            u[*i] = 1.0 / zeros.len() as f64;
        }
        return u;
    }
    let p = 2.0 / (m - 1.0);
    d.iter()
        .map(|dj| 1.0 / d.iter().map(|dl| (dj / dl).powf(p)).sum::<f64>())
        .collect()
}

/// Fuzzy c-means with fuzzifier `m`; stops when no centroid moves more than `tol`.
pub fn fit_fcm(points: &[Vec<f64>], k: usize, m: f64, tol: f64, seed: u64) -> Result<ClusterModel> {
    let dim = check_points(points, k)?;
    if !(m > 1.0) {
        return Err(Error::InvalidParameter("FCM fuzzifier must exceed 1".into()));
    }
    let mut rng = rng::stream(seed, "fcm");
    let mut u: Vec<Vec<f64>> = points
        .iter()
        .map(|_| {
            let row: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            let s: f64 = row.iter().sum();
            row.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let mut centroids = vec![vec![0.0; dim]; k];
    for iter in 0..500 {
        let mut next = vec![vec![0.0; dim]; k];
        for (j, c) in next.iter_mut().enumerate() {
            let mut wsum = 0.0;
            for (p, row) in points.iter().zip(&u) {
                let w = row[j].powf(m);
                wsum += w;
                c.iter_mut().zip(p).for_each(|(ci, x)| *ci += w * x);
            }
            if wsum > 0.0 {
                c.iter_mut().for_each(|ci| *ci /= wsum);
            }
        }
        let shift = next
            .iter()
            .zip(&centroids)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        u = points.iter().map(|p| fcm_memberships(&centroids, p, m)).collect();
        if iter > 0 && shift < tol {
            break;
        }
    }
    let labels: Vec<usize> = u
        .iter()
        .map(|row| row.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, v)| if *v > b.1 { (i, *v) } else { b }).0)
        .collect();
    let inertia = points
        .iter()
        .zip(&u)
        .map(|(p, row)| row.iter().zip(&centroids).map(|(w, c)| w.powf(m) * sq_dist(p, c)).sum::<f64>())
        .sum();
    Ok(ClusterModel {
        method: ClusterMethod::Fcm,
        k,
        centroids,
        labels,
        memberships: Some(u),
        fuzzifier: Some(m),
        inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clouds() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![100.0, 100.0], vec![101.0, 100.0]]
    }

    fn sorted(mut c: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        c
    }

    #[test]
    fn kmeans_separated_clouds() {
        let m = fit_kmeans(&clouds(), 2, 1).unwrap();
        let c = sorted(m.centroids);
        assert!(sq_dist(&c[0], &[0.0, 0.5]).sqrt() < 1e-6);
        assert!(sq_dist(&c[1], &[100.5, 100.0]).sqrt() < 1e-6);
    }

    #[test]
    fn fcm_separated_clouds_and_memberships() {
        let m = fit_fcm(&clouds(), 2, 2.0, 1e-10, 3).unwrap();
        for row in m.memberships.as_ref().unwrap() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let c = sorted(m.centroids);
        assert!(sq_dist(&c[0], &[0.0, 0.5]).sqrt() < 1e-2);
        assert!(sq_dist(&c[1], &[100.5, 100.0]).sqrt() < 1e-2);
    }

    #[test]
    fn identical_points() {
        let pts = vec![vec![3.0, 4.0]; 5];
        for c in fit_kmeans(&pts, 2, 1).unwrap().centroids {
            assert_eq!(c, vec![3.0, 4.0]);
        }
        for c in fit_fcm(&pts, 2, 2.0, 1e-9, 1).unwrap().centroids {
            assert!(sq_dist(&c, &[3.0, 4.0]) < 1e-20);
        }
    }

    #[test]
    fn elbow_finds_three_groups() {
        let mut pts = Vec::new();
        for (cx, cy) in [(0.0, 0.0), (50.0, 0.0), (0.0, 50.0)] {
            for i in 0..10 {
                pts.push(vec![cx + (i % 3) as f64 * 0.1, cy + (i % 4) as f64 * 0.1]);
            }
        }
        assert_eq!(fit_kmeans_elbow(&pts, 8, 2).unwrap().k, 3);
    }

    #[test]
    fn k_larger_than_n() {
        assert!(fit_kmeans(&clouds(), 5, 1).is_err());
        assert!(fit_fcm(&clouds(), 5, 2.0, 1e-6, 1).is_err());
    }
}
