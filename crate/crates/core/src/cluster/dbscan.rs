use std::collections::VecDeque;

use super::{cosine_distance, ClusterError};

/// Cluster label per point; `None` is noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbscanResult {
    pub labels: Vec<Option<usize>>,
    pub n_clusters: usize,
}

impl DbscanResult {
    pub fn noise(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_none())
            .map(|(i, _)| i)
    }
}

/// DBSCAN over an arbitrary symmetric distance.
///
/// A point is core when at least `min_pts` points, itself included, lie
/// within `eps` (inclusive). Points are scanned in index order; a border
/// point reachable from several clusters joins the one created first.
pub fn dbscan_by<F>(n: usize, eps: f64, min_pts: usize, dist: F) -> Result<DbscanResult, ClusterError>
where
    F: Fn(usize, usize) -> f64,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ClusterError::InvalidParameter(format!("eps must be > 0, got {eps}")));
    }
    if min_pts == 0 {
        return Err(ClusterError::InvalidParameter("min_pts must be >= 1".into()));
    }
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| i == j || dist(i, j) <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut labels = vec![None; n];
    let mut n_clusters = 0;
    for start in 0..n {
        if labels[start].is_some() || !core[start] {
            continue;
        }
        let id = n_clusters;
        n_clusters += 1;
        labels[start] = Some(id);
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            if !core[p] {
                continue;
            }
            for &q in &neighbors[p] {
                if labels[q].is_none() {
                    labels[q] = Some(id);
                    queue.push_back(q);
                }
            }
        }
    }
    Ok(DbscanResult { labels, n_clusters })
}

/// DBSCAN with cosine distance.
pub fn dbscan(vectors: &[Vec<f64>], eps: f64, min_pts: usize) -> Result<DbscanResult, ClusterError> {
    let n = vectors.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let x = cosine_distance(&vectors[i], &vectors[j])?;
            d[i * n + j] = x;
            d[j * n + i] = x;
        }
    }
    dbscan_by(n, eps, min_pts, |i, j| d[i * n + j])
}

/// Index of the member with the smallest summed cosine distance to the
/// others; the lowest index wins ties.
pub fn medoid(members: &[&[f64]]) -> Result<usize, ClusterError> {
    let mut best = (0, f64::INFINITY);
    for (i, u) in members.iter().enumerate() {
        let mut total = 0.0;
        for (j, v) in members.iter().enumerate() {
            if i != j {
                total += cosine_distance(u, v)?;
            }
        }
        if total < best.1 {
            best = (i, total);
        }
    }
    Ok(best.0)
}
