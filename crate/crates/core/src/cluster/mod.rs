//! Per-field semantic clustering of summary rows.

mod dbscan;
mod embed;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dbscan::{dbscan, dbscan_by, medoid, DbscanResult};
pub use embed::{
    l2_normalize, Embedder, HashingEmbedder, HttpEmbedder, HttpEmbedderConfig, DEFAULT_DIMENSIONS,
};

use crate::extract::summary::{SummaryRow, FIELDS, NA};

pub const DEFAULT_EPS: f64 = 0.25;
pub const DEFAULT_MIN_PTS: usize = 2;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cosine distance is undefined for a zero vector")]
    UndefinedMetric,
    #[error("vectors have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding provider failed: {0}")]
    Provider(String),
    #[error("embedding integrity: {0}")]
    Integrity(String),
}

/// `1 − u·v / (‖u‖‖v‖)`, clamped to [0, 2] against rounding.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64, ClusterError> {
    if u.len() != v.len() {
        return Err(ClusterError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(ClusterError::UndefinedMetric);
    }
    Ok((1.0 - dot / (nu.sqrt() * nv.sqrt())).clamp(0.0, 2.0))
}

/// One cluster of one field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub field: char,
    pub cluster_id: usize,
    /// Row index of the medoid; always one of `member_row_ids`.
    pub medoid_index: usize,
    pub representative_text: String,
    /// Indices into the summary-row list, ascending.
    pub member_row_ids: Vec<usize>,
    /// A DBSCAN noise point promoted to its own cluster.
    #[serde(default)]
    pub noise: bool,
}

/// All clusters of one field plus the row → cluster lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldClusters {
    pub clusters: Vec<ClusterAssignment>,
    /// DBSCAN-native clusters; ids at or above this were noise points.
    pub native_clusters: usize,
}

impl FieldClusters {
    pub fn cluster_of(&self, row: usize) -> Option<&ClusterAssignment> {
        self.clusters
            .iter()
            .find(|c| c.member_row_ids.binary_search(&row).is_ok())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            eps: DEFAULT_EPS,
            min_pts: DEFAULT_MIN_PTS,
        }
    }
}

/// Cluster one field's texts. `items` pairs a row index with its text.
/// Noise points become singleton clusters numbered after the native ones.
pub fn cluster_texts(
    field: char,
    items: &[(usize, String)],
    embedder: &dyn Embedder,
    params: ClusterParams,
) -> Result<FieldClusters, ClusterError> {
    if items.is_empty() {
        return Ok(FieldClusters::default());
    }
    // embed each distinct text once
    let mut distinct: Vec<String> = items.iter().map(|(_, t)| t.clone()).collect();
    distinct.sort();
    distinct.dedup();
    let vectors = embedder.embed(&distinct)?;
    if vectors.len() != distinct.len() {
        return Err(ClusterError::Integrity("embedder returned the wrong number of vectors".into()));
    }
    let by_text: BTreeMap<&str, &Vec<f64>> =
        distinct.iter().map(String::as_str).zip(&vectors).collect();
    let points: Vec<Vec<f64>> = items.iter().map(|(_, t)| by_text[t.as_str()].clone()).collect();

    let result = dbscan(&points, params.eps, params.min_pts)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); result.n_clusters];
    for (i, label) in result.labels.iter().enumerate() {
        match label {
            Some(c) => members[*c].push(i),
            None => members.push(vec![i]),
        }
    }

    let mut clusters = Vec::with_capacity(members.len());
    for (cluster_id, idx) in members.into_iter().enumerate() {
        let vs: Vec<&[f64]> = idx.iter().map(|&i| points[i].as_slice()).collect();
        let m = idx[medoid(&vs)?];
        let mut rows: Vec<usize> = idx.iter().map(|&i| items[i].0).collect();
        rows.sort_unstable();
        clusters.push(ClusterAssignment {
            field,
            cluster_id,
            medoid_index: items[m].0,
            representative_text: items[m].1.clone(),
            member_row_ids: rows,
            noise: cluster_id >= result.n_clusters,
        });
    }
    Ok(FieldClusters {
        clusters,
        native_clusters: result.n_clusters,
    })
}

/// Cluster fields A–F independently, skipping NA values.
pub fn cluster_fields(
    rows: &[SummaryRow],
    embedder: &dyn Embedder,
    params: ClusterParams,
) -> Result<BTreeMap<char, FieldClusters>, ClusterError> {
    let mut out = BTreeMap::new();
    for field in FIELDS {
        let items: Vec<(usize, String)> = rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                let v = r.field(field)?;
                (v != NA).then(|| (i, v.to_string()))
            })
            .collect();
        out.insert(field, cluster_texts(field, &items, embedder, params)?);
    }
    Ok(out)
}

/// One JSON object per cluster, fields in A–F order.
pub fn write_assignments<W: Write>(
    fields: &BTreeMap<char, FieldClusters>,
    mut w: W,
) -> std::io::Result<()> {
    for fc in fields.values() {
        for c in &fc.clusters {
            serde_json::to_writer(&mut w, c)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn read_assignments(text: &str) -> Result<BTreeMap<char, FieldClusters>, serde_json::Error> {
    let mut out: BTreeMap<char, FieldClusters> =
        FIELDS.iter().map(|&f| (f, FieldClusters::default())).collect();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let c: ClusterAssignment = serde_json::from_str(line)?;
        let fc = out.entry(c.field).or_default();
        if !c.noise {
            fc.native_clusters += 1;
        }
        fc.clusters.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::summary::SummaryType;

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 2.0);
        assert!(matches!(
            cosine_distance(&[0.0, 0.0], &[1.0, 0.0]),
            Err(ClusterError::UndefinedMetric)
        ));
        assert!(cosine_distance(&[1.0], &[1.0, 0.0]).is_err());
    }

    fn row(kind: SummaryType, f: [&str; 6]) -> SummaryRow {
        SummaryRow {
            kind,
            a: f[0].into(),
            b: f[1].into(),
            c: f[2].into(),
            d: f[3].into(),
            e: f[4].into(),
            f: f[5].into(),
            source_opinion_id: "o".into(),
            source_edge: 0,
        }
    }

    #[test]
    fn identical_texts_share_a_cluster_and_na_is_skipped() {
        let rows = vec![
            row(SummaryType::Normative, ["AI art", "unfair", "rules", "strict", NA, NA]),
            row(SummaryType::Normative, ["music", "unfair", "law", "clear", NA, NA]),
        ];
        let fields = cluster_fields(&rows, &HashingEmbedder::default(), ClusterParams::default())
            .unwrap();
        let b = &fields[&'B'];
        assert_eq!(b.clusters.len(), 1);
        assert_eq!(b.clusters[0].member_row_ids, [0, 1]);
        assert_eq!(b.clusters[0].representative_text, "unfair");
        assert!(fields[&'E'].clusters.is_empty());
        assert_eq!(fields[&'A'].clusters.len(), 2);
        assert_eq!(fields[&'A'].native_clusters, 0);
    }

    #[test]
    fn assignments_roundtrip() {
        let rows = vec![row(SummaryType::Request, ["a1", "b1", NA, NA, "e1", "f1"])];
        let fields = cluster_fields(&rows, &HashingEmbedder::default(), ClusterParams::default())
            .unwrap();
        let mut buf = Vec::new();
        write_assignments(&fields, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        let back = read_assignments(&text).unwrap();
        assert_eq!(back, fields);
    }
}
