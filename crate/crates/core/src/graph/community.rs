//! Modularity and greedy community detection on the undirected projection.

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GraphError, NarrativeGraph};

const GAIN_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityPartition {
    /// node id → community id. Ids are contiguous and numbered by the
    /// smallest node id they contain.
    pub assignment: BTreeMap<String, usize>,
    pub modularity: f64,
}

impl CommunityPartition {
    pub fn community_count(&self) -> usize {
        self.assignment.values().max().map_or(0, |m| m + 1)
    }
}

/// Undirected projection: nodes in id order, weights summed over direction
/// and edge type.
#[derive(Debug, Clone)]
pub struct Projection {
    pub ids: Vec<String>,
    /// `adj[i]` maps neighbor index → weight; a self-loop appears once.
    pub adj: Vec<BTreeMap<usize, f64>>,
    /// Weighted degree; a self-loop contributes twice its weight.
    pub strength: Vec<f64>,
    pub total_weight: f64,
}

impl Projection {
    pub fn new(g: &NarrativeGraph) -> Self {
        let ids: Vec<String> = g.node_ids().map(str::to_string).collect();
        let index: BTreeMap<&str, usize> =
            ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut adj = vec![BTreeMap::new(); ids.len()];
        let mut strength = vec![0.0; ids.len()];
        let mut total_weight = 0.0;
        for e in g.edges() {
            let (i, j) = (index[e.source.as_str()], index[e.target.as_str()]);
            let w = e.weight as f64;
            *adj[i].entry(j).or_insert(0.0) += w;
            if i != j {
                *adj[j].entry(i).or_insert(0.0) += w;
            }
            strength[i] += w;
            strength[j] += w;
            total_weight += w;
        }
        Projection {
            ids,
            adj,
            strength,
            total_weight,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Σ_c (L_c / W − (S_c / 2W)²) for community labels per node index.
    pub fn modularity(&self, labels: &[usize]) -> Result<f64, GraphError> {
        if self.total_weight <= 0.0 {
            return Err(GraphError::UndefinedModularity);
        }
        let m = self.total_weight;
        let k = labels.iter().max().map_or(0, |x| x + 1);
        let mut inside = vec![0.0; k];
        let mut ends = vec![0.0; k];
        for (i, nb) in self.adj.iter().enumerate() {
            ends[labels[i]] += self.strength[i];
            for (&j, &w) in nb {
                if j >= i && labels[i] == labels[j] {
                    inside[labels[i]] += w;
                }
            }
        }
        Ok(inside
            .iter()
            .zip(&ends)
            .map(|(l, s)| l / m - (s / (2.0 * m)).powi(2))
            .sum())
    }
}

/// Q of `partition` (node id → community) on `g`'s undirected projection.
pub fn modularity(g: &NarrativeGraph, partition: &BTreeMap<String, usize>) -> Result<f64, GraphError> {
    let p = Projection::new(g);
    let labels = p
        .ids
        .iter()
        .map(|id| {
            partition
                .get(id)
                .copied()
                .ok_or_else(|| GraphError::Integrity(format!("node {id} has no community")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    p.modularity(&labels)
}

/// Relabel so communities are numbered by their smallest member index.
fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Greedy agglomeration: merge the connected pair with the largest
/// modularity gain (ties to the lexicographically smallest pair of ids)
/// until no merge gains.
fn agglomerate(p: &Projection) -> Vec<usize> {
    let n = p.len();
    let m = p.total_weight;
    let mut label: Vec<usize> = (0..n).collect();
    // community → neighbor community → weight between them
    let mut links: Vec<BTreeMap<usize, f64>> = p
        .adj
        .iter()
        .enumerate()
        .map(|(i, nb)| nb.iter().filter(|(&j, _)| j != i).map(|(&j, &w)| (j, w)).collect())
        .collect();
    let mut strength = p.strength.clone();
    let mut alive = vec![true; n];
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for c in (0..n).filter(|&c| alive[c]) {
            for (&d, &w) in links[c].range(c + 1..) {
                let gain = w / m - strength[c] * strength[d] / (2.0 * m * m);
                if best.is_none_or(|(g, _, _)| gain > g + GAIN_EPSILON) {
                    best = Some((gain, c, d));
                }
            }
        }
        let Some((gain, c, d)) = best else { break };
        if gain <= GAIN_EPSILON {
            break;
        }
        // merge d into c
        let moved = std::mem::take(&mut links[d]);
        for (e, w) in moved {
            if e == c {
                continue;
            }
            *links[c].entry(e).or_insert(0.0) += w;
            let le = &mut links[e];
            le.remove(&d);
            *le.entry(c).or_insert(0.0) += w;
        }
        links[c].remove(&d);
        strength[c] += strength[d];
        alive[d] = false;
        for l in label.iter_mut() {
            if *l == d {
                *l = c;
            }
        }
    }
    label
}

/// Move single nodes to the neighboring community with the best gain, in
/// index order, until a full pass moves nothing.
fn refine(p: &Projection, labels: &mut [usize]) {
    let m = p.total_weight;
    let n = p.len();
    let mut totals: BTreeMap<usize, f64> = BTreeMap::new();
    for i in 0..n {
        *totals.entry(labels[i]).or_insert(0.0) += p.strength[i];
    }
    for _ in 0..100 {
        let mut moved = false;
        for i in 0..n {
            let own = labels[i];
            let k = p.strength[i];
            let mut to: BTreeMap<usize, f64> = BTreeMap::new();
            for (&j, &w) in &p.adj[i] {
                if j != i {
                    *to.entry(labels[j]).or_insert(0.0) += w;
                }
            }
            let gain = |w_ic: f64, total: f64| w_ic / m - k * total / (2.0 * m * m);
            let own_total = totals[&own] - k;
            let stay = gain(to.get(&own).copied().unwrap_or(0.0), own_total);
            let mut best = (stay, own);
            for (&c, &w) in &to {
                if c == own {
                    continue;
                }
                let g = gain(w, totals[&c]);
                if g > best.0 + GAIN_EPSILON {
                    best = (g, c);
                }
            }
            if best.1 != own {
                *totals.get_mut(&own).expect("own community") -= k;
                *totals.entry(best.1).or_insert(0.0) += k;
                labels[i] = best.1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Kernighan-Lin style vertex mover. Each pass moves every node exactly once,
/// always taking the best available move (possibly a loss, possibly into a
/// fresh community), then rolls back to the best state seen. Passes repeat
/// while they improve Q.
fn vertex_mover(p: &Projection, labels: &mut Vec<usize>) {
    let m = p.total_weight;
    let n = p.len();
    let Ok(mut start_q) = p.modularity(&canonical(labels)) else {
        return;
    };
    for _ in 0..50 {
        let mut cur = labels.clone();
        let mut totals: BTreeMap<usize, f64> = BTreeMap::new();
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for i in 0..n {
            *totals.entry(cur[i]).or_insert(0.0) += p.strength[i];
            *sizes.entry(cur[i]).or_insert(0) += 1;
        }
        let mut fresh = cur.iter().max().map_or(0, |x| x + 1);
        let mut moved = vec![false; n];
        let (mut q, mut best_q, mut best) = (start_q, start_q, cur.clone());
        for _ in 0..n {
            let mut pick: Option<(f64, usize, usize)> = None;
            for i in (0..n).filter(|&i| !moved[i] && p.strength[i] > 0.0) {
                let own = cur[i];
                let k = p.strength[i];
                let mut to: BTreeMap<usize, f64> = BTreeMap::new();
                for (&j, &w) in &p.adj[i] {
                    if j != i {
                        *to.entry(cur[j]).or_insert(0.0) += w;
                    }
                }
                let gain = |w_ic: f64, total: f64| w_ic / m - k * total / (2.0 * m * m);
                let base = gain(to.get(&own).copied().unwrap_or(0.0), totals[&own] - k);
                let mut options: Vec<(f64, usize)> = to
                    .iter()
                    .filter(|(&c, _)| c != own)
                    .map(|(&c, &w)| (gain(w, totals[&c]) - base, c))
                    .collect();
                if sizes[&own] > 1 {
                    options.push((-base, fresh));
                }
                for (delta, c) in options {
                    if pick.is_none_or(|(d, _, _)| delta > d + GAIN_EPSILON) {
                        pick = Some((delta, i, c));
                    }
                }
            }
            let Some((delta, i, c)) = pick else { break };
            let own = cur[i];
            *totals.get_mut(&own).expect("own community") -= p.strength[i];
            *sizes.get_mut(&own).expect("own community") -= 1;
            *totals.entry(c).or_insert(0.0) += p.strength[i];
            *sizes.entry(c).or_insert(0) += 1;
            if c == fresh {
                fresh += 1;
            }
            cur[i] = c;
            moved[i] = true;
            q += delta;
            if q > best_q + GAIN_EPSILON {
                best_q = q;
                best = cur.clone();
            }
        }
        if best_q <= start_q + GAIN_EPSILON {
            break;
        }
        *labels = canonical(&best);
        start_q = best_q;
    }
}

/// Collapse each community into one node, self-loops carrying the internal
/// weight.
fn collapse(p: &Projection, labels: &[usize]) -> Projection {
    let k = labels.iter().max().map_or(0, |x| x + 1);
    let mut adj = vec![BTreeMap::new(); k];
    let mut strength = vec![0.0; k];
    for (i, nb) in p.adj.iter().enumerate() {
        strength[labels[i]] += p.strength[i];
        for (&j, &w) in nb {
            if j >= i {
                let (a, b) = (labels[i], labels[j]);
                *adj[a].entry(b).or_insert(0.0) += w;
                if a != b {
                    *adj[b].entry(a).or_insert(0.0) += w;
                }
            }
        }
    }
    Projection {
        ids: (0..k).map(|c| c.to_string()).collect(),
        adj,
        strength,
        total_weight: p.total_weight,
    }
}

/// Alternate vertex-mover passes with merges of whole communities until Q
/// stops rising.
fn improve(p: &Projection, start: &[usize]) -> Result<(Vec<usize>, f64), GraphError> {
    let mut labels = canonical(start);
    let mut q = p.modularity(&labels)?;
    loop {
        vertex_mover(p, &mut labels);
        let merged = agglomerate(&collapse(p, &labels));
        let next = canonical(&labels.iter().map(|&c| merged[c]).collect::<Vec<_>>());
        let next_q = p.modularity(&next)?;
        if next_q <= q + GAIN_EPSILON {
            let q = q.max(p.modularity(&labels)?);
            return Ok((labels, q));
        }
        labels = next;
        q = next_q;
    }
}

/// Deterministic modularity maximization. Three fixed starting points (greedy
/// merging with single-node moves, all singletons, each connected component
/// whole) are each improved locally and the best result wins, earlier starts
/// winning ties. Isolated nodes stay in their own communities.
pub fn detect_communities(g: &NarrativeGraph) -> Result<CommunityPartition, GraphError> {
    let p = Projection::new(g);
    if p.total_weight <= 0.0 {
        return Err(GraphError::UndefinedModularity);
    }
    let mut greedy = agglomerate(&p);
    refine(&p, &mut greedy);
    let singletons: Vec<usize> = (0..p.len()).collect();
    let components = agglomerate_all(&p);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for start in [greedy, singletons, components] {
        let (labels, q) = improve(&p, &start)?;
        if best.as_ref().is_none_or(|(_, b)| q > b + GAIN_EPSILON) {
            best = Some((labels, q));
        }
    }
    let (labels, _) = best.expect("at least one start");
    let modularity = p.modularity(&labels)?;
    Ok(CommunityPartition {
        assignment: p.ids.iter().cloned().zip(labels).collect(),
        modularity,
    })
}

/// Connected components of the projection.
fn agglomerate_all(p: &Projection) -> Vec<usize> {
    let n = p.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        if label[i] != i {
            continue;
        }
        let mut stack = vec![i];
        while let Some(v) = stack.pop() {
            for &j in p.adj[v].keys() {
                if j > i && label[j] == j {
                    label[j] = i;
                    stack.push(j);
                }
            }
        }
    }
    label
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeType;

    fn graph(edges: &[(usize, usize)]) -> NarrativeGraph {
        let mut g = NarrativeGraph::new(None);
        for &(a, b) in edges {
            let s = g.add_node(&format!("v{a}"), None);
            let t = g.add_node(&format!("v{b}"), None);
            g.add_edge(&s, &t, EdgeType::Link, 1).unwrap();
        }
        g
    }

    const TRIANGLES: [(usize, usize); 6] = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)];

    #[test]
    fn single_community_is_zero() {
        let g = graph(&TRIANGLES);
        let all = g.node_ids().map(|id| (id.to_string(), 0)).collect();
        assert_eq!(modularity(&g, &all).unwrap(), 0.0);
    }

    #[test]
    fn two_triangles() {
        let g = graph(&TRIANGLES);
        let part = detect_communities(&g).unwrap();
        assert_eq!(part.community_count(), 2);
        assert!((part.modularity - 0.5).abs() < 1e-12);
        let same = |a: usize, b: usize| {
            let id = |i: usize| crate::graph::node_id(&format!("v{i}"));
            part.assignment[&id(a)] == part.assignment[&id(b)]
        };
        assert!(same(0, 1) && same(1, 2) && same(3, 5) && !same(0, 3));
    }

    #[test]
    fn singletons_are_negative() {
        let g = graph(&TRIANGLES);
        let singles = g.node_ids().enumerate().map(|(i, id)| (id.to_string(), i)).collect();
        let q = modularity(&g, &singles).unwrap();
        // six nodes of strength 2 over W = 6: −6 · (2/12)²
        assert!((q + 6.0 * (2.0f64 / 12.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn k4_stays_whole() {
        let g = graph(&[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let part = detect_communities(&g).unwrap();
        assert_eq!(part.community_count(), 1);
        assert_eq!(part.modularity, 0.0);
    }

    #[test]
    fn empty_graph_is_undefined() {
        assert!(matches!(
            detect_communities(&NarrativeGraph::new(None)),
            Err(GraphError::UndefinedModularity)
        ));
    }
}
