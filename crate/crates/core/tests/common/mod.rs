//! Brute-force oracles and fixture helpers shared by the integration tests.
#![allow(dead_code)]

pub mod worked;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use narrative_forge::config::{validate_config, PipelineConfig};
use narrative_forge::graph::{circle_positions, EdgeType, ForceAtlas2, LayoutParams, NarrativeGraph};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// The fixture config writing into `out`.
pub fn fixture_config(out: &Path) -> PipelineConfig {
    let mut c = validate_config(&fixtures().join("fixture.toml")).expect("fixture config is valid");
    c.output_dir = out.to_path_buf();
    c
}

fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    1.0 - dot / (nu * nv)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Density clustering from first principles: core points are those with at
/// least `min_pts` points (themselves included) within `eps`; cores within
/// `eps` of each other share a cluster; a border point joins the cluster,
/// among those of its core neighbors, whose lowest core index is smallest;
/// everything else is noise. Clusters are numbered by lowest core index.
pub fn dbscan_oracle(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| cosine(&points[i], &points[j]) <= eps).collect())
        .collect();
    let core: Vec<bool> = near.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for &j in &near[i] {
            if core[i] && core[j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let root: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    // root is the smallest member index; among cores that is the lowest core
    let mut min_core: BTreeMap<usize, usize> = BTreeMap::new();
    for i in (0..n).filter(|&i| core[i]) {
        min_core.entry(root[i]).or_insert(i);
    }
    let order: BTreeMap<usize, usize> = min_core
        .iter()
        .map(|(&r, &c)| (c, r))
        .collect::<BTreeMap<_, _>>()
        .into_values()
        .enumerate()
        .map(|(k, r)| (r, k))
        .collect();
    (0..n)
        .map(|i| {
            if core[i] {
                Some(order[&root[i]])
            } else {
                near[i]
                    .iter()
                    .filter(|&&j| core[j])
                    .map(|&j| order[&root[j]])
                    .min()
            }
        })
        .collect()
}

/// Relabel clusters by first appearance so equal partitions compare equal.
pub fn canonical_labels(labels: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            l.map(|c| {
                let next = map.len();
                *map.entry(c).or_insert(next)
            })
        })
        .collect()
}

/// Points scattered around a few random centers plus uniform background.
pub fn clustered_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let k = rng.random_range(2..=5);
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    (0..n)
        .map(|_| {
            if rng.random_bool(0.15) {
                (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
            } else {
                let c = &centers[rng.random_range(0..k)];
                c.iter().map(|x| x + rng.random_range(-0.3..0.3)).collect()
            }
        })
        .collect()
}

/// Symmetric weight matrix of the undirected projection, self-loops on the
/// diagonal counted twice.
pub fn weight_matrix(g: &NarrativeGraph) -> (Vec<String>, Vec<Vec<f64>>) {
    let ids: Vec<String> = g.node_ids().map(str::to_string).collect();
    let pos = |id: &str| ids.iter().position(|x| x == id).expect("node exists");
    let mut a = vec![vec![0.0; ids.len()]; ids.len()];
    for e in g.edges() {
        let (i, j) = (pos(&e.source), pos(&e.target));
        a[i][j] += e.weight as f64;
        a[j][i] += e.weight as f64;
    }
    (ids, a)
}

/// Q = (1/2m) Σ_ij (A_ij − k_i k_j / 2m) δ(c_i, c_j).
pub fn modularity_oracle(a: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = a.len();
    let k: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Every set partition of `n` items as restricted growth strings.
pub fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for c in 0..=max + 1 {
            cur.push(c);
            rec(i + 1, n, if c > max { c } else { max }, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut cur = vec![0];
    rec(1, n, 0, &mut cur, &mut out);
    out
}

/// Best modularity over all partitions.
pub fn exhaustive_best_modularity(a: &[Vec<f64>]) -> f64 {
    all_partitions(a.len())
        .iter()
        .map(|p| modularity_oracle(a, p))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Random directed multigraph with weighted edges over `n` named nodes.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> NarrativeGraph {
    let mut g = NarrativeGraph::new(None);
    let ids: Vec<String> = (0..n).map(|i| g.add_node(&format!("node {i}"), None)).collect();
    let types = [EdgeType::Recognition, EdgeType::Link, EdgeType::Normative, EdgeType::Request];
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p) {
                let t = types[rng.random_range(0..types.len())];
                g.add_edge(&ids[i], &ids[j], t, rng.random_range(1..=5)).unwrap();
            }
        }
    }
    g
}

/// Two triangles with no edge between them.
pub fn two_triangles() -> NarrativeGraph {
    let mut g = NarrativeGraph::new(None);
    for (a, b) in [("a", "b"), ("b", "c"), ("c", "a"), ("x", "y"), ("y", "z"), ("z", "x")] {
        let s = g.add_node(a, None);
        let t = g.add_node(b, None);
        g.add_edge(&s, &t, EdgeType::Link, 1).unwrap();
    }
    g
}

/// Cycle whose edges join neighbors on the starting circle.
pub fn ring(n: usize) -> NarrativeGraph {
    let mut g = NarrativeGraph::new(None);
    for i in 0..n {
        g.add_node(&format!("v{i}"), None);
    }
    let ids: Vec<String> = g.node_ids().map(str::to_string).collect();
    for k in 0..n {
        g.add_edge(&ids[k], &ids[(k + 1) % n], EdgeType::Link, 1).unwrap();
    }
    g
}

/// Largest deviation from mirror symmetry over `iterations` layout steps.
///
/// Reflection across the line through node `axis_node`'s start and the
/// origin maps the circular start onto itself, so node `k` should track the
/// reflection of node `2 * axis_node - k (mod n)`.
pub fn mirror_error(g: &NarrativeGraph, axis_node: usize, iterations: usize) -> f64 {
    let ids: Vec<String> = g.node_ids().map(str::to_string).collect();
    let n = ids.len();
    let start = circle_positions(&ids)[axis_node];
    let len = (start.0 * start.0 + start.1 * start.1).sqrt();
    let (ux, uy) = (start.0 / len, start.1 / len);
    let reflect = |(x, y): (f64, f64)| {
        let dot = x * ux + y * uy;
        (2.0 * dot * ux - x, 2.0 * dot * uy - y)
    };
    let mut fa = ForceAtlas2::new(g, LayoutParams::default());
    let mut worst: f64 = 0.0;
    for _ in 0..iterations {
        fa.step();
        let p = fa.positions();
        for k in 0..n {
            let (rx, ry) = reflect(p[&ids[k]]);
            let (mx, my) = p[&ids[(2 * axis_node + n - k) % n]];
            worst = worst.max((rx - mx).abs()).max((ry - my).abs());
        }
    }
    worst
}

/// Ratio of the last to the first step's displacement on the 4-cycle.
pub fn four_cycle_settling_ratio(iterations: usize) -> f64 {
    let mut fa = ForceAtlas2::new(&ring(4), LayoutParams::default());
    let first = fa.step();
    let mut last = first;
    for _ in 1..iterations {
        last = fa.step();
    }
    assert!(first > 0.0);
    last / first
}
