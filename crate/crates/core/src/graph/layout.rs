//! ForceAtlas2 with a deterministic circular start.

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::community::Projection;
use super::{union_graph, NarrativeGraph};

pub type Positions = BTreeMap<String, (f64, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub iterations: usize,
    pub k_repulsion: f64,
    pub gravity: f64,
    pub scaling: f64,
    /// Scale attraction by edge weight.
    pub use_weights: bool,
    pub jitter_tolerance: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            iterations: 1000,
            k_repulsion: 10.0,
            gravity: 1.0,
            scaling: 2.0,
            use_weights: true,
            jitter_tolerance: 1.0,
        }
    }
}

/// Nodes on a circle of radius √n, ascending id, first node on +x.
pub fn circle_positions(ids: &[String]) -> Vec<(f64, f64)> {
    let n = ids.len();
    let r = (n as f64).sqrt();
    (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            (r * a.cos(), r * a.sin())
        })
        .collect()
}

/// Step-by-step simulation state.
///
/// Forces: repulsion `k_r·scaling·(deg₁+1)(deg₂+1)/d` between every pair,
/// linear attraction `d·w` along edges, gravity `g·(deg+1)` toward the
/// origin. Each node moves by `speed / (1 + √(speed·swing))` times its
/// force, where the global speed adapts to the ratio of swing to traction.
#[derive(Debug, Clone)]
pub struct ForceAtlas2 {
    params: LayoutParams,
    ids: Vec<String>,
    pos: Vec<(f64, f64)>,
    force: Vec<(f64, f64)>,
    mass: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    speed: f64,
    speed_efficiency: f64,
}

impl ForceAtlas2 {
    pub fn new(g: &NarrativeGraph, params: LayoutParams) -> Self {
        let p = Projection::new(g);
        let mut edges = Vec::new();
        let mut mass = vec![1.0; p.len()];
        for (i, nb) in p.adj.iter().enumerate() {
            for (&j, &w) in nb.range(i + 1..) {
                edges.push((i, j, if params.use_weights { w } else { 1.0 }));
                mass[i] += 1.0;
                mass[j] += 1.0;
            }
        }
        let pos = circle_positions(&p.ids);
        ForceAtlas2 {
            params,
            force: vec![(0.0, 0.0); p.len()],
            ids: p.ids,
            pos,
            mass,
            edges,
            speed: 1.0,
            speed_efficiency: 1.0,
        }
    }

    pub fn positions(&self) -> Positions {
        self.ids.iter().cloned().zip(self.pos.iter().copied()).collect()
    }

    /// One iteration; returns the total displacement (sum of step lengths).
    pub fn step(&mut self) -> f64 {
        let n = self.pos.len();
        if n == 0 {
            return 0.0;
        }
        let old = std::mem::replace(&mut self.force, vec![(0.0, 0.0); n]);
        let kr = self.params.k_repulsion * self.params.scaling;

        for i in 0..n {
            for j in i + 1..n {
                let dx = self.pos[i].0 - self.pos[j].0;
                let dy = self.pos[i].1 - self.pos[j].1;
                let d2 = dx * dx + dy * dy;
                if d2 > 0.0 {
                    let f = kr * self.mass[i] * self.mass[j] / d2;
                    self.force[i].0 += dx * f;
                    self.force[i].1 += dy * f;
                    self.force[j].0 -= dx * f;
                    self.force[j].1 -= dy * f;
                }
            }
        }
        for i in 0..n {
            let (x, y) = self.pos[i];
            let d = (x * x + y * y).sqrt();
            if d > 0.0 {
                let f = self.params.gravity * self.mass[i] / d;
                self.force[i].0 -= x * f;
                self.force[i].1 -= y * f;
            }
        }
        for &(i, j, w) in &self.edges {
            let dx = self.pos[i].0 - self.pos[j].0;
            let dy = self.pos[i].1 - self.pos[j].1;
            self.force[i].0 -= dx * w;
            self.force[i].1 -= dy * w;
            self.force[j].0 += dx * w;
            self.force[j].1 += dy * w;
        }

        let mut swinging = 0.0;
        let mut traction = 0.0;
        for i in 0..n {
            let (fx, fy) = self.force[i];
            let (ox, oy) = old[i];
            swinging += self.mass[i] * ((ox - fx).powi(2) + (oy - fy).powi(2)).sqrt();
            traction += self.mass[i] * 0.5 * ((ox + fx).powi(2) + (oy + fy).powi(2)).sqrt();
        }
        self.adjust_speed(swinging, traction, n);

        let mut moved = 0.0;
        for i in 0..n {
            let (fx, fy) = self.force[i];
            let (ox, oy) = old[i];
            let swing = self.mass[i] * ((ox - fx).powi(2) + (oy - fy).powi(2)).sqrt();
            let factor = self.speed / (1.0 + (self.speed * swing).sqrt());
            self.pos[i].0 += fx * factor;
            self.pos[i].1 += fy * factor;
            moved += factor * (fx * fx + fy * fy).sqrt();
        }
        moved
    }

    fn adjust_speed(&mut self, swinging: f64, traction: f64, n: usize) {
        let n = n as f64;
        let estimated = 0.05 * n.sqrt();
        let min_jt = estimated.sqrt();
        let max_jt: f64 = 10.0;
        let mut jt = self.params.jitter_tolerance
            * min_jt.max(max_jt.min(estimated * traction / (n * n)));
        let min_efficiency = 0.05;
        if traction > 0.0 && swinging / traction > 2.0 {
            if self.speed_efficiency > min_efficiency {
                self.speed_efficiency *= 0.5;
            }
            jt = jt.max(self.params.jitter_tolerance);
        }
        let target = if swinging > 0.0 {
            jt * self.speed_efficiency * traction / swinging
        } else {
            f64::INFINITY
        };
        if swinging > jt * traction {
            if self.speed_efficiency > min_efficiency {
                self.speed_efficiency *= 0.7;
            }
        } else if self.speed < 1000.0 {
            self.speed_efficiency *= 1.3;
        }
        let max_rise = 0.5;
        self.speed += (target - self.speed).min(max_rise * self.speed);
    }
}

/// Run `params.iterations` steps from the circular start.
pub fn layout_forceatlas2(g: &NarrativeGraph, params: LayoutParams) -> Positions {
    let mut fa = ForceAtlas2::new(g, params);
    for _ in 0..params.iterations {
        fa.step();
    }
    fa.positions()
}

/// One layout over the union so shared nodes get one position.
pub fn shared_layout(pos: &NarrativeGraph, neg: &NarrativeGraph, params: LayoutParams) -> Positions {
    layout_forceatlas2(&union_graph(pos, neg), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeType;

    fn graph(edges: &[(&str, &str)]) -> NarrativeGraph {
        let mut g = NarrativeGraph::new(None);
        for (a, b) in edges {
            let s = g.add_node(a, None);
            let t = g.add_node(b, None);
            g.add_edge(&s, &t, EdgeType::Link, 1).unwrap();
        }
        g
    }

    #[test]
    fn empty_and_zero_iterations() {
        assert!(layout_forceatlas2(&NarrativeGraph::new(None), LayoutParams::default()).is_empty());
        let g = graph(&[("a", "b"), ("b", "c")]);
        let p = layout_forceatlas2(&g, LayoutParams { iterations: 0, ..Default::default() });
        let ids: Vec<String> = g.node_ids().map(str::to_string).collect();
        let circle = circle_positions(&ids);
        for (id, c) in ids.iter().zip(circle) {
            assert_eq!(p[id], c);
        }
        let r = (3.0f64).sqrt();
        assert_eq!(p[&ids[0]], (r, 0.0));
    }

    #[test]
    fn two_nodes_stay_mirrored() {
        let g = graph(&[("a", "b")]);
        let mut fa = ForceAtlas2::new(&g, LayoutParams::default());
        for _ in 0..200 {
            fa.step();
            let p = &fa.pos;
            assert!((p[0].0 + p[1].0).abs() < 1e-6);
            assert!((p[0].1 + p[1].1).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic() {
        let g = graph(&[("a", "b"), ("b", "c"), ("c", "a"), ("c", "d")]);
        let p1 = layout_forceatlas2(&g, LayoutParams::default());
        let p2 = layout_forceatlas2(&g, LayoutParams::default());
        assert_eq!(p1, p2);
        assert!(p1.values().all(|(x, y)| x.is_finite() && y.is_finite()));
    }

    #[test]
    fn shared_layout_of_identical_graphs() {
        let g = graph(&[("a", "b"), ("b", "c")]);
        let params = LayoutParams { iterations: 50, use_weights: false, ..Default::default() };
        assert_eq!(shared_layout(&g, &g, params), layout_forceatlas2(&g, params));
    }
}
