mod common;

use std::collections::BTreeMap;

use common::{
    exhaustive_best_modularity, modularity_oracle, random_graph, two_triangles, weight_matrix,
};
use narrative_forge::graph::{
    detect_communities, modularity, CommunityPartition, EdgeType, NarrativeGraph,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn labels(ids: &[String], p: &CommunityPartition) -> Vec<usize> {
    ids.iter().map(|id| p.assignment[id]).collect()
}

#[test]
fn single_community_is_zero() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 3 + seed as usize % 20, 0.3);
        if g.edge_count() == 0 {
            continue;
        }
        let all: BTreeMap<String, usize> = g.node_ids().map(|id| (id.to_string(), 0)).collect();
        assert!(modularity(&g, &all).unwrap().abs() < 1e-12, "seed {seed}");
    }
}

#[test]
fn agrees_with_matrix_formula() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let g = random_graph(&mut rng, 10, 0.25);
        if g.edge_count() == 0 {
            continue;
        }
        let (ids, a) = weight_matrix(&g);
        let part: BTreeMap<String, usize> =
            ids.iter().enumerate().map(|(i, id)| (id.clone(), i % 3)).collect();
        let expect = modularity_oracle(&a, &ids.iter().map(|id| part[id]).collect::<Vec<_>>());
        assert!((modularity(&g, &part).unwrap() - expect).abs() < 1e-12);
    }
}

#[test]
fn disconnected_triangles_half() {
    let g = two_triangles();
    let p = detect_communities(&g).unwrap();
    assert_eq!(p.community_count(), 2);
    assert!((p.modularity - 0.5).abs() < 1e-12);
}

fn assert_optimal(g: &NarrativeGraph, what: &str) {
    let p = detect_communities(g).unwrap();
    let (ids, a) = weight_matrix(g);
    let found = modularity_oracle(&a, &labels(&ids, &p));
    let best = exhaustive_best_modularity(&a);
    assert!((found - p.modularity).abs() < 1e-12, "{what}: reported Q differs");
    assert!(found >= best - 1e-9, "{what}: found {found}, optimum {best}");
}

#[test]
fn small_fixture_graphs_reach_exhaustive_optimum() {
    assert_optimal(&two_triangles(), "two triangles");
    let mut k4 = NarrativeGraph::new(None);
    let ids: Vec<String> = (0..4).map(|i| k4.add_node(&format!("k{i}"), None)).collect();
    for i in 0..4 {
        for j in i + 1..4 {
            k4.add_edge(&ids[i], &ids[j], EdgeType::Link, 1).unwrap();
        }
    }
    assert_optimal(&k4, "K4");
    assert_eq!(detect_communities(&k4).unwrap().community_count(), 1);
}

/// The heuristic is not exact in general. On small random graphs it must
/// never lose to the trivial partitions and should almost always find the
/// optimum.
#[test]
fn small_random_graphs_near_exhaustive_optimum() {
    let (mut total, mut exact) = (0, 0);
    for seed in 0..500 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = 3 + (seed as usize % 6);
        let g = random_graph(&mut rng, n, 0.35);
        if g.edge_count() == 0 {
            continue;
        }
        let p = detect_communities(&g).unwrap();
        let (ids, a) = weight_matrix(&g);
        let singletons: Vec<usize> = (0..ids.len()).collect();
        assert!(p.modularity >= -1e-12, "seed {seed}");
        assert!(p.modularity >= modularity_oracle(&a, &singletons) - 1e-12);
        assert!(p.modularity <= exhaustive_best_modularity(&a) + 1e-9);
        total += 1;
        if p.modularity >= exhaustive_best_modularity(&a) - 1e-9 {
            exact += 1;
        }
    }
    assert!(exact * 100 >= total * 99, "optimal on {exact} of {total}");
}

#[test]
fn undefined_without_edges() {
    let mut g = NarrativeGraph::new(None);
    g.add_node("lonely", None);
    assert!(detect_communities(&g).is_err());
}
