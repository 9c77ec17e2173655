//! Graph statistics panel: size, degrees, components, clustering,
//! assortativity, reciprocity.
//!
//! Conventions: clustering is computed on the undirected simple projection
//! (nodes of degree < 2 contribute 0 to the average); assortativity is the
//! Pearson correlation of (source out-degree, target in-degree) over
//! directed edges; reciprocity is the fraction of directed edges whose
//! reverse also exists.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{NodeId, SituationalGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    /// Absent when node_count < 2.
    pub density: Option<f64>,
    pub avg_in_degree: f64,
    pub avg_out_degree: f64,
    pub max_in_degree: usize,
    pub max_out_degree: usize,
    pub scc_count: usize,
    pub wcc_count: usize,
    pub avg_clustering: f64,
    /// Absent when node_count < 2 or a degree sequence is constant.
    pub degree_assortativity: Option<f64>,
    pub reciprocity: f64,
}

pub fn compute_stats(graph: &SituationalGraph) -> GraphStats {
    compute_stats_threaded(graph, 1)
}

/// Same panel with per-node clustering fanned out over worker threads; the
/// reduction order is fixed, so results match the single-threaded path.
pub fn compute_stats_threaded(graph: &SituationalGraph, threads: usize) -> GraphStats {
    let node_count = graph.node_count();
    let edge_count = graph.triple_count();

    let mut in_degree: BTreeMap<&NodeId, usize> = BTreeMap::new();
    let mut out_degree: BTreeMap<&NodeId, usize> = BTreeMap::new();
    let mut directed_pairs: BTreeSet<(&NodeId, &NodeId)> = BTreeSet::new();
    for t in graph.triples() {
        *out_degree.entry(&t.head).or_default() += 1;
        *in_degree.entry(&t.tail).or_default() += 1;
        directed_pairs.insert((&t.head, &t.tail));
    }

    let density = if node_count >= 2 {
        Some(edge_count as f64 / (node_count as f64 * (node_count as f64 - 1.0)))
    } else {
        None
    };
    let avg_degree = if node_count > 0 {
        edge_count as f64 / node_count as f64
    } else {
        0.0
    };
    let max_in_degree = in_degree.values().copied().max().unwrap_or(0);
    let max_out_degree = out_degree.values().copied().max().unwrap_or(0);

    let wcc_count = graph
        .weakly_connected_components()
        .values()
        .copied()
        .collect::<BTreeSet<usize>>()
        .len();
    let scc_count = strongly_connected_component_count(graph);

    let reciprocity = if edge_count > 0 {
        let reciprocated = graph
            .triples()
            .filter(|t| directed_pairs.contains(&(&t.tail, &t.head)))
            .count();
        reciprocated as f64 / edge_count as f64
    } else {
        0.0
    };

    GraphStats {
        node_count,
        edge_count,
        density,
        avg_in_degree: avg_degree,
        avg_out_degree: avg_degree,
        max_in_degree,
        max_out_degree,
        scc_count,
        wcc_count,
        avg_clustering: average_clustering(graph, threads),
        degree_assortativity: degree_assortativity(graph, &out_degree, &in_degree),
        reciprocity,
    }
}

/// Tarjan's algorithm, iterative.
fn strongly_connected_component_count(graph: &SituationalGraph) -> usize {
    let ids: Vec<&NodeId> = graph.nodes().map(|n| &n.id).collect();
    let index_of: BTreeMap<&NodeId, usize> =
        ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
    for t in graph.triples() {
        adjacency[index_of[&t.head]].push(index_of[&t.tail]);
    }

    const UNVISITED: usize = usize::MAX;
    let n = ids.len();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut components = 0usize;

    for start in 0..n {
        if index[start] != UNVISITED {
            continue;
        }
        // (node, next child position) call frames.
        let mut frames: Vec<(usize, usize)> = vec![(start, 0)];
        while let Some((v, child)) = frames.pop() {
            if child == 0 {
                index[v] = next_index;
                lowlink[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if child < adjacency[v].len() {
                let w = adjacency[v][child];
                frames.push((v, child + 1));
                if index[w] == UNVISITED {
                    frames.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            } else {
                if lowlink[v] == index[v] {
                    components += 1;
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        if w == v {
                            break;
                        }
                    }
                }
                if let Some(&(parent, _)) = frames.last() {
                    lowlink[parent] = lowlink[parent].min(lowlink[v]);
                }
            }
        }
    }
    components
}

/// Average local clustering coefficient of the undirected simple projection.
fn average_clustering(graph: &SituationalGraph, threads: usize) -> f64 {
    if graph.node_count() == 0 {
        return 0.0;
    }
    let mut neighbors: BTreeMap<&NodeId, BTreeSet<&NodeId>> = BTreeMap::new();
    for t in graph.triples() {
        if t.head == t.tail {
            continue;
        }
        neighbors.entry(&t.head).or_default().insert(&t.tail);
        neighbors.entry(&t.tail).or_default().insert(&t.head);
    }
    let nodes: Vec<&NodeId> = graph.nodes().map(|n| &n.id).collect();
    let coefficients = crate::util::parallel_map(&nodes, threads, |id| {
        let Some(adjacent) = neighbors.get(*id) else {
            return 0.0;
        };
        let k = adjacent.len();
        if k < 2 {
            return 0.0;
        }
        let mut links = 0usize;
        let adjacent_vec: Vec<&&NodeId> = adjacent.iter().collect();
        for i in 0..adjacent_vec.len() {
            for j in (i + 1)..adjacent_vec.len() {
                if neighbors[*adjacent_vec[i]].contains(*adjacent_vec[j]) {
                    links += 1;
                }
            }
        }
        2.0 * links as f64 / (k as f64 * (k as f64 - 1.0))
    });
    // Ordered serial reduction keeps the sum independent of thread count.
    coefficients.iter().sum::<f64>() / graph.node_count() as f64
}

/// Pearson correlation of (out-degree of source, in-degree of target) over
/// directed edges. None when degenerate.
fn degree_assortativity(
    graph: &SituationalGraph,
    out_degree: &BTreeMap<&NodeId, usize>,
    in_degree: &BTreeMap<&NodeId, usize>,
) -> Option<f64> {
    if graph.node_count() < 2 || graph.triple_count() == 0 {
        return None;
    }
    let m = graph.triple_count() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for t in graph.triples() {
        let x = out_degree.get(&t.head).copied().unwrap_or(0) as f64;
        let y = in_degree.get(&t.tail).copied().unwrap_or(0) as f64;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    let var_x = sxx / m - (sx / m) * (sx / m);
    let var_y = syy / m - (sy / m) * (sy / m);
    if var_x <= 0.0 || var_y <= 0.0 {
        return None;
    }
    Some((sxy / m - (sx / m) * (sy / m)) / (var_x * var_y).sqrt())
}

/// Aligned text panel.
pub fn render_text(stats: &GraphStats) -> String {
    let fmt_opt = |value: Option<f64>| match value {
        Some(v) => format!("{v:.6}"),
        None => "n/a".to_string(),
    };
    let rows = [
        ("nodes", stats.node_count.to_string()),
        ("edges", stats.edge_count.to_string()),
        ("density", fmt_opt(stats.density)),
        ("avg_in_degree", format!("{:.6}", stats.avg_in_degree)),
        ("avg_out_degree", format!("{:.6}", stats.avg_out_degree)),
        ("max_in_degree", stats.max_in_degree.to_string()),
        ("max_out_degree", stats.max_out_degree.to_string()),
        ("scc_count", stats.scc_count.to_string()),
        ("wcc_count", stats.wcc_count.to_string()),
        ("avg_clustering", format!("{:.6}", stats.avg_clustering)),
        (
            "degree_assortativity",
            fmt_opt(stats.degree_assortativity),
        ),
        ("reciprocity", format!("{:.6}", stats.reciprocity)),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter()
        .map(|(k, v)| format!("{k:<width$}  {v}\n"))
        .collect()
}

/// One-header-one-row CSV.
pub fn render_csv(stats: &GraphStats) -> String {
    let opt = |value: Option<f64>| value.map(|v| v.to_string()).unwrap_or_default();
    format!(
        "nodes,edges,density,avg_in_degree,avg_out_degree,max_in_degree,max_out_degree,scc_count,wcc_count,avg_clustering,degree_assortativity,reciprocity\n{},{},{},{},{},{},{},{},{},{},{},{}\n",
        stats.node_count,
        stats.edge_count,
        opt(stats.density),
        stats.avg_in_degree,
        stats.avg_out_degree,
        stats.max_in_degree,
        stats.max_out_degree,
        stats.scc_count,
        stats.wcc_count,
        stats.avg_clustering,
        opt(stats.degree_assortativity),
        stats.reciprocity,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Node, NodeKind, RecordingKey, RelationKind, Triple};
    use crate::ingest::AssociationPolicy;
    use crate::synth::{components_from_annotations, generate_synthetic, SynthConfig};
    use crate::vocab::Vocabulary;

    fn edge_graph() -> SituationalGraph {
        let key = RecordingKey::new("sawing", "subject_1", 1);
        let node = |id: &str, kind, label: &str| {
            (
                Node {
                    id: NodeId::new(id),
                    kind,
                    label: label.to_string(),
                },
                key.clone(),
            )
        };
        SituationalGraph::from_parts(
            vec![
                node("a", NodeKind::SubAction, "approach"),
                node("b", NodeKind::SubAction, "saw"),
            ],
            vec![Triple::new(
                NodeId::new("a"),
                RelationKind::HasNext,
                NodeId::new("b"),
            )],
        )
        .unwrap()
    }

    #[test]
    fn single_edge_graph() {
        let stats = compute_stats(&edge_graph());
        assert_eq!(stats.node_count, 2);
        assert_eq!(stats.edge_count, 1);
        assert_eq!(stats.density, Some(0.5));
        assert_eq!(stats.reciprocity, 0.0);
        assert_eq!(stats.scc_count, 2);
        assert_eq!(stats.wcc_count, 1);
        assert_eq!(stats.avg_clustering, 0.0);
        assert_eq!(stats.degree_assortativity, None);
    }

    #[test]
    fn density_identity_holds_exactly() {
        let annotations = generate_synthetic(&SynthConfig::new(4, 2, 3), 5).unwrap();
        let components = components_from_annotations(&annotations, &AssociationPolicy::default());
        let g = SituationalGraph::build_graph(&components, &Vocabulary::default()).unwrap();
        let stats = compute_stats(&g);
        let n = stats.node_count as f64;
        let recovered = stats.density.unwrap() * n * (n - 1.0);
        assert!((recovered - stats.edge_count as f64).abs() < 1e-9);
        // Acyclicity: every node is its own SCC; reciprocity 0.
        assert_eq!(stats.scc_count, stats.node_count);
        assert_eq!(stats.reciprocity, 0.0);
        assert_eq!(stats.wcc_count, g.recording_keys().len());
    }

    /// Naive adjacency-matrix recomputation of every statistic.
    #[test]
    fn random_graph_matches_bruteforce_oracle() {
        let annotations = generate_synthetic(&SynthConfig::new(3, 2, 2), 13).unwrap();
        let components = components_from_annotations(&annotations, &AssociationPolicy::default());
        let g = SituationalGraph::build_graph(&components, &Vocabulary::default()).unwrap();
        let stats = compute_stats(&g);

        let ids: Vec<NodeId> = g.nodes().map(|n| n.id.clone()).collect();
        let idx: BTreeMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let n = ids.len();
        let mut adj = vec![vec![false; n]; n];
        for t in g.triples() {
            adj[idx[&t.head]][idx[&t.tail]] = true;
        }
        let edges: usize = adj.iter().flatten().filter(|b| **b).count();
        assert_eq!(edges, stats.edge_count);

        // Degrees.
        let out: Vec<usize> = (0..n).map(|i| (0..n).filter(|&j| adj[i][j]).count()).collect();
        let inn: Vec<usize> = (0..n).map(|j| (0..n).filter(|&i| adj[i][j]).count()).collect();
        assert_eq!(out.iter().max().copied().unwrap_or(0), stats.max_out_degree);
        assert_eq!(inn.iter().max().copied().unwrap_or(0), stats.max_in_degree);

        // Reciprocity.
        let mut reciprocated = 0usize;
        for i in 0..n {
            for j in 0..n {
                if adj[i][j] && adj[j][i] {
                    reciprocated += 1;
                }
            }
        }
        assert!((stats.reciprocity - reciprocated as f64 / edges as f64).abs() < 1e-12);

        // WCC by repeated flood fill over the symmetrized matrix.
        let mut seen = vec![false; n];
        let mut wcc = 0usize;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            wcc += 1;
            let mut queue = vec![s];
            seen[s] = true;
            while let Some(v) = queue.pop() {
                for w in 0..n {
                    if (adj[v][w] || adj[w][v]) && !seen[w] {
                        seen[w] = true;
                        queue.push(w);
                    }
                }
            }
        }
        assert_eq!(wcc, stats.wcc_count);

        // SCC count by pairwise reachability (Floyd-Warshall closure).
        let mut reach = adj.clone();
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        let mut scc_seen = vec![false; n];
        let mut scc = 0usize;
        for i in 0..n {
            if scc_seen[i] {
                continue;
            }
            scc += 1;
            scc_seen[i] = true;
            for j in (i + 1)..n {
                if reach[i][j] && reach[j][i] {
                    scc_seen[j] = true;
                }
            }
        }
        assert_eq!(scc, stats.scc_count);

        // Clustering on the undirected simple projection.
        let mut und = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j && (adj[i][j] || adj[j][i]) {
                    und[i][j] = true;
                    und[j][i] = true;
                }
            }
        }
        let mut clustering_total = 0.0;
        for v in 0..n {
            let neigh: Vec<usize> = (0..n).filter(|&w| und[v][w]).collect();
            let k = neigh.len();
            if k < 2 {
                continue;
            }
            let mut links = 0usize;
            for a in 0..k {
                for b in (a + 1)..k {
                    if und[neigh[a]][neigh[b]] {
                        links += 1;
                    }
                }
            }
            clustering_total += 2.0 * links as f64 / (k as f64 * (k as f64 - 1.0));
        }
        assert!((clustering_total / n as f64 - stats.avg_clustering).abs() < 1e-12);

        // Assortativity via the plain two-pass Pearson formula.
        let xs: Vec<f64> = g.triples().map(|t| out[idx[&t.head]] as f64).collect();
        let ys: Vec<f64> = g.triples().map(|t| inn[idx[&t.tail]] as f64).collect();
        let m = xs.len() as f64;
        let mean_x = xs.iter().sum::<f64>() / m;
        let mean_y = ys.iter().sum::<f64>() / m;
        let cov = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mean_x) * (y - mean_y))
            .sum::<f64>()
            / m;
        let sd_x = (xs.iter().map(|x| (x - mean_x).powi(2)).sum::<f64>() / m).sqrt();
        let sd_y = (ys.iter().map(|y| (y - mean_y).powi(2)).sum::<f64>() / m).sqrt();
        let expected = cov / (sd_x * sd_y);
        assert!((stats.degree_assortativity.unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn threaded_stats_match_single_threaded_exactly() {
        let annotations = generate_synthetic(&SynthConfig::new(5, 2, 3), 21).unwrap();
        let components = components_from_annotations(&annotations, &AssociationPolicy::default());
        let g = SituationalGraph::build_graph(&components, &Vocabulary::default()).unwrap();
        let serial = compute_stats(&g);
        for threads in [2, 3, 8] {
            assert_eq!(compute_stats_threaded(&g, threads), serial);
        }
    }

    #[test]
    fn renders_have_all_fields() {
        let stats = compute_stats(&edge_graph());
        let text = render_text(&stats);
        assert!(text.contains("wcc_count"));
        assert!(text.contains("degree_assortativity"));
        let csv = render_csv(&stats);
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 12);
    }
}
