//! Graph serialization: triple TSV plus a companion node TSV.
//!
//! The triple file has one `head_id<TAB>relation<TAB>tail_id` line per
//! triple; the companion file (same path with `.tsv` replaced by
//! `.nodes.tsv`) has `node_id<TAB>kind<TAB>label<TAB>recording_key` lines.
//! Writes are canonical (sorted, `\n` line ends) so read/write round-trips
//! are byte-exact.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::graph::{Node, NodeId, NodeKind, RecordingKey, RelationKind, SituationalGraph, Triple};

#[derive(Debug, Error)]
pub enum TsvError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl TsvError {
    fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        TsvError::Parse {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        TsvError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Companion node file path for a triple file path.
pub fn nodes_path(triples_path: &Path) -> PathBuf {
    match triples_path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => triples_path.with_extension("nodes.tsv"),
        _ => {
            let mut name = triples_path.as_os_str().to_owned();
            name.push(".nodes.tsv");
            PathBuf::from(name)
        }
    }
}

/// Renders the canonical triple-file contents.
pub fn render_triples(graph: &SituationalGraph) -> String {
    let mut out = String::new();
    for triple in graph.triples() {
        out.push_str(triple.head.as_str());
        out.push('\t');
        out.push_str(triple.relation.name());
        out.push('\t');
        out.push_str(triple.tail.as_str());
        out.push('\n');
    }
    out
}

/// Renders the canonical node-file contents.
pub fn render_nodes(graph: &SituationalGraph) -> String {
    let mut out = String::new();
    for node in graph.nodes() {
        let key = graph
            .recording_of(&node.id)
            .expect("every node has a recording");
        out.push_str(node.id.as_str());
        out.push('\t');
        out.push_str(node.kind.name());
        out.push('\t');
        out.push_str(&node.label);
        out.push('\t');
        out.push_str(&key.to_string());
        out.push('\n');
    }
    out
}

/// Writes the triple file and its companion node file.
pub fn write_graph(graph: &SituationalGraph, triples_path: &Path) -> Result<(), TsvError> {
    fs::write(triples_path, render_triples(graph))
        .map_err(|e| TsvError::io(triples_path, e))?;
    let nodes = nodes_path(triples_path);
    fs::write(&nodes, render_nodes(graph)).map_err(|e| TsvError::io(&nodes, e))?;
    Ok(())
}

/// Reads a graph from a triple file and its companion node file.
pub fn read_graph(triples_path: &Path) -> Result<SituationalGraph, TsvError> {
    let nodes_file = nodes_path(triples_path);
    let node_text =
        fs::read_to_string(&nodes_file).map_err(|e| TsvError::io(&nodes_file, e))?;
    let triple_text =
        fs::read_to_string(triples_path).map_err(|e| TsvError::io(triples_path, e))?;
    parse_graph(&triple_text, triples_path, &node_text, &nodes_file)
}

/// Parses graph text; exposed for in-memory round-trip tests.
pub fn parse_graph(
    triple_text: &str,
    triples_path: &Path,
    node_text: &str,
    nodes_file: &Path,
) -> Result<SituationalGraph, TsvError> {
    let mut nodes: Vec<(Node, RecordingKey)> = Vec::new();
    for (idx, line) in node_text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(TsvError::parse(
                nodes_file,
                lineno,
                format!("expected 4 tab-separated columns, found {}", cols.len()),
            ));
        }
        let kind = NodeKind::parse(cols[1]).ok_or_else(|| {
            TsvError::parse(nodes_file, lineno, format!("unknown node kind {:?}", cols[1]))
        })?;
        if cols[2].is_empty() {
            return Err(TsvError::parse(nodes_file, lineno, "empty label"));
        }
        let key: RecordingKey = cols[3]
            .parse()
            .map_err(|e: String| TsvError::parse(nodes_file, lineno, e))?;
        nodes.push((
            Node {
                id: NodeId::new(cols[0]),
                kind,
                label: cols[2].to_string(),
            },
            key,
        ));
    }

    let mut triples: Vec<Triple> = Vec::new();
    for (idx, line) in triple_text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(TsvError::parse(
                triples_path,
                lineno,
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let relation = RelationKind::parse(cols[1]).ok_or_else(|| {
            TsvError::parse(
                triples_path,
                lineno,
                format!("unknown relation {:?}", cols[1]),
            )
        })?;
        triples.push(Triple::new(
            NodeId::new(cols[0]),
            relation,
            NodeId::new(cols[2]),
        ));
    }

    let triple_count = triples.len();
    SituationalGraph::from_parts(nodes, triples).map_err(|e| {
        TsvError::parse(
            triples_path,
            triple_count,
            format!("inconsistent graph files: {e}"),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ChainStep, RecordingComponent};
    use crate::vocab::Vocabulary;

    fn sample_graph() -> SituationalGraph {
        let c = RecordingComponent {
            key: RecordingKey::new("pouring", "subject_1", 2),
            chains: vec![vec![
                ChainStep::new("approach", []),
                ChainStep::new("pour", ["bottle".to_string(), "cup".to_string()]),
            ]],
        };
        SituationalGraph::build_graph(&[c], &Vocabulary::default()).unwrap()
    }

    #[test]
    fn file_round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.tsv");
        let graph = sample_graph();
        write_graph(&graph, &path).unwrap();
        let reread = read_graph(&path).unwrap();
        assert_eq!(reread, graph);
        // write(read(x)) is byte-identical to the canonical x.
        let path2 = dir.path().join("copy.tsv");
        write_graph(&reread, &path2).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            fs::read_to_string(&path2).unwrap()
        );
        assert!(path.with_extension("nodes.tsv").exists());
    }

    #[test]
    fn missing_column_reports_line_number() {
        let graph = sample_graph();
        let bad = format!("{}a\tb\n", render_triples(&graph));
        let line = bad.lines().count();
        let err = parse_graph(
            &bad,
            Path::new("graph.tsv"),
            &render_nodes(&graph),
            Path::new("graph.nodes.tsv"),
        )
        .unwrap_err();
        match err {
            TsvError::Parse { line: l, .. } => assert_eq!(l, line),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_relation_is_rejected() {
        let graph = sample_graph();
        let head = graph.triples().next().unwrap().head.clone();
        let bad = format!("{0}\tcauses\t{0}\n", head);
        let err = parse_graph(
            &bad,
            Path::new("graph.tsv"),
            &render_nodes(&graph),
            Path::new("graph.nodes.tsv"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown relation"));
    }

    #[test]
    fn nodes_path_derivation() {
        assert_eq!(
            nodes_path(Path::new("d/graph.tsv")),
            PathBuf::from("d/graph.nodes.tsv")
        );
        assert_eq!(
            nodes_path(Path::new("d/graph")),
            PathBuf::from("d/graph.nodes.tsv")
        );
    }
}
