use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::GraphIoError;

/// Contents of a TUDataset directory with 0-based indices.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub name: String,
    /// Graph index of every node.
    pub graph_of_node: Vec<usize>,
    /// Node-index pairs as listed in the edge file (usually both directions).
    pub edges: Vec<(usize, usize)>,
    /// Raw graph labels as written in the file.
    pub graph_labels: Vec<i64>,
    pub node_labels: Option<Vec<i64>>,
    pub node_attributes: Option<Vec<Vec<f64>>>,
}

impl RawDataset {
    pub fn num_graphs(&self) -> usize {
        self.graph_labels.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.graph_of_node.len()
    }

    /// Distinct undirected edges, self loops excluded.
    pub fn num_edges(&self) -> usize {
        self.edges
            .iter()
            .filter(|(u, v)| u != v)
            .map(|&(u, v)| (u.min(v), u.max(v)))
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Sorted distinct graph labels; a label's position is its class index.
    pub fn class_values(&self) -> Vec<i64> {
        self.graph_labels
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn num_classes(&self) -> usize {
        self.class_values().len()
    }

    /// Class index of every graph.
    pub fn class_indices(&self) -> Vec<usize> {
        let values = self.class_values();
        self.graph_labels
            .iter()
            .map(|l| values.binary_search(l).expect("label present"))
            .collect()
    }

    pub fn avg_nodes(&self) -> f64 {
        if self.num_graphs() == 0 {
            return 0.0;
        }
        self.num_nodes() as f64 / self.num_graphs() as f64
    }

    /// Node indices of every graph, in file order.
    pub fn graph_nodes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_graphs()];
        for (node, &g) in self.graph_of_node.iter().enumerate() {
            out[g].push(node);
        }
        out
    }
}

/// Finds the directory holding `<name>_A.txt`: either `root` itself or
/// `root/<name>`.
pub fn locate_dataset(root: &Path, name: &str) -> Option<PathBuf> {
    [root.join(name), root.to_path_buf()]
        .into_iter()
        .find(|dir| dir.join(format!("{name}_A.txt")).is_file())
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, GraphIoError> {
    if !path.is_file() {
        return Err(GraphIoError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn parse_token<T: FromStr>(tok: &str, path: &Path, line: usize) -> Result<T, GraphIoError> {
    tok.trim().parse::<T>().map_err(|_| GraphIoError::Parse {
        file: path.to_path_buf(),
        line,
        msg: format!("malformed number `{}`", tok.trim()),
    })
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> GraphIoError {
    GraphIoError::Parse {
        file: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads `<name>_A.txt`, `<name>_graph_indicator.txt`,
/// `<name>_graph_labels.txt` and, when present, `<name>_node_labels.txt` and
/// `<name>_node_attributes.txt` from `dir`.
pub fn parse_tudataset(dir: &Path, name: &str) -> Result<RawDataset, GraphIoError> {
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));

    let indicator_path = file("graph_indicator");
    let mut graph_of_node = Vec::new();
    for (line, text) in read_lines(&indicator_path)? {
        let g: usize = parse_token(&text, &indicator_path, line)?;
        if g == 0 {
            return Err(parse_error(&indicator_path, line, "graph ids are 1-based"));
        }
        graph_of_node.push(g - 1);
    }

    let labels_path = file("graph_labels");
    let mut graph_labels = Vec::new();
    for (line, text) in read_lines(&labels_path)? {
        graph_labels.push(parse_token::<i64>(&text, &labels_path, line)?);
    }
    if let Some(&max) = graph_of_node.iter().max() {
        if max >= graph_labels.len() {
            return Err(parse_error(
                &indicator_path,
                graph_of_node.iter().position(|&g| g == max).unwrap() + 1,
                format!("graph {} has no label ({} labels)", max + 1, graph_labels.len()),
            ));
        }
    }

    let edges_path = file("A");
    let mut edges = Vec::new();
    for (line, text) in read_lines(&edges_path)? {
        let mut parts = text.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_error(&edges_path, line, "expected `u, v`"));
        };
        let u: usize = parse_token(a, &edges_path, line)?;
        let v: usize = parse_token(b, &edges_path, line)?;
        let n = graph_of_node.len();
        if u == 0 || v == 0 || u > n || v > n {
            return Err(parse_error(
                &edges_path,
                line,
                format!("node index out of range 1..={n}"),
            ));
        }
        let (u, v) = (u - 1, v - 1);
        if graph_of_node[u] != graph_of_node[v] {
            return Err(GraphIoError::CrossGraphEdge {
                file: edges_path,
                line,
                u: u + 1,
                v: v + 1,
            });
        }
        edges.push((u, v));
    }

    let node_labels_path = file("node_labels");
    let node_labels = if node_labels_path.is_file() {
        let mut out = Vec::new();
        for (line, text) in read_lines(&node_labels_path)? {
            // multi-column label files carry the categorical label first
            let first = text.split(',').next().unwrap_or("");
            out.push(parse_token::<i64>(first, &node_labels_path, line)?);
        }
        check_len(&node_labels_path, out.len(), graph_of_node.len())?;
        Some(out)
    } else {
        None
    };

    let attr_path = file("node_attributes");
    let node_attributes = if attr_path.is_file() {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for (line, text) in read_lines(&attr_path)? {
            let row = text
                .split(',')
                .map(|t| parse_token::<f64>(t, &attr_path, line))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(first) = out.first() {
                if first.len() != row.len() {
                    return Err(parse_error(
                        &attr_path,
                        line,
                        format!("expected {} attributes, found {}", first.len(), row.len()),
                    ));
                }
            }
            out.push(row);
        }
        check_len(&attr_path, out.len(), graph_of_node.len())?;
        Some(out)
    } else {
        None
    };

    Ok(RawDataset {
        name: name.to_string(),
        graph_of_node,
        edges,
        graph_labels,
        node_labels,
        node_attributes,
    })
}

fn check_len(path: &Path, found: usize, nodes: usize) -> Result<(), GraphIoError> {
    if found != nodes {
        return Err(parse_error(
            path,
            found.min(nodes) + 1,
            format!("{found} rows for {nodes} nodes"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn write_fixture(dir: &Path) {
        let w = |suffix: &str, body: &str| fs::write(dir.join(format!("TOY_{suffix}.txt")), body).unwrap();
        w("A", "1, 2\n2, 1\n3, 4\n4, 3\n4, 5\n5, 4\n");
        w("graph_indicator", "1\n1\n2\n2\n2\n");
        w("graph_labels", "-1\n1\n");
        w("node_labels", "0\n1\n1\n0\n1\n");
    }

    #[test]
    fn fixture_counts() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let raw = parse_tudataset(dir.path(), "TOY").unwrap();
        assert_eq!(raw.num_graphs(), 2);
        assert_eq!(raw.num_nodes(), 5);
        assert_eq!(raw.num_edges(), 3);
        assert_eq!(raw.num_classes(), 2);
        assert_eq!(raw.class_indices(), vec![0, 1]);
        assert_eq!(raw.graph_nodes(), vec![vec![0, 1], vec![2, 3, 4]]);
        assert_eq!(raw.avg_nodes(), 2.5);
        assert!(raw.node_attributes.is_none());
    }

    #[test]
    fn missing_file_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::remove_file(dir.path().join("TOY_graph_labels.txt")).unwrap();
        let err = parse_tudataset(dir.path(), "TOY").unwrap_err();
        assert!(matches!(err, GraphIoError::MissingFile(p) if p.ends_with("TOY_graph_labels.txt")));
    }

    #[test]
    fn cross_graph_edge_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(dir.path().join("TOY_A.txt"), "1, 2\n2, 3\n").unwrap();
        let err = parse_tudataset(dir.path(), "TOY").unwrap_err();
        assert!(matches!(
            err,
            GraphIoError::CrossGraphEdge {
                line: 2,
                u: 2,
                v: 3,
                ..
            }
        ));
    }

    #[test]
    fn malformed_token_has_location() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(dir.path().join("TOY_node_labels.txt"), "0\n1\nx\n0\n1\n").unwrap();
        let err = parse_tudataset(dir.path(), "TOY").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("TOY_node_labels.txt:3"), "{msg}");
    }

    #[test]
    fn locate_accepts_nested_layout() {
        let root = tempfile::tempdir().unwrap();
        let nested = root.path().join("TOY");
        fs::create_dir(&nested).unwrap();
        write_fixture(&nested);
        assert_eq!(locate_dataset(root.path(), "TOY"), Some(nested));
        assert_eq!(locate_dataset(root.path(), "OTHER"), None);
    }
}
