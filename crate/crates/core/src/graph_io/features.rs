use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{GraphIoError, GraphSample, PreparedDataset, RawDataset};
use crate::tensor::Matrix;

/// Which node information becomes the feature vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FeaturePolicy {
    /// Attributes when the dataset has them, otherwise one-hot node labels.
    #[default]
    Auto,
    OneHot,
    Attributes,
    /// One-hot labels followed by attributes.
    Concat,
}

impl fmt::Display for FeaturePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeaturePolicy::Auto => "auto",
            FeaturePolicy::OneHot => "onehot",
            FeaturePolicy::Attributes => "attributes",
            FeaturePolicy::Concat => "concat",
        })
    }
}

impl FromStr for FeaturePolicy {
    type Err = GraphIoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "auto" => Ok(FeaturePolicy::Auto),
            "onehot" => Ok(FeaturePolicy::OneHot),
            "attributes" => Ok(FeaturePolicy::Attributes),
            "concat" => Ok(FeaturePolicy::Concat),
            other => Err(GraphIoError::InvalidArgument(format!(
                "unknown feature policy `{other}`"
            ))),
        }
    }
}

/// Per-graph `n×d` feature matrices and the shared dimension `d`.
pub fn build_features(raw: &RawDataset, policy: FeaturePolicy) -> Result<(Vec<Matrix>, usize), GraphIoError> {
    let (use_labels, use_attrs) = match (policy, &raw.node_labels, &raw.node_attributes) {
        (FeaturePolicy::Auto, _, Some(_)) => (false, true),
        (FeaturePolicy::Auto, Some(_), None) => (true, false),
        (FeaturePolicy::OneHot, Some(_), _) => (true, false),
        (FeaturePolicy::Attributes, _, Some(_)) => (false, true),
        (FeaturePolicy::Concat, Some(_), Some(_)) => (true, true),
        _ => {
            return Err(GraphIoError::Unsupported(format!(
                "{} lacks the node information required by the `{policy}` feature policy",
                raw.name
            )))
        }
    };

    let alphabet: Vec<i64> = if use_labels {
        raw.node_labels
            .as_ref()
            .expect("checked")
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        Vec::new()
    };
    let attr_dim = if use_attrs {
        raw.node_attributes
            .as_ref()
            .expect("checked")
            .first()
            .map_or(0, |r| r.len())
    } else {
        0
    };
    let d = alphabet.len() + attr_dim;
    if d == 0 {
        return Err(GraphIoError::Unsupported(format!(
            "{} has empty node features",
            raw.name
        )));
    }

    let mut out = Vec::with_capacity(raw.num_graphs());
    for nodes in raw.graph_nodes() {
        let mut x = Matrix::zeros(nodes.len(), d);
        for (r, &node) in nodes.iter().enumerate() {
            let row = x.row_mut(r);
            if use_labels {
                let label = raw.node_labels.as_ref().expect("checked")[node];
                row[alphabet.binary_search(&label).expect("in alphabet")] = 1.0;
            }
            if use_attrs {
                row[alphabet.len()..].copy_from_slice(&raw.node_attributes.as_ref().expect("checked")[node]);
            }
        }
        out.push(x);
    }
    Ok((out, d))
}

/// Similarity `S = exp(−D/2)` from Mahalanobis distances
/// `D_ij = ‖R (x_i − x_j)‖` with a standard-normal `R` (so `M = RᵀR`).
///
/// Off-diagonal distances are z-scored over the graph unless their standard
/// deviation is below `1e-12`; the diagonal of `S` is set to 1.
pub fn synthesize_modality(x: &Matrix, seed: u64) -> Matrix {
    synthesize_modality_with_rng(x, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn synthesize_modality_with_rng<R: Rng + ?Sized>(x: &Matrix, rng: &mut R) -> Matrix {
    let d = x.cols();
    let data = (0..d * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let r = Matrix::from_vec(d, d, data).expect("sized buffer");
    similarity(x, |diff| {
        let mut acc = 0.0;
        for i in 0..d {
            let y: f64 = r.row(i).iter().zip(diff).map(|(a, b)| a * b).sum();
            acc += y * y;
        }
        acc.sqrt()
    })
}

/// Same construction with an explicit PSD metric `M`.
pub fn synthesize_modality_with_metric(x: &Matrix, m: &Matrix) -> Result<Matrix, GraphIoError> {
    let d = x.cols();
    if m.shape() != (d, d) {
        return Err(GraphIoError::InvalidArgument(format!(
            "metric is {}x{} for {d} features",
            m.rows(),
            m.cols()
        )));
    }
    Ok(similarity(x, |diff| {
        let mut acc = 0.0;
        for i in 0..d {
            acc += diff[i] * m.row(i).iter().zip(diff).map(|(a, b)| a * b).sum::<f64>();
        }
        acc.max(0.0).sqrt()
    }))
}

fn similarity(x: &Matrix, dist: impl Fn(&[f64]) -> f64) -> Matrix {
    let n = x.rows();
    let mut dmat = Matrix::zeros(n, n);
    let mut diff = vec![0.0; x.cols()];
    for i in 0..n {
        for j in i + 1..n {
            for (o, v) in diff.iter_mut().enumerate() {
                *v = x.get(i, o) - x.get(j, o);
            }
            let v = dist(&diff);
            dmat.set(i, j, v);
            dmat.set(j, i, v);
        }
    }
    if n > 1 {
        let count = (n * (n - 1)) as f64;
        let off = || (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)));
        let mean = off().map(|(i, j)| dmat.get(i, j)).sum::<f64>() / count;
        let var = off().map(|(i, j)| (dmat.get(i, j) - mean).powi(2)).sum::<f64>() / count;
        let std = var.sqrt();
        if std >= 1e-12 {
            for (i, j) in off() {
                dmat.set(i, j, (dmat.get(i, j) - mean) / std);
            }
        }
    }
    let mut s = dmat.map(|v| (-v / 2.0).exp());
    for i in 0..n {
        s.set(i, i, 1.0);
    }
    s
}

/// Builds features, adjacency and the similarity modality for every graph.
/// Graph `g` draws its transformation from stream `g` of the seed.
pub fn prepare(raw: &RawDataset, policy: FeaturePolicy, seed: u64) -> Result<PreparedDataset, GraphIoError> {
    let (features, feature_dim) = build_features(raw, policy)?;
    let classes = raw.class_indices();
    let nodes = raw.graph_nodes();
    let mut local = vec![0usize; raw.num_nodes()];
    for list in &nodes {
        for (k, &node) in list.iter().enumerate() {
            local[node] = k;
        }
    }
    let mut adjacency: Vec<Matrix> = nodes.iter().map(|l| Matrix::zeros(l.len(), l.len())).collect();
    for &(u, v) in &raw.edges {
        if u == v {
            continue;
        }
        let a = &mut adjacency[raw.graph_of_node[u]];
        a.set(local[u], local[v], 1.0);
        a.set(local[v], local[u], 1.0);
    }

    let mut graphs = Vec::with_capacity(raw.num_graphs());
    for (g, (x, a)) in features.into_iter().zip(adjacency).enumerate() {
        if x.rows() == 0 {
            return Err(GraphIoError::Unsupported(format!("graph {} has no nodes", g + 1)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(g as u64);
        let s = synthesize_modality_with_rng(&x, &mut rng);
        graphs.push(GraphSample {
            x,
            a,
            s,
            label: classes[g],
        });
    }
    Ok(PreparedDataset {
        name: raw.name.clone(),
        num_classes: raw.num_classes(),
        feature_dim,
        graphs,
    })
}
