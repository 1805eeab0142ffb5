#![allow(dead_code)]

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes a benchmark in the flat-file layout where class 1 graphs, and only
/// those, contain a node with label 2.
pub fn write_marker_dataset(dir: &Path, name: &str, graphs: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut edges, mut indicator, mut labels, mut node_labels) =
        (String::new(), String::new(), String::new(), String::new());
    let mut offset = 0usize;
    for g in 0..graphs {
        let class = g % 2;
        let n = rng.random_range(4..=8);
        let marker = rng.random_range(0..n);
        let mut add = |u: usize, v: usize| {
            edges.push_str(&format!(
                "{}, {}\n{}, {}\n",
                offset + u + 1,
                offset + v + 1,
                offset + v + 1,
                offset + u + 1
            ));
        };
        for i in 0..n {
            add(i, (i + 1) % n);
        }
        for i in 0..n {
            for j in i + 2..n {
                if (i, j) != (0, n - 1) && rng.random::<f64>() < 0.2 {
                    add(i, j);
                }
            }
        }
        for i in 0..n {
            indicator.push_str(&format!("{}\n", g + 1));
            let label = if class == 1 && i == marker {
                2
            } else {
                rng.random_range(0..2)
            };
            node_labels.push_str(&format!("{label}\n"));
        }
        labels.push_str(&format!("{}\n", if class == 1 { 1 } else { -1 }));
        offset += n;
    }
    let w = |suffix: &str, body: &str| fs::write(dir.join(format!("{name}_{suffix}.txt")), body).unwrap();
    w("A", &edges);
    w("graph_indicator", &indicator);
    w("graph_labels", &labels);
    w("node_labels", &node_labels);
}
