use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{finite_diff_check, Matrix, Mode, NodeId, RowMetric, Tape, TensorError};

/// Finite-difference result for one tape primitive.
#[derive(Clone, Debug)]
pub struct PrimitiveAudit {
    pub name: &'static str,
    pub max_relative_error: f64,
    pub entries: usize,
}

const STEP: f64 = 1e-5;
/// Minimum distance from a kink (ReLU at 0, ties in max ops) at audit points.
const KINK_GAP: f64 = 1e-3;

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape")
}

fn away_from_zero(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| loop {
            let v: f64 = rng.random_range(-1.0..1.0);
            if v.abs() > KINK_GAP {
                break v;
            }
        })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape")
}

/// Columns whose entries are pairwise separated by more than the kink gap.
fn separated_columns(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for c in 0..cols {
        let mut picked: Vec<f64> = Vec::with_capacity(rows);
        while picked.len() < rows {
            let v: f64 = rng.random_range(-1.0..1.0);
            if picked.iter().all(|p| (p - v).abs() > 10.0 * KINK_GAP) {
                picked.push(v);
            }
        }
        for (r, v) in picked.into_iter().enumerate() {
            m.set(r, c, v);
        }
    }
    m
}

/// Reduces a node to a scalar through a fixed random projection.
fn project(t: &mut Tape, node: NodeId, weights: &Matrix) -> Result<NodeId, TensorError> {
    let w = t.input(weights.clone());
    let prod = t.hadamard(node, w)?;
    Ok(t.sum_all(prod))
}

fn audit_op<F>(
    name: &'static str,
    params: Vec<Matrix>,
    out_shape: (usize, usize),
    rng: &mut ChaCha8Rng,
    build: F,
) -> PrimitiveAudit
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId, TensorError>,
{
    let proj = uniform(rng, out_shape.0, out_shape.1);
    let f = |p: &[Matrix]| -> Result<(f64, Vec<Matrix>), TensorError> {
        let mut t = Tape::new(Mode::Train);
        let ids: Vec<NodeId> = p.iter().map(|m| t.input(m.clone())).collect();
        let out = build(&mut t, &ids)?;
        let loss = if t.value(out).shape() == (1, 1) {
            out
        } else {
            project(&mut t, out, &proj)?
        };
        let value = t.value(loss).data()[0];
        let g = t.backward(loss)?;
        Ok((value, ids.iter().map(|&id| g.wrt(id)).collect()))
    };
    let audit = finite_diff_check(f, &params, STEP).expect("audit runs");
    PrimitiveAudit {
        name,
        max_relative_error: audit.max_relative_error,
        entries: audit.entries,
    }
}

/// Central-difference audit of every differentiable tape primitive at random
/// points kept away from kinks.
pub fn primitive_audits(seed: u64) -> Vec<PrimitiveAudit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let p = vec![uniform(&mut rng, 3, 4), uniform(&mut rng, 4, 2)];
    out.push(audit_op("matmul", p, (3, 2), &mut rng, |t, x| t.matmul(x[0], x[1])));

    let p = vec![uniform(&mut rng, 3, 4), uniform(&mut rng, 3, 4)];
    out.push(audit_op("add", p, (3, 4), &mut rng, |t, x| t.add(x[0], x[1])));

    let p = vec![uniform(&mut rng, 3, 4), uniform(&mut rng, 1, 4)];
    out.push(audit_op("add-broadcast", p, (3, 4), &mut rng, |t, x| t.add(x[0], x[1])));

    let p = vec![uniform(&mut rng, 3, 4), uniform(&mut rng, 3, 4)];
    out.push(audit_op("hadamard", p, (3, 4), &mut rng, |t, x| t.hadamard(x[0], x[1])));

    let p = vec![away_from_zero(&mut rng, 4, 3)];
    out.push(audit_op("relu", p, (4, 3), &mut rng, |t, x| Ok(t.relu(x[0]))));

    let p = vec![uniform(&mut rng, 4, 3)];
    out.push(audit_op("dropout", p, (4, 3), &mut rng, |t, x| {
        let mut mask_rng = ChaCha8Rng::seed_from_u64(99);
        t.dropout(x[0], 0.3, &mut mask_rng)
    }));

    let a = uniform(&mut rng, 3, 4);
    let delta = away_from_zero(&mut rng, 3, 4);
    let b = a.zip_with(&delta, "audit", |x, d| x + d).expect("shape");
    out.push(audit_op("elementwise-max", vec![a, b], (3, 4), &mut rng, |t, x| {
        t.elementwise_max(x[0], x[1])
    }));

    let p = vec![separated_columns(&mut rng, 5, 3)];
    out.push(audit_op("column-max", p, (1, 3), &mut rng, |t, x| t.column_max(x[0])));

    let p = vec![uniform(&mut rng, 3, 2), uniform(&mut rng, 3, 3)];
    out.push(audit_op("concat-columns", p, (3, 5), &mut rng, |t, x| {
        t.concat_columns(&[x[0], x[1]])
    }));

    let p = vec![uniform(&mut rng, 4, 3)];
    out.push(audit_op("row-sum", p, (4, 1), &mut rng, |t, x| Ok(t.row_sum(x[0]))));

    let p = vec![uniform(&mut rng, 4, 3)];
    out.push(audit_op("sum-all", p, (1, 1), &mut rng, |t, x| Ok(t.sum_all(x[0]))));

    let p = vec![uniform(&mut rng, 3, 5), uniform(&mut rng, 4, 5)];
    out.push(audit_op("cosine-cost", p, (3, 4), &mut rng, |t, x| {
        t.cosine_cost(x[0], x[1])
    }));

    let p = vec![uniform(&mut rng, 3, 3)];
    out.push(audit_op("scalar-scale", p, (3, 3), &mut rng, |t, x| {
        Ok(t.scalar_scale(x[0], -1.7))
    }));

    let p = vec![uniform(&mut rng, 1, 5).scale(3.0)];
    out.push(audit_op("softmax-cross-entropy", p, (1, 1), &mut rng, |t, x| {
        t.softmax_cross_entropy(x[0], 2)
    }));

    // The transport node is linear in its precomputed sensitivities, so the
    // audit checks the routing of those sensitivities to each operand.
    let gc = uniform(&mut rng, 3, 2);
    let g1 = uniform(&mut rng, 3, 1);
    let g2 = uniform(&mut rng, 2, 1);
    let p = vec![
        uniform(&mut rng, 3, 2),
        uniform(&mut rng, 3, 1),
        uniform(&mut rng, 2, 1),
    ];
    out.push(audit_op("ot-loss", p, (1, 1), &mut rng, move |t, x| {
        let dot = |a: &Matrix, b: &Matrix| -> f64 { a.data().iter().zip(b.data()).map(|(p, q)| p * q).sum() };
        let value = dot(t.value(x[0]), &gc) + dot(t.value(x[1]), &g1) + dot(t.value(x[2]), &g2);
        t.ot_loss(x[0], x[1], x[2], value, gc.clone(), g1.clone(), g2.clone())
    }));

    for (name, metric) in [
        ("aligned-manhattan", RowMetric::Manhattan),
        ("aligned-euclidean", RowMetric::Euclidean),
        ("aligned-cosine", RowMetric::Cosine),
    ] {
        let a = uniform(&mut rng, 3, 4);
        let delta = away_from_zero(&mut rng, 3, 4);
        let b = a.zip_with(&delta, "audit", |x, d| x + d).expect("shape");
        out.push(audit_op(name, vec![a, b], (1, 1), &mut rng, move |t, x| {
            t.aligned_distance(x[0], x[1], metric)
        }));
    }

    out
}
