use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use super::{GraphIoError, GraphSample, PreparedDataset};
use crate::tensor::Matrix;

pub const PREPARED_MAGIC: &str = "AMOSL-PREPARED";
pub const PREPARED_VERSION: u32 = 1;

/// Writes a text manifest terminated by `end`, then for every graph the
/// little-endian `f64` arrays of `X`, `A` and `S` in row-major order.
pub fn write_prepared<W: Write>(ds: &PreparedDataset, mut w: W) -> Result<(), GraphIoError> {
    if ds.name.contains(char::is_whitespace) || ds.name.is_empty() {
        return Err(GraphIoError::InvalidArgument(format!(
            "dataset name `{}` must be one word",
            ds.name
        )));
    }
    writeln!(w, "{PREPARED_MAGIC}")?;
    writeln!(w, "version {PREPARED_VERSION}")?;
    writeln!(w, "name {}", ds.name)?;
    writeln!(w, "classes {}", ds.num_classes)?;
    writeln!(w, "feature_dim {}", ds.feature_dim)?;
    writeln!(w, "graphs {}", ds.graphs.len())?;
    for g in &ds.graphs {
        writeln!(w, "graph {} {}", g.nodes(), g.label)?;
    }
    writeln!(w, "end")?;
    for g in &ds.graphs {
        for m in [&g.x, &g.a, &g.s] {
            for v in m.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_prepared(ds: &PreparedDataset, path: &Path) -> Result<(), GraphIoError> {
    let file = fs::File::create(path)?;
    write_prepared(ds, std::io::BufWriter::new(file))
}

fn header_line<R: BufRead>(r: &mut R) -> Result<String, GraphIoError> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(GraphIoError::Truncated);
    }
    Ok(line.trim_end_matches(['\n', '\r']).to_string())
}

fn keyed<T: std::str::FromStr>(line: &str, key: &str) -> Result<T, GraphIoError> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| GraphIoError::Format(format!("expected `{key} <value>`, found `{line}`")))
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Matrix, GraphIoError> {
    let mut buf = vec![0u8; rows * cols * 8];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => GraphIoError::Truncated,
        _ => GraphIoError::Io(e),
    })?;
    let data = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Matrix::from_vec(rows, cols, data).expect("sized buffer"))
}

pub fn read_prepared<R: BufRead>(mut r: R) -> Result<PreparedDataset, GraphIoError> {
    let magic = header_line(&mut r)?;
    if magic != PREPARED_MAGIC {
        return Err(GraphIoError::Format(format!("bad magic `{magic}`")));
    }
    let version: u32 = keyed(&header_line(&mut r)?, "version")?;
    if version != PREPARED_VERSION {
        return Err(GraphIoError::Version {
            found: version,
            expected: PREPARED_VERSION,
        });
    }
    let name: String = keyed(&header_line(&mut r)?, "name")?;
    let num_classes: usize = keyed(&header_line(&mut r)?, "classes")?;
    let feature_dim: usize = keyed(&header_line(&mut r)?, "feature_dim")?;
    let count: usize = keyed(&header_line(&mut r)?, "graphs")?;
    let mut shapes = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let line = header_line(&mut r)?;
        let parts: Vec<&str> = line.split(' ').collect();
        match parts.as_slice() {
            ["graph", n, label] => {
                let n: usize = n
                    .parse()
                    .map_err(|_| GraphIoError::Format(format!("bad graph line `{line}`")))?;
                let label: usize = label
                    .parse()
                    .map_err(|_| GraphIoError::Format(format!("bad graph line `{line}`")))?;
                if label >= num_classes {
                    return Err(GraphIoError::Format(format!(
                        "label {label} out of {num_classes} classes"
                    )));
                }
                shapes.push((n, label));
            }
            _ => return Err(GraphIoError::Format(format!("bad graph line `{line}`"))),
        }
    }
    if header_line(&mut r)? != "end" {
        return Err(GraphIoError::Format("manifest is not terminated by `end`".into()));
    }
    let mut graphs = Vec::with_capacity(shapes.len());
    for (n, label) in shapes {
        let x = read_matrix(&mut r, n, feature_dim)?;
        let a = read_matrix(&mut r, n, n)?;
        let s = read_matrix(&mut r, n, n)?;
        graphs.push(GraphSample { x, a, s, label });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(GraphIoError::Format("trailing bytes after the last graph".into()));
    }
    Ok(PreparedDataset {
        name,
        num_classes,
        feature_dim,
        graphs,
    })
}

pub fn load_prepared(path: &Path) -> Result<PreparedDataset, GraphIoError> {
    if !path.is_file() {
        return Err(GraphIoError::MissingFile(path.to_path_buf()));
    }
    read_prepared(std::io::BufReader::new(fs::File::open(path)?))
}
