use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::TrainError;
use crate::gnn::{ModelConfig, ModelParams, SimilarityMode};
use crate::tensor::Matrix;

pub const CHECKPOINT_MAGIC: &str = "AMOSL-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with everything needed to rebuild its operators.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub modality2: SimilarityMode,
    pub params: ModelParams,
}

/// Text manifest terminated by `end`, then every tensor as little-endian
/// `f64` in row-major order, in manifest order.
pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut w: W) -> Result<(), TrainError> {
    let m = &ckpt.model;
    let layout = m.layout();
    writeln!(w, "{CHECKPOINT_MAGIC}")?;
    writeln!(w, "version {CHECKPOINT_VERSION}")?;
    writeln!(w, "input_dim {}", m.input_dim)?;
    writeln!(w, "num_classes {}", m.num_classes)?;
    writeln!(w, "conv {}", m.conv)?;
    writeln!(w, "fusion {}", m.fusion)?;
    writeln!(w, "dims {} {} {}", m.dims[0], m.dims[1], m.dims[2])?;
    writeln!(w, "fc_dim {}", m.fc_dim)?;
    writeln!(w, "dropout {:?}", m.dropout)?;
    writeln!(w, "modality2 {}", ckpt.modality2)?;
    writeln!(w, "tensors {}", layout.len())?;
    for (name, (r, c)) in &layout {
        writeln!(w, "tensor {name} {r} {c}")?;
    }
    writeln!(w, "end")?;
    for t in ckpt.params.tensors() {
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), TrainError> {
    let file = fs::File::create(path).map_err(|e| TrainError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    write_checkpoint(ckpt, BufWriter::new(file))
}

fn bad(msg: impl Into<String>) -> TrainError {
    TrainError::Checkpoint(msg.into())
}

fn next_line<R: BufRead>(r: &mut R) -> Result<String, TrainError> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(bad("manifest ends early"));
    }
    Ok(line.trim_end_matches(['\n', '\r']).to_string())
}

fn field<'a>(line: &'a str, key: &str) -> Result<&'a str, TrainError> {
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| bad(format!("expected `{key}`, found `{line}`")))
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, TrainError> {
    s.parse().map_err(|_| bad(format!("bad {what} `{s}`")))
}

pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<Checkpoint, TrainError> {
    if next_line(&mut r)? != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version: u32 = parse(field(&next_line(&mut r)?, "version")?, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!(
            "version {version} is not supported (expected {CHECKPOINT_VERSION})"
        )));
    }
    let input_dim = parse(field(&next_line(&mut r)?, "input_dim")?, "input_dim")?;
    let num_classes = parse(field(&next_line(&mut r)?, "num_classes")?, "num_classes")?;
    let conv = field(&next_line(&mut r)?, "conv")?
        .parse()
        .map_err(|e| bad(format!("{e}")))?;
    let fusion = field(&next_line(&mut r)?, "fusion")?
        .parse()
        .map_err(|e| bad(format!("{e}")))?;
    let dims_line = next_line(&mut r)?;
    let dims: Vec<usize> = field(&dims_line, "dims")?
        .split(' ')
        .map(|d| parse(d, "width"))
        .collect::<Result<_, _>>()?;
    let dims: [usize; 3] = dims.try_into().map_err(|_| bad("dims needs three widths"))?;
    let fc_dim = parse(field(&next_line(&mut r)?, "fc_dim")?, "fc_dim")?;
    let dropout = parse(field(&next_line(&mut r)?, "dropout")?, "dropout")?;
    let modality2 = field(&next_line(&mut r)?, "modality2")?
        .parse()
        .map_err(|e| bad(format!("{e}")))?;
    let model = ModelConfig {
        input_dim,
        num_classes,
        conv,
        fusion,
        dims,
        fc_dim,
        dropout,
    };
    model.validate()?;
    let layout = model.layout();
    let count: usize = parse(field(&next_line(&mut r)?, "tensors")?, "tensor count")?;
    if count != layout.len() {
        return Err(bad(format!("{count} tensors listed, model has {}", layout.len())));
    }
    for (name, (rows, cols)) in &layout {
        let line = next_line(&mut r)?;
        if line != format!("tensor {name} {rows} {cols}") {
            return Err(bad(format!("expected tensor {name} {rows}x{cols}, found `{line}`")));
        }
    }
    if next_line(&mut r)? != "end" {
        return Err(bad("manifest is not terminated by `end`"));
    }
    let mut tensors = Vec::with_capacity(layout.len());
    for (name, (rows, cols)) in &layout {
        let mut buf = vec![0u8; rows * cols * 8];
        r.read_exact(&mut buf)
            .map_err(|_| bad(format!("data of {name} is truncated")))?;
        let data = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push(Matrix::from_vec(*rows, *cols, data)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes after the last tensor"));
    }
    let params = ModelParams::from_tensors(&model, tensors)?;
    Ok(Checkpoint {
        model,
        modality2,
        params,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, TrainError> {
    let file = fs::File::open(path).map_err(|e| TrainError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    read_checkpoint(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{ConvSpec, Fusion};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut model = ModelConfig::new(3, 4);
        model.conv = ConvSpec::Cheb { k: 2 };
        model.fusion = Fusion::Concat;
        model.dims = [4, 6, 8];
        model.fc_dim = 5;
        let params = ModelParams::init(&model, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        Checkpoint {
            model,
            modality2: SimilarityMode::Masked,
            params,
        }
    }

    fn bytes(c: &Checkpoint) -> Vec<u8> {
        let mut out = Vec::new();
        write_checkpoint(c, &mut out).unwrap();
        out
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let b = bytes(&c);
        assert_eq!(read_checkpoint(b.as_slice()).unwrap(), c);
        let text = String::from_utf8_lossy(&b[..200]).to_string();
        assert!(text.starts_with("AMOSL-CHECKPOINT\nversion 1\n"));
    }

    #[test]
    fn corrupt_files_rejected() {
        let b = bytes(&sample());
        assert!(read_checkpoint(&b[..b.len() - 1]).is_err());
        let mut extra = b.clone();
        extra.extend_from_slice(&[0; 8]);
        assert!(read_checkpoint(extra.as_slice()).is_err());
        let renamed = String::from_utf8_lossy(&b).replacen("fc1.weight", "fc9.weight", 1);
        assert!(read_checkpoint(renamed.as_bytes()).is_err());
        assert!(read_checkpoint(&b"garbage\n"[..]).is_err());
    }
}
