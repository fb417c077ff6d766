//! Binary container for fitted models.
//!
//! Layout, all integers little-endian `u64` unless noted:
//!
//! | field | encoding |
//! |---|---|
//! | magic | 8 bytes `CALGNN01` |
//! | kind | 1 byte |
//! | depth, width, heads | `u64` each |
//! | appnp_alpha | `f64` |
//! | num_features, num_classes | `u64` each |
//! | matrix count | `u64` |
//! | per matrix | name length, UTF-8 name, rows, cols, `rows·cols` `f64` row-major |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FittedModel, ModelKind, ModelSpec};
use crate::error::{Error, Result};
use crate::nn::{DenseMatrix, ParameterSet};

pub const MODEL_MAGIC: &[u8; 8] = b"CALGNN01";

pub fn write_model(model: &FittedModel, w: &mut impl Write) -> std::io::Result<()> {
    let spec = &model.spec;
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&[spec.kind.code()])?;
    for v in [spec.depth, spec.width, spec.heads] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&spec.appnp_alpha.to_le_bytes())?;
    for v in [model.num_features, model.num_classes, model.params.len()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for (name, m) in model.params.iter() {
        w.write_all(&(name.len() as u64).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(m.rows() as u64).to_le_bytes())?;
        w.write_all(&(m.cols() as u64).to_le_bytes())?;
        for v in m.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(format!("corrupt model file: {}", msg.into()))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| corrupt("truncated"))?;
    Ok(u64::from_le_bytes(b))
}

fn read_usize(r: &mut impl Read, limit: u64, what: &str) -> Result<usize> {
    let v = read_u64(r)?;
    if v > limit {
        return Err(corrupt(format!("{what} {v} exceeds {limit}")));
    }
    Ok(v as usize)
}

pub fn read_model(r: &mut impl Read) -> Result<FittedModel> {
    const LIMIT: u64 = 1 << 32;
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| corrupt("truncated"))?;
    if &magic != MODEL_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let mut code = [0u8; 1];
    r.read_exact(&mut code).map_err(|_| corrupt("truncated"))?;
    let kind = ModelKind::from_code(code[0]).ok_or_else(|| corrupt("unknown model kind"))?;
    let depth = read_usize(r, LIMIT, "depth")?;
    let width = read_usize(r, LIMIT, "width")?;
    let heads = read_usize(r, LIMIT, "heads")?;
    let appnp_alpha = f64::from_bits(read_u64(r)?);
    let spec = ModelSpec {
        kind,
        depth,
        width,
        heads,
        appnp_alpha,
    };
    spec.validate()?;
    let num_features = read_usize(r, LIMIT, "num_features")?;
    let num_classes = read_usize(r, LIMIT, "num_classes")?;
    let count = read_usize(r, 1 << 16, "matrix count")?;
    let mut params = ParameterSet::new();
    for _ in 0..count {
        let len = read_usize(r, 1 << 12, "name length")?;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(|_| corrupt("truncated"))?;
        let name = String::from_utf8(name).map_err(|_| corrupt("non-UTF-8 name"))?;
        let rows = read_usize(r, LIMIT, "rows")?;
        let cols = read_usize(r, LIMIT, "cols")?;
        let mut data = Vec::with_capacity((rows * cols).min(1 << 24));
        for _ in 0..rows * cols {
            data.push(f64::from_bits(read_u64(r)?));
        }
        params.insert(name, DenseMatrix::from_vec(rows, cols, data)?)?;
    }
    let expected = super::init_params(
        &spec,
        num_features,
        num_classes,
        &mut crate::rng::stream(0, "layout"),
    )?;
    if !expected.same_layout(&params) {
        return Err(corrupt("parameter layout does not match the model spec"));
    }
    Ok(FittedModel {
        spec,
        num_features,
        num_classes,
        params,
    })
}

pub fn save_model(model: &FittedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(model, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FittedModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(&mut BufReader::new(file))
}
