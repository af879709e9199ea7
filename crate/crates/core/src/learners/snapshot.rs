//! Versioned binary snapshots of trained models, so long runs can be frozen
//! and restored without retraining.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::forest::{Forest, ForestParams};
use super::gbt::{Gbt, GbtParams};
use super::mlp::{Layer, Mlp, MlpModel, MlpParams};
use super::tree::{Node, RegressionTree};
use super::{Model, RegressorKind, RegressorSpec, TrainedRegressor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PFMD";
const VERSION: u32 = 1;

pub(super) fn save<W: Write>(model: &TrainedRegressor, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, VERSION)?;
    write_spec(&mut w, &model.spec)?;
    put_u64(&mut w, model.dim as u64)?;
    put_u64(&mut w, model.train_size as u64)?;
    match &model.model {
        Model::Forest(f) => {
            put_u64(&mut w, f.trees.len() as u64)?;
            for t in &f.trees {
                write_tree(&mut w, t)?;
            }
        }
        Model::Gbt(g) => {
            put_f64(&mut w, g.base)?;
            put_f64(&mut w, g.learning_rate)?;
            put_u64(&mut w, g.trees.len() as u64)?;
            for t in &g.trees {
                write_tree(&mut w, t)?;
            }
        }
        Model::Mlp(m) => {
            put_f64(&mut w, m.y_mean)?;
            put_u64(&mut w, m.net.layers.len() as u64)?;
            for l in &m.net.layers {
                put_u64(&mut w, l.w.nrows() as u64)?;
                put_u64(&mut w, l.w.ncols() as u64)?;
                for v in l.w.iter() {
                    put_f64(&mut w, *v)?;
                }
                for v in l.b.iter() {
                    put_f64(&mut w, *v)?;
                }
            }
        }
    }
    Ok(())
}

pub(super) fn load<R: Read>(mut r: R) -> Result<TrainedRegressor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BadSnapshot("bad magic bytes".into()));
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::BadSnapshot(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let spec = read_spec(&mut r)?;
    let dim = get_u64(&mut r)? as usize;
    let train_size = get_u64(&mut r)? as usize;
    let model = match &spec.kind {
        RegressorKind::Forest(_) => {
            let n = get_u64(&mut r)? as usize;
            let trees = (0..n)
                .map(|_| read_tree(&mut r))
                .collect::<Result<Vec<_>>>()?;
            Model::Forest(Forest { trees })
        }
        RegressorKind::Gbt(_) => {
            let base = get_f64(&mut r)?;
            let learning_rate = get_f64(&mut r)?;
            let n = get_u64(&mut r)? as usize;
            let trees = (0..n)
                .map(|_| read_tree(&mut r))
                .collect::<Result<Vec<_>>>()?;
            Model::Gbt(Gbt {
                base,
                learning_rate,
                trees,
            })
        }
        RegressorKind::Mlp(_) => {
            let y_mean = get_f64(&mut r)?;
            let n = get_u64(&mut r)? as usize;
            let mut layers = Vec::with_capacity(n);
            for _ in 0..n {
                let rows = get_u64(&mut r)? as usize;
                let cols = get_u64(&mut r)? as usize;
                let mut w = Array2::zeros((rows, cols));
                for v in w.iter_mut() {
                    *v = get_f64(&mut r)?;
                }
                let mut b = Array1::zeros(cols);
                for v in b.iter_mut() {
                    *v = get_f64(&mut r)?;
                }
                layers.push(Layer { w, b });
            }
            Model::Mlp(MlpModel {
                net: Mlp { layers },
                y_mean,
            })
        }
    };
    Ok(TrainedRegressor {
        spec,
        dim,
        train_size,
        model,
    })
}

fn write_spec<W: Write>(w: &mut W, spec: &RegressorSpec) -> Result<()> {
    match &spec.kind {
        RegressorKind::Forest(p) => {
            w.write_all(&[0u8])?;
            put_u64(w, p.n_trees as u64)?;
            put_u64(w, p.max_depth as u64)?;
            put_u64(w, p.min_leaf as u64)?;
            w.write_all(&[p.bootstrap as u8])?;
        }
        RegressorKind::Gbt(p) => {
            w.write_all(&[1u8])?;
            put_u64(w, p.n_rounds as u64)?;
            put_f64(w, p.learning_rate)?;
            put_u64(w, p.max_depth as u64)?;
        }
        RegressorKind::Mlp(p) => {
            w.write_all(&[2u8])?;
            put_u64(w, p.hidden.len() as u64)?;
            for h in &p.hidden {
                put_u64(w, *h as u64)?;
            }
            put_f64(w, p.step_size)?;
            put_u64(w, p.epochs as u64)?;
            put_u64(w, p.batch_size as u64)?;
            put_f64(w, p.momentum)?;
        }
    }
    put_u64(w, spec.seed)?;
    Ok(())
}

fn read_spec<R: Read>(r: &mut R) -> Result<RegressorSpec> {
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let kind = match tag[0] {
        0 => {
            let n_trees = get_u64(r)? as usize;
            let max_depth = get_u64(r)? as usize;
            let min_leaf = get_u64(r)? as usize;
            let mut flag = [0u8; 1];
            r.read_exact(&mut flag)?;
            RegressorKind::Forest(ForestParams {
                n_trees,
                max_depth,
                min_leaf,
                bootstrap: flag[0] != 0,
            })
        }
        1 => {
            let n_rounds = get_u64(r)? as usize;
            let learning_rate = get_f64(r)?;
            let max_depth = get_u64(r)? as usize;
            RegressorKind::Gbt(GbtParams {
                n_rounds,
                learning_rate,
                max_depth,
            })
        }
        2 => {
            let n_hidden = get_u64(r)? as usize;
            if n_hidden > 1024 {
                return Err(Error::BadSnapshot("implausible hidden layer count".into()));
            }
            let hidden = (0..n_hidden)
                .map(|_| get_u64(r).map(|v| v as usize))
                .collect::<Result<Vec<_>>>()?;
            let step_size = get_f64(r)?;
            let epochs = get_u64(r)? as usize;
            let batch_size = get_u64(r)? as usize;
            let momentum = get_f64(r)?;
            RegressorKind::Mlp(MlpParams {
                hidden,
                step_size,
                epochs,
                batch_size,
                momentum,
            })
        }
        other => return Err(Error::BadSnapshot(format!("unknown model tag {other}"))),
    };
    let seed = get_u64(r)?;
    Ok(RegressorSpec { kind, seed })
}

fn write_tree<W: Write>(w: &mut W, tree: &RegressionTree) -> Result<()> {
    put_u64(w, tree.nodes.len() as u64)?;
    for n in &tree.nodes {
        put_u32(w, n.feature as u32)?;
        put_f64(w, n.threshold)?;
        put_u32(w, n.left)?;
        put_u32(w, n.right)?;
    }
    Ok(())
}

fn read_tree<R: Read>(r: &mut R) -> Result<RegressionTree> {
    let n = get_u64(r)? as usize;
    if n == 0 || n > 1 << 28 {
        return Err(Error::BadSnapshot("implausible node count".into()));
    }
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let feature = get_u32(r)? as i32;
        let threshold = get_f64(r)?;
        let left = get_u32(r)?;
        let right = get_u32(r)?;
        nodes.push(Node {
            feature,
            threshold,
            left,
            right,
        });
    }
    Ok(RegressionTree { nodes })
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
