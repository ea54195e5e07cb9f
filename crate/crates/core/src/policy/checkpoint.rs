//! Policy checkpoints: magic `ICWP`, a little-endian `u32` count of
//! dimension words, the dimension words (`views, view_width, cond_dim,
//! time_dim, hidden`), then every weight as a little-endian `f64` in the
//! flat row-major layout. Metadata lives in a JSON sidecar.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DenoiseSchedule, PolicyDims, PolicyParams};
use crate::world::io::{read_json, sidecar_path, write_json};
use crate::{Error, Result};

pub const PARAMS_MAGIC: &[u8; 4] = b"ICWP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub schedule: DenoiseSchedule,
    pub dims: PolicyDims,
    /// Seeds that produced these weights: init seed, then training seed.
    pub seed_lineage: Vec<u64>,
    /// Training steps applied since initialisation.
    pub step: usize,
}

pub fn write_params<W: Write>(mut w: W, params: &PolicyParams) -> std::io::Result<()> {
    let d = params.dims();
    let words = [d.views, d.view_width, d.cond_dim, d.time_dim, d.hidden];
    w.write_all(PARAMS_MAGIC)?;
    w.write_all(&(words.len() as u32).to_le_bytes())?;
    for v in words {
        let v = u32::try_from(v).map_err(|_| invalid("dimension does not fit in u32"))?;
        w.write_all(&v.to_le_bytes())?;
    }
    for v in params.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_params<R: Read>(mut r: R) -> std::io::Result<PolicyParams> {
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    if &word != PARAMS_MAGIC {
        return Err(invalid("bad magic"));
    }
    r.read_exact(&mut word)?;
    let count = u32::from_le_bytes(word) as usize;
    if count != 5 {
        return Err(invalid(&format!("expected 5 dimension words, found {count}")));
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        r.read_exact(&mut word)?;
        *d = u32::from_le_bytes(word) as usize;
    }
    let dims = PolicyDims {
        views: dims[0],
        view_width: dims[1],
        cond_dim: dims[2],
        time_dim: dims[3],
        hidden: dims[4],
    };
    dims.validate().map_err(|e| invalid(&e.to_string()))?;
    let mut theta = vec![0.0; dims.param_count()];
    let mut buf = [0u8; 8];
    for v in &mut theta {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(invalid("trailing bytes after weights"));
    }
    PolicyParams::from_vec(dims, theta).map_err(|e| invalid(&e.to_string()))
}

fn invalid(msg: &str) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string())
}

/// Writes the binary checkpoint and its `.json` sidecar.
pub fn save_params(path: &Path, params: &PolicyParams, meta: &CheckpointMeta) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_params(&mut w, params).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), meta)
}

pub fn load_params(path: &Path) -> Result<(PolicyParams, CheckpointMeta)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let params = read_params(BufReader::new(f)).map_err(|e| Error::format(path, e.to_string()))?;
    let meta: CheckpointMeta = read_json(&sidecar_path(path))?;
    if &meta.dims != params.dims() {
        return Err(Error::format(path, "sidecar dims disagree with weights"));
    }
    Ok((params, meta))
}
