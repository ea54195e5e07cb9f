//! Point cloud serialisation.
//!
//! Binary layout: the magic bytes `ICW1`, a little-endian `u32` point count,
//! then per point four little-endian `f64`: x, y, z, confidence.
//! The CSV form has the header `x,y,z,conf`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Point3, PointCloud};
use crate::{Error, Result};

pub const CLOUD_MAGIC: &[u8; 4] = b"ICW1";

pub fn write_cloud<W: Write>(mut w: W, cloud: &PointCloud<f64>) -> std::io::Result<()> {
    let n = u32::try_from(cloud.len())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "too many points"))?;
    w.write_all(CLOUD_MAGIC)?;
    w.write_all(&n.to_le_bytes())?;
    for (p, c) in cloud.iter() {
        for v in [p.x, p.y, p.z, c] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads one cloud block. `Ok(None)` at a clean end of stream.
pub fn read_cloud<R: Read>(mut r: R) -> std::io::Result<Option<PointCloud<f64>>> {
    let mut magic = [0u8; 4];
    match r.read(&mut magic[..1])? {
        0 => return Ok(None),
        _ => r.read_exact(&mut magic[1..])?,
    }
    if &magic != CLOUD_MAGIC {
        return Err(invalid("bad magic"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    let mut points = Vec::with_capacity(n.min(1 << 20));
    let mut conf = Vec::with_capacity(n.min(1 << 20));
    let mut buf = [0u8; 32];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        let v: [f64; 4] = std::array::from_fn(|k| f64::from_le_bytes(buf[8 * k..8 * k + 8].try_into().unwrap()));
        points.push(Point3::new(v[0], v[1], v[2]));
        conf.push(v[3]);
    }
    PointCloud::new(points, conf)
        .map(Some)
        .map_err(|e| invalid(&e.to_string()))
}

fn invalid(msg: &str) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string())
}

pub fn save_cloud(path: &Path, cloud: &PointCloud<f64>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_cloud(&mut w, cloud).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_cloud(path: &Path) -> Result<PointCloud<f64>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_cloud(BufReader::new(f))
        .map_err(|e| Error::format(path, e.to_string()))?
        .ok_or_else(|| Error::format(path, "empty file"))
}

pub fn write_csv<W: Write>(mut w: W, cloud: &PointCloud<f64>) -> std::io::Result<()> {
    writeln!(w, "x,y,z,conf")?;
    for (p, c) in cloud.iter() {
        // `{:?}` prints the shortest representation that round-trips
        writeln!(w, "{:?},{:?},{:?},{:?}", p.x, p.y, p.z, c)?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> std::io::Result<PointCloud<f64>> {
    let mut points = Vec::new();
    let mut conf = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with('x')) {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| invalid(&format!("line {}: {e}", lineno + 1)))?;
        if vals.len() != 4 {
            return Err(invalid(&format!("line {}: expected 4 columns", lineno + 1)));
        }
        points.push(Point3::new(vals[0], vals[1], vals[2]));
        conf.push(vals[3]);
    }
    PointCloud::new(points, conf).map_err(|e| invalid(&e.to_string()))
}
