//! On-disk form of worlds and observations: a binary file of `ICW1` cloud
//! blocks plus a JSON sidecar with the same path and a `.json` extension.
//!
//! Observation blocks are the `T_p` frame clouds followed by one block of
//! `B·T_p` track positions (track-major). World blocks are the static cloud
//! followed by one base cloud per object.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CameraPath, DynamicObject, Keyframe, SharedWorld, TrackSet, ViewObservation};
use crate::geometry::io::{read_cloud, write_cloud};
use crate::geometry::Mat3;
use crate::{Error, Point3d, PointCloudd, Result, RigidTransformd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrinsicJson {
    /// Row-major rotation.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<&RigidTransformd> for ExtrinsicJson {
    fn from(t: &RigidTransformd) -> Self {
        Self {
            rotation: t.rotation().0,
            translation: t.translation().to_array(),
        }
    }
}

impl TryFrom<&ExtrinsicJson> for RigidTransformd {
    type Error = Error;
    fn try_from(e: &ExtrinsicJson) -> Result<Self> {
        RigidTransformd::new(Mat3(e.rotation), Point3d::from_array(e.translation))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackShape {
    tracks: usize,
    frames: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ObservationSidecar {
    cameras: Vec<ExtrinsicJson>,
    track_shape: TrackShape,
    track_membership: Vec<Vec<(usize, usize)>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WorldSidecar {
    seed: u64,
    frames: usize,
    objects: Vec<Vec<Keyframe>>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn write_blocks(path: &Path, clouds: &[&PointCloudd]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for c in clouds {
        write_cloud(&mut w, c).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_blocks(path: &Path) -> Result<Vec<PointCloudd>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    let mut out = Vec::new();
    while let Some(c) = read_cloud(&mut r).map_err(|e| Error::format(path, e.to_string()))? {
        out.push(c);
    }
    Ok(out)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_observation(path: &Path, obs: &ViewObservation) -> Result<()> {
    let track_cloud = PointCloudd::from_points(obs.tracks.positions().to_vec())?;
    let mut blocks: Vec<&PointCloudd> = obs.frames.iter().collect();
    blocks.push(&track_cloud);
    write_blocks(path, &blocks)?;
    let sidecar = ObservationSidecar {
        cameras: obs.camera.extrinsics.iter().map(ExtrinsicJson::from).collect(),
        track_shape: TrackShape {
            tracks: obs.tracks.tracks(),
            frames: obs.tracks.frames(),
        },
        track_membership: obs.track_membership.clone(),
    };
    write_json(&sidecar_path(path), &sidecar)
}

pub fn load_observation(path: &Path) -> Result<ViewObservation> {
    let sidecar: ObservationSidecar = read_json(&sidecar_path(path))?;
    let mut blocks = read_blocks(path)?;
    let shape = &sidecar.track_shape;
    if blocks.len() != shape.frames + 1 {
        return Err(Error::format(
            path,
            format!("expected {} cloud blocks, found {}", shape.frames + 1, blocks.len()),
        ));
    }
    let track_cloud = blocks.pop().expect("checked length");
    let tracks = TrackSet::new(track_cloud.points().to_vec(), shape.tracks, shape.frames)?;
    let extrinsics = sidecar
        .cameras
        .iter()
        .map(RigidTransformd::try_from)
        .collect::<Result<Vec<_>>>()?;
    if sidecar.track_membership.len() != blocks.len() {
        return Err(Error::format(path, "track membership does not match frame count"));
    }
    for (frame, members) in blocks.iter().zip(&sidecar.track_membership) {
        if members.iter().any(|&(pi, tr)| pi >= frame.len() || tr >= shape.tracks) {
            return Err(Error::format(path, "track membership index out of range"));
        }
    }
    Ok(ViewObservation {
        frames: blocks,
        tracks,
        camera: CameraPath::new(extrinsics)?,
        track_membership: sidecar.track_membership,
    })
}

pub fn save_world(path: &Path, world: &SharedWorld) -> Result<()> {
    let mut blocks = vec![&world.static_points];
    blocks.extend(world.objects.iter().map(|o| &o.base_points));
    write_blocks(path, &blocks)?;
    let sidecar = WorldSidecar {
        seed: world.seed,
        frames: world.frames,
        objects: world.objects.iter().map(|o| o.keyframes.clone()).collect(),
    };
    write_json(&sidecar_path(path), &sidecar)
}

pub fn load_world(path: &Path) -> Result<SharedWorld> {
    let sidecar: WorldSidecar = read_json(&sidecar_path(path))?;
    let mut blocks = read_blocks(path)?.into_iter();
    let static_points = blocks.next().ok_or_else(|| Error::format(path, "missing static cloud"))?;
    let bases: Vec<_> = blocks.collect();
    if bases.len() != sidecar.objects.len() {
        return Err(Error::format(path, "object count does not match sidecar"));
    }
    let objects = bases
        .into_iter()
        .zip(sidecar.objects)
        .map(|(b, k)| DynamicObject::new(b, k))
        .collect::<Result<_>>()?;
    Ok(SharedWorld {
        static_points,
        objects,
        frames: sidecar.frames,
        seed: sidecar.seed,
    })
}
