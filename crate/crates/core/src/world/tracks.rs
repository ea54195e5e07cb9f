use serde::{Deserialize, Serialize};

use crate::geometry::centroid;
use crate::{Error, Point3d, Result, RigidTransformd};

/// `B` point trajectories over `T_p` frames, stored track-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSet {
    positions: Vec<Point3d>,
    tracks: usize,
    frames: usize,
}

impl TrackSet {
    pub fn new(positions: Vec<Point3d>, tracks: usize, frames: usize) -> Result<Self> {
        if tracks == 0 {
            return Err(Error::EmptyTracks);
        }
        if frames < 2 {
            return Err(Error::Config(format!("track set needs at least 2 frames, got {frames}")));
        }
        if positions.len() != tracks * frames {
            return Err(Error::DimensionMismatch {
                expected: tracks * frames,
                got: positions.len(),
            });
        }
        if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            positions,
            tracks,
            frames,
        })
    }

    pub fn tracks(&self) -> usize {
        self.tracks
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn positions(&self) -> &[Point3d] {
        &self.positions
    }

    pub fn get(&self, track: usize, frame: usize) -> Point3d {
        self.positions[track * self.frames + frame]
    }

    pub fn track(&self, track: usize) -> &[Point3d] {
        &self.positions[track * self.frames..(track + 1) * self.frames]
    }

    /// Time-averaged position of one track.
    pub fn temporal_average(&self, track: usize) -> Point3d {
        centroid(self.track(track))
    }

    pub fn temporal_averages(&self) -> Vec<Point3d> {
        (0..self.tracks).map(|i| self.temporal_average(i)).collect()
    }

    pub fn transformed(&self, t: &RigidTransformd) -> Self {
        Self {
            positions: self.positions.iter().map(|&p| t.apply(p)).collect(),
            ..*self
        }
    }

    /// Keeps frames `0, interval, 2·interval, …`.
    pub fn sample_frames(&self, interval: usize) -> Result<Self> {
        if interval == 0 {
            return Err(Error::Config("frame interval must be >= 1".into()));
        }
        let kept: Vec<usize> = (0..self.frames).step_by(interval).collect();
        let positions = (0..self.tracks)
            .flat_map(|i| kept.iter().map(move |&t| (i, t)))
            .map(|(i, t)| self.get(i, t))
            .collect();
        Self::new(positions, self.tracks, kept.len())
    }

    /// The first `count` tracks.
    pub fn take_tracks(&self, count: usize) -> Result<Self> {
        if count > self.tracks {
            return Err(Error::InsufficientTracks {
                requested: count,
                available: self.tracks,
            });
        }
        Self::new(self.positions[..count * self.frames].to_vec(), count, self.frames)
    }

    pub fn reversed(&self) -> Self {
        let positions = (0..self.tracks).rev().flat_map(|i| self.track(i).to_vec()).collect();
        Self {
            positions,
            ..*self
        }
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [Point3d] {
        &mut self.positions
    }
}
