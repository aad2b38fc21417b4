//! Frame-level shot features and the binary sidecar file that carries them.
//!
//! File layout, all integers little-endian `u32`, reals little-endian `f64`:
//! magic `DSCFEAT1`, dim, record count, then per record: id length, id bytes
//! (UTF-8), shot count, frame count, one start index per shot, and
//! `frames × dim` reals in row order.

use std::io::{Read, Write};

const MAGIC: &[u8; 8] = b"DSCFEAT1";

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("feature sequence has no frames")]
    NoFrames,
    #[error("frame {frame} has dimension {got}, expected {expected}")]
    Dim {
        frame: usize,
        got: usize,
        expected: usize,
    },
    #[error("shot boundaries must start at 0, increase strictly and stay below the frame count")]
    Boundaries,
    #[error("not a feature file (bad magic)")]
    Magic,
    #[error("feature file record {record}: {reason}")]
    Corrupt { record: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Frames of one video partitioned into shots. `shot_boundaries[i]` is the
/// index of the first frame of shot `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeq {
    dim: usize,
    frames: Vec<Vec<f64>>,
    shot_boundaries: Vec<usize>,
}

impl FeatureSeq {
    pub fn new(frames: Vec<Vec<f64>>, shot_boundaries: Vec<usize>) -> Result<Self, FeatureError> {
        let dim = frames.first().ok_or(FeatureError::NoFrames)?.len();
        for (i, f) in frames.iter().enumerate() {
            if f.len() != dim {
                return Err(FeatureError::Dim {
                    frame: i,
                    got: f.len(),
                    expected: dim,
                });
            }
        }
        let ok = shot_boundaries.first() == Some(&0)
            && shot_boundaries.windows(2).all(|w| w[0] < w[1])
            && shot_boundaries.last().is_some_and(|&b| b < frames.len());
        if !ok {
            return Err(FeatureError::Boundaries);
        }
        Ok(FeatureSeq {
            dim,
            frames,
            shot_boundaries,
        })
    }

    /// One frame per shot.
    pub fn from_shot_vectors(shots: Vec<Vec<f64>>) -> Result<Self, FeatureError> {
        let b = (0..shots.len()).collect();
        Self::new(shots, b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn shot_boundaries(&self) -> &[usize] {
        &self.shot_boundaries
    }

    pub fn n_shots(&self) -> usize {
        self.shot_boundaries.len()
    }

    pub fn shot_frames(&self, shot: usize) -> &[Vec<f64>] {
        let start = self.shot_boundaries[shot];
        let end = self
            .shot_boundaries
            .get(shot + 1)
            .copied()
            .unwrap_or(self.frames.len());
        &self.frames[start..end]
    }

    /// Mean of each shot's frames.
    pub fn pooled(&self) -> Vec<Vec<f64>> {
        (0..self.n_shots())
            .map(|s| {
                let fr = self.shot_frames(s);
                let mut m = vec![0.0; self.dim];
                for f in fr {
                    for (a, b) in m.iter_mut().zip(f) {
                        *a += b;
                    }
                }
                let n = fr.len() as f64;
                m.iter_mut().for_each(|a| *a /= n);
                m
            })
            .collect()
    }
}

fn put_u32(w: &mut impl Write, v: usize) -> std::io::Result<()> {
    let v = u32::try_from(v).map_err(|_| std::io::Error::other("value exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

fn get_u32(r: &mut impl Read) -> std::io::Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

/// Writes `(video_id, features)` pairs. All sequences must share one dimension.
pub fn write_features<W: Write>(mut w: W, items: &[(String, FeatureSeq)]) -> Result<(), FeatureError> {
    let dim = items.first().map_or(0, |(_, f)| f.dim);
    w.write_all(MAGIC)?;
    put_u32(&mut w, dim)?;
    put_u32(&mut w, items.len())?;
    for (i, (id, f)) in items.iter().enumerate() {
        if f.dim != dim {
            return Err(FeatureError::Dim {
                frame: i,
                got: f.dim,
                expected: dim,
            });
        }
        put_u32(&mut w, id.len())?;
        w.write_all(id.as_bytes())?;
        put_u32(&mut w, f.n_shots())?;
        put_u32(&mut w, f.frames.len())?;
        for &b in &f.shot_boundaries {
            put_u32(&mut w, b)?;
        }
        for frame in &f.frames {
            for x in frame {
                w.write_all(&x.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_features<R: Read>(mut r: R) -> Result<Vec<(String, FeatureSeq)>, FeatureError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| FeatureError::Magic)?;
    if &magic != MAGIC {
        return Err(FeatureError::Magic);
    }
    let dim = get_u32(&mut r)?;
    let n = get_u32(&mut r)?;
    let corrupt = |record: usize, reason: String| FeatureError::Corrupt { record, reason };
    let mut out = Vec::with_capacity(n.min(1 << 16));
    for rec in 0..n {
        let id_len = get_u32(&mut r).map_err(|e| corrupt(rec, e.to_string()))?;
        let mut id = vec![0u8; id_len];
        r.read_exact(&mut id).map_err(|e| corrupt(rec, e.to_string()))?;
        let id = String::from_utf8(id).map_err(|e| corrupt(rec, e.to_string()))?;
        let n_shots = get_u32(&mut r).map_err(|e| corrupt(rec, e.to_string()))?;
        let n_frames = get_u32(&mut r).map_err(|e| corrupt(rec, e.to_string()))?;
        let mut bounds = Vec::with_capacity(n_shots);
        for _ in 0..n_shots {
            bounds.push(get_u32(&mut r).map_err(|e| corrupt(rec, e.to_string()))?);
        }
        let mut frames = Vec::with_capacity(n_frames);
        let mut buf = [0u8; 8];
        for _ in 0..n_frames {
            let mut f = Vec::with_capacity(dim);
            for _ in 0..dim {
                r.read_exact(&mut buf).map_err(|e| corrupt(rec, e.to_string()))?;
                f.push(f64::from_le_bytes(buf));
            }
            frames.push(f);
        }
        let seq = FeatureSeq::new(frames, bounds).map_err(|e| corrupt(rec, e.to_string()))?;
        out.push((id, seq));
    }
    Ok(out)
}
