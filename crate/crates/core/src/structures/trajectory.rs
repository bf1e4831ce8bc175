//! JSON-Lines trajectory files: one metadata header line followed by one line
//! per frame. Coordinates are written with 17 significant digits so reading a
//! file back reproduces every coordinate bit for bit.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ComplexState, Partition};
use crate::flow::FlowConfig;
use crate::Vec3;

pub const TRAJECTORY_FORMAT: &str = "holoflow-trajectory";
pub const TRAJECTORY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("missing metadata header line")]
    MissingHeader,
    #[error("line {line}: truncated or malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: frame has {actual} rows, header declares {expected}")]
    RowCount {
        line: usize,
        expected: usize,
        actual: usize,
    },
    #[error("line {line}: frame times must increase strictly from 0")]
    NonMonotoneTime { line: usize },
    #[error("line {line}: {message}")]
    InvalidState { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub config: FlowConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub step: usize,
    pub state: ComplexState,
}

/// Ordered frames from the prior sample (`t = 0`) toward `t = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub frames: Vec<Frame>,
}

impl Trajectory {
    pub fn last_state(&self) -> Option<&ComplexState> {
        self.frames.last().map(|f| &f.state)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    seed: u64,
    config: FlowConfig,
    n_protein: usize,
    ligand_fragments: Vec<usize>,
}

#[derive(Deserialize)]
struct FrameLine {
    step: usize,
    time: f64,
    coords: Vec<[f64; 3]>,
}

fn push_number(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

/// Serialize a trajectory. Frames are assumed to share one partition; the
/// first frame's partition goes into the header.
pub fn write_trajectory(trajectory: &Trajectory) -> String {
    let partition = trajectory
        .frames
        .first()
        .map(|f| f.state.partition.clone())
        .unwrap_or_default();
    let header = Header {
        format: TRAJECTORY_FORMAT.to_string(),
        version: TRAJECTORY_VERSION,
        seed: trajectory.meta.seed,
        config: trajectory.meta.config.clone(),
        n_protein: partition.n_protein,
        ligand_fragments: partition.ligand_fragments,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for frame in &trajectory.frames {
        let _ = write!(out, "{{\"step\":{},\"time\":", frame.step);
        push_number(&mut out, frame.state.time);
        out.push_str(",\"coords\":[");
        for (k, p) in frame.state.coords.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push('[');
            push_number(&mut out, p.x);
            out.push(',');
            push_number(&mut out, p.y);
            out.push(',');
            push_number(&mut out, p.z);
            out.push(']');
        }
        out.push_str("]}\n");
    }
    out
}

pub fn read_trajectory(text: &str) -> Result<Trajectory, TrajectoryError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(TrajectoryError::MissingHeader)?;
    let header: Header = serde_json::from_str(first).map_err(|_| TrajectoryError::MissingHeader)?;
    if header.format != TRAJECTORY_FORMAT {
        return Err(TrajectoryError::MissingHeader);
    }
    let partition = Partition::new(header.n_protein, header.ligand_fragments).map_err(|e| {
        TrajectoryError::InvalidState {
            line: 1,
            message: e.to_string(),
        }
    })?;
    let mut frames: Vec<Frame> = Vec::new();
    for (k, line) in lines {
        let lineno = k + 1;
        let rec: FrameLine = serde_json::from_str(line).map_err(|e| TrajectoryError::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        if rec.coords.len() != partition.len() {
            return Err(TrajectoryError::RowCount {
                line: lineno,
                expected: partition.len(),
                actual: rec.coords.len(),
            });
        }
        let monotone = match frames.last() {
            Some(prev) => rec.time > prev.state.time,
            None => rec.time == 0.0,
        };
        if !monotone {
            return Err(TrajectoryError::NonMonotoneTime { line: lineno });
        }
        let coords = rec.coords.iter().map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        let state = ComplexState::new(coords, partition.clone(), rec.time).map_err(|e| {
            TrajectoryError::InvalidState {
                line: lineno,
                message: e.to_string(),
            }
        })?;
        frames.push(Frame {
            step: rec.step,
            state,
        });
    }
    Ok(Trajectory {
        meta: TrajectoryMeta {
            config: header.config,
            seed: header.seed,
        },
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(coords: Vec<Vec3>, times: &[f64]) -> Trajectory {
        let partition = Partition::new(1, vec![0; coords.len() - 1]).unwrap();
        Trajectory {
            meta: TrajectoryMeta {
                config: FlowConfig::default(),
                seed: 7,
            },
            frames: times
                .iter()
                .enumerate()
                .map(|(n, &t)| Frame {
                    step: n,
                    state: ComplexState::new(coords.iter().map(|p| p * (1.0 + t)).collect(), partition.clone(), t).unwrap(),
                })
                .collect(),
        }
    }

    #[test]
    fn single_frame_round_trip() {
        let t = sample(vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0 / 3.0, -2.5e-7, 1e10)], &[0.0]);
        let text = write_trajectory(&t);
        assert_eq!(read_trajectory(&text).unwrap(), t);
    }

    #[test]
    fn header_carries_seed_and_steps() {
        let t = sample(vec![Vec3::zeros(), Vec3::x()], &[0.0, 0.5, 1.0]);
        let text = write_trajectory(&t);
        let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(header["seed"], 7);
        assert_eq!(header["config"]["steps"], 40);
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn rejects_bad_files() {
        let t = sample(vec![Vec3::zeros(), Vec3::x()], &[0.0, 0.5, 1.0]);
        let text = write_trajectory(&t);
        let lines: Vec<&str> = text.lines().collect();

        let no_header = lines[1..].join("\n");
        assert_eq!(read_trajectory(&no_header), Err(TrajectoryError::MissingHeader));
        assert_eq!(read_trajectory(""), Err(TrajectoryError::MissingHeader));

        let truncated = format!("{}\n{}\n{}", lines[0], lines[1], &lines[2][..lines[2].len() / 2]);
        assert!(matches!(read_trajectory(&truncated), Err(TrajectoryError::Malformed { line: 3, .. })));

        let swapped = format!("{}\n{}\n{}\n{}", lines[0], lines[1], lines[3], lines[2]);
        assert_eq!(read_trajectory(&swapped), Err(TrajectoryError::NonMonotoneTime { line: 4 }));

        let late_start = format!("{}\n{}", lines[0], lines[2]);
        assert_eq!(read_trajectory(&late_start), Err(TrajectoryError::NonMonotoneTime { line: 2 }));
    }

    proptest! {
        #[test]
        fn coordinates_round_trip_bitwise(raw in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 6..30)) {
            let n = raw.len() / 3;
            let coords: Vec<Vec3> = (0..n).map(|i| Vec3::new(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2])).collect();
            let partition = Partition::new(n, vec![]).unwrap();
            let t = Trajectory {
                meta: TrajectoryMeta { config: FlowConfig::default(), seed: u64::MAX },
                frames: vec![Frame { step: 0, state: ComplexState::new(coords, partition, 0.0).unwrap() }],
            };
            let back = read_trajectory(&write_trajectory(&t)).unwrap();
            for (a, b) in back.frames[0].state.coords.iter().zip(&t.frames[0].state.coords) {
                for k in 0..3 {
                    prop_assert_eq!(a[k].to_bits(), b[k].to_bits());
                }
            }
        }
    }
}
