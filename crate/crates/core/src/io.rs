//! Pose sequences as JSON lines, one frame per line:
//! `{"t": 0, "joints": [[x, y, z], ...], "gt": [[x, y, z], ...], "fps": 50}`.
//!
//! `gt` and `fps` are optional. Either every frame carries `gt` or none does.
//! Coordinates are written with the shortest representation that parses
//! back to the same `f64`, so a save/load round trip is lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{Pose3D, PoseSequence, NUM_JOINTS};

pub const DEFAULT_FPS: f64 = 50.0;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    t: i64,
    joints: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fps: Option<f64>,
}

fn rows_to_pose(rows: &[Vec<f64>], field: &str, line: usize) -> Result<Pose3D> {
    if rows.len() != NUM_JOINTS {
        return Err(Error::Schema {
            line,
            message: format!("{field}: expected {NUM_JOINTS} joints, got {}", rows.len()),
        });
    }
    let mut fixed = [[0.0; 3]; NUM_JOINTS];
    for (j, row) in rows.iter().enumerate() {
        if row.len() != 3 {
            return Err(Error::Schema {
                line,
                message: format!("{field}[{j}]: expected 3 coordinates, got {}", row.len()),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema {
                line,
                message: format!("{field}[{j}]: non-finite coordinate"),
            });
        }
        fixed[j].copy_from_slice(row);
    }
    Pose3D::from_rows(&fixed)
}

fn pose_to_rows(pose: &Pose3D) -> Vec<Vec<f64>> {
    pose.to_rows().iter().map(|r| r.to_vec()).collect()
}

pub fn read_sequence(reader: impl BufRead) -> Result<PoseSequence> {
    let mut frames = Vec::new();
    let mut gts = Vec::new();
    let mut fps = None;
    let mut has_gt = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let frame: FrameLine = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if frame.t != frames.len() as i64 {
            return Err(Error::Schema {
                line: line_no,
                message: format!("expected t = {}, got {}", frames.len(), frame.t),
            });
        }
        frames.push(rows_to_pose(&frame.joints, "joints", line_no)?);
        match (has_gt, &frame.gt) {
            (None, g) => has_gt = Some(g.is_some()),
            (Some(expected), g) if expected != g.is_some() => {
                return Err(Error::Schema {
                    line: line_no,
                    message: "gt must be present on every frame or on none".into(),
                })
            }
            _ => {}
        }
        if let Some(g) = &frame.gt {
            gts.push(rows_to_pose(g, "gt", line_no)?);
        }
        if let Some(f) = frame.fps {
            match fps {
                None => fps = Some(f),
                Some(prev) if prev != f => {
                    return Err(Error::Schema {
                        line: line_no,
                        message: format!("fps changes from {prev} to {f}"),
                    })
                }
                _ => {}
            }
        }
    }
    let gt = (has_gt == Some(true)).then_some(gts);
    PoseSequence::new(frames, fps.unwrap_or(DEFAULT_FPS), gt)
}

pub fn write_sequence(seq: &PoseSequence, mut writer: impl Write) -> Result<()> {
    for (t, pose) in seq.frames().iter().enumerate() {
        let line = FrameLine {
            t: t as i64,
            joints: pose_to_rows(pose),
            gt: seq.ground_truth().map(|g| pose_to_rows(&g[t])),
            fps: Some(seq.fps()),
        };
        serde_json::to_writer(&mut writer, &line)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_sequence(path: impl AsRef<Path>) -> Result<PoseSequence> {
    read_sequence(BufReader::new(File::open(path)?))
}

pub fn save_sequence(seq: &PoseSequence, path: impl AsRef<Path>) -> Result<()> {
    write_sequence(seq, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::Vec3;

    fn sample() -> PoseSequence {
        let frames: Vec<Pose3D> = (0..3)
            .map(|i| {
                let mut p = Pose3D::zeros();
                for j in 1..NUM_JOINTS {
                    p[j] = Vec3::new(0.1 * i as f64 + j as f64 / 3.0, -1e-7 * j as f64, 1.0 / 7.0);
                }
                p
            })
            .collect();
        PoseSequence::new(frames.clone(), 25.0, Some(frames)).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let seq = sample();
        let mut buf = Vec::new();
        write_sequence(&seq, &mut buf).unwrap();
        let back = read_sequence(buf.as_slice()).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn malformed_line_is_reported_by_number() {
        let mut buf = Vec::new();
        write_sequence(&sample(), &mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("{\"t\": 3, \"joints\": [\n");
        let err = read_sequence(text.as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("line 4:"), "{err}");
    }

    #[test]
    fn wrong_joint_count_is_a_schema_error() {
        let rows = vec![vec![0.0; 3]; 17];
        let line = serde_json::json!({ "t": 0, "joints": rows }).to_string();
        let err = read_sequence(line.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema { line: 1, .. }));
        assert!(err.to_string().contains("expected 16 joints"), "{err}");
    }

    #[test]
    fn missing_fps_defaults() {
        let rows = vec![vec![0.0; 3]; 16];
        let line = serde_json::json!({ "t": 0, "joints": rows }).to_string();
        let seq = read_sequence(line.as_bytes()).unwrap();
        assert_eq!(seq.fps(), DEFAULT_FPS);
        assert!(seq.ground_truth().is_none());
    }
}
