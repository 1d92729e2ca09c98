//! CSV and JSON artifacts written by training runs and experiments.
//!
//! Floats are written in shortest round-trip form, so re-running a
//! deterministic computation reproduces every file byte for byte.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlInput, SystemState, N_STATES};
use crate::error::{Error, Result};
use crate::metrics::ScenarioScore;
use crate::trainer::{DisturbanceRecord, EpisodeTrajectory, EpochRecord};

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = writer(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// One control-grid point; the inputs are empty on the final row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub g: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
    #[serde(rename = "I1")]
    pub i1: Option<f64>,
    #[serde(rename = "I2")]
    pub i2: Option<f64>,
}

pub fn trajectory_rows(states: &[SystemState], inputs: &[ControlInput], dt: f64) -> Vec<TrajectoryRow> {
    states
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let u = inputs.get(k);
            TrajectoryRow {
                t: k as f64 * dt,
                g: x.g,
                b1: x.b1,
                b2: x.b2,
                a1: x.a1,
                a2: x.a2,
                i1: u.map(|u| u.i1),
                i2: u.map(|u| u.i2),
            }
        })
        .collect()
}

/// `t,g,b1,b2,a1,a2,I1,I2`
pub fn write_trajectory(path: &Path, states: &[SystemState], inputs: &[ControlInput], dt: f64) -> Result<()> {
    write_rows(path, trajectory_rows(states, inputs, dt))
}

pub fn read_trajectory(path: &Path) -> Result<(Vec<SystemState>, Vec<ControlInput>)> {
    let rows: Vec<TrajectoryRow> = read_rows(path)?;
    split_rows(rows.iter(), path)
}

fn split_rows<'a>(
    rows: impl Iterator<Item = &'a TrajectoryRow>,
    path: &Path,
) -> Result<(Vec<SystemState>, Vec<ControlInput>)> {
    let mut states = Vec::new();
    let mut inputs = Vec::new();
    for r in rows {
        states.push(SystemState::new(r.g, r.b1, r.b2, r.a1, r.a2));
        match (r.i1, r.i2) {
            (Some(i1), Some(i2)) => {
                if inputs.len() + 1 != states.len() {
                    return Err(Error::InvalidInput(format!(
                        "{}: inputs after the final row",
                        path.display()
                    )));
                }
                inputs.push(ControlInput::new(i1, i2));
            }
            (None, None) => {}
            _ => {
                return Err(Error::InvalidInput(format!(
                    "{}: row at t = {} has only one input",
                    path.display(),
                    r.t
                )))
            }
        }
    }
    Ok((states, inputs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: usize,
    #[serde(flatten)]
    pub row: TrajectoryRow,
}

/// Every episode of a batch, stacked: `episode,t,g,b1,b2,a1,a2,I1,I2`.
pub fn write_episodes(path: &Path, episodes: &[EpisodeTrajectory], dt: f64) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["episode", "t", "g", "b1", "b2", "a1", "a2", "I1", "I2"])?;
    for (k, ep) in episodes.iter().enumerate() {
        for r in trajectory_rows(&ep.states, &ep.applied, dt) {
            w.serialize((k, r.t, r.g, r.b1, r.b2, r.a1, r.a2, r.i1, r.i2))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// State sequences per episode, in episode order.
pub fn read_episodes(path: &Path) -> Result<Vec<(Vec<SystemState>, Vec<ControlInput>)>> {
    type Raw = (usize, f64, f64, f64, f64, f64, f64, Option<f64>, Option<f64>);
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let mut grouped: Vec<Vec<TrajectoryRow>> = Vec::new();
    for row in r.deserialize::<Raw>() {
        let (k, t, g, b1, b2, a1, a2, i1, i2) = row?;
        if k == grouped.len() {
            grouped.push(Vec::new());
        } else if k + 1 != grouped.len() {
            return Err(Error::InvalidInput(format!(
                "{}: episodes must be contiguous and ordered",
                path.display()
            )));
        }
        grouped[k].push(TrajectoryRow {
            t,
            g,
            b1,
            b2,
            a1,
            a2,
            i1,
            i2,
        });
    }
    grouped.iter().map(|rows| split_rows(rows.iter(), path)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub t: f64,
    pub b1_star: f64,
    pub b2_star: f64,
}

/// `t,b1_star,b2_star`
pub fn write_references(path: &Path, refs: &[[f64; N_STATES]], dt: f64) -> Result<()> {
    write_rows(
        path,
        refs.iter().enumerate().map(|(k, r)| ReferenceRow {
            t: k as f64 * dt,
            b1_star: r[1],
            b2_star: r[2],
        }),
    )
}

pub fn read_references(path: &Path) -> Result<Vec<[f64; N_STATES]>> {
    let rows: Vec<ReferenceRow> = read_rows(path)?;
    Ok(rows.iter().map(|r| [0.0, r.b1_star, r.b2_star, 0.0, 0.0]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnRow {
    pub epoch: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub normalized_mean_return: f64,
}

/// `epoch,mean_return,std_return,normalized_mean_return`
pub fn write_returns(path: &Path, records: &[EpochRecord], normalized: &[f64]) -> Result<()> {
    if records.len() != normalized.len() {
        return Err(Error::InvalidInput(
            "normalized curve length differs from records".into(),
        ));
    }
    write_rows(
        path,
        records.iter().zip(normalized).map(|(r, &n)| ReturnRow {
            epoch: r.epoch,
            mean_return: r.mean_return,
            std_return: r.std_return,
            normalized_mean_return: n,
        }),
    )
}

pub fn read_returns(path: &Path) -> Result<Vec<ReturnRow>> {
    read_rows(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct EpochRow {
    epoch: usize,
    mean_return: f64,
    std_return: f64,
    best_flag: u8,
}

/// `epoch,mean_return,std_return,best_flag`
pub fn write_epochs(path: &Path, records: &[EpochRecord]) -> Result<()> {
    write_rows(
        path,
        records.iter().map(|r| EpochRow {
            epoch: r.epoch,
            mean_return: r.mean_return,
            std_return: r.std_return,
            best_flag: r.best as u8,
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct DisturbanceRow {
    epoch: usize,
    episode: usize,
    stream: u64,
    g0: f64,
    b1_0: f64,
    b2_0: f64,
    a1_0: f64,
    a2_0: f64,
    q_a_max_1: f64,
    q_a_max_2: f64,
}

/// One row per perturbed episode with the ChaCha stream it was drawn from.
pub fn write_disturbances(path: &Path, records: &[DisturbanceRecord]) -> Result<()> {
    write_rows(
        path,
        records.iter().map(|d| DisturbanceRow {
            epoch: d.epoch,
            episode: d.episode,
            stream: d.stream,
            g0: d.x0[0],
            b1_0: d.x0[1],
            b2_0: d.x0[2],
            a1_0: d.x0[3],
            a2_0: d.x0[4],
            q_a_max_1: d.q_a_max[0],
            q_a_max_2: d.q_a_max[1],
        }),
    )
}

/// `scenario,naae,nauc,rank_naae,rank_nauc,rank_sum`
pub fn write_rank_table(path: &Path, scores: &[ScenarioScore]) -> Result<()> {
    write_rows(path, scores)
}

pub fn read_rank_table(path: &Path) -> Result<Vec<ScenarioScore>> {
    read_rows(path)
}

/// Open-loop actions, one `I1,I2` row per control interval.
pub fn read_actions(path: &Path) -> Result<Vec<ControlInput>> {
    #[derive(Deserialize)]
    struct Row {
        #[serde(rename = "I1")]
        i1: f64,
        #[serde(rename = "I2")]
        i2: f64,
    }
    let rows: Vec<Row> = read_rows(path)?;
    Ok(rows.into_iter().map(|r| ControlInput::new(r.i1, r.i2)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("traj.csv");
        let states = vec![
            SystemState::new(1.0, 0.005, 0.005, 1.545e-2, 1.655e-3),
            SystemState::new(0.1 + 0.2, 1.0 / 3.0, 2.0, 0.0, 1e-300),
        ];
        let inputs = vec![ControlInput::new(0.25, 7.0)];
        write_trajectory(&p, &states, &inputs, 1.0).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,g,b1,b2,a1,a2,I1,I2\n"));
        let (s, u) = read_trajectory(&p).unwrap();
        assert_eq!(s, states);
        assert_eq!(u, inputs);
    }

    #[test]
    fn one_sided_input_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "t,g,b1,b2,a1,a2,I1,I2\n0,1,1,1,1,1,2,\n").unwrap();
        assert!(read_trajectory(&p).is_err());
    }

    #[test]
    fn actions_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.csv");
        fs::write(&p, "I1,I2\n0.5,1\n0,2.5\n").unwrap();
        assert_eq!(
            read_actions(&p).unwrap(),
            vec![ControlInput::new(0.5, 1.0), ControlInput::new(0.0, 2.5)]
        );
    }

    #[test]
    fn references_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let refs = vec![[0.0, 3.0, 4.0, 0.0, 0.0], [0.0, 3.1, 3.9, 0.0, 0.0]];
        write_references(&p, &refs, 1.0).unwrap();
        assert!(fs::read_to_string(&p).unwrap().starts_with("t,b1_star,b2_star\n"));
        assert_eq!(read_references(&p).unwrap(), refs);
    }
}
