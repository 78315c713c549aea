use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::WorkbenchError;
use crate::model::{DelayModel, Instance, ModelError, Positions, Schedule, SkillSet, TravelTimes};

/// On-disk instance layout. Field names are part of the file format.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    l: usize,
    m: usize,
    n: usize,
    #[serde(rename = "Q")]
    q: Vec<Vec<u8>>,
    #[serde(rename = "R")]
    r: Vec<Vec<u8>>,
    exec_times: Vec<f64>,
    travel: TravelTimes,
    stochastic: DelayModel,
    epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positions: Option<Positions>,
}

fn rows(what: &str, expected_rows: usize, width: usize, bits: &[Vec<u8>]) -> Result<Vec<SkillSet>, ModelError> {
    if bits.len() != expected_rows {
        return Err(ModelError::Dimension {
            what: what.to_string(),
            expected: expected_rows,
            found: bits.len(),
        });
    }
    bits.iter()
        .enumerate()
        .map(|(idx, row)| {
            if row.len() != width {
                return Err(ModelError::Dimension {
                    what: format!("{what} row {idx}"),
                    expected: width,
                    found: row.len(),
                });
            }
            SkillSet::from_bits(row)
        })
        .collect()
}

impl TryFrom<InstanceFile> for Instance {
    type Error = ModelError;

    fn try_from(f: InstanceFile) -> Result<Self, Self::Error> {
        let q = rows("Q", f.n, f.l, &f.q)?;
        let r = rows("R", f.m, f.l, &f.r)?;
        let inst = Instance::new(f.l, q, r, f.exec_times, f.travel, f.stochastic, f.epsilon)?;
        match f.positions {
            Some(p) => inst.with_positions(p),
            None => Ok(inst),
        }
    }
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        InstanceFile {
            l: inst.l(),
            m: inst.m(),
            n: inst.n(),
            q: inst.all_robot_skills().iter().map(SkillSet::to_bits).collect(),
            r: inst.all_requirements().iter().map(SkillSet::to_bits).collect(),
            exec_times: inst.exec_times().to_vec(),
            travel: inst.travel().clone(),
            stochastic: inst.delays().clone(),
            epsilon: inst.epsilon(),
            positions: inst.positions().cloned(),
        }
    }
}

pub fn instance_from_json(text: &str) -> Result<Instance, WorkbenchError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| WorkbenchError::json(e, text))?;
    Ok(Instance::try_from(file)?)
}

pub fn instance_to_json(instance: &Instance) -> String {
    serde_json::to_string(&InstanceFile::from(instance)).expect("instance serializes")
}

pub fn schedule_from_json(text: &str) -> Result<Schedule, WorkbenchError> {
    serde_json::from_str(text).map_err(|e| WorkbenchError::json(e, text))
}

pub fn schedule_to_json(schedule: &Schedule) -> String {
    serde_json::to_string(schedule).expect("schedule serializes")
}

fn read(path: &Path) -> Result<String, WorkbenchError> {
    fs::read_to_string(path).map_err(|e| WorkbenchError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), WorkbenchError> {
    fs::write(path, text).map_err(|e| WorkbenchError::io(path, e))
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, WorkbenchError> {
    instance_from_json(&read(path.as_ref())?)
}

pub fn save_instance(path: impl AsRef<Path>, instance: &Instance) -> Result<(), WorkbenchError> {
    write(path.as_ref(), &instance_to_json(instance))
}

pub fn load_schedule(path: impl AsRef<Path>) -> Result<Schedule, WorkbenchError> {
    schedule_from_json(&read(path.as_ref())?)
}

pub fn save_schedule(path: impl AsRef<Path>, schedule: &Schedule) -> Result<(), WorkbenchError> {
    write(path.as_ref(), &schedule_to_json(schedule))
}
