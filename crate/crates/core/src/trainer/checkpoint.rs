use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamW, RunLog, StepRecord, TrainerConfig};
use crate::policy::{load_params, save_params, CheckpointMeta, PolicyParams};
use crate::world::io::{read_json, write_json};
use crate::{Error, Result};

pub const CHECKPOINT_FILE: &str = "policy.bin";
pub const STATE_FILE: &str = "trainer_state.json";
pub const RUN_LOG_FILE: &str = "run_log.jsonl";

/// Everything needed to continue training bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState {
    pub params: PolicyParams,
    pub opt: AdamW,
    pub step: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    step: usize,
    seed: u64,
    adam: AdamW,
}

/// Writes the policy checkpoint, then the optimiser state. The state file
/// is replaced by rename so a reader never sees a partial one.
pub fn save_checkpoint(dir: &Path, state: &TrainerState, cfg: &TrainerConfig, seed: u64) -> Result<()> {
    let meta = CheckpointMeta {
        schedule: cfg.schedule.clone(),
        dims: *state.params.dims(),
        seed_lineage: vec![seed],
        step: state.step,
    };
    save_params(&dir.join(CHECKPOINT_FILE), &state.params, &meta)?;
    let tmp = dir.join(format!("{STATE_FILE}.tmp"));
    write_json(
        &tmp,
        &StateFile {
            step: state.step,
            seed,
            adam: state.opt.clone(),
        },
    )?;
    let target = dir.join(STATE_FILE);
    std::fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))
}

pub fn load_checkpoint(dir: &Path, seed: u64) -> Result<TrainerState> {
    let state_path = dir.join(STATE_FILE);
    let file: StateFile = read_json(&state_path)?;
    if file.seed != seed {
        return Err(Error::format(
            &state_path,
            format!("checkpoint was trained with seed {}, resume requested seed {seed}", file.seed),
        ));
    }
    let (params, meta) = load_params(&dir.join(CHECKPOINT_FILE))?;
    if meta.step != file.step {
        return Err(Error::format(
            &state_path,
            format!("policy is at step {}, optimiser state at step {}", meta.step, file.step),
        ));
    }
    if file.adam.m.len() != params.len() || file.adam.v.len() != params.len() {
        return Err(Error::format(&state_path, "moment vectors do not match the policy size"));
    }
    Ok(TrainerState {
        params,
        opt: file.adam,
        step: file.step,
    })
}

/// Reads a JSON-lines run log; a missing file is an empty log.
pub fn read_run_log(path: &Path) -> Result<RunLog> {
    let f = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: StepRecord = serde_json::from_str(&line).map_err(|e| Error::format(path, e.to_string()))?;
        out.push(r);
    }
    Ok(out)
}
