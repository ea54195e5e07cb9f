use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use icworld::metrics::{evaluate_run, save_evaluation};
use icworld::policy::{load_params, PolicyParams};
use icworld::rewards::score_views;
use icworld::seed::derive_seed;
use icworld::trainer::{self, build_dataset, train_in_dir, RunLog, TrainWorld, CHECKPOINT_FILE, RUN_LOG_FILE, STATE_FILE};
use icworld::world::io::{load_observation, save_observation, save_world, sidecar_path};
use serde_json::json;

use crate::config::RunConfig;
use crate::plot::{reward_curves, Series};
use crate::run::{write_atomic, RunDir};
use crate::CliError;

const EVAL_STREAM: u64 = 0xE7A1;

pub fn train_set(cfg: &RunConfig) -> Result<Vec<TrainWorld>, CliError> {
    Ok(build_dataset(&cfg.world, &cfg.trainer.decode, cfg.train_worlds, cfg.seeds.world, cfg.policy.cond_dim)?)
}

pub fn eval_set(cfg: &RunConfig) -> Result<Vec<TrainWorld>, CliError> {
    let seed = derive_seed(cfg.seeds.eval, &[EVAL_STREAM]);
    Ok(build_dataset(&cfg.world, &cfg.trainer.decode, cfg.eval_worlds, seed, cfg.policy.cond_dim)?)
}

fn rel(dir: &RunDir, p: &Path) -> String {
    p.strip_prefix(dir.root()).unwrap_or(p).display().to_string()
}

fn write_set(dir: &mut RunDir, sub: &str, set: &[TrainWorld]) -> Result<usize, CliError> {
    let root = dir.subdir(sub)?;
    let mut observations = 0;
    for w in set {
        let wp = root.join(format!("world_{:04}.bin", w.id));
        save_world(&wp, &w.world)?;
        dir.record(rel(dir, &wp));
        for (k, view) in w.base_views.iter().enumerate() {
            let op = root.join(format!("world_{:04}_view{k}.bin", w.id));
            save_observation(&op, view)?;
            dir.record(rel(dir, &op));
            observations += 1;
        }
    }
    Ok(observations)
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut dir = RunDir::open(out, "simulate", cfg.hash())?;
    let train = train_set(cfg)?;
    let eval = eval_set(cfg)?;
    let mut observations = write_set(&mut dir, "sim/train", &train)?;
    observations += write_set(&mut dir, "sim/eval", &eval)?;
    dir.finish()?;
    println!(
        "{}",
        json!({
            "command": "simulate",
            "train_worlds": train.len(),
            "eval_worlds": eval.len(),
            "observations": observations,
            "out": out.display().to_string(),
        })
    );
    Ok(())
}

fn curve_csv(log: &RunLog) -> String {
    let mut s = String::from("step,reward_mean,reward_std,rg_mean,rm_mean\n");
    for r in log {
        let _ = writeln!(s, "{},{:?},{:?},{:?},{:?}", r.step, r.reward_mean, r.reward_std, r.rg_mean, r.rm_mean);
    }
    s
}

pub fn train(cfg: &RunConfig, out: &Path, resume: bool) -> Result<(), CliError> {
    let mut dir = RunDir::open(out, "train", cfg.hash())?;
    let data = train_set(cfg)?;
    let train_dir = dir.subdir("train")?;
    let init = PolicyParams::init(cfg.policy, cfg.seeds.init);
    let (_, log) = train_in_dir(init, &data, &cfg.trainer, cfg.seeds.train, &train_dir, resume)?;
    let curve = train_dir.join("reward_curve.csv");
    write_atomic(&curve, curve_csv(&log).as_bytes())?;
    for f in [CHECKPOINT_FILE, STATE_FILE, RUN_LOG_FILE, "reward_curve.csv"] {
        dir.record(format!("train/{f}"));
    }
    dir.record(rel(&dir, &sidecar_path(&train_dir.join(CHECKPOINT_FILE))));
    dir.finish()?;
    let last = log.last().expect("steps >= 1");
    println!(
        "{}",
        json!({
            "command": "train",
            "steps": log.len(),
            "final_reward_mean": last.reward_mean,
            "out": train_dir.display().to_string(),
        })
    );
    Ok(())
}

pub fn eval(cfg: &RunConfig, out: &Path, checkpoint: Option<&Path>) -> Result<(), CliError> {
    let ckpt: PathBuf = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| out.join("train").join(CHECKPOINT_FILE));
    if !ckpt.is_file() {
        return Err(CliError::Io(format!("checkpoint {} not found", ckpt.display())));
    }
    let mut dir = RunDir::open(out, "eval", cfg.hash())?;
    let (params, meta) = load_params(&ckpt)?;
    let worlds = eval_set(cfg)?;
    let seed = derive_seed(cfg.seeds.eval, &[EVAL_STREAM, 1]);
    let result = evaluate_run(&params, &worlds, meta.schedule.steps(), cfg.trainer.decode.gain, &cfg.eval, seed)?;
    let eval_dir = dir.subdir("eval")?;
    save_evaluation(&eval_dir.join("report.json"), &eval_dir.join("worlds.csv"), &result)?;
    dir.record("eval/report.json");
    dir.record("eval/worlds.csv");
    dir.finish()?;
    println!("{}", serde_json::to_string(&result.report).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(())
}

pub fn sweep_groupsize(cfg: &RunConfig, out: &Path, groups: &[usize], seeds: &[u64]) -> Result<(), CliError> {
    if groups.len() < 2 || seeds.len() < 3 {
        return Err(CliError::Config("sweep needs at least 2 group sizes and 3 seeds".into()));
    }
    for &m in groups {
        if m < 2 {
            return Err(CliError::Config(format!("group size {m} is below 2")));
        }
    }
    let mut dir = RunDir::open(out, "sweep-groupsize", cfg.hash())?;
    let sweep = dir.subdir("sweep")?;
    let data = train_set(cfg)?;
    let mut csv = String::from("group_size,seed,step,reward_mean,reward_std,rg_mean,rm_mean\n");
    let mut series = Vec::new();
    let mut failures = Vec::new();
    for &m in groups {
        let mut runs = Vec::new();
        for &seed in seeds {
            let mut tc = cfg.trainer.clone();
            tc.group_size = m;
            let init = PolicyParams::init(cfg.policy, seed);
            match trainer::train(init, &data, &tc, seed) {
                Ok((_, log)) => {
                    let name = format!("run_M{m}_seed{seed}.jsonl");
                    let mut text = String::new();
                    for r in &log {
                        text.push_str(&serde_json::to_string(r).map_err(|e| CliError::Io(e.to_string()))?);
                        text.push('\n');
                        let _ = writeln!(
                            csv,
                            "{m},{seed},{},{:?},{:?},{:?},{:?}",
                            r.step, r.reward_mean, r.reward_std, r.rg_mean, r.rm_mean
                        );
                    }
                    write_atomic(&sweep.join(&name), text.as_bytes())?;
                    dir.record(format!("sweep/{name}"));
                    runs.push(log.iter().map(|r| r.reward_mean).collect());
                }
                Err(e) => failures.push(format!("M={m} seed={seed}: {e}")),
            }
        }
        series.push(Series {
            label: format!("M = {m}"),
            runs,
        });
    }
    write_atomic(&sweep.join("sweep.csv"), csv.as_bytes())?;
    dir.record("sweep/sweep.csv");
    let svg = reward_curves("mean reward per step (band: ±1 std across seeds)", &series);
    write_atomic(&sweep.join("groupsize.svg"), svg.as_bytes())?;
    dir.record("sweep/groupsize.svg");
    dir.finish()?;
    println!(
        "{}",
        json!({
            "command": "sweep-groupsize",
            "cells": groups.len() * seeds.len(),
            "failed": failures,
        })
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial(format!("{} sweep cell(s) failed", failures.len())))
    }
}

pub fn score(cfg: &RunConfig, views: &[PathBuf]) -> Result<(), CliError> {
    let obs = views
        .iter()
        .map(|p| load_observation(p))
        .collect::<icworld::Result<Vec<_>>>()?;
    let b = score_views(&obs, cfg.trainer.weights, &cfg.trainer.geometry)?;
    println!("{}", serde_json::to_string(&b).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(())
}
