//! The four subcommands.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde_json::{json, Value};
use tsmcts::diagnostics::{
    bootstrap_interval, depth_sweep, improvement_check, monotone_within_bounds, root_variance,
    summarize, ImprovementReport, SweepCell,
};
use tsmcts::planner::{PlannerConfig, PlannerOutput};
use tsmcts::training::{train, TrainRow};
use tsmcts::{PlanContext, Planner, StreamKey, TabularMdp};

use crate::config::{self, Config};

pub const SCHEMA_VERSION: u32 = 1;

pub const GRID_COLUMNS: [&str; 8] = ["planner", "env", "N", "T", "m1", "seed", "metric", "value"];

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dry_run: bool,
}

struct Loaded {
    config: Config,
    seed: u64,
    base: PathBuf,
}

fn load(opts: &RunOptions) -> anyhow::Result<Loaded> {
    let config = config::load(opts.config.as_deref())?;
    let seed = opts.seed.or(config.seed).unwrap_or(0);
    let base = opts
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    Ok(Loaded { config, seed, base })
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(())
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            ensure_parent(path)?;
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn schedule_json(out: &PlannerOutput) -> Value {
    match &out.schedule {
        Some(s) => json!({
            "iterations": s.num_iterations,
            "T_SH": s.t_sh,
            "m": s.m,
            "particles_per_action": s.n_per_action,
            "expected_expansions": s.expected_expansions(),
        }),
        None => Value::Null,
    }
}

pub fn output_json(
    planner: &str,
    env: &str,
    state: usize,
    seed: u64,
    out: &PlannerOutput,
) -> Value {
    json!({
        "schema-version": SCHEMA_VERSION,
        "command": "plan",
        "planner": planner,
        "env": env,
        "state": state,
        "seed": seed,
        "policy": out.policy,
        "v_search": out.v_search,
        "active_actions": out.active_actions,
        "root_values": out.root_values,
        "counters": {
            "model_expansions": out.counters.model_expansions,
            "value_evaluations": out.counters.value_evaluations,
            "resampling_events": out.counters.resampling_events,
            "resampling_fallbacks": out.counters.resampling_fallbacks,
        },
        "schedule": schedule_json(out),
    })
}

pub fn plan(opts: &RunOptions, state: usize) -> anyhow::Result<()> {
    let Loaded { config, seed, base } = load(opts)?;
    let planner = config.planner.build()?;
    if opts.dry_run {
        return emit(
            &pretty(&json!({
                "schema-version": SCHEMA_VERSION,
                "command": "plan",
                "seed": seed,
                "state": state,
                "config": config,
            })),
            opts.out.as_deref(),
        );
    }
    let mdp = config.env.build(&base)?;
    mdp.check_state(state)?;
    let prior = config.values.prior(&mdp);
    let values = config.values.search_values(&mdp, &prior)?;
    let ctx = PlanContext::new(&mdp, &prior, &values)?;
    let out = planner.plan(&ctx, state, StreamKey::new(seed).label("plan"))?;
    let doc = output_json(&config.planner.name, &config.env.label(), state, seed, &out);
    emit(&pretty(&doc), opts.out.as_deref())
}

fn train_record(r: &TrainRow) -> [String; 8] {
    [
        r.episode.to_string(),
        r.env_steps.to_string(),
        r.eval_return.to_string(),
        r.policy_loss.to_string(),
        r.value_loss.to_string(),
        r.model_expansions.to_string(),
        r.value_evaluations.to_string(),
        r.resampling_fallbacks.to_string(),
    ]
}

pub fn train_cmd(opts: &RunOptions) -> anyhow::Result<()> {
    let Loaded { config, seed, base } = load(opts)?;
    let planner = config.planner.build()?;
    config.train.validate()?;
    if opts.dry_run {
        return emit(
            &pretty(
                &json!({ "schema-version": SCHEMA_VERSION, "command": "train", "seed": seed, "config": config }),
            ),
            None,
        );
    }
    let mdp = config.env.build(&base)?;
    let sink: Box<dyn Write> = match &opts.out {
        Some(path) => {
            ensure_parent(path)?;
            Box::new(
                File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
            )
        }
        None => Box::new(io::stdout()),
    };
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(TrainRow::HEADER)?;
    writer.flush()?;
    train(&mdp, &planner, &config.train, seed, |row| {
        writer
            .write_record(train_record(row))
            .map_err(|e| tsmcts::Error::Invariant(e.to_string()))?;
        writer
            .flush()
            .map_err(|e| tsmcts::Error::Invariant(e.to_string()))?;
        Ok(())
    })?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
struct GridCell {
    planner: String,
    env: String,
    n: usize,
    t: usize,
    m1: usize,
    seed: u64,
}

impl GridCell {
    fn json(&self) -> Value {
        json!({ "planner": self.planner, "env": self.env, "N": self.n, "T": self.t, "m1": self.m1, "seed": self.seed })
    }

    fn record(&self, metric: &str, value: f64) -> [String; 8] {
        [
            self.planner.clone(),
            self.env.clone(),
            self.n.to_string(),
            self.t.to_string(),
            self.m1.to_string(),
            self.seed.to_string(),
            metric.to_string(),
            value.to_string(),
        ]
    }
}

fn write_grid_csv(path: &Path, rows: &[[String; 8]]) -> anyhow::Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(GRID_COLUMNS)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn out_dir(opts: &RunOptions, default: &str) -> PathBuf {
    opts.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn dry_run_listing(command: &str, seed: u64, cells: &[GridCell]) -> anyhow::Result<()> {
    emit(
        &pretty(&json!({
            "schema-version": SCHEMA_VERSION,
            "command": command,
            "seed": seed,
            "cells": cells.iter().map(GridCell::json).collect::<Vec<_>>(),
        })),
        None,
    )
}

pub fn diagnose(opts: &RunOptions) -> anyhow::Result<()> {
    let Loaded { config, seed, base } = load(opts)?;
    let d = &config.diagnose;
    d.validate()?;
    let env = config.env.label();
    let mut cells = Vec::new();
    for planner in &d.planners {
        for &n in &d.num_particles {
            for &t in &d.depths {
                for &m1 in &d.m1 {
                    for &s in &d.seeds {
                        cells.push(GridCell {
                            planner: planner.clone(),
                            env: env.clone(),
                            n,
                            t,
                            m1,
                            seed: s,
                        });
                    }
                }
            }
        }
    }
    let planners: Vec<PlannerConfig> = cells
        .iter()
        .map(|c| config.planner.build_with(&c.planner, c.n, c.t, c.m1))
        .collect::<anyhow::Result<_>>()?;
    if opts.dry_run {
        return dry_run_listing("diagnose", seed, &cells);
    }
    let mdp = config.env.build(&base)?;
    mdp.check_state(d.state)?;
    let prior = config.values.prior(&mdp);
    let values = config.values.search_values(&mdp, &prior)?;
    let ctx = PlanContext::new(&mdp, &prior, &values)?;
    let want = |m: &str| d.metrics.iter().any(|x| x == m);

    struct CellResult {
        rows: Vec<[String; 8]>,
        improvement: Option<ImprovementReport>,
        summary: Value,
    }
    let results: Vec<CellResult> = cells
        .par_iter()
        .zip(planners.par_iter())
        .map(|(cell, planner)| -> anyhow::Result<CellResult> {
            let cell_seed = StreamKey::new(seed).child(cell.seed).raw();
            let mut rows = Vec::new();
            let mut summary = cell.json();
            let mut improvement = None;
            if want("variance") {
                let r = root_variance(&ctx, planner, d.state, d.calls, cell_seed)?;
                rows.push(cell.record("v_mean", r.mean));
                rows.push(cell.record("v_variance", r.variance));
                rows.push(cell.record("active_actions", r.mean_active_actions));
                summary["v_mean"] = json!(r.mean);
                summary["v_variance"] = json!(r.variance);
                summary["active_actions"] = json!(r.mean_active_actions);
            }
            if want("improvement") {
                let r = improvement_check(&ctx, planner, d.state, d.replicates, cell_seed)?;
                rows.push(cell.record("gap", r.gap));
                rows.push(cell.record("gap_std_error", r.std_error));
                summary["baseline"] = json!(r.baseline);
                summary["gap"] = json!(r.gap);
                summary["gap_std_error"] = json!(r.std_error);
                summary["improves"] = json!(r.passes());
                improvement = Some(r);
            }
            Ok(CellResult {
                rows,
                improvement,
                summary,
            })
        })
        .collect::<anyhow::Result<_>>()?;

    // depth tables per (planner, N, m1, seed), in configured depth order
    let mut monotone = Vec::new();
    if want("improvement") {
        for c in &cells {
            if c.t != d.depths[0] {
                continue;
            }
            let table: Vec<ImprovementReport> = cells
                .iter()
                .zip(&results)
                .filter(|(o, _)| {
                    o.planner == c.planner && o.n == c.n && o.m1 == c.m1 && o.seed == c.seed
                })
                .filter_map(|(_, r)| r.improvement.clone())
                .collect();
            monotone.push(json!({
                "planner": c.planner, "N": c.n, "m1": c.m1, "seed": c.seed,
                "depths": d.depths,
                "gaps": table.iter().map(|r| r.gap).collect::<Vec<_>>(),
                "nondecreasing": monotone_within_bounds(&table),
            }));
        }
    }

    let dir = out_dir(opts, "diagnose-out");
    let rows: Vec<[String; 8]> = results
        .iter()
        .flat_map(|r| r.rows.iter().cloned())
        .collect();
    write_grid_csv(&dir.join("diagnose.csv"), &rows)?;
    let doc = json!({
        "schema-version": SCHEMA_VERSION,
        "command": "diagnose",
        "seed": seed,
        "env": env,
        "state": d.state,
        "calls": d.calls,
        "cells": results.iter().map(|r| r.summary.clone()).collect::<Vec<_>>(),
        "monotone": monotone,
    });
    emit(&pretty(&doc), Some(&dir.join("diagnose.json")))
}

pub fn sweep(opts: &RunOptions) -> anyhow::Result<()> {
    let Loaded { config, seed, base } = load(opts)?;
    let sw = &config.sweep;
    sw.validate()?;
    config.train.validate()?;
    let mut cells = Vec::new();
    for env in &sw.envs {
        for planner in &sw.planners {
            for &n in &sw.num_particles {
                for &m1 in &sw.m1 {
                    for &t in &sw.depths {
                        for &s in &sw.seeds {
                            cells.push(GridCell {
                                planner: planner.clone(),
                                env: env.clone(),
                                n,
                                t,
                                m1,
                                seed: s,
                            });
                        }
                    }
                }
            }
        }
    }
    let planners: Vec<PlannerConfig> = cells
        .iter()
        .map(|c| config.planner.build_with(&c.planner, c.n, c.t, c.m1))
        .collect::<anyhow::Result<_>>()?;
    if opts.dry_run {
        return dry_run_listing("sweep", seed, &cells);
    }
    let envs: Vec<TabularMdp> = sw
        .envs
        .iter()
        .map(|e| config.env.build_named(e, &base))
        .collect::<anyhow::Result<_>>()?;
    let label = |c: &GridCell| format!("{}|{}|{}", c.planner, c.n, c.m1);
    let sweep_cells: Vec<SweepCell<PlannerConfig>> = cells
        .iter()
        .zip(planners)
        .map(|(c, planner)| SweepCell {
            env: sw
                .envs
                .iter()
                .position(|e| *e == c.env)
                .expect("env from the grid"),
            label: label(c),
            depth: c.t,
            seed: StreamKey::new(seed).child(c.seed).raw(),
            planner,
        })
        .collect();
    let records = depth_sweep(&envs, &sweep_cells, &config.train)?;
    let rows: Vec<[String; 8]> = cells
        .iter()
        .zip(&records)
        .flat_map(|(c, r)| {
            [
                c.record("auc", r.auc),
                c.record("normalized_auc", r.normalized),
            ]
        })
        .collect();
    let dir = out_dir(opts, "sweep-out");
    write_grid_csv(&dir.join("sweep.csv"), &rows)?;

    let key = StreamKey::new(seed).label("bootstrap");
    let summary: Vec<Value> = summarize(&records, sw.bootstrap_resamples, sw.interval, key)
        .into_iter()
        .map(|s| {
            let mut parts = s.label.split('|');
            let planner = parts.next().unwrap_or_default();
            let n: usize = parts.next().and_then(|x| x.parse().ok()).unwrap_or_default();
            let m1: usize = parts.next().and_then(|x| x.parse().ok()).unwrap_or_default();
            json!({ "planner": planner, "N": n, "m1": m1, "T": s.depth, "mean": s.mean, "lo": s.lo, "hi": s.hi })
        })
        .collect();
    let per_env: Vec<Value> = sw
        .envs
        .iter()
        .enumerate()
        .map(|(e, name)| {
            let aucs: Vec<f64> = records.iter().filter(|r| r.env == e).map(|r| r.auc).collect();
            let (lo, hi) = bootstrap_interval(&aucs, sw.bootstrap_resamples, sw.interval, key.child(1000 + e as u64));
            json!({ "env": name, "auc_min": aucs.iter().cloned().fold(f64::INFINITY, f64::min),
                    "auc_max": aucs.iter().cloned().fold(f64::NEG_INFINITY, f64::max), "lo": lo, "hi": hi })
        })
        .collect();
    let doc = json!({
        "schema-version": SCHEMA_VERSION,
        "command": "sweep",
        "seed": seed,
        "interval": sw.interval,
        "summary": summary,
        "envs": per_env,
    });
    emit(&pretty(&doc), Some(&dir.join("sweep.json")))
}
