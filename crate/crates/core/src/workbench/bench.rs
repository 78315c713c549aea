use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generator::{generate_instance, GeneratorConfig};
use super::WorkbenchError;
use crate::exact::{solve_exact, SolveOptions};
use crate::greedy::{solve_greedy, GreedyOptions};
use crate::stochastic::BufferMode;
use crate::validator::validate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exact,
    Greedy,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shape {
    pub l: usize,
    pub m: usize,
    pub n: usize,
}

/// Either an explicit seed list or `count` consecutive seeds from `start`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { start, count } => (*start..start + count).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub shapes: Vec<Shape>,
    pub seeds: SeedSpec,
    pub solvers: Vec<SolverKind>,
    #[serde(default)]
    pub buffer_mode: BufferMode,
    #[serde(default = "default_time_limit")]
    pub time_limit_s: f64,
    #[serde(default = "default_node_limit")]
    pub node_limit: u64,
    /// Worker threads; `0` uses all cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub full_circle: bool,
}

fn default_time_limit() -> f64 {
    60.0
}

fn default_node_limit() -> u64 {
    SolveOptions::default().node_limit
}

/// One solver run. Serialized as one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub seed: u64,
    pub l: usize,
    pub m: usize,
    pub n: usize,
    pub solver: SolverKind,
    pub buffer_mode: BufferMode,
    pub makespan: Option<f64>,
    pub wall_ms: f64,
    pub status: String,
}

/// A solver run compared with the exact run on the same instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeRecord {
    pub seed: u64,
    pub l: usize,
    pub m: usize,
    pub n: usize,
    pub solver: SolverKind,
    pub relative_cost: f64,
    pub log10_relative_time: f64,
}

pub fn relative_cost(cost: f64, baseline: f64) -> f64 {
    cost / baseline
}

/// Median of a nonempty sample; the mean of the middle pair for even sizes.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Pairs every record with the exact record of the same instance. Records
/// without a makespan on either side are skipped.
pub fn relative_to(records: &[BenchRecord], baseline: SolverKind) -> Vec<RelativeRecord> {
    let key = |r: &BenchRecord| (r.l, r.m, r.n, r.seed, r.buffer_mode.as_str());
    let base: BTreeMap<_, &BenchRecord> = records
        .iter()
        .filter(|r| r.solver == baseline)
        .map(|r| (key(r), r))
        .collect();
    records
        .iter()
        .filter_map(|r| {
            let b = base.get(&key(r))?;
            let (cost, base_cost) = (r.makespan?, b.makespan?);
            Some(RelativeRecord {
                seed: r.seed,
                l: r.l,
                m: r.m,
                n: r.n,
                solver: r.solver,
                relative_cost: relative_cost(cost, base_cost),
                log10_relative_time: (r.wall_ms.max(1e-6) / b.wall_ms.max(1e-6)).log10(),
            })
        })
        .collect()
}

struct Job {
    shape: Shape,
    seed: u64,
    solver: SolverKind,
}

fn run_job(job: &Job, suite: &SuiteConfig) -> BenchRecord {
    let Shape { l, m, n } = job.shape;
    let mut record = BenchRecord {
        seed: job.seed,
        l,
        m,
        n,
        solver: job.solver,
        buffer_mode: suite.buffer_mode,
        makespan: None,
        wall_ms: 0.0,
        status: String::new(),
    };
    let config = GeneratorConfig {
        full_circle: suite.full_circle,
        ..GeneratorConfig::new(l, m, n, job.seed)
    };
    let instance = match generate_instance(&config) {
        Ok(inst) => inst,
        Err(e) => {
            record.status = format!("generation_error: {e}");
            return record;
        }
    };
    let clock = Instant::now();
    match job.solver {
        SolverKind::Greedy => {
            let out = solve_greedy(&instance, GreedyOptions::with_mode(suite.buffer_mode));
            record.wall_ms = clock.elapsed().as_secs_f64() * 1e3;
            match out {
                Ok(sol) => {
                    let feasible = validate(&instance, &sol.schedule, suite.buffer_mode).feasible;
                    record.makespan = Some(sol.makespan());
                    record.status = if feasible { "heuristic" } else { "invalid" }.to_string();
                }
                Err(e) => record.status = format!("error: {e}"),
            }
        }
        SolverKind::Exact => {
            let options = SolveOptions {
                time_limit_s: suite.time_limit_s,
                node_limit: suite.node_limit,
                mode: suite.buffer_mode,
                emit_incumbents: false,
                warm_start: true,
            };
            let out = solve_exact(&instance, &options);
            record.wall_ms = clock.elapsed().as_secs_f64() * 1e3;
            match out {
                Ok(res) => {
                    record.makespan = res.makespan;
                    record.status = res.status.as_str().to_string();
                }
                Err(e) => record.status = format!("error: {e}"),
            }
        }
    }
    record
}

/// Runs every solver on every generated instance of the suite.
///
/// Jobs run on a worker pool. Records are returned, and streamed to `out`
/// when given, in canonical order (shape, seed, solver); each row is flushed
/// as soon as all rows before it are complete.
pub fn run_benchmark(suite: &SuiteConfig, out: Option<&Path>) -> Result<Vec<BenchRecord>, WorkbenchError> {
    if suite.shapes.is_empty() || suite.solvers.is_empty() {
        return Err(WorkbenchError::Config("suite needs at least one shape and one solver".into()));
    }
    let mut solvers = suite.solvers.clone();
    solvers.sort();
    solvers.dedup();
    let mut seeds = suite.seeds.seeds();
    seeds.sort_unstable();
    seeds.dedup();
    let jobs: Vec<Job> = suite
        .shapes
        .iter()
        .flat_map(|&shape| {
            let solvers = &solvers;
            seeds
                .iter()
                .flat_map(move |&seed| solvers.iter().map(move |&solver| Job { shape, seed, solver }))
        })
        .collect();

    let mut writer = match out {
        Some(path) => Some(csv::Writer::from_writer(
            File::create(path).map_err(|e| WorkbenchError::io(path, e))?,
        )),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(suite.workers)
        .build()
        .map_err(|e| WorkbenchError::Config(e.to_string()))?;

    let (tx, rx) = mpsc::channel::<(usize, BenchRecord)>();
    let mut slots: Vec<Option<BenchRecord>> = vec![None; jobs.len()];
    let mut next = 0;
    std::thread::scope(|scope| -> Result<(), WorkbenchError> {
        let jobs = &jobs;
        scope.spawn(move || {
            pool.install(|| {
                jobs.par_iter()
                    .enumerate()
                    .for_each_with(tx, |tx, (idx, job)| {
                        // the receiver only hangs up on a write error
                        let _ = tx.send((idx, run_job(job, suite)));
                    })
            })
        });
        for (idx, record) in rx {
            slots[idx] = Some(record);
            while next < slots.len() {
                let Some(record) = &slots[next] else { break };
                if let Some(w) = writer.as_mut() {
                    w.serialize(record)?;
                    w.flush().map_err(|e| WorkbenchError::io(out.unwrap(), e))?;
                }
                next += 1;
            }
        }
        Ok(())
    })?;
    if let Some(mut w) = writer {
        w.flush().map_err(|e| WorkbenchError::io(out.unwrap(), e))?;
    }
    Ok(slots.into_iter().map(|r| r.expect("every job reports")).collect())
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), WorkbenchError> {
    let file = File::create(path).map_err(|e| WorkbenchError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| WorkbenchError::io(path, e))?;
    w.into_inner()
        .map_err(|e| WorkbenchError::io(path, e.into_error()))?
        .flush()
        .map_err(|e| WorkbenchError::io(path, e))
}

pub fn load_records(path: &Path) -> Result<Vec<BenchRecord>, WorkbenchError> {
    let file = File::open(path).map_err(|e| WorkbenchError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    Ok(reader.deserialize().collect::<Result<_, _>>()?)
}
