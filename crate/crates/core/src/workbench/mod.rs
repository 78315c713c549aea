//! Experiment workbench: instance generation, file I/O, Monte-Carlo
//! execution, benchmark suites and SVG summaries.

mod bench;
mod generator;
mod io;
mod plot;
mod simulate;

use std::path::PathBuf;

use thiserror::Error;

pub use bench::{
    load_records, median, relative_cost, relative_to, run_benchmark, write_records, BenchRecord, RelativeRecord,
    SeedSpec, Shape, SolverKind, SuiteConfig,
};
pub use generator::{generate_instance, robot_start, GeneratorConfig, RequirementSampling, MAX_GENERATION_TRIES};
pub use io::{
    instance_from_json, instance_to_json, load_instance, load_schedule, save_instance, save_schedule,
    schedule_from_json, schedule_to_json,
};
pub use plot::{emit_plots, render_box_plot, BoxGroup};
pub use simulate::{simulate_execution, LegStats, SimulationStats, Summary};

use crate::exact::ExactError;
use crate::greedy::GreedyError;
use crate::model::ModelError;
use crate::validator::TimingError;

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error at byte {byte_offset} (line {line}, column {column}): {message}")]
    Json {
        message: String,
        line: usize,
        column: usize,
        byte_offset: usize,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Greedy(#[from] GreedyError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("instance generation failed: {0}")]
    Generation(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no benchmark records to plot")]
    NoData,
}

impl WorkbenchError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        WorkbenchError::Io {
            path: path.into(),
            source,
        }
    }

    /// Converts a serde_json error, locating it as a byte offset in `text`.
    pub(crate) fn json(err: serde_json::Error, text: &str) -> Self {
        let line = err.line();
        let column = err.column();
        let byte_offset = text
            .split_inclusive('\n')
            .take(line.saturating_sub(1))
            .map(str::len)
            .sum::<usize>()
            + column;
        WorkbenchError::Json {
            message: err.to_string(),
            line,
            column,
            byte_offset: byte_offset.min(text.len()),
        }
    }
}
