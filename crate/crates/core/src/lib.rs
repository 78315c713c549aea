//! Coalition formation and makespan scheduling for heterogeneous,
//! multi-skilled robot swarms with chance-constrained Gaussian travel delays.
//!
//! * [`model`]: instances, schedules and the assignment tensor.
//! * [`stochastic`]: normal quantiles and delay buffers.
//! * [`validator`]: constraint checks and arrival-time propagation.
//! * [`exact`]: branch-and-bound solver and a brute-force oracle.
//! * [`greedy`]: the contribution-driven greedy heuristic.
//! * [`workbench`]: generation, I/O, simulation, benchmarking and plots.

pub mod exact;
pub mod greedy;
pub mod model;
pub mod stochastic;
pub mod validator;
pub mod workbench;

pub use exact::{brute_force_oracle, solve_exact, ExactResult, ExactStatus, SolveOptions};
pub use greedy::{solve_greedy, GreedyOptions, GreedySolution};
pub use model::{Instance, Schedule, SkillSet, Timing};
pub use stochastic::{BufferMode, BufferPolicy};
pub use validator::{propagate_times, validate, ValidationReport};
