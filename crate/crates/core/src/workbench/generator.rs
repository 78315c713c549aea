use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::WorkbenchError;
use crate::model::{DelayModel, Instance, Positions, SkillSet, TravelTimes};

/// Cap on robot skill matrix redraws before giving up.
pub const MAX_GENERATION_TRIES: usize = 10_000;

/// How task requirement rows are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequirementSampling {
    /// Uniform over the `2^l - 1` nonempty subsets.
    #[default]
    UniformNonempty,
    /// Exactly one uniformly chosen skill.
    SingleSkill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub l: usize,
    pub m: usize,
    pub n: usize,
    /// Side of the square area, centred on the origin.
    pub area: f64,
    pub exec_range: [f64; 2],
    pub start_radius: f64,
    pub mu_fraction: f64,
    pub sigma_fraction_range: [f64; 2],
    pub epsilon: f64,
    pub seed: u64,
    /// Spread robot starts over `2*pi` instead of `pi`.
    pub full_circle: bool,
    pub requirements: RequirementSampling,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            l: 2,
            m: 8,
            n: 4,
            area: 200.0,
            exec_range: [0.0, 100.0],
            start_radius: 15.0,
            mu_fraction: 0.10,
            sigma_fraction_range: [0.05, 0.50],
            epsilon: 0.95,
            seed: 0,
            full_circle: false,
            requirements: RequirementSampling::UniformNonempty,
        }
    }
}

impl GeneratorConfig {
    pub fn new(l: usize, m: usize, n: usize, seed: u64) -> Self {
        Self {
            l,
            m,
            n,
            seed,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), WorkbenchError> {
        let bad = |msg: &str| Err(WorkbenchError::Config(msg.to_string()));
        if self.l == 0 || self.m == 0 || self.n == 0 {
            return bad("l, m and n must be positive");
        }
        if !(self.area > 0.0 && self.area.is_finite()) {
            return bad("area must be positive");
        }
        let [lo, hi] = self.exec_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return bad("exec_range must satisfy 0 <= lo <= hi");
        }
        if !(self.start_radius >= 0.0 && self.start_radius.is_finite()) {
            return bad("start_radius must be nonnegative");
        }
        if !(self.mu_fraction >= 0.0 && self.mu_fraction.is_finite()) {
            return bad("mu_fraction must be nonnegative");
        }
        let [slo, shi] = self.sigma_fraction_range;
        if !(slo > 0.0 && shi < 1.0 && slo <= shi) {
            return bad("sigma_fraction_range must lie inside (0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Start location of robot `i` on a circle of radius `r` around the centre.
pub fn robot_start(i: usize, n: usize, r: f64, full_circle: bool) -> [f64; 2] {
    let span = if full_circle { 2.0 * PI } else { PI };
    let angle = span * i as f64 / n as f64;
    [r * angle.sin(), r * angle.cos()]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Uniform draw over all subsets of `0..l` with size in `1..=max`.
fn uniform_subset(rng: &mut ChaCha8Rng, l: usize, max: usize) -> SkillSet {
    let weights: Vec<f64> = (1..=max).map(|s| binomial(l, s)).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut size = max;
    for (idx, w) in weights.iter().enumerate() {
        if u < *w {
            size = idx + 1;
            break;
        }
        u -= w;
    }
    let picks = sample(rng, l, size);
    SkillSet::from_indices(l, picks.iter()).expect("indices below l")
}

fn requirement_row(rng: &mut ChaCha8Rng, l: usize, how: RequirementSampling) -> SkillSet {
    match how {
        RequirementSampling::UniformNonempty => uniform_subset(rng, l, l),
        RequirementSampling::SingleSkill => {
            SkillSet::from_indices(l, [rng.random_range(0..l)]).expect("index below l")
        }
    }
}

/// Builds a random instance. The output depends only on `config`.
pub fn generate_instance(config: &GeneratorConfig) -> Result<Instance, WorkbenchError> {
    config.check()?;
    let GeneratorConfig { l, m, n, .. } = *config;
    let max_skills = l / 2;
    if max_skills == 0 {
        return Err(WorkbenchError::Generation(format!(
            "l = {l} leaves no room for a robot skill set"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let half = config.area / 2.0;
    let tasks: Vec<[f64; 2]> = (0..m)
        .map(|_| [rng.random_range(-half..=half), rng.random_range(-half..=half)])
        .collect();
    let starts: Vec<[f64; 2]> = (0..n)
        .map(|i| robot_start(i, n, config.start_radius, config.full_circle))
        .collect();
    let end = [0.0, 0.0];
    let [elo, ehi] = config.exec_range;
    let exec_times: Vec<f64> = (0..m).map(|_| rng.random_range(elo..=ehi)).collect();
    let requirements: Vec<SkillSet> = (0..m)
        .map(|_| requirement_row(&mut rng, l, config.requirements))
        .collect();

    let mut robot_skills = None;
    for _ in 0..MAX_GENERATION_TRIES {
        let rows: Vec<SkillSet> = (0..n).map(|_| uniform_subset(&mut rng, l, max_skills)).collect();
        let mut pool = SkillSet::empty(l);
        rows.iter().for_each(|q| pool.union_with(q));
        if pool.len() == l {
            robot_skills = Some(rows);
            break;
        }
    }
    let robot_skills = robot_skills.ok_or_else(|| {
        WorkbenchError::Generation(format!(
            "no robot skill matrix covering all {l} skills after {MAX_GENERATION_TRIES} tries"
        ))
    })?;

    let travel = TravelTimes {
        task_to_task: tasks.iter().map(|&a| tasks.iter().map(|&b| dist(a, b)).collect()).collect(),
        start_legs: starts.iter().map(|&s| tasks.iter().map(|&t| dist(s, t)).collect()).collect(),
        end_legs: starts.iter().map(|_| tasks.iter().map(|&t| dist(t, end)).collect()).collect(),
        start_to_end: starts.iter().map(|&s| dist(s, end)).collect(),
    };
    let [slo, shi] = config.sigma_fraction_range;
    let sigma_fraction: Vec<Vec<f64>> = (0..m + 2)
        .map(|_| (0..m + 2).map(|_| rng.random_range(slo..=shi)).collect())
        .collect();
    let delays = DelayModel::Proportional {
        mu_fraction: config.mu_fraction,
        sigma_fraction,
    };

    let instance = Instance::new(l, robot_skills, requirements, exec_times, travel, delays, config.epsilon)?;
    Ok(instance.with_positions(Positions {
        tasks,
        robot_starts: starts,
        end,
    })?)
}
