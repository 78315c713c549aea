//! Problem and solution data model.
//!
//! An [`Instance`] is the immutable problem statement: `n` robots offering
//! skills, `m` real tasks requiring skills, travel and execution times, and
//! per-leg Gaussian delay parameters. Real tasks are numbered `1..=m`; node
//! `0` is every robot's start location and node `m + 1` the shared end
//! location. Robots are numbered from `0`.
//!
//! Solutions are stored as per-robot routes ([`Schedule`]). The dense binary
//! tensor form ([`AssignmentTensor`], `x[i][j][k] = 1` iff robot `i` moves
//! from `j` straight to `k`) exists for validator parity and conversion tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stochastic::{BufferPolicy, DelayParams};

/// Absolute tolerance used for every comparison between times.
pub const TIME_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("robot {robot} offers {count} skills, allowed range is 1..={max}")]
    RobotSkillCount {
        robot: usize,
        count: usize,
        max: usize,
    },
    #[error("task {task} requires no skill")]
    EmptyRequirement { task: usize },
    #[error("skill {skill} is required by some task but offered by no robot")]
    UncoveredSkill { skill: usize },
    #[error("skill index {skill} out of range for {width} skills")]
    SkillOutOfRange { skill: usize, width: usize },
    #[error("invalid value in {what}: {value}")]
    InvalidValue { what: String, value: f64 },
    #[error("epsilon must lie strictly inside (0, 1), got {0}")]
    Epsilon(f64),
    #[error("schedule has {found} routes but the instance has {expected} robots")]
    RobotCount { expected: usize, found: usize },
    #[error("robot {robot} visits task {task} more than once")]
    DuplicateTask { robot: usize, task: usize },
    #[error("robot {robot} route contains task {task}, valid real tasks are 1..={m}")]
    TaskOutOfRange { robot: usize, task: usize, m: usize },
    #[error("arcs of robot {robot} do not form a single 0 -> m+1 path: {reason}")]
    NotAPath { robot: usize, reason: String },
}

/// Fixed-width bit vector over skill indices `0..width`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SkillSet {
    width: usize,
    words: Vec<u64>,
}

impl SkillSet {
    pub fn empty(width: usize) -> Self {
        Self {
            width,
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn from_indices(width: usize, skills: impl IntoIterator<Item = usize>) -> Result<Self, ModelError> {
        let mut set = Self::empty(width);
        for s in skills {
            if s >= width {
                return Err(ModelError::SkillOutOfRange { skill: s, width });
            }
            set.insert(s);
        }
        Ok(set)
    }

    /// Builds a set from a 0/1 row as stored in the `Q` and `R` matrices.
    pub fn from_bits(bits: &[u8]) -> Result<Self, ModelError> {
        let mut set = Self::empty(bits.len());
        for (s, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => set.insert(s),
                other => {
                    return Err(ModelError::InvalidValue {
                        what: format!("binary skill row at column {s}"),
                        value: f64::from(other),
                    })
                }
            }
        }
        Ok(set)
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.width).map(|s| u8::from(self.contains(s))).collect()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn contains(&self, skill: usize) -> bool {
        skill < self.width && self.words[skill / 64] & (1u64 << (skill % 64)) != 0
    }

    /// Panics if `skill >= width`.
    #[inline]
    pub fn insert(&mut self, skill: usize) {
        assert!(skill < self.width, "skill {skill} out of range {}", self.width);
        self.words[skill / 64] |= 1u64 << (skill % 64);
    }

    #[inline]
    pub fn remove(&mut self, skill: usize) {
        if skill < self.width {
            self.words[skill / 64] &= !(1u64 << (skill % 64));
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Popcount of the intersection, without allocating.
    #[inline]
    pub fn intersection_len(&self, other: &SkillSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn intersection(&self, other: &SkillSet) -> SkillSet {
        SkillSet {
            width: self.width,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    pub fn union_with(&mut self, other: &SkillSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn difference_with(&mut self, other: &SkillSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn is_subset(&self, other: &SkillSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(move |&s| self.contains(s))
    }
}

/// Deterministic travel times in the compact shared-plus-legs layout.
///
/// Task-to-task legs are shared by all robots; only legs touching the start
/// or end location are robot specific.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TravelTimes {
    /// `m x m`, entry `[j-1][k-1]` is the time from task `j` to task `k`.
    pub task_to_task: Vec<Vec<f64>>,
    /// `n x m`, entry `[i][k-1]` is robot `i`'s time from its start to task `k`.
    pub start_legs: Vec<Vec<f64>>,
    /// `n x m`, entry `[i][j-1]` is robot `i`'s time from task `j` to the end.
    pub end_legs: Vec<Vec<f64>>,
    /// `n`, time of the direct start-to-end leg of an idle robot.
    pub start_to_end: Vec<f64>,
}

/// Gaussian delay parameters for every leg.
///
/// Matrices are `(m+2) x (m+2)` and indexed by node ids (`0` start, `m+1` end).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum DelayModel {
    /// `mu = mu_fraction * travel(i, j, k)`, `sigma = sigma_fraction[j][k] * mu`.
    /// Start legs inherit the travelling robot's own travel time.
    Proportional {
        mu_fraction: f64,
        sigma_fraction: Vec<Vec<f64>>,
    },
    /// Robot-independent absolute parameters per node pair.
    Explicit { mu: Vec<Vec<f64>>, sigma: Vec<Vec<f64>> },
    /// Absolute parameters per robot and node pair, `n x (m+2) x (m+2)`.
    PerRobot {
        mu: Vec<Vec<Vec<f64>>>,
        sigma: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Positions {
    pub tasks: Vec<[f64; 2]>,
    pub robot_starts: Vec<[f64; 2]>,
    pub end: [f64; 2],
}

/// Immutable problem statement. Invariants are checked by [`Instance::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    l: usize,
    robot_skills: Vec<SkillSet>,
    task_requirements: Vec<SkillSet>,
    exec_times: Vec<f64>,
    travel: TravelTimes,
    delays: DelayModel,
    epsilon: f64,
    positions: Option<Positions>,
}

fn check_value(what: impl Fn() -> String, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidValue { what: what(), value: v })
    }
}

fn check_len(what: &str, expected: usize, found: usize) -> Result<(), ModelError> {
    if expected == found {
        Ok(())
    } else {
        Err(ModelError::Dimension {
            what: what.to_string(),
            expected,
            found,
        })
    }
}

fn check_matrix(what: &str, rows: usize, cols: usize, mat: &[Vec<f64>]) -> Result<(), ModelError> {
    check_len(what, rows, mat.len())?;
    for (r, row) in mat.iter().enumerate() {
        check_len(&format!("{what} row {r}"), cols, row.len())?;
        for (c, &v) in row.iter().enumerate() {
            check_value(|| format!("{what}[{r}][{c}]"), v)?;
        }
    }
    Ok(())
}

impl Instance {
    /// Validates and builds an instance. `task_requirements[k - 1]` is the
    /// requirement row of real task `k`.
    pub fn new(
        l: usize,
        robot_skills: Vec<SkillSet>,
        task_requirements: Vec<SkillSet>,
        exec_times: Vec<f64>,
        travel: TravelTimes,
        delays: DelayModel,
        epsilon: f64,
    ) -> Result<Self, ModelError> {
        let n = robot_skills.len();
        let m = task_requirements.len();
        let max_skills = l / 2;
        for (i, q) in robot_skills.iter().enumerate() {
            check_len(&format!("skill row of robot {i}"), l, q.width())?;
            let count = q.len();
            if count == 0 || count > max_skills {
                return Err(ModelError::RobotSkillCount {
                    robot: i,
                    count,
                    max: max_skills,
                });
            }
        }
        let mut offered = SkillSet::empty(l);
        for q in &robot_skills {
            offered.union_with(q);
        }
        for (k, r) in task_requirements.iter().enumerate() {
            check_len(&format!("requirement row of task {}", k + 1), l, r.width())?;
            if r.is_empty() {
                return Err(ModelError::EmptyRequirement { task: k + 1 });
            }
            if let Some(s) = r.iter().find(|&s| !offered.contains(s)) {
                return Err(ModelError::UncoveredSkill { skill: s });
            }
        }
        check_len("exec_times", m, exec_times.len())?;
        for (k, &e) in exec_times.iter().enumerate() {
            check_value(|| format!("exec_times[{k}]"), e)?;
        }
        check_matrix("travel.task_to_task", m, m, &travel.task_to_task)?;
        check_matrix("travel.start_legs", n, m, &travel.start_legs)?;
        check_matrix("travel.end_legs", n, m, &travel.end_legs)?;
        check_len("travel.start_to_end", n, travel.start_to_end.len())?;
        for (i, &v) in travel.start_to_end.iter().enumerate() {
            check_value(|| format!("travel.start_to_end[{i}]"), v)?;
        }
        match &delays {
            DelayModel::Proportional {
                mu_fraction,
                sigma_fraction,
            } => {
                check_value(|| "stochastic.mu_fraction".into(), *mu_fraction)?;
                check_matrix("stochastic.sigma_fraction", m + 2, m + 2, sigma_fraction)?;
            }
            DelayModel::Explicit { mu, sigma } => {
                check_matrix("stochastic.mu", m + 2, m + 2, mu)?;
                check_matrix("stochastic.sigma", m + 2, m + 2, sigma)?;
            }
            DelayModel::PerRobot { mu, sigma } => {
                check_len("stochastic.mu", n, mu.len())?;
                check_len("stochastic.sigma", n, sigma.len())?;
                for i in 0..n {
                    check_matrix(&format!("stochastic.mu[{i}]"), m + 2, m + 2, &mu[i])?;
                    check_matrix(&format!("stochastic.sigma[{i}]"), m + 2, m + 2, &sigma[i])?;
                }
            }
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(ModelError::Epsilon(epsilon));
        }
        Ok(Self {
            l,
            robot_skills,
            task_requirements,
            exec_times,
            travel,
            delays,
            epsilon,
            positions: None,
        })
    }

    pub fn with_positions(mut self, positions: Positions) -> Result<Self, ModelError> {
        check_len("positions.tasks", self.m(), positions.tasks.len())?;
        check_len("positions.robot_starts", self.n(), positions.robot_starts.len())?;
        self.positions = Some(positions);
        Ok(self)
    }

    #[inline]
    pub fn l(&self) -> usize {
        self.l
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.task_requirements.len()
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.robot_skills.len()
    }

    /// Node id of the virtual end task.
    #[inline]
    pub fn end(&self) -> usize {
        self.m() + 1
    }

    #[inline]
    pub fn robot_skills(&self, robot: usize) -> &SkillSet {
        &self.robot_skills[robot]
    }

    pub fn all_robot_skills(&self) -> &[SkillSet] {
        &self.robot_skills
    }

    /// Requirement row of real task `task` (1-based).
    #[inline]
    pub fn requirements(&self, task: usize) -> &SkillSet {
        &self.task_requirements[task - 1]
    }

    pub fn all_requirements(&self) -> &[SkillSet] {
        &self.task_requirements
    }

    /// Execution time of any node; virtual tasks take zero time.
    #[inline]
    pub fn exec_time(&self, node: usize) -> f64 {
        if node == 0 || node > self.m() {
            0.0
        } else {
            self.exec_times[node - 1]
        }
    }

    pub fn exec_times(&self) -> &[f64] {
        &self.exec_times
    }

    pub fn travel(&self) -> &TravelTimes {
        &self.travel
    }

    pub fn delays(&self) -> &DelayModel {
        &self.delays
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn positions(&self) -> Option<&Positions> {
        self.positions.as_ref()
    }

    /// Travel time `t(i, j, k)` of robot `i` from node `j` to node `k`.
    ///
    /// Panics on arcs that no route can contain (into `0`, out of `m + 1`).
    #[inline]
    pub fn travel_time(&self, robot: usize, from: usize, to: usize) -> f64 {
        let end = self.end();
        if from == to {
            return 0.0;
        }
        match (from, to) {
            (0, k) if k == end => self.travel.start_to_end[robot],
            (0, k) if k < end => self.travel.start_legs[robot][k - 1],
            (j, k) if k == end && j < end => self.travel.end_legs[robot][j - 1],
            (j, k) if j < end && k < end && k > 0 => self.travel.task_to_task[j - 1][k - 1],
            _ => panic!("no travel leg from node {from} to node {to}"),
        }
    }

    /// Delay parameters of the leg `j -> k` travelled by robot `i`.
    #[inline]
    pub fn delay(&self, robot: usize, from: usize, to: usize) -> DelayParams {
        match &self.delays {
            DelayModel::Proportional {
                mu_fraction,
                sigma_fraction,
            } => {
                let mu = mu_fraction * self.travel_time(robot, from, to);
                DelayParams {
                    mu,
                    sigma: sigma_fraction[from][to] * mu,
                }
            }
            DelayModel::Explicit { mu, sigma } => DelayParams {
                mu: mu[from][to],
                sigma: sigma[from][to],
            },
            DelayModel::PerRobot { mu, sigma } => DelayParams {
                mu: mu[robot][from][to],
                sigma: sigma[robot][from][to],
            },
        }
    }

    /// Travel time plus stochastic buffer of a leg.
    #[inline]
    pub fn leg_cost(&self, robot: usize, from: usize, to: usize, policy: &BufferPolicy) -> f64 {
        self.travel_time(robot, from, to) + policy.buffer(self.delay(robot, from, to))
    }
}

/// Per-robot ordered lists of real tasks. Virtual start and end are implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "ScheduleRoutes")]
pub struct Schedule {
    routes: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleRoutes {
    routes: Vec<Vec<usize>>,
}

impl TryFrom<ScheduleRoutes> for Schedule {
    type Error = ModelError;

    fn try_from(value: ScheduleRoutes) -> Result<Self, Self::Error> {
        Schedule::new(value.routes)
    }
}

impl Schedule {
    /// Rejects repeated tasks within a route and the virtual index 0.
    pub fn new(routes: Vec<Vec<usize>>) -> Result<Self, ModelError> {
        for (i, route) in routes.iter().enumerate() {
            let mut seen = std::collections::HashSet::with_capacity(route.len());
            for &k in route {
                if k == 0 {
                    return Err(ModelError::TaskOutOfRange {
                        robot: i,
                        task: 0,
                        m: usize::MAX,
                    });
                }
                if !seen.insert(k) {
                    return Err(ModelError::DuplicateTask { robot: i, task: k });
                }
            }
        }
        Ok(Self { routes })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            routes: vec![Vec::new(); n],
        }
    }

    pub fn routes(&self) -> &[Vec<usize>] {
        &self.routes
    }

    pub fn route(&self, robot: usize) -> &[usize] {
        &self.routes[robot]
    }

    pub fn n_robots(&self) -> usize {
        self.routes.len()
    }

    /// Checks robot count and task range against an instance.
    pub fn check_fits(&self, instance: &Instance) -> Result<(), ModelError> {
        if self.routes.len() != instance.n() {
            return Err(ModelError::RobotCount {
                expected: instance.n(),
                found: self.routes.len(),
            });
        }
        let m = instance.m();
        for (i, route) in self.routes.iter().enumerate() {
            if let Some(&k) = route.iter().find(|&&k| k > m) {
                return Err(ModelError::TaskOutOfRange { robot: i, task: k, m });
            }
        }
        Ok(())
    }
}

/// Dense `n x (m+2) x (m+2)` binary tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentTensor {
    n: usize,
    m: usize,
    data: Vec<bool>,
}

impl AssignmentTensor {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            data: vec![false; n * (m + 2) * (m + 2)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        let w = self.m + 2;
        (i * w + j) * w + k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of nodes per robot layer, `m + 2`.
    pub fn nodes(&self) -> usize {
        self.m + 2
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.idx(i, j, k);
        self.data[idx] = value;
    }

    /// Total arcs set for robot `i`.
    pub fn arc_count(&self, i: usize) -> usize {
        let w = self.nodes();
        self.data[i * w * w..(i + 1) * w * w].iter().filter(|&&b| b).count()
    }

    pub fn successors(&self, i: usize, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes()).filter(move |&k| self.get(i, j, k))
    }
}

/// Builds the tensor form of a route schedule.
pub fn schedule_to_tensor(schedule: &Schedule, instance: &Instance) -> Result<AssignmentTensor, ModelError> {
    schedule.check_fits(instance)?;
    let end = instance.end();
    let mut x = AssignmentTensor::zeros(instance.n(), instance.m());
    for (i, route) in schedule.routes().iter().enumerate() {
        let mut prev = 0;
        for &k in route {
            x.set(i, prev, k, true);
            prev = k;
        }
        x.set(i, prev, end, true);
    }
    Ok(x)
}

/// Decomposes a tensor into one simple `0 -> m+1` path per robot.
pub fn tensor_to_schedule(x: &AssignmentTensor) -> Result<Schedule, ModelError> {
    let end = x.m() + 1;
    let mut routes = Vec::with_capacity(x.n());
    for i in 0..x.n() {
        let not_a_path = |reason: String| ModelError::NotAPath { robot: i, reason };
        let mut route = Vec::new();
        let mut seen = vec![false; x.nodes()];
        let mut node = 0;
        seen[0] = true;
        let mut arcs = 0;
        while node != end {
            let mut succ = x.successors(i, node);
            let next = succ
                .next()
                .ok_or_else(|| not_a_path(format!("node {node} has no outgoing arc")))?;
            if succ.next().is_some() {
                return Err(not_a_path(format!("node {node} has several outgoing arcs")));
            }
            if seen[next] {
                return Err(not_a_path(format!("node {next} is revisited")));
            }
            seen[next] = true;
            arcs += 1;
            if next != end {
                route.push(next);
            }
            node = next;
        }
        let total = x.arc_count(i);
        if total != arcs {
            return Err(not_a_path(format!("{} arcs lie off the start-to-end path", total - arcs)));
        }
        routes.push(route);
    }
    Schedule::new(routes)
}

/// Robots whose route contains `task`, in increasing index order.
pub fn coalition_of(schedule: &Schedule, task: usize) -> Vec<usize> {
    schedule
        .routes()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.contains(&task))
        .map(|(i, _)| i)
        .collect()
}

/// Arrival times, task start times and makespan of a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// `n x (m+2)`; `0.0` where the robot does not visit the node.
    pub arrivals: Vec<Vec<f64>>,
    /// `n x (m+2)`; disambiguates a genuine zero arrival from the unvisited sentinel.
    pub visited: Vec<Vec<bool>>,
    /// Length `m+2`; start time of each node, `task_starts[m+1]` is the makespan.
    pub task_starts: Vec<f64>,
    pub makespan: f64,
}
