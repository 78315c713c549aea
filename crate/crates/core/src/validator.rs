//! Feasibility checks, time propagation and violation reporting.
//!
//! Every constraint of the assignment formulation has a check here, split in
//! three groups: route structure on the tensor form, skill coverage and
//! superfluous-robot rejection on the route form, and arrival-time
//! propagation. Violations are collected exhaustively.

use serde::Serialize;
use thiserror::Error;

use crate::model::{schedule_to_tensor, AssignmentTensor, Instance, ModelError, Schedule, Timing};
use crate::stochastic::{BufferMode, BufferPolicy};

/// One violated constraint with the indices that violate it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Violation {
    Malformed { message: String },
    /// Exactly one arc must leave the start.
    StartDegree { robot: usize, arcs: usize },
    /// Exactly one arc must enter the end.
    EndDegree { robot: usize, arcs: usize },
    ArcIntoStart { robot: usize, from: usize },
    ArcOutOfEnd { robot: usize, to: usize },
    InDegree { robot: usize, task: usize, arcs: usize },
    OutDegree { robot: usize, task: usize, arcs: usize },
    FlowImbalance { robot: usize, task: usize, inflow: usize, outflow: usize },
    SelfLoop { robot: usize, task: usize },
    /// Loop detector: arcs walked from the start versus arcs set.
    Loop { robot: usize, count: usize, visited: usize },
    /// Attending robot offers none of the task's required skills.
    NoSharedSkill { robot: usize, task: usize },
    UncoveredSkill { task: usize, skill: usize, offered: u32, required: u32 },
    /// Every required skill the robot brings is already in excess.
    SuperfluousRobot { robot: usize, task: usize, excess: usize, required: usize },
    Deadlock { cycle: Vec<usize> },
}

impl Violation {
    /// Short label of the constraint family, used in CLI summaries.
    pub fn constraint(&self) -> &'static str {
        match self {
            Violation::Malformed { .. } => "malformed",
            Violation::StartDegree { .. } => "start-degree",
            Violation::EndDegree { .. } => "end-degree",
            Violation::ArcIntoStart { .. } => "arc-into-start",
            Violation::ArcOutOfEnd { .. } => "arc-out-of-end",
            Violation::InDegree { .. } => "in-degree",
            Violation::OutDegree { .. } => "out-degree",
            Violation::FlowImbalance { .. } => "flow-conservation",
            Violation::SelfLoop { .. } => "self-loop",
            Violation::Loop { .. } => "loop",
            Violation::NoSharedSkill { .. } => "attendance",
            Violation::UncoveredSkill { .. } => "skill-coverage",
            Violation::SuperfluousRobot { .. } => "superfluous-robot",
            Violation::Deadlock { .. } => "deadlock",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CheckResult {
    pub violations: Vec<Violation>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimingError {
    #[error("cyclic cross-schedule dependency between tasks {cycle:?}")]
    Deadlock { cycle: Vec<usize> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid buffer configuration: {0}")]
    Buffer(#[from] crate::stochastic::StochasticError),
}

/// Outcome of the loop detector for a whole tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopCheck {
    Valid,
    Invalid { robot: usize, count: usize, visited: usize },
}

/// Walks robot `i`'s arcs from the start and returns `(count, visited)` when
/// they differ or the walk cannot reach the end.
fn walk_robot(x: &AssignmentTensor, i: usize) -> Option<(usize, usize)> {
    let end = x.m() + 1;
    let visited = x.arc_count(i);
    let mut next = 0;
    let mut count = 0;
    while next != end {
        let mut succ = x.successors(i, next);
        let Some(k) = succ.next() else {
            return Some((count, visited));
        };
        // a second outgoing arc can never be walked, so counts cannot match
        if succ.next().is_some() {
            return Some((count, visited));
        }
        next = k;
        count += 1;
        if count > end + 1 {
            return Some((count, visited));
        }
    }
    (count != visited).then_some((count, visited))
}

/// Loop detection: per robot, count arcs on the walk from `0` to `m+1` and
/// compare with the total number of arcs set.
pub fn detect_loops(x: &AssignmentTensor) -> LoopCheck {
    for i in 0..x.n() {
        if let Some((count, visited)) = walk_robot(x, i) {
            return LoopCheck::Invalid { robot: i, count, visited };
        }
    }
    LoopCheck::Valid
}

/// Degree, flow and self-loop constraints followed by loop detection.
pub fn check_route_structure(x: &AssignmentTensor) -> CheckResult {
    let m = x.m();
    let end = m + 1;
    let mut v = Vec::new();
    for i in 0..x.n() {
        let out_of_start = (1..=end).filter(|&k| x.get(i, 0, k)).count();
        if out_of_start != 1 {
            v.push(Violation::StartDegree { robot: i, arcs: out_of_start });
        }
        let into_end = (0..=m).filter(|&j| x.get(i, j, end)).count();
        if into_end != 1 {
            v.push(Violation::EndDegree { robot: i, arcs: into_end });
        }
        for j in 1..=end {
            if x.get(i, j, 0) {
                v.push(Violation::ArcIntoStart { robot: i, from: j });
            }
        }
        for k in 0..=m {
            if x.get(i, end, k) {
                v.push(Violation::ArcOutOfEnd { robot: i, to: k });
            }
        }
        for t in 1..=m {
            let inflow = (0..=m).filter(|&j| x.get(i, j, t)).count();
            let outflow = (1..=end).filter(|&k| x.get(i, t, k)).count();
            if inflow > 1 {
                v.push(Violation::InDegree { robot: i, task: t, arcs: inflow });
            }
            if outflow > 1 {
                v.push(Violation::OutDegree { robot: i, task: t, arcs: outflow });
            }
            if inflow != outflow {
                v.push(Violation::FlowImbalance {
                    robot: i,
                    task: t,
                    inflow,
                    outflow,
                });
            }
        }
        for t in 0..=end {
            if x.get(i, t, t) {
                v.push(Violation::SelfLoop { robot: i, task: t });
            }
        }
        if let Some((count, visited)) = walk_robot(x, i) {
            v.push(Violation::Loop { robot: i, count, visited });
        }
    }
    CheckResult { violations: v }
}

/// `z[k][s]`: number of attending robots at real task `k` offering skill `s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkillCountMatrix {
    counts: Vec<Vec<u32>>,
}

impl SkillCountMatrix {
    pub fn compute(instance: &Instance, schedule: &Schedule) -> Self {
        let mut counts = vec![vec![0u32; instance.l()]; instance.m()];
        for (i, route) in schedule.routes().iter().enumerate() {
            for &k in route {
                for s in instance.robot_skills(i).iter() {
                    counts[k - 1][s] += 1;
                }
            }
        }
        Self { counts }
    }

    /// Count for real task `task` (1-based) and skill `skill`.
    pub fn get(&self, task: usize, skill: usize) -> u32 {
        self.counts[task - 1][skill]
    }
}

/// `zb[k][s] = 1` iff more robots offer `s` at `k` than `k` requires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExcessMatrix {
    excess: Vec<Vec<bool>>,
}

impl ExcessMatrix {
    pub fn compute(instance: &Instance, z: &SkillCountMatrix) -> Self {
        let excess = (1..=instance.m())
            .map(|k| {
                let req = instance.requirements(k);
                (0..instance.l())
                    .map(|s| z.get(k, s) > u32::from(req.contains(s)))
                    .collect()
            })
            .collect();
        Self { excess }
    }

    pub fn get(&self, task: usize, skill: usize) -> bool {
        self.excess[task - 1][skill]
    }
}

fn malformed(err: ModelError) -> CheckResult {
    CheckResult {
        violations: vec![Violation::Malformed { message: err.to_string() }],
    }
}

/// Attendance requirement and per-skill coverage.
pub fn check_skill_coverage(instance: &Instance, schedule: &Schedule) -> (CheckResult, SkillCountMatrix) {
    if let Err(e) = schedule.check_fits(instance) {
        return (malformed(e), SkillCountMatrix { counts: Vec::new() });
    }
    let mut v = Vec::new();
    for (i, route) in schedule.routes().iter().enumerate() {
        for &k in route {
            if instance.robot_skills(i).intersection_len(instance.requirements(k)) == 0 {
                v.push(Violation::NoSharedSkill { robot: i, task: k });
            }
        }
    }
    let z = SkillCountMatrix::compute(instance, schedule);
    for k in 1..=instance.m() {
        for s in instance.requirements(k).iter() {
            if z.get(k, s) < 1 {
                v.push(Violation::UncoveredSkill {
                    task: k,
                    skill: s,
                    offered: z.get(k, s),
                    required: 1,
                });
            }
        }
    }
    (CheckResult { violations: v }, z)
}

/// Superfluous-robot rejection: each attending robot needs at least one
/// required skill that is not in excess at the task.
///
/// The excess count is taken over the task's required skills only; a skill
/// the task does not ask for never makes a robot superfluous.
pub fn check_no_superfluous(
    instance: &Instance,
    schedule: &Schedule,
    z: &SkillCountMatrix,
) -> (CheckResult, ExcessMatrix) {
    if let Err(e) = schedule.check_fits(instance) {
        return (malformed(e), ExcessMatrix { excess: Vec::new() });
    }
    let zb = ExcessMatrix::compute(instance, z);
    let mut v = Vec::new();
    for (i, route) in schedule.routes().iter().enumerate() {
        let q = instance.robot_skills(i);
        for &k in route {
            let useful = q.intersection(instance.requirements(k));
            let required = useful.len();
            let excess = useful.iter().filter(|&s| zb.get(k, s)).count();
            if excess + 1 > required {
                v.push(Violation::SuperfluousRobot {
                    robot: i,
                    task: k,
                    excess,
                    required,
                });
            }
        }
    }
    (CheckResult { violations: v }, zb)
}

/// Arrival times and makespan under the buffer rule of `mode`.
pub fn propagate_times(instance: &Instance, schedule: &Schedule, mode: BufferMode) -> Result<Timing, TimingError> {
    let policy = BufferPolicy::new(instance.epsilon(), mode)?;
    propagate_times_with(instance, schedule, &policy)
}

/// Same as [`propagate_times`] with a precomputed buffer policy.
///
/// Tasks are resolved in topological order of the precedence relation
/// "some robot goes straight from `j` to `k`". Every robot's arrival at the
/// end node enters the makespan, idle robots included.
pub fn propagate_times_with(
    instance: &Instance,
    schedule: &Schedule,
    policy: &BufferPolicy,
) -> Result<Timing, TimingError> {
    let order = precedence_order(instance, schedule)?;
    let m = instance.m();
    let n = instance.n();
    let end = m + 1;

    let mut arrivals = vec![vec![0.0; m + 2]; n];
    let mut visited = vec![vec![false; m + 2]; n];
    let mut starts = vec![0.0; m + 2];
    for row in visited.iter_mut() {
        row[0] = true;
    }
    for &(k, ref attendees) in &order.tasks {
        let mut start = f64::NEG_INFINITY;
        for &(i, j) in attendees {
            let y = starts[j] + instance.exec_time(j) + instance.leg_cost(i, j, k, policy);
            arrivals[i][k] = y;
            visited[i][k] = true;
            start = start.max(y);
        }
        starts[k] = start;
    }

    let mut makespan = 0.0f64;
    for (i, route) in schedule.routes().iter().enumerate() {
        let last = route.last().copied().unwrap_or(0);
        let y = starts[last] + instance.exec_time(last) + instance.leg_cost(i, last, end, policy);
        arrivals[i][end] = y;
        visited[i][end] = true;
        makespan = if i == 0 { y } else { makespan.max(y) };
    }
    starts[end] = makespan;
    Ok(Timing {
        arrivals,
        visited,
        task_starts: starts,
        makespan,
    })
}

/// Visited tasks in an order where every task comes after the tasks its
/// coalition members leave from.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecedenceOrder {
    /// `(task, [(robot, predecessor node)])` in resolution order.
    pub tasks: Vec<(usize, Vec<(usize, usize)>)>,
}

/// Topological order of the precedence relation "some robot goes straight
/// from `j` to `k`"; a cycle is a deadlock.
pub fn precedence_order(instance: &Instance, schedule: &Schedule) -> Result<PrecedenceOrder, TimingError> {
    schedule.check_fits(instance)?;
    let m = instance.m();
    let mut attendees: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m + 2];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); m + 2];
    let mut indegree = vec![0usize; m + 2];
    for (i, route) in schedule.routes().iter().enumerate() {
        let mut prev = 0;
        for &k in route {
            attendees[k].push((i, prev));
            if prev != 0 {
                succs[prev].push(k);
                indegree[k] += 1;
            }
            prev = k;
        }
    }
    let mut ready: Vec<usize> = (1..=m)
        .rev()
        .filter(|&k| indegree[k] == 0 && !attendees[k].is_empty())
        .collect();
    let involved = (1..=m).filter(|&k| !attendees[k].is_empty()).count();
    let mut order = Vec::with_capacity(involved);
    while let Some(k) = ready.pop() {
        order.push(k);
        for &s in &succs[k] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(s);
            }
        }
    }
    if order.len() < involved {
        return Err(TimingError::Deadlock {
            cycle: find_cycle(&attendees, &indegree),
        });
    }
    Ok(PrecedenceOrder {
        tasks: order
            .into_iter()
            .map(|k| (k, std::mem::take(&mut attendees[k])))
            .collect(),
    })
}

/// Extracts one precedence cycle among the tasks left unresolved.
fn find_cycle(attendees: &[Vec<(usize, usize)>], indegree: &[usize]) -> Vec<usize> {
    let stuck = |k: usize| k != 0 && indegree[k] > 0;
    let Some(mut node) = (1..indegree.len()).find(|&k| stuck(k)) else {
        return Vec::new();
    };
    // walk backwards through unresolved predecessors until a node repeats
    let mut order = vec![node];
    loop {
        let pred = attendees[node]
            .iter()
            .map(|&(_, p)| p)
            .find(|&p| stuck(p))
            .expect("an unresolved task has an unresolved predecessor");
        if let Some(pos) = order.iter().position(|&t| t == pred) {
            let mut cycle = order[pos..].to_vec();
            cycle.reverse();
            return cycle;
        }
        order.push(pred);
        node = pred;
    }
}

/// Result of [`validate`]. `feasible` is true iff every check passed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub structure: CheckResult,
    pub skill_coverage: CheckResult,
    pub no_superfluous: CheckResult,
    pub time_propagation: CheckResult,
    pub timing: Option<Timing>,
    pub feasible: bool,
}

impl ValidationReport {
    pub fn violations(&self) -> impl Iterator<Item = &Violation> {
        self.structure
            .violations
            .iter()
            .chain(&self.skill_coverage.violations)
            .chain(&self.no_superfluous.violations)
            .chain(&self.time_propagation.violations)
    }
}

/// Runs every check. Time propagation is skipped when the structure fails.
pub fn validate(instance: &Instance, schedule: &Schedule, mode: BufferMode) -> ValidationReport {
    let structure = match schedule_to_tensor(schedule, instance) {
        Ok(x) => check_route_structure(&x),
        Err(e) => malformed(e),
    };
    if !structure.passed() {
        return ValidationReport {
            structure,
            skill_coverage: CheckResult::default(),
            no_superfluous: CheckResult::default(),
            time_propagation: CheckResult::default(),
            timing: None,
            feasible: false,
        };
    }
    let (skill_coverage, z) = check_skill_coverage(instance, schedule);
    let (no_superfluous, _) = check_no_superfluous(instance, schedule, &z);
    let (timing, time_propagation) = match propagate_times(instance, schedule, mode) {
        Ok(t) => (Some(t), CheckResult::default()),
        Err(TimingError::Deadlock { cycle }) => (
            None,
            CheckResult {
                violations: vec![Violation::Deadlock { cycle }],
            },
        ),
        Err(e) => (None, malformed_msg(e.to_string())),
    };
    let feasible = skill_coverage.passed() && no_superfluous.passed() && time_propagation.passed();
    ValidationReport {
        structure,
        skill_coverage,
        no_superfluous,
        time_propagation,
        timing,
        feasible,
    }
}

fn malformed_msg(message: String) -> CheckResult {
    CheckResult {
        violations: vec![Violation::Malformed { message }],
    }
}
