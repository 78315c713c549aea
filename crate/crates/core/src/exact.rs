//! Exact makespan minimization by depth-first branch-and-bound.
//!
//! Any deadlock-free schedule can be listed as a global sequence of
//! `(task, coalition)` decisions in which each robot visits its tasks in
//! sequence order. The search extends such sequences one decision at a
//! time, so every partial plan is loop-free and deadlock-free by
//! construction and timing is updated incrementally:
//! a task starts when the last coalition member arrives, and members become
//! free again once it has executed.
//!
//! Two sequences that only swap adjacent decisions with disjoint coalitions
//! describe the same schedule; only the order with the smaller task index
//! first is explored. Nodes are pruned with an admissible bound built from
//! per-robot shortest-walk leg costs.
//!
//! [`brute_force_oracle`] enumerates coalitions and per-robot permutations
//! independently and evaluates them through the validator's time
//! propagation. It exists to check the search.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::greedy::{solve_greedy, GreedyOptions};
use crate::model::{Instance, Schedule, TIME_TOLERANCE};
use crate::stochastic::{BufferMode, BufferPolicy, StochasticError};
use crate::validator::{propagate_times_with, TimingError};

/// Largest number of candidate schedules the brute-force oracle accepts.
pub const ORACLE_GUARD: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("instance has {n} robots, the exact solver supports at most 64")]
    TooManyRobots { n: usize },
    #[error("brute force would evaluate more than {guard} candidates")]
    TooLarge { guard: u64 },
    #[error("task {task} has no admissible coalition")]
    NoCoalition { task: usize },
    #[error(transparent)]
    Buffer(#[from] StochasticError),
    #[error(transparent)]
    Timing(#[from] TimingError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub time_limit_s: f64,
    pub node_limit: u64,
    pub mode: BufferMode,
    /// Record every improving solution in [`ExactResult::incumbents`].
    pub emit_incumbents: bool,
    /// Seed the incumbent with the greedy schedule.
    pub warm_start: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            time_limit_s: 300.0,
            node_limit: 10_000_000,
            mode: BufferMode::Corrected,
            emit_incumbents: true,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactStatus {
    ProvedOptimal,
    /// A limit was hit; the best schedule found so far is returned.
    IncumbentOnly,
    Infeasible,
    /// A limit was hit before any feasible schedule was found.
    Unknown,
}

impl ExactStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExactStatus::ProvedOptimal => "proved_optimal",
            ExactStatus::IncumbentOnly => "incumbent_only",
            ExactStatus::Infeasible => "infeasible",
            ExactStatus::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub elapsed_s: f64,
    pub makespan: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub schedule: Option<Schedule>,
    pub makespan: Option<f64>,
    pub status: ExactStatus,
    pub incumbents: Vec<Incumbent>,
    pub nodes: u64,
    pub elapsed_s: f64,
}

fn mask_of(members: &[usize]) -> u64 {
    members.iter().fold(0u64, |acc, &i| acc | (1u64 << i))
}

/// Checks coverage and the no-superfluous rule for one candidate coalition.
fn coalition_is_admissible(instance: &Instance, task: usize, members: &[usize]) -> bool {
    let req = instance.requirements(task);
    let mut counts = vec![0u32; instance.l()];
    for &i in members {
        for s in instance.robot_skills(i).intersection(req).iter() {
            counts[s] += 1;
        }
    }
    if req.iter().any(|s| counts[s] == 0) {
        return false;
    }
    members.iter().all(|&i| {
        let useful = instance.robot_skills(i).intersection(req);
        let unique = useful.iter().any(|s| counts[s] == 1);
        unique
    })
}

/// All robot sets that cover `task` without a superfluous member, sorted by
/// size and then lexicographically. Empty when the pool cannot serve the task.
pub fn enumerate_coalitions(instance: &Instance, task: usize) -> Vec<Vec<usize>> {
    let req = instance.requirements(task);
    let eligible: Vec<usize> = (0..instance.n())
        .filter(|&i| instance.robot_skills(i).intersection_len(req) > 0)
        .collect();
    // every member owns a skill nobody else in the coalition offers
    let max_size = req.len().min(eligible.len());
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(
        instance: &Instance,
        task: usize,
        eligible: &[usize],
        from: usize,
        max_size: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if !current.is_empty() && coalition_is_admissible(instance, task, current) {
            out.push(current.clone());
        }
        if current.len() == max_size {
            return;
        }
        for p in from..eligible.len() {
            current.push(eligible[p]);
            rec(instance, task, eligible, p + 1, max_size, current, out);
            current.pop();
        }
    }
    rec(instance, task, &eligible, 0, max_size, &mut current, &mut out);
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

struct Coalition {
    members: Vec<usize>,
    mask: u64,
}

/// Leg costs and walk lower bounds, `n x (m+2) x (m+2)`.
struct CostTables {
    w: usize,
    cost: Vec<f64>,
    walk: Vec<f64>,
}

impl CostTables {
    fn new(instance: &Instance, policy: &BufferPolicy) -> Self {
        let n = instance.n();
        let m = instance.m();
        let end = m + 1;
        let w = m + 2;
        let mut cost = vec![f64::INFINITY; n * w * w];
        for i in 0..n {
            for j in 0..=m {
                for k in 1..=end {
                    if j != k && !(j == 0 && k == 0) {
                        cost[(i * w + j) * w + k] = instance.leg_cost(i, j, k, policy);
                    }
                }
            }
        }
        // shortest walks with at most m + 1 legs; valid bounds even when a
        // buffer makes some leg cost negative
        let mut walk = cost.clone();
        for i in 0..n {
            let base = i * w * w;
            for j in 0..w {
                walk[base + j * w + j] = walk[base + j * w + j].min(0.0);
            }
            for _ in 0..m {
                let prev = walk[base..base + w * w].to_vec();
                let mut changed = false;
                for j in 0..w {
                    for a in 0..w {
                        let dja = prev[j * w + a];
                        if !dja.is_finite() {
                            continue;
                        }
                        for k in 0..w {
                            let c = cost[base + a * w + k];
                            let cand = dja + c;
                            if cand < walk[base + j * w + k] {
                                walk[base + j * w + k] = cand;
                                changed = true;
                            }
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        Self { w, cost, walk }
    }

    #[inline]
    fn cost(&self, i: usize, j: usize, k: usize) -> f64 {
        self.cost[(i * self.w + j) * self.w + k]
    }

    #[inline]
    fn walk(&self, i: usize, j: usize, k: usize) -> f64 {
        self.walk[(i * self.w + j) * self.w + k]
    }
}

struct Search<'a> {
    instance: &'a Instance,
    tables: CostTables,
    coalitions: Vec<Vec<Coalition>>,
    order: Vec<usize>,
    ready: Vec<f64>,
    loc: Vec<usize>,
    assigned: Vec<bool>,
    n_assigned: usize,
    routes: Vec<Vec<usize>>,
    best: f64,
    best_routes: Option<Vec<Vec<usize>>>,
    incumbents: Vec<Incumbent>,
    emit: bool,
    nodes: u64,
    node_limit: u64,
    time_limit_s: f64,
    started: Instant,
    aborted: bool,
}

impl Search<'_> {
    fn limit_hit(&mut self) -> bool {
        if self.aborted {
            return true;
        }
        if self.nodes >= self.node_limit
            || (self.nodes.is_multiple_of(256) && self.started.elapsed().as_secs_f64() >= self.time_limit_s)
        {
            self.aborted = true;
        }
        self.aborted
    }

    fn end_time(&self, i: usize) -> f64 {
        self.ready[i] + self.tables.cost(i, self.loc[i], self.instance.end())
    }

    fn lower_bound(&self) -> f64 {
        let end = self.instance.end();
        let mut lb = f64::NEG_INFINITY;
        for i in 0..self.ready.len() {
            lb = lb.max(self.ready[i] + self.tables.walk(i, self.loc[i], end));
        }
        if lb >= self.best - TIME_TOLERANCE {
            return lb;
        }
        for &k in &self.order {
            if self.assigned[k] {
                continue;
            }
            let exec = self.instance.exec_time(k);
            let mut task_lb = f64::INFINITY;
            for c in &self.coalitions[k] {
                let mut arrive = f64::NEG_INFINITY;
                let mut leave = f64::INFINITY;
                for &i in &c.members {
                    arrive = arrive.max(self.ready[i] + self.tables.walk(i, self.loc[i], k));
                    leave = leave.min(self.tables.walk(i, k, end));
                }
                task_lb = task_lb.min(arrive + exec + leave);
            }
            lb = lb.max(task_lb);
            if lb >= self.best - TIME_TOLERANCE {
                break;
            }
        }
        lb
    }

    fn record(&mut self, makespan: f64) {
        self.best = makespan;
        self.best_routes = Some(self.routes.clone());
        if self.emit {
            self.incumbents.push(Incumbent {
                elapsed_s: self.started.elapsed().as_secs_f64(),
                makespan,
            });
        }
    }

    fn dfs(&mut self, last: Option<(usize, u64)>) {
        self.nodes += 1;
        if self.limit_hit() {
            return;
        }
        let m = self.instance.m();
        if self.n_assigned == m {
            let makespan = (0..self.ready.len())
                .map(|i| self.end_time(i))
                .fold(f64::NEG_INFINITY, f64::max);
            let makespan = if self.ready.is_empty() { 0.0 } else { makespan };
            if makespan < self.best - TIME_TOLERANCE {
                self.record(makespan);
            }
            return;
        }
        if self.lower_bound() >= self.best - TIME_TOLERANCE {
            return;
        }
        let end = self.instance.end();
        for oi in 0..self.order.len() {
            let k = self.order[oi];
            if self.assigned[k] {
                continue;
            }
            let exec = self.instance.exec_time(k);
            for ci in 0..self.coalitions[k].len() {
                let c = &self.coalitions[k][ci];
                if let Some((pk, pmask)) = last {
                    if pmask & c.mask == 0 && k < pk {
                        continue;
                    }
                }
                let mut start = f64::NEG_INFINITY;
                let mut leave = f64::INFINITY;
                for &i in &c.members {
                    start = start.max(self.ready[i] + self.tables.cost(i, self.loc[i], k));
                    leave = leave.min(self.tables.walk(i, k, end));
                }
                if start + exec + leave >= self.best - TIME_TOLERANCE {
                    continue;
                }
                let mask = c.mask;
                let members = c.members.clone();
                let saved: Vec<(f64, usize)> = members.iter().map(|&i| (self.ready[i], self.loc[i])).collect();
                for &i in &members {
                    self.ready[i] = start + exec;
                    self.loc[i] = k;
                    self.routes[i].push(k);
                }
                self.assigned[k] = true;
                self.n_assigned += 1;

                self.dfs(Some((k, mask)));

                self.n_assigned -= 1;
                self.assigned[k] = false;
                for (&i, &(r, l)) in members.iter().zip(&saved) {
                    self.ready[i] = r;
                    self.loc[i] = l;
                    self.routes[i].pop();
                }
                if self.aborted {
                    return;
                }
            }
        }
    }
}

/// Minimizes the makespan. With [`ExactStatus::ProvedOptimal`] no feasible
/// schedule is shorter by more than the time tolerance.
pub fn solve_exact(instance: &Instance, options: &SolveOptions) -> Result<ExactResult, ExactError> {
    let started = Instant::now();
    let n = instance.n();
    let m = instance.m();
    if n > 64 {
        return Err(ExactError::TooManyRobots { n });
    }
    let policy = BufferPolicy::new(instance.epsilon(), options.mode)?;

    let mut coalitions: Vec<Vec<Coalition>> = vec![Vec::new()];
    for k in 1..=m {
        let list = enumerate_coalitions(instance, k);
        if list.is_empty() {
            return Ok(ExactResult {
                schedule: None,
                makespan: None,
                status: ExactStatus::Infeasible,
                incumbents: Vec::new(),
                nodes: 0,
                elapsed_s: started.elapsed().as_secs_f64(),
            });
        }
        coalitions.push(
            list.into_iter()
                .map(|members| Coalition {
                    mask: mask_of(&members),
                    members,
                })
                .collect(),
        );
    }
    // fail-first: fewest admissible coalitions, then task index
    let mut order: Vec<usize> = (1..=m).collect();
    order.sort_by_key(|&k| (coalitions[k].len(), k));

    let mut search = Search {
        instance,
        tables: CostTables::new(instance, &policy),
        coalitions,
        order,
        ready: vec![0.0; n],
        loc: vec![0; n],
        assigned: vec![false; m + 2],
        n_assigned: 0,
        routes: vec![Vec::new(); n],
        best: f64::INFINITY,
        best_routes: None,
        incumbents: Vec::new(),
        emit: options.emit_incumbents,
        nodes: 0,
        node_limit: options.node_limit.max(1),
        time_limit_s: options.time_limit_s,
        started,
        aborted: false,
    };

    if options.warm_start {
        if let Ok(sol) = solve_greedy(instance, GreedyOptions::with_mode(options.mode)) {
            search.routes = sol.schedule.routes().to_vec();
            search.record(sol.makespan());
            search.routes = vec![Vec::new(); n];
        }
    }

    search.dfs(None);

    let status = match (search.aborted, search.best_routes.is_some()) {
        (false, true) => ExactStatus::ProvedOptimal,
        (false, false) => ExactStatus::Infeasible,
        (true, true) => ExactStatus::IncumbentOnly,
        (true, false) => ExactStatus::Unknown,
    };
    let schedule = search
        .best_routes
        .map(|r| Schedule::new(r).expect("search routes never repeat a task"));
    Ok(ExactResult {
        makespan: schedule.as_ref().map(|_| search.best),
        schedule,
        status,
        incumbents: search.incumbents,
        nodes: search.nodes,
        elapsed_s: started.elapsed().as_secs_f64(),
    })
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (p, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(p);
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// Advances a mixed-radix counter; false once it wraps around.
fn advance(digits: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for (p, d) in digits.iter_mut().enumerate() {
        *d += 1;
        if *d < radix(p) {
            return true;
        }
        *d = 0;
    }
    false
}

/// Minimum makespan over every coalition choice and every per-robot visiting
/// order, skipping deadlocked combinations.
pub fn brute_force_oracle(instance: &Instance, mode: BufferMode) -> Result<f64, ExactError> {
    let n = instance.n();
    let m = instance.m();
    let policy = BufferPolicy::new(instance.epsilon(), mode)?;
    let mut choices = Vec::with_capacity(m);
    for k in 1..=m {
        let list = enumerate_coalitions(instance, k);
        if list.is_empty() {
            return Err(ExactError::NoCoalition { task: k });
        }
        choices.push(list);
    }

    let robot_sets = |digits: &[usize]| {
        let mut sets = vec![Vec::new(); n];
        for (t, &d) in digits.iter().enumerate() {
            for &i in &choices[t][d] {
                sets[i].push(t + 1);
            }
        }
        sets
    };

    // size check before doing any work
    let mut total: u64 = 0;
    let mut digits = vec![0usize; m];
    loop {
        let sets = robot_sets(&digits);
        let count = sets
            .iter()
            .map(|s| factorial(s.len()))
            .try_fold(1u64, |acc, f| acc.checked_mul(f));
        total = count
            .and_then(|c| total.checked_add(c))
            .filter(|&t| t <= ORACLE_GUARD)
            .ok_or(ExactError::TooLarge { guard: ORACLE_GUARD })?;
        if !advance(&mut digits, |p| choices[p].len()) {
            break;
        }
    }

    let mut best = f64::INFINITY;
    let mut digits = vec![0usize; m];
    loop {
        let perms: Vec<Vec<Vec<usize>>> = robot_sets(&digits).iter().map(|s| permutations(s)).collect();
        let mut pick = vec![0usize; n];
        loop {
            let routes = (0..n).map(|i| perms[i][pick[i]].clone()).collect();
            let schedule = Schedule::new(routes).expect("coalition sets are duplicate free");
            match propagate_times_with(instance, &schedule, &policy) {
                Ok(t) => best = best.min(t.makespan),
                Err(TimingError::Deadlock { .. }) => {}
                Err(e) => return Err(e.into()),
            }
            if !advance(&mut pick, |i| perms[i].len()) {
                break;
            }
        }
        if !advance(&mut digits, |p| choices[p].len()) {
            break;
        }
    }
    Ok(best)
}
