//! Greedy coalition scheduler.
//!
//! Each outer round picks the robot-task pair with the largest contribution
//! (number of still-unoffered required skills the robot brings), breaking
//! ties by earliest estimated arrival. The chosen task's coalition is then
//! completed robot by robot with the same rule on the remaining skills, and
//! the task start time is committed as the latest member arrival.
//!
//! Residual ties (equal contribution and arrival within [`TIME_TOLERANCE`])
//! go to the lowest robot index, then the lowest task index.

use thiserror::Error;

use crate::model::{Instance, Schedule, SkillSet, Timing, TIME_TOLERANCE};
use crate::stochastic::{BufferMode, BufferPolicy, StochasticError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GreedyError {
    #[error("no robot can contribute to the unmet requirements of task {task}")]
    NoContributor { task: usize },
    #[error(transparent)]
    Buffer(#[from] StochasticError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyOptions {
    pub mode: BufferMode,
    /// Drop coalition members whose required skills all ended up duplicated
    /// by robots added after them, before the task start is committed.
    pub prune_superfluous: bool,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            mode: BufferMode::Corrected,
            prune_superfluous: true,
        }
    }
}

impl GreedyOptions {
    pub fn with_mode(mode: BufferMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedySolution {
    pub schedule: Schedule,
    pub timing: Timing,
    /// Real tasks in the order their start times were committed.
    pub commit_order: Vec<usize>,
}

impl GreedySolution {
    pub fn makespan(&self) -> f64 {
        self.timing.makespan
    }
}

/// Mutable state of one greedy run.
#[derive(Debug, Clone)]
pub struct GreedyState<'a> {
    instance: &'a Instance,
    policy: BufferPolicy,
    remaining: Vec<SkillSet>,
    committed: Vec<bool>,
    starts: Vec<f64>,
    location: Vec<usize>,
    routes: Vec<Vec<usize>>,
    arrivals: Vec<Vec<f64>>,
    visited: Vec<Vec<bool>>,
    commit_order: Vec<usize>,
}

impl<'a> GreedyState<'a> {
    pub fn new(instance: &'a Instance, mode: BufferMode) -> Result<Self, GreedyError> {
        let n = instance.n();
        let m = instance.m();
        let mut committed = vec![false; m + 2];
        committed[0] = true;
        Ok(Self {
            instance,
            policy: BufferPolicy::new(instance.epsilon(), mode)?,
            remaining: instance.all_requirements().to_vec(),
            committed,
            starts: vec![0.0; m + 2],
            location: vec![0; n],
            routes: vec![Vec::new(); n],
            arrivals: vec![vec![0.0; m + 2]; n],
            visited: vec![vec![false; m + 2]; n],
            commit_order: Vec::with_capacity(m),
        })
    }

    /// Unmet requirements of real task `task`.
    pub fn remaining(&self, task: usize) -> &SkillSet {
        &self.remaining[task - 1]
    }

    pub fn is_committed(&self, task: usize) -> bool {
        self.committed[task]
    }

    /// Last task the robot was assigned to, `0` before its first assignment.
    pub fn location(&self, robot: usize) -> usize {
        self.location[robot]
    }

    pub fn task_start(&self, task: usize) -> f64 {
        self.starts[task]
    }

    /// Skills the robot would newly bring to the task.
    #[inline]
    pub fn contribution(&self, robot: usize, task: usize) -> usize {
        self.instance
            .robot_skills(robot)
            .intersection_len(&self.remaining[task - 1])
    }

    /// Arrival time if the robot went to `task` straight from its current task.
    #[inline]
    pub fn estimated_arrival(&self, robot: usize, task: usize) -> f64 {
        let j = self.location[robot];
        debug_assert!(self.committed[j], "robot {robot} sits at uncommitted task {j}");
        self.starts[j] + self.instance.exec_time(j) + self.instance.leg_cost(robot, j, task, &self.policy)
    }

    /// Appends `task` to the robot's route and records its arrival.
    pub fn assign(&mut self, robot: usize, task: usize) {
        let y = self.estimated_arrival(robot, task);
        self.routes[robot].push(task);
        self.location[robot] = task;
        self.arrivals[robot][task] = y;
        self.visited[robot][task] = true;
        let q = self.instance.robot_skills(robot);
        self.remaining[task - 1].difference_with(q);
    }

    /// Reverts the robot's latest assignment, which must be `task`.
    /// Requirements stay as they are.
    fn unassign_last(&mut self, robot: usize, task: usize) {
        let popped = self.routes[robot].pop();
        debug_assert_eq!(popped, Some(task));
        self.location[robot] = self.routes[robot].last().copied().unwrap_or(0);
        self.arrivals[robot][task] = 0.0;
        self.visited[robot][task] = false;
    }

    /// Fixes the task start at the latest arrival among its coalition.
    pub fn commit(&mut self, task: usize, coalition: &[usize]) {
        let start = coalition
            .iter()
            .map(|&i| self.arrivals[i][task])
            .fold(f64::NEG_INFINITY, f64::max);
        self.starts[task] = start;
        self.committed[task] = true;
        self.commit_order.push(task);
    }

    pub fn into_solution(mut self) -> GreedySolution {
        let end = self.instance.end();
        let mut makespan = 0.0f64;
        for i in 0..self.instance.n() {
            let j = self.location[i];
            let y = self.starts[j] + self.instance.exec_time(j) + self.instance.leg_cost(i, j, end, &self.policy);
            self.arrivals[i][end] = y;
            self.visited[i][end] = true;
            self.visited[i][0] = true;
            makespan = if i == 0 { y } else { makespan.max(y) };
        }
        self.starts[end] = makespan;
        GreedySolution {
            schedule: Schedule::new(self.routes).expect("greedy never repeats a task in a route"),
            timing: Timing {
                arrivals: self.arrivals,
                visited: self.visited,
                task_starts: self.starts,
                makespan,
            },
            commit_order: self.commit_order,
        }
    }

    /// Best robot-task pair over all uncommitted tasks.
    fn select_pair(&self) -> Option<(usize, usize)> {
        let m = self.instance.m();
        let mut best: Option<(usize, f64, usize, usize)> = None;
        for i in 0..self.instance.n() {
            for k in 1..=m {
                if self.committed[k] {
                    continue;
                }
                let c = self.contribution(i, k);
                if c == 0 {
                    continue;
                }
                match best {
                    Some((bc, _, _, _)) if c < bc => {}
                    Some((bc, by, _, _)) if c == bc => {
                        let y = self.estimated_arrival(i, k);
                        if y < by - TIME_TOLERANCE {
                            best = Some((c, y, i, k));
                        }
                    }
                    _ => best = Some((c, self.estimated_arrival(i, k), i, k)),
                }
            }
        }
        best.map(|(_, _, i, k)| (i, k))
    }

    /// Best robot outside the coalition for the remaining skills of `task`.
    fn select_member(&self, task: usize, coalition: &[usize]) -> Option<usize> {
        let mut best: Option<(usize, f64, usize)> = None;
        for i in 0..self.instance.n() {
            if coalition.contains(&i) {
                continue;
            }
            let c = self.contribution(i, task);
            if c == 0 {
                continue;
            }
            match best {
                Some((bc, _, _)) if c < bc => {}
                Some((bc, by, _)) if c == bc => {
                    let y = self.estimated_arrival(i, task);
                    if y < by - TIME_TOLERANCE {
                        best = Some((c, y, i));
                    }
                }
                _ => best = Some((c, self.estimated_arrival(i, task), i)),
            }
        }
        best.map(|(_, _, i)| i)
    }

    /// Removes members none of whose required skills is unique in the
    /// coalition, latest arrival first, until every member is needed.
    fn prune_superfluous(&mut self, task: usize, coalition: &mut Vec<usize>) {
        // a lone member is needed by construction
        if coalition.len() < 2 {
            return;
        }
        let req = self.instance.requirements(task);
        let mut counts = vec![0u32; self.instance.l()];
        for &i in coalition.iter() {
            for s in self.instance.robot_skills(i).intersection(req).iter() {
                counts[s] += 1;
            }
        }
        loop {
            let mut victim: Option<(usize, f64)> = None;
            for (pos, &i) in coalition.iter().enumerate() {
                let q = self.instance.robot_skills(i);
                if req.iter().all(|s| !q.contains(s) || counts[s] >= 2) {
                    let y = self.arrivals[i][task];
                    if victim.is_none_or(|(_, vy)| y > vy + TIME_TOLERANCE) {
                        victim = Some((pos, y));
                    }
                }
            }
            let Some((pos, _)) = victim else { break };
            let i = coalition.remove(pos);
            for s in self.instance.robot_skills(i).intersection(req).iter() {
                counts[s] -= 1;
            }
            self.unassign_last(i, task);
        }
    }
}

/// Runs the greedy scheduler to completion.
pub fn solve_greedy(instance: &Instance, options: GreedyOptions) -> Result<GreedySolution, GreedyError> {
    let mut state = GreedyState::new(instance, options.mode)?;
    for _ in 0..instance.m() {
        let Some((first, task)) = state.select_pair() else {
            let task = (1..=instance.m()).find(|&k| !state.committed[k]).unwrap_or(0);
            return Err(GreedyError::NoContributor { task });
        };
        state.assign(first, task);
        let mut coalition = vec![first];
        while !state.remaining(task).is_empty() {
            let robot = state
                .select_member(task, &coalition)
                .ok_or(GreedyError::NoContributor { task })?;
            state.assign(robot, task);
            coalition.push(robot);
        }
        if options.prune_superfluous {
            state.prune_superfluous(task, &mut coalition);
        }
        state.commit(task, &coalition);
    }
    Ok(state.into_solution())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DelayModel, TravelTimes};
    use crate::validator::{propagate_times, validate};

    fn ss(l: usize, v: &[usize]) -> SkillSet {
        SkillSet::from_indices(l, v.iter().copied()).unwrap()
    }

    /// Uniform unit travel, zero delays.
    fn flat(l: usize, robots: Vec<SkillSet>, tasks: Vec<SkillSet>) -> Instance {
        let n = robots.len();
        let m = tasks.len();
        Instance::new(
            l,
            robots,
            tasks,
            vec![1.0; m],
            TravelTimes {
                task_to_task: vec![vec![1.0; m]; m],
                start_legs: vec![vec![1.0; m]; n],
                end_legs: vec![vec![1.0; m]; n],
                start_to_end: vec![1.0; n],
            },
            DelayModel::Explicit {
                mu: vec![vec![0.0; m + 2]; m + 2],
                sigma: vec![vec![0.0; m + 2]; m + 2],
            },
            0.95,
        )
        .unwrap()
    }

    #[test]
    fn contribution_examples() {
        let l = 8;
        let inst = flat(l, vec![ss(l, &[1, 2]), ss(l, &[1]), ss(l, &[0, 1, 2, 3])], vec![ss(l, &[2, 3]), ss(l, &[0, 1, 2])]);
        let mut st = GreedyState::new(&inst, BufferMode::Corrected).unwrap();
        assert_eq!(st.contribution(0, 1), 1);
        assert_eq!(st.contribution(2, 2), 3);
        st.assign(2, 1);
        assert!(st.remaining(1).is_empty());
        assert_eq!(st.contribution(1, 1), 0);
    }

    fn line_instance(start: f64, exec: f64, hop: f64, hop_buffer: f64) -> Instance {
        let l = 2;
        let m = 2;
        let mut mu = vec![vec![0.0; m + 2]; m + 2];
        mu[0][1] = 1.0;
        mu[1][2] = hop_buffer;
        Instance::new(
            l,
            vec![ss(l, &[0])],
            vec![ss(l, &[0]), ss(l, &[0])],
            vec![exec, 1.0],
            TravelTimes {
                task_to_task: vec![vec![0.0, hop], vec![hop, 0.0]],
                start_legs: vec![vec![start, 100.0]],
                end_legs: vec![vec![1.0, 1.0]],
                start_to_end: vec![1.0],
            },
            DelayModel::Explicit {
                mu,
                sigma: vec![vec![0.0; m + 2]; m + 2],
            },
            0.95,
        )
        .unwrap()
    }

    #[test]
    fn estimated_arrival_examples() {
        // from the start: 0 + 0 + 6 + 1
        let inst = line_instance(6.0, 5.0, 4.0, 1.0);
        let mut st = GreedyState::new(&inst, BufferMode::Corrected).unwrap();
        assert_eq!(st.estimated_arrival(0, 1), 7.0);

        // task 1 committed at 20 with exec 5, then travel 4 and buffer 1
        let inst = line_instance(19.0, 5.0, 4.0, 1.0);
        let mut st2 = GreedyState::new(&inst, BufferMode::Corrected).unwrap();
        st2.assign(0, 1);
        st2.commit(1, &[0]);
        assert_eq!(st2.task_start(1), 20.0);
        assert_eq!(st2.estimated_arrival(0, 2), 30.0);

        let inst = line_instance(19.0, 5.0, 0.0, 0.0);
        st = GreedyState::new(&inst, BufferMode::Corrected).unwrap();
        st.assign(0, 1);
        st.commit(1, &[0]);
        assert_eq!(st.estimated_arrival(0, 2), 25.0);
    }

    #[test]
    fn pair_task_takes_both_robots() {
        let l = 2;
        let inst = flat(l, vec![ss(l, &[0]), ss(l, &[1])], vec![ss(l, &[0, 1])]);
        let sol = solve_greedy(&inst, GreedyOptions::default()).unwrap();
        assert_eq!(sol.schedule.routes(), &[vec![1], vec![1]]);
        assert_eq!(sol.timing.task_starts[1], 1.0);
        assert!(validate(&inst, &sol.schedule, BufferMode::Corrected).feasible);
    }

    /// A member added first can lose its last unique skill to later members.
    fn overlap_instance() -> Instance {
        let l = 8;
        flat(
            l,
            vec![ss(l, &[0, 1]), ss(l, &[0, 2]), ss(l, &[1, 3])],
            vec![ss(l, &[0, 1, 2, 3])],
        )
    }

    #[test]
    fn pruning_removes_shadowed_member() {
        let inst = overlap_instance();
        let literal = solve_greedy(
            &inst,
            GreedyOptions {
                prune_superfluous: false,
                ..GreedyOptions::default()
            },
        )
        .unwrap();
        assert_eq!(literal.schedule.routes(), &[vec![1], vec![1], vec![1]]);
        assert!(!validate(&inst, &literal.schedule, BufferMode::Corrected).feasible);

        let pruned = solve_greedy(&inst, GreedyOptions::default()).unwrap();
        assert_eq!(pruned.schedule.routes(), &[vec![], vec![1], vec![1]]);
        assert!(validate(&inst, &pruned.schedule, BufferMode::Corrected).feasible);
        assert_eq!(pruned.timing, propagate_times(&inst, &pruned.schedule, BufferMode::Corrected).unwrap());
    }

    #[test]
    fn commits_each_task_once() {
        let l = 4;
        let inst = flat(
            l,
            vec![ss(l, &[0, 1]), ss(l, &[2]), ss(l, &[3, 1])],
            vec![ss(l, &[0]), ss(l, &[1, 2]), ss(l, &[3]), ss(l, &[0, 1, 2, 3])],
        );
        let sol = solve_greedy(&inst, GreedyOptions::default()).unwrap();
        let mut order = sol.commit_order.clone();
        order.sort();
        assert_eq!(order, vec![1, 2, 3, 4]);
        assert!(validate(&inst, &sol.schedule, BufferMode::Corrected).feasible);
    }
}
