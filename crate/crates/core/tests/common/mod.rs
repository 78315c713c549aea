#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use swarmsched::model::{AssignmentTensor, DelayModel, Instance, Schedule, SkillSet, TravelTimes};

/// Standard normal quantile at 0.95, from published tables.
pub const Z95: f64 = 1.644_853_626_951_472_2;

pub fn ss(l: usize, v: &[usize]) -> SkillSet {
    SkillSet::from_indices(l, v.iter().copied()).unwrap()
}

/// Instance with unit travel, unit execution and no delays.
pub fn flat(l: usize, robots: Vec<SkillSet>, tasks: Vec<SkillSet>) -> Instance {
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

/// Random routes visiting each task at most once per robot.
pub fn random_schedule<R: Rng>(rng: &mut R, n: usize, m: usize) -> Schedule {
    let routes = (0..n)
        .map(|_| {
            let mut tasks: Vec<usize> = (1..=m).filter(|_| rng.random_bool(0.5)).collect();
            tasks.shuffle(rng);
            tasks
        })
        .collect();
    Schedule::new(routes).unwrap()
}

/// Sets the arcs of one route for robot `i`.
pub fn set_route(x: &mut AssignmentTensor, i: usize, route: &[usize]) {
    let end = x.m() + 1;
    let mut prev = 0;
    for &k in route.iter().chain(std::iter::once(&end)) {
        x.set(i, prev, k, true);
        prev = k;
    }
}

/// Random tensor: either an arbitrary sparse arc set or a valid route with a
/// few flipped entries, so both verdicts are well represented.
pub fn random_tensor<R: Rng>(rng: &mut R, n: usize, m: usize) -> AssignmentTensor {
    let nodes = m + 2;
    let mut x = AssignmentTensor::zeros(n, m);
    for i in 0..n {
        if rng.random_bool(0.25) {
            for j in 0..nodes {
                for k in 0..nodes {
                    if rng.random_bool(0.15) {
                        x.set(i, j, k, true);
                    }
                }
            }
        } else {
            let mut tasks: Vec<usize> = (1..=m).filter(|_| rng.random_bool(0.5)).collect();
            tasks.shuffle(rng);
            set_route(&mut x, i, &tasks);
            for _ in 0..rng.random_range(0..3usize) {
                let (j, k) = (rng.random_range(0..nodes), rng.random_range(0..nodes));
                let v = x.get(i, j, k);
                x.set(i, j, k, !v);
            }
        }
    }
    x
}

fn arc_set(x: &AssignmentTensor, i: usize) -> Vec<(usize, usize)> {
    let nodes = x.m() + 2;
    let mut arcs = Vec::new();
    for j in 0..nodes {
        for k in 0..nodes {
            if x.get(i, j, k) {
                arcs.push((j, k));
            }
        }
    }
    arcs
}

fn all_simple_paths(m: usize) -> Vec<Vec<usize>> {
    fn grow(m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(cur.clone());
        for k in 1..=m {
            if !cur.contains(&k) {
                cur.push(k);
                grow(m, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    grow(m, &mut Vec::new(), &mut out);
    out
}

/// True iff every robot's arc set is exactly the arc set of some simple path
/// from the start to the end node. Enumerates every such path.
pub fn path_decomposition_oracle(x: &AssignmentTensor) -> bool {
    let m = x.m();
    let paths = all_simple_paths(m);
    (0..x.n()).all(|i| {
        let mut arcs = arc_set(x, i);
        arcs.sort_unstable();
        paths.iter().any(|p| {
            let mut want: Vec<(usize, usize)> = std::iter::once(0)
                .chain(p.iter().copied())
                .zip(p.iter().copied().chain(std::iter::once(m + 1)))
                .collect();
            want.sort_unstable();
            want == arcs
        })
    })
}

/// Single robot path cost by Held-Karp dynamic programming over task subsets.
/// `leg(j, k)` is travel plus buffer, `exec(k)` the execution time.
pub fn held_karp(m: usize, leg: impl Fn(usize, usize) -> f64, exec: impl Fn(usize) -> f64) -> f64 {
    let full = (1usize << m) - 1;
    let mut dp = vec![vec![f64::INFINITY; m + 1]; 1 << m];
    for k in 1..=m {
        dp[1 << (k - 1)][k] = leg(0, k) + exec(k);
    }
    for mask in 1..=full {
        for last in 1..=m {
            let cur = dp[mask][last];
            if !cur.is_finite() {
                continue;
            }
            for k in 1..=m {
                if mask & (1 << (k - 1)) == 0 {
                    let next = mask | (1 << (k - 1));
                    let cand = cur + leg(last, k) + exec(k);
                    if cand < dp[next][k] {
                        dp[next][k] = cand;
                    }
                }
            }
        }
    }
    (1..=m)
        .map(|last| dp[full][last] + leg(last, m + 1))
        .fold(f64::INFINITY, f64::min)
}

/// Arrival times by repeated relaxation: a robot advances along its route
/// whenever the task it is leaving has a known start time. Returns task start
/// times and the makespan, or `None` when some task can never start.
pub fn fixpoint_times(
    inst: &Instance,
    s: &Schedule,
    leg: impl Fn(usize, usize, usize) -> f64,
) -> Option<(Vec<Option<f64>>, f64)> {
    let m = inst.m();
    let mut start: Vec<Option<f64>> = vec![None; m + 2];
    start[0] = Some(0.0);
    let mut arrivals: Vec<Vec<Option<f64>>> = vec![vec![None; m + 2]; s.n_robots()];
    loop {
        let mut progress = false;
        for (i, route) in s.routes().iter().enumerate() {
            let mut prev = 0;
            for &k in route {
                if arrivals[i][k].is_none() {
                    if let Some(t) = start[prev] {
                        arrivals[i][k] = Some(t + inst.exec_time(prev) + leg(i, prev, k));
                        progress = true;
                    }
                }
                prev = k;
            }
        }
        for k in 1..=m {
            if start[k].is_some() {
                continue;
            }
            let members: Vec<usize> = (0..s.n_robots()).filter(|&i| s.route(i).contains(&k)).collect();
            if members.is_empty() {
                continue;
            }
            if members.iter().all(|&i| arrivals[i][k].is_some()) {
                start[k] = Some(members.iter().map(|&i| arrivals[i][k].unwrap()).fold(f64::MIN, f64::max));
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    let mut makespan = f64::MIN;
    for (i, route) in s.routes().iter().enumerate() {
        let last = route.last().copied().unwrap_or(0);
        let t = start[last]?;
        makespan = makespan.max(t + inst.exec_time(last) + leg(i, last, m + 1));
    }
    Some((start, makespan))
}
