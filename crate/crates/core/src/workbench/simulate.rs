use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::WorkbenchError;
use crate::model::{Instance, Schedule, TIME_TOLERANCE};
use crate::stochastic::{sample_delay, BufferMode, BufferPolicy, DelayParams};
use crate::validator::{precedence_order, propagate_times_with};

/// On-time statistics of one traversed leg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegStats {
    pub robot: usize,
    pub from: usize,
    pub to: usize,
    /// Arrival time from the deterministic buffered plan.
    pub planned_arrival: f64,
    pub buffer: f64,
    /// Fraction of trials where the sampled delay stayed within the buffer,
    /// measured from the actual departure time.
    pub on_time_fraction: f64,
    /// Fraction of trials where the actual arrival was no later than the
    /// planned arrival, so lateness inherited from upstream legs counts.
    pub cumulative_on_time_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

impl Summary {
    fn of(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let pick = |q: f64| values[((q * (n - 1.0)).round() as usize).min(values.len() - 1)];
        Summary {
            mean,
            std: var.sqrt(),
            min: values[0],
            p50: pick(0.5),
            p95: pick(0.95),
            max: values[values.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationStats {
    pub trials: usize,
    pub mode: BufferMode,
    pub planned_makespan: f64,
    pub legs: Vec<LegStats>,
    pub realized_makespan: Summary,
    /// Smallest `on_time_fraction` over all legs.
    pub min_on_time_fraction: f64,
    /// Fraction of trials whose realized makespan did not exceed the plan.
    pub makespan_on_time_fraction: f64,
}

struct Leg {
    robot: usize,
    from: usize,
    to: usize,
    travel: f64,
    params: DelayParams,
    buffer: f64,
    planned: f64,
    local_hits: usize,
    cumulative_hits: usize,
}

/// Replays `schedule` `trials` times with Gaussian delays sampled per leg.
///
/// Robots wait for their whole coalition before a task starts, exactly as in
/// the deterministic plan, but every leg takes `travel + delay` instead of
/// `travel + buffer`.
pub fn simulate_execution(
    instance: &Instance,
    schedule: &Schedule,
    trials: usize,
    seed: u64,
    mode: BufferMode,
) -> Result<SimulationStats, WorkbenchError> {
    if trials == 0 {
        return Err(WorkbenchError::Config("trials must be positive".into()));
    }
    let policy = BufferPolicy::new(instance.epsilon(), mode).map_err(crate::validator::TimingError::from)?;
    let plan = propagate_times_with(instance, schedule, &policy)?;
    let order = precedence_order(instance, schedule)?;
    let m = instance.m();
    let end = m + 1;

    let make_leg = |robot: usize, from: usize, to: usize| {
        let params = instance.delay(robot, from, to);
        Leg {
            robot,
            from,
            to,
            travel: instance.travel_time(robot, from, to),
            params,
            buffer: policy.buffer(params),
            planned: plan.arrivals[robot][to],
            local_hits: 0,
            cumulative_hits: 0,
        }
    };
    // legs grouped by the task they enter, in resolution order, then end legs
    let mut legs = Vec::new();
    let mut groups: Vec<(usize, std::ops::Range<usize>)> = Vec::new();
    for (k, attendees) in &order.tasks {
        let first = legs.len();
        legs.extend(attendees.iter().map(|&(i, j)| make_leg(i, j, *k)));
        groups.push((*k, first..legs.len()));
    }
    let end_first = legs.len();
    for (i, route) in schedule.routes().iter().enumerate() {
        legs.push(make_leg(i, route.last().copied().unwrap_or(0), end));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![0.0; m + 2];
    let mut makespans = Vec::with_capacity(trials);
    let mut makespan_hits = 0usize;
    for _ in 0..trials {
        for (k, range) in &groups {
            let mut start = f64::NEG_INFINITY;
            for leg in &mut legs[range.clone()] {
                let y = fly(instance, &starts, leg, &mut rng);
                start = start.max(y);
            }
            starts[*k] = start;
        }
        let mut makespan = f64::NEG_INFINITY;
        for leg in &mut legs[end_first..] {
            makespan = makespan.max(fly(instance, &starts, leg, &mut rng));
        }
        if makespan <= plan.makespan + TIME_TOLERANCE {
            makespan_hits += 1;
        }
        makespans.push(makespan);
    }

    let t = trials as f64;
    let legs: Vec<LegStats> = legs
        .into_iter()
        .map(|leg| LegStats {
            robot: leg.robot,
            from: leg.from,
            to: leg.to,
            planned_arrival: leg.planned,
            buffer: leg.buffer,
            on_time_fraction: leg.local_hits as f64 / t,
            cumulative_on_time_fraction: leg.cumulative_hits as f64 / t,
        })
        .collect();
    let min_on_time_fraction = legs.iter().map(|l| l.on_time_fraction).fold(1.0, f64::min);
    Ok(SimulationStats {
        trials,
        mode,
        planned_makespan: plan.makespan,
        legs,
        realized_makespan: Summary::of(makespans),
        min_on_time_fraction,
        makespan_on_time_fraction: makespan_hits as f64 / t,
    })
}

/// Samples one traversal of `leg` and returns the actual arrival time.
fn fly(instance: &Instance, starts: &[f64], leg: &mut Leg, rng: &mut ChaCha8Rng) -> f64 {
    let delay = sample_delay(leg.params, rng);
    let y = starts[leg.from] + instance.exec_time(leg.from) + (leg.travel + delay);
    if delay <= leg.buffer + TIME_TOLERANCE {
        leg.local_hits += 1;
    }
    if y <= leg.planned + TIME_TOLERANCE {
        leg.cumulative_hits += 1;
    }
    y
}
