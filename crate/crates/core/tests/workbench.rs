use std::fs;

use swarmsched::greedy::{solve_greedy, GreedyOptions};
use swarmsched::model::DelayModel;
use swarmsched::stochastic::BufferMode;
use swarmsched::workbench::{
    emit_plots, generate_instance, instance_from_json, instance_to_json, load_instance, load_records, relative_to,
    run_benchmark, save_instance, simulate_execution, write_records, BenchRecord, GeneratorConfig, SeedSpec, Shape,
    SolverKind, SuiteConfig, WorkbenchError,
};

#[test]
fn generator_is_deterministic() {
    let cfg = GeneratorConfig::new(4, 12, 5, 77);
    let a = instance_to_json(&generate_instance(&cfg).unwrap());
    let b = instance_to_json(&generate_instance(&cfg).unwrap());
    assert_eq!(a, b);
    let c = instance_to_json(&generate_instance(&GeneratorConfig::new(4, 12, 5, 78)).unwrap());
    assert_ne!(a, c);
}

#[test]
fn generated_skill_rows_respect_bounds() {
    let mut robots = 0;
    for seed in 0..125u64 {
        let l = [2, 3, 4, 6, 8][seed as usize % 5];
        let inst = generate_instance(&GeneratorConfig::new(l, 4, 8, seed)).unwrap();
        let mut pool = vec![false; l];
        for q in inst.all_robot_skills() {
            assert!(!q.is_empty() && q.len() <= l / 2, "l={l} row {:?}", q.to_bits());
            q.iter().for_each(|s| pool[s] = true);
            robots += 1;
        }
        assert!(pool.iter().all(|&p| p));
        assert!(inst.all_requirements().iter().all(|r| !r.is_empty()));
    }
    assert_eq!(robots, 1000);
}

#[test]
fn generated_geometry() {
    let cfg = GeneratorConfig::new(2, 10, 4, 3);
    let inst = generate_instance(&cfg).unwrap();
    let tt = &inst.travel().task_to_task;
    for j in 0..10 {
        assert_eq!(tt[j][j], 0.0);
        for k in 0..10 {
            assert_eq!(tt[j][k], tt[k][j]);
        }
    }
    let pos = inst.positions().unwrap();
    assert!(pos.tasks.iter().all(|p| p[0].abs() <= 100.0 && p[1].abs() <= 100.0));
    let s0 = pos.robot_starts[0];
    let s2 = pos.robot_starts[2];
    assert!((s0[0]).abs() < 1e-12 && (s0[1] - 15.0).abs() < 1e-12);
    assert!((s2[0] - 15.0).abs() < 1e-12 && s2[1].abs() < 1e-12);
    // half circle: every start has a nonnegative x coordinate
    assert!(pos.robot_starts.iter().all(|p| p[0] >= -1e-12));
    assert!(inst.exec_times().iter().all(|&e| (0.0..=100.0).contains(&e)));
    match inst.delays() {
        DelayModel::Proportional {
            mu_fraction,
            sigma_fraction,
        } => {
            assert_eq!(*mu_fraction, 0.10);
            assert!(sigma_fraction.iter().flatten().all(|&u| (0.05..=0.50).contains(&u)));
        }
        other => panic!("unexpected delay model {other:?}"),
    }
    let leg = inst.delay(1, 0, 3);
    assert!((leg.mu - 0.1 * inst.travel_time(1, 0, 3)).abs() < 1e-12);
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..100u64 {
        let l = [2, 4, 8][seed as usize % 3];
        let inst = generate_instance(&GeneratorConfig::new(l, 1 + seed as usize % 9, 2 + seed as usize % 5, seed)).unwrap();
        let path = dir.path().join(format!("i{seed}.json"));
        save_instance(&path, &inst).unwrap();
        assert_eq!(load_instance(&path).unwrap(), inst);
    }
}

#[test]
fn truncated_instance_file_reports_byte_offset() {
    let inst = generate_instance(&GeneratorConfig::new(2, 5, 3, 1)).unwrap();
    let text = instance_to_json(&inst);
    let cut = &text[..text.len() / 2];
    match instance_from_json(cut) {
        Err(WorkbenchError::Json { byte_offset, .. }) => assert!(byte_offset > 0 && byte_offset <= cut.len()),
        other => panic!("expected a parse error, got {other:?}"),
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.json");
    fs::write(&path, cut).unwrap();
    let msg = load_instance(&path).unwrap_err().to_string();
    assert!(msg.contains("byte"), "{msg}");
}

#[test]
fn simulation_without_noise_is_exact() {
    let mut cfg = GeneratorConfig::new(4, 8, 4, 12);
    cfg.mu_fraction = 0.0;
    let inst = generate_instance(&cfg).unwrap();
    let sol = solve_greedy(&inst, GreedyOptions::default()).unwrap();
    let stats = simulate_execution(&inst, &sol.schedule, 200, 1, BufferMode::Corrected).unwrap();
    assert!(stats.legs.iter().all(|l| l.on_time_fraction == 1.0 && l.cumulative_on_time_fraction == 1.0));
    assert!((stats.realized_makespan.min - stats.planned_makespan).abs() < 1e-9);
    assert!((stats.realized_makespan.max - stats.planned_makespan).abs() < 1e-9);
    assert_eq!(stats.makespan_on_time_fraction, 1.0);
}

#[test]
fn simulation_is_seeded_and_covers_every_leg() {
    let inst = generate_instance(&GeneratorConfig::new(2, 6, 3, 4)).unwrap();
    let sol = solve_greedy(&inst, GreedyOptions::default()).unwrap();
    let a = simulate_execution(&inst, &sol.schedule, 2000, 9, BufferMode::Corrected).unwrap();
    let b = simulate_execution(&inst, &sol.schedule, 2000, 9, BufferMode::Corrected).unwrap();
    assert_eq!(a, b);
    let legs: usize = sol.schedule.routes().iter().map(|r| r.len() + 1).sum();
    assert_eq!(a.legs.len(), legs);
    assert!(a.min_on_time_fraction > 0.9);
}

#[test]
fn paper_literal_buffers_overshoot_when_sigma_is_large() {
    // once sigma exceeds 2, sigma^2 * z is at least twice the corrected margin
    let mut cfg = GeneratorConfig::new(2, 4, 2, 6);
    cfg.mu_fraction = 0.5;
    let inst = generate_instance(&cfg).unwrap();
    let sol = solve_greedy(&inst, GreedyOptions::with_mode(BufferMode::PaperLiteral)).unwrap();
    let stats = simulate_execution(&inst, &sol.schedule, 5000, 2, BufferMode::PaperLiteral).unwrap();
    let wide: Vec<_> = sol
        .schedule
        .routes()
        .iter()
        .enumerate()
        .flat_map(|(i, r)| {
            let mut prev = 0;
            let mut out = Vec::new();
            for &k in r.iter().chain(std::iter::once(&(inst.m() + 1))) {
                out.push((i, prev, k));
                prev = k;
            }
            out
        })
        .filter(|&(i, j, k)| inst.delay(i, j, k).sigma > 2.0)
        .collect();
    for (i, j, k) in wide {
        let leg = stats.legs.iter().find(|l| (l.robot, l.from, l.to) == (i, j, k)).unwrap();
        assert!(leg.on_time_fraction > 0.95, "{leg:?}");
    }
}

fn greedy_suite() -> SuiteConfig {
    SuiteConfig {
        shapes: vec![Shape { l: 2, m: 8, n: 4 }],
        seeds: SeedSpec::Range { start: 0, count: 30 },
        solvers: vec![SolverKind::Greedy],
        buffer_mode: BufferMode::Corrected,
        time_limit_s: 10.0,
        node_limit: 1_000_000,
        workers: 4,
        full_circle: false,
    }
}

#[test]
fn greedy_suite_is_feasible_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let a = run_benchmark(&greedy_suite(), Some(&out)).unwrap();
    assert_eq!(a.len(), 30);
    assert!(a.iter().all(|r| r.status == "heuristic" && r.makespan.is_some() && r.wall_ms >= 0.0));
    assert!(a.windows(2).all(|w| w[0].seed < w[1].seed));
    let b = run_benchmark(&greedy_suite(), None).unwrap();
    let ms = |rs: &[BenchRecord]| rs.iter().map(|r| r.makespan).collect::<Vec<_>>();
    assert_eq!(ms(&a), ms(&b));
    let loaded = load_records(&out).unwrap();
    assert_eq!(ms(&loaded), ms(&a));
    let header = fs::read_to_string(&out).unwrap();
    assert!(header.starts_with("seed,l,m,n,solver,buffer_mode,makespan,wall_ms,status\n"));
}

#[test]
fn mixed_suite_is_in_canonical_order() {
    let suite = SuiteConfig {
        shapes: vec![Shape { l: 2, m: 4, n: 3 }],
        seeds: SeedSpec::List(vec![4, 1, 2]),
        solvers: vec![SolverKind::Greedy, SolverKind::Exact],
        ..greedy_suite()
    };
    let recs = run_benchmark(&suite, None).unwrap();
    let order: Vec<(u64, SolverKind)> = recs.iter().map(|r| (r.seed, r.solver)).collect();
    assert_eq!(
        order,
        vec![
            (1, SolverKind::Exact),
            (1, SolverKind::Greedy),
            (2, SolverKind::Exact),
            (2, SolverKind::Greedy),
            (4, SolverKind::Exact),
            (4, SolverKind::Greedy)
        ]
    );
    for r in relative_to(&recs, SolverKind::Exact) {
        match r.solver {
            SolverKind::Exact => assert_eq!(r.relative_cost, 1.0),
            SolverKind::Greedy => assert!(r.relative_cost >= 1.0 - 1e-9),
        }
    }
}

fn attr(tag: &str, name: &str) -> f64 {
    let key = format!(r#"{name}=""#);
    let start = tag.find(&key).unwrap() + key.len();
    let end = start + tag[start..].find('"').unwrap();
    tag[start..end].parse().unwrap()
}

#[test]
fn plots_contain_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let recs = run_benchmark(&greedy_suite(), Some(&csv)).unwrap();
    let paths = emit_plots(&csv, &dir.path().join("plots")).unwrap();
    assert_eq!(paths.len(), 2);
    let svg = fs::read_to_string(&paths[0]).unwrap();
    let area = svg.lines().find(|l| l.contains(r#"class="plot-area""#)).unwrap();
    let (ymin, ymax) = (attr(area, "data-ymin"), attr(area, "data-ymax"));
    let (top, h) = (attr(area, "y"), attr(area, "height"));
    let points: Vec<&str> = svg.lines().filter(|l| l.contains(r#"class="point""#)).collect();
    assert_eq!(points.len(), recs.len());
    for p in points {
        let v = attr(p, "data-value");
        assert!(v >= ymin && v <= ymax);
        let cy = attr(p, "cy");
        assert!(cy >= top && cy <= top + h);
    }
    let again = emit_plots(&csv, &dir.path().join("plots2")).unwrap();
    assert_eq!(svg, fs::read_to_string(&again[0]).unwrap());
}

#[test]
fn single_record_and_empty_csv() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    let rec = BenchRecord {
        seed: 0,
        l: 2,
        m: 3,
        n: 2,
        solver: SolverKind::Exact,
        buffer_mode: BufferMode::Corrected,
        makespan: Some(42.0),
        wall_ms: 5.0,
        status: "proved_optimal".into(),
    };
    write_records(&one, &[rec]).unwrap();
    let paths = emit_plots(&one, dir.path()).unwrap();
    let svg = fs::read_to_string(&paths[0]).unwrap();
    assert_eq!(svg.matches(r#"class="point""#).count(), 1);

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "seed,l,m,n,solver,buffer_mode,makespan,wall_ms,status\n").unwrap();
    assert!(matches!(emit_plots(&empty, dir.path()), Err(WorkbenchError::NoData)));
}
