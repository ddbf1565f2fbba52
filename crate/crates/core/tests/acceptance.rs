//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use condmon::edge::{EdgeRuntime, ServiceId, ServiceStatus};
use condmon::experiment::{
    run_detection_experiment, run_migration_experiment, summarize_migrations, test_dataset,
    train_model, training_dataset, DetectionConfig, DetectionRow, Scenario, Variant,
};
use condmon::gbdt::{
    measure_inference_latency, shap_values, train, GbdtModel, GbdtParams, TrainingSet, TreeNode,
};
use condmon::hpo::{
    optimize, optimize_random, Distribution, Point, Reporter, SearchSpace, TrialOutcome,
};
use condmon::netsim::{
    run, EdgeNodeId, MobilityTrace, NetworkConfig, SimTime, Topology, VirtualClock,
};
use condmon::orchestrator::{MigrationRecord, MonitoringSystem, Orchestrator};
use condmon::telemetry::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Fixture {
    scenario: Scenario,
    model: GbdtModel,
    test: Dataset,
}

fn fixture() -> Fixture {
    let scenario = Scenario::default_scenario();
    let train_set = training_dataset(&scenario).expect("training set");
    let model = train_model(&scenario, &train_set, scenario.params).expect("model");
    let test = test_dataset(&scenario).expect("test set");
    Fixture {
        scenario,
        model,
        test,
    }
}

fn mean_rows(rows: &[DetectionRow]) -> Vec<&DetectionRow> {
    rows.iter().filter(|r| r.seed.is_none()).collect()
}

fn collective_recall(f: &Fixture) -> Outcome {
    let start = Instant::now();
    let mut s = f.scenario.clone();
    s.detection.sparse_densities.clear();
    s.detection.collective_lengths = vec![10, 100];
    let rows = run_detection_experiment(&s, &f.model, &f.test).expect("detection");
    let seed_rows: Vec<_> = rows.iter().filter(|r| r.seed.is_some()).collect();
    let failures: Vec<String> = seed_rows
        .iter()
        .filter(|r| r.recall != 1.0)
        .map(|r| {
            format!(
                "len {} seed {:?} recall {}",
                r.config.level(),
                r.seed,
                r.recall
            )
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    check(
        failures.is_empty() && seed_rows.len() >= 10 && f.test.len() == 9487 && secs < 120.0,
        format!(
            "{} seed rows on {} records, recall 1.0 in all{} ({secs:.1} s)",
            seed_rows.len(),
            f.test.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failing: {}", failures.join(", "))
            }
        ),
    )
}

fn non_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

fn trends(f: &Fixture) -> Outcome {
    let start = Instant::now();
    let rows = run_detection_experiment(&f.scenario, &f.model, &f.test).expect("detection");
    let means = mean_rows(&rows);
    let sparse: Vec<f64> = means
        .iter()
        .filter(|r| matches!(r.config, DetectionConfig::Sparse { .. }))
        .map(|r| r.precision)
        .collect();
    let collective: Vec<f64> = means
        .iter()
        .filter(|r| matches!(r.config, DetectionConfig::Collective { .. }))
        .map(|r| r.f1)
        .collect();
    let secs = start.elapsed().as_secs_f64();
    check(
        sparse.len() == 3
            && collective.len() == 3
            && non_decreasing(&sparse)
            && non_decreasing(&collective)
            && secs < 300.0,
        format!("sparse precision {sparse:.4?}, collective F1 {collective:.4?} ({secs:.1} s)"),
    )
}

fn inference_latency(f: &Fixture) -> Outcome {
    let reps = 10_000usize.div_ceil(f.test.len());
    let stats = measure_inference_latency(&f.model, &f.test, reps).expect("latency");
    check(
        stats.samples >= 10_000 && stats.mean <= 0.0151,
        format!(
            "{} predictions, mean {:.3e} s (limit 1.51e-2 s)",
            stats.samples, stats.mean
        ),
    )
}

fn migration_calibration(s: &Scenario, durations: &mut Vec<SimTime>) -> Outcome {
    let targets = [
        (Variant::WithMediator, 66.754, 10.926),
        (Variant::WithoutMediator, 24.57, 3.39),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (variant, mean, std) in targets {
        let exp = run_migration_experiment(s, 100, variant).expect("migrations");
        durations.extend(exp.records.iter().map(|r| r.in_sync_time - r.request_time));
        let sum = summarize_migrations(variant, &exp.records).expect("summary");
        let mean_ok = (sum.mean_s - mean).abs() <= 0.10 * mean;
        let std_ok = (sum.std_s - std).abs() <= 0.30 * std;
        pass &= mean_ok && std_ok && sum.runs == 100;
        parts.push(format!(
            "{}: mean {:.3} s (target {mean} ±10%), std {:.3} s (target {std} ±30%)",
            variant.name(),
            sum.mean_s,
            sum.std_s
        ));
    }
    check(pass, parts.join("; "))
}

/// Follows every TAI change in order, counting moves to a different node.
fn reference_placement(topo: &Topology, trace: &MobilityTrace) -> (EdgeNodeId, usize) {
    let atts = trace.attachments();
    let mut node = topo
        .edge_for_tai(topo.tai_of(&atts[0].radio_node).unwrap())
        .unwrap()
        .clone();
    let mut moves = 0;
    for a in &atts[1..] {
        let target = topo
            .edge_for_tai(topo.tai_of(&a.radio_node).unwrap())
            .unwrap();
        if *target != node {
            node = target.clone();
            moves += 1;
        }
    }
    (node, moves)
}

fn closed_loop(s: &Scenario, durations: &mut Vec<SimTime>) -> Outcome {
    let start = Instant::now();
    let topo = &s.topology;
    let service = ServiceId::new(s.service_id.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = Vec::new();
    let mut total_moves = 0;
    for i in 0..200u64 {
        let steps = rng.random_range(2..=51);
        let trace = MobilityTrace::random(
            topo,
            steps,
            SimTime::from_secs_f64(1.0),
            SimTime::from_secs_f64(300.0),
            rng.random(),
        )
        .expect("trace");
        let rt = EdgeRuntime::new(
            topo.edge_nodes().iter().map(|e| e.id.clone()),
            s.latency,
            rng.random(),
        )
        .unwrap();
        let mut orch = Orchestrator::new(service.clone(), topo, rt, s.orchestrator).unwrap();
        let home = topo
            .edge_for_tai(topo.tai_of(&trace.first().radio_node).unwrap())
            .unwrap()
            .clone();
        orch.bootstrap(&home, trace.first().time).unwrap();
        let mut sys = MonitoringSystem::new(orch, topo);
        let network = NetworkConfig {
            uplink: None,
            ..s.network
        };
        run(
            &mut VirtualClock::new(),
            topo,
            &trace,
            &network,
            &mut [&mut sys],
        )
        .expect("run");
        let (node, moves) = reference_placement(topo, &trace);
        let (rt, records) = sys.orchestrator.into_parts();
        durations.extend(
            records
                .iter()
                .map(|r: &MigrationRecord| r.in_sync_time - r.request_time),
        );
        total_moves += moves;
        let placed = rt.placement_of(&service, SimTime::from_secs_f64(1e9));
        let ok = records.len() == moves
            && placed.is_some_and(|(_, n, st)| *n == node && st == ServiceStatus::InSync);
        if !ok {
            violations.push(i);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        violations.is_empty() && secs < 60.0,
        format!(
            "200 traces, {total_moves} migrations, {} violations{} ({secs:.1} s)",
            violations.len(),
            if violations.is_empty() {
                String::new()
            } else {
                format!(" in traces {violations:?}")
            }
        ),
    )
}

fn quantization(durations: &[SimTime]) -> Outcome {
    let off = durations
        .iter()
        .filter(|d| d.as_micros() % 500_000 != 0)
        .count();
    check(
        off == 0 && !durations.is_empty(),
        format!(
            "{} of {} durations are multiples of 0.5 s",
            durations.len() - off,
            durations.len()
        ),
    )
}

fn stump_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = GbdtParams {
        num_trees: 1,
        max_depth: 1,
        min_samples_leaf: 1,
        min_gain_to_split: 0.0,
        ..GbdtParams::default()
    };
    let mut mismatches = 0;
    for _ in 0..50 {
        let rows: Vec<Vec<f64>> = (0..32)
            .map(|_| (0..4).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let mut labels: Vec<u8> = (0..32).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let names = (0..4).map(|i| format!("x{i}")).collect();
        let model = train(&TrainingSet::new(&rows, &labels, names).unwrap(), params, 0).unwrap();

        // Exhaustive search over every feature and adjacent-value midpoint.
        let p = labels.iter().filter(|&&y| y == 1).count() as f64 / 32.0;
        let h = p * (1.0 - p);
        let g: Vec<f64> = labels.iter().map(|&y| p - f64::from(y)).collect();
        let lambda = params.lambda_l2;
        let sc = |gs: f64, hs: f64| gs * gs / (hs + lambda);
        let gt: f64 = g.iter().sum();
        let ht = 32.0 * h;
        let mut best = (0usize, 0.0f64, f64::NEG_INFINITY);
        for f in 0..4 {
            let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = w[0] + (w[1] - w[0]) / 2.0;
                let (gl, hl) = rows
                    .iter()
                    .zip(&g)
                    .filter(|(r, _)| r[f] <= thr)
                    .fold((0.0, 0.0), |(a, b), (_, gi)| (a + gi, b + h));
                let gain = 0.5 * (sc(gl, hl) + sc(gt - gl, ht - hl) - sc(gt, ht));
                if gain > best.2 {
                    best = (f, thr, gain);
                }
            }
        }
        let matches = match &model.trees[0] {
            TreeNode::Split {
                feature,
                threshold,
                gain,
                ..
            } => (*feature, *threshold) == (best.0, best.1) || (gain - best.2).abs() < 1e-12,
            TreeNode::Leaf { .. } => best.2 <= 0.0,
        };
        if !matches {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("50 datasets, {mismatches} mismatches"),
    )
}

fn shap_accuracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let n = 40;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let labels: Vec<u8> = rows
            .iter()
            .map(|r| u8::from(r[0] + 0.5 * r[1] * r[2] > 0.0))
            .collect();
        if labels.iter().all(|&y| y == labels[0]) {
            continue;
        }
        let names = (0..5).map(|j| format!("x{j}")).collect();
        let params = GbdtParams {
            num_trees: 5,
            max_depth: 3,
            min_samples_leaf: 1,
            ..GbdtParams::default()
        };
        let model = train(&TrainingSet::new(&rows, &labels, names).unwrap(), params, i).unwrap();
        let record: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let s = shap_values(&model, &record, &rows[..10]).unwrap();
        worst = worst.max((s.total() - model.raw_score(&record).unwrap()).abs());
    }
    check(
        worst < 1e-9,
        format!("100 pairs, max |sum phi + base - score| = {worst:.2e}"),
    )
}

fn monotone_loss() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut bad = 0;
    for i in 0..20u64 {
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<u8> = rows
            .iter()
            .map(|r| u8::from(r[0] * r[1] + 0.3 * rng.random_range(-1.0..1.0) > 0.0))
            .collect();
        let names = (0..4).map(|j| format!("x{j}")).collect();
        let params = GbdtParams {
            num_trees: 30,
            learning_rate: 0.5,
            min_samples_leaf: 1,
            ..GbdtParams::default()
        };
        let model = train(&TrainingSet::new(&rows, &labels, names).unwrap(), params, i).unwrap();
        if !model.loss_history.windows(2).all(|w| w[1] <= w[0]) {
            bad += 1;
        }
    }
    check(bad == 0, format!("20 datasets, {bad} with a loss increase"))
}

fn tpe_vs_random() -> Outcome {
    let space = SearchSpace::new().with("x", Distribution::Uniform { lo: 0.0, hi: 1.0 });
    let quadratic =
        |p: &Point, _: &mut Reporter<'_>| Ok(TrialOutcome::Complete((p["x"] - 0.3).powi(2)));
    let mut tpe = Vec::new();
    let mut random = Vec::new();
    for rep in 0..20u64 {
        tpe.push(
            optimize(quadratic, &space, 30, 500 + rep)
                .unwrap()
                .final_loss()
                .unwrap(),
        );
        random.push(
            optimize_random(quadratic, &space, 30, 500 + rep)
                .unwrap()
                .final_loss()
                .unwrap(),
        );
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (v[9] + v[10]) / 2.0
    };
    let (t, r) = (median(&mut tpe), median(&mut random));
    check(
        t <= r,
        format!("median best loss tpe {t:.3e} vs random {r:.3e}"),
    )
}

fn main() -> ExitCode {
    let f = fixture();
    let mut durations = Vec::new();
    let criteria: Vec<(&str, Outcome)> = vec![
        (
            "1 collective recall (windows 10, 100; 5 seeds)",
            collective_recall(&f),
        ),
        ("2 detection trends", trends(&f)),
        ("3 inference latency", inference_latency(&f)),
        (
            "4 migration calibration",
            migration_calibration(&f.scenario, &mut durations),
        ),
        (
            "5 closed-loop placement",
            closed_loop(&f.scenario, &mut durations),
        ),
        ("6 poll quantization", quantization(&durations)),
        ("7a depth-1 split vs exhaustive search", stump_oracle()),
        ("7b Shapley local accuracy", shap_accuracy()),
        ("7c non-increasing training loss", monotone_loss()),
        ("7d TPE vs random search", tpe_vs_random()),
    ];
    let mut failed = 0;
    for (name, o) in &criteria {
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
