use std::collections::BTreeMap;

use condmon::edge::{EdgeRuntime, LatencyProfile, Outcome, ServiceId, ServiceStatus};
use condmon::experiment::{run_simulation, Scenario};
use condmon::gbdt::{GbdtModel, GbdtParams};
use condmon::netsim::{
    build_topology, detect_handovers, run, EdgeNodeId, MobilityTrace, NetworkConfig, SimEvent,
    SimTime, Topology, UplinkConfig, VirtualClock,
};
use condmon::orchestrator::{
    MigrationOutcome, MigrationRecord, MonitoringSystem, Orchestrator, OrchestratorConfig,
};
use condmon::telemetry::{feature_names, generate_synthetic, reference_stats};

/// Six cells in four TAIs; tai3 and tai4 share a UPF and so an edge node.
const TOPOLOGY: &str = r#"
[[topology.radio_nodes]]
id = "gnb1"
tai = "tai1"
position = { x = 0.0, y = 0.0 }
[[topology.radio_nodes]]
id = "gnb2"
tai = "tai1"
position = { x = 300.0, y = 0.0 }
[[topology.radio_nodes]]
id = "gnb3"
tai = "tai2"
position = { x = 600.0, y = 0.0 }
[[topology.radio_nodes]]
id = "gnb4"
tai = "tai3"
position = { x = 900.0, y = 0.0 }
[[topology.radio_nodes]]
id = "gnb5"
tai = "tai3"
position = { x = 1200.0, y = 0.0 }
[[topology.radio_nodes]]
id = "gnb6"
tai = "tai4"
position = { x = 1500.0, y = 0.0 }

[[topology.tais]]
tai = "tai1"
plmn = "00101"
upf = "upf1"
[[topology.tais]]
tai = "tai2"
plmn = "00101"
upf = "upf2"
[[topology.tais]]
tai = "tai3"
plmn = "00101"
upf = "upf3"
[[topology.tais]]
tai = "tai4"
plmn = "00101"
upf = "upf3"

[[topology.edge_nodes]]
id = "edge1"
upf = "upf1"
position = { x = 0.0, y = 50.0 }
[[topology.edge_nodes]]
id = "edge2"
upf = "upf2"
position = { x = 600.0, y = 50.0 }
[[topology.edge_nodes]]
id = "edge3"
upf = "upf3"
position = { x = 1200.0, y = 50.0 }
"#;

fn topology() -> Topology {
    build_topology(TOPOLOGY).unwrap()
}

fn service() -> ServiceId {
    ServiceId::new("svc")
}

fn orchestrator(topo: &Topology, trace: &MobilityTrace, seed: u64) -> Orchestrator {
    let rt = EdgeRuntime::new(
        topo.edge_nodes().iter().map(|e| e.id.clone()),
        LatencyProfile::default(),
        seed,
    )
    .unwrap();
    let mut o = Orchestrator::new(service(), topo, rt, OrchestratorConfig::default()).unwrap();
    let home = topo
        .edge_for_tai(topo.tai_of(&trace.first().radio_node).unwrap())
        .unwrap()
        .clone();
    o.bootstrap(&home, trace.first().time).unwrap();
    o
}

/// Linear scan over consecutive attachments.
fn tai_changes(topo: &Topology, trace: &MobilityTrace) -> Vec<(SimTime, String)> {
    let atts = trace.attachments();
    let mut out = Vec::new();
    for w in atts.windows(2) {
        let (a, b) = (
            topo.tai_of(&w[0].radio_node).unwrap(),
            topo.tai_of(&w[1].radio_node).unwrap(),
        );
        if a != b {
            out.push((w[1].time, b.to_string()));
        }
    }
    out
}

#[test]
fn handover_detection_matches_scan() {
    let topo = topology();
    for seed in 0..5 {
        let trace = MobilityTrace::random(
            &topo,
            1000,
            SimTime::from_secs_f64(1.0),
            SimTime::from_secs_f64(30.0),
            seed,
        )
        .unwrap();
        let events = detect_handovers(&trace, &topo, 1).unwrap();
        let got: Vec<_> = events
            .iter()
            .map(|e| (e.time, e.new_tai.to_string()))
            .collect();
        assert_eq!(got, tai_changes(&topo, &trace));
    }
}

#[test]
fn delivery_latency_shifts_notifications() {
    let topo = Topology::two_node();
    let trace = MobilityTrace::alternating(
        &["gnb1".into(), "gnb2".into()],
        SimTime::from_secs_f64(10.0),
        2,
    )
    .unwrap();
    let config = NetworkConfig {
        delivery_latency: SimTime::from_millis(100),
        ..NetworkConfig::default()
    };
    let mut seen = Vec::new();
    let mut sub = |e: &condmon::netsim::Scheduled<SimEvent>, _: &mut VirtualClock<SimEvent>| {
        seen.push((e.event.origin_time(), e.time));
        Ok(())
    };
    run(
        &mut VirtualClock::new(),
        &topo,
        &trace,
        &config,
        &mut [&mut sub],
    )
    .unwrap();
    assert_eq!(
        seen,
        vec![
            (SimTime::from_secs_f64(10.0), SimTime::from_secs_f64(10.1)),
            (SimTime::from_secs_f64(20.0), SimTime::from_secs_f64(20.1)),
        ]
    );
}

#[test]
fn runs_are_deterministic() {
    let topo = topology();
    let trace = MobilityTrace::random(
        &topo,
        40,
        SimTime::from_secs_f64(5.0),
        SimTime::from_secs_f64(200.0),
        9,
    )
    .unwrap();
    let once = || {
        let mut sys = MonitoringSystem::new(orchestrator(&topo, &trace, 3), &topo);
        let log = run(
            &mut VirtualClock::new(),
            &topo,
            &trace,
            &NetworkConfig::default(),
            &mut [&mut sys],
        )
        .unwrap();
        let mut csv = Vec::new();
        log.write_csv(&mut csv).unwrap();
        (csv, sys.orchestrator.records().to_vec())
    };
    assert_eq!(once(), once());
}

/// Reference placement automaton: follow every TAI change in order and count
/// moves to a different edge node.
fn reference_placement(topo: &Topology, trace: &MobilityTrace) -> (EdgeNodeId, usize) {
    let mut node = topo
        .edge_for_tai(topo.tai_of(&trace.first().radio_node).unwrap())
        .unwrap()
        .clone();
    let mut moves = 0;
    for (_, tai) in tai_changes(topo, trace) {
        let target = topo.edge_for_tai(&tai.as_str().into()).unwrap();
        if *target != node {
            node = target.clone();
            moves += 1;
        }
    }
    (node, moves)
}

#[test]
fn closed_loop_placement_follows_final_tai() {
    let topo = topology();
    let mut rng_seed = 0u64;
    for i in 0..60u64 {
        rng_seed = rng_seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407 ^ i);
        let steps = 2 + (rng_seed >> 33) as usize % 50;
        let trace = MobilityTrace::random(
            &topo,
            steps,
            SimTime::from_secs_f64(2.0),
            SimTime::from_secs_f64(400.0),
            i,
        )
        .unwrap();
        let mut sys = MonitoringSystem::new(orchestrator(&topo, &trace, i), &topo);
        run(
            &mut VirtualClock::new(),
            &topo,
            &trace,
            &NetworkConfig::default(),
            &mut [&mut sys],
        )
        .unwrap();
        let (node, moves) = reference_placement(&topo, &trace);
        let (rt, records) = sys.orchestrator.into_parts();
        assert_eq!(records.len(), moves, "trace {i}");
        let far = SimTime::from_secs_f64(1e7);
        let (_, placed, status) = rt.placement_of(&service(), far).unwrap();
        assert_eq!(
            (placed, status),
            (&node, ServiceStatus::InSync),
            "trace {i}"
        );
        // Placement log: never two live deployments of the service at once.
        let mut last_request = SimTime::ZERO;
        for r in &records {
            assert_eq!(r.outcome, MigrationOutcome::Completed);
            assert!(r.request_time >= last_request);
            assert_eq!((r.in_sync_time - r.request_time).as_micros() % 500_000, 0);
            last_request = r.in_sync_time;
        }
    }
}

/// Intervals during which the service is InSync on each node, rebuilt from
/// the bootstrap and the migration records alone.
fn availability(
    home: &EdgeNodeId,
    start: SimTime,
    records: &[MigrationRecord],
) -> BTreeMap<EdgeNodeId, Vec<(SimTime, SimTime)>> {
    let mut out: BTreeMap<EdgeNodeId, Vec<(SimTime, SimTime)>> = BTreeMap::new();
    let mut current = (home.clone(), start);
    for r in records {
        out.entry(current.0.clone())
            .or_default()
            .push((current.1, r.request_time));
        current = (r.target.clone(), r.request_time + r.low_level_time);
    }
    out.entry(current.0)
        .or_default()
        .push((current.1, SimTime(u64::MAX)));
    out
}

#[test]
fn service_gaps_match_availability_oracle() {
    let mut s = Scenario::default_scenario();
    s.topology = topology();
    s.trace = MobilityTrace::random(
        &s.topology,
        12,
        SimTime::from_secs_f64(20.0),
        SimTime::from_secs_f64(150.0),
        4,
    )
    .unwrap();
    s.network.uplink = Some(UplinkConfig {
        period: SimTime::from_millis(700),
        tail: SimTime::from_secs_f64(100.0),
    });
    let model = GbdtModel {
        trees: vec![],
        learning_rate: 0.1,
        base_score: -2.0,
        feature_names: feature_names(),
        params: GbdtParams::default(),
        loss_history: vec![],
    };
    let stream = generate_synthetic(&reference_stats(), 64, 1).unwrap();
    let out = run_simulation(
        &s,
        &model,
        stream.records(),
        SimTime::from_micros(15),
        true,
        None,
    )
    .unwrap();
    assert!(!out.records.is_empty());

    let first = s.trace.first();
    let home = s
        .topology
        .edge_for_tai(s.topology.tai_of(&first.radio_node).unwrap())
        .unwrap()
        .clone();
    let avail = availability(&home, first.time, &out.records);
    let (mut served, mut gaps) = (0, 0);
    for o in &out.outcomes {
        let up = avail
            .get(&o.node)
            .is_some_and(|iv| iv.iter().any(|&(a, b)| a <= o.time && o.time < b));
        match o.outcome {
            Outcome::Served(_) => {
                assert!(
                    up,
                    "served at {} on {} outside availability",
                    o.time, o.node
                );
                served += 1;
            }
            Outcome::ServiceGap => {
                assert!(!up, "gap at {} on {} inside availability", o.time, o.node);
                gaps += 1;
            }
            Outcome::Dropped(_) => panic!("canonical messages are never dropped"),
        }
    }
    assert!(served > 0 && gaps > 0);
    assert_eq!(out.mediator.dropped, 0);
}
