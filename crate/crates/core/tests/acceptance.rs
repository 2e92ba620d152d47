//! Acceptance gate. One line per criterion; exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use warevr::geometry::{DVec2, DVec3};
use warevr::inventory::Inventory;
use warevr::mission::{run_search, MissionMode, Phase, SearchOption, SearchResult, TagSearchState};
use warevr::scan::{classify_box, measure_box, SensorNoiseModel, Sensors};
use warevr::sim::{
    self, BatteryState, CommandSource, FlightStatus, FlyZoneMap, RobotState, SimConfig, SimEnv, SimEvent,
    SoftLandingReason, VelocityCommand,
};
use warevr::teleop::{capture_reference, map_input, ControllerInput, TeleopConfig};
use warevr::warehouse::{
    alleys, default_catalog, generate_twin, GroundTruth, SlotAddress, UniformLayout, WarehouseSpec,
};
use warevr::world::{OperatorCommand, World, WorldConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn golden() -> PathBuf {
    root().join("assets/warehouse_golden.json")
}

fn small_world(spec: WarehouseSpec, truth: GroundTruth, seed: u64) -> World {
    World::with_truth(spec, truth, seed, Inventory::in_memory(), WorldConfig::default()).expect("valid spec")
}

fn full_stocktaking() -> Outcome {
    let mut spec = UniformLayout::new(2, 4, 6).build(11);
    spec.sensor_noise = SensorNoiseModel::noiseless();
    let truth = GroundTruth::with_count(&spec, 40, 11);
    let expected: BTreeSet<SlotAddress> = truth.occupancy().keys().copied().collect();
    check(expected.len() == 40, "fixture does not hold 40 pallets")?;

    let started = Instant::now();
    let mut world = small_world(spec, truth, 11);
    world.start_mission(MissionMode::Full).map_err(|e| e.to_string())?;
    let phase = world.run_until_done(5_000_000);
    let wall = started.elapsed().as_secs_f64();

    let verified: BTreeSet<SlotAddress> = world
        .twin()
        .slots()
        .iter()
        .filter(|(_, s)| s.is_verified())
        .map(|(a, _)| *a)
        .collect();
    let records = world.inventory().len();
    check(phase == Some(Phase::Done), format!("mission ended {phase:?}"))?;
    check(records == 40, format!("{records} records"))?;
    check(
        verified == expected,
        format!("{} twin slots filled, set differs from truth", verified.len()),
    )?;
    check(wall < 10.0, format!("{wall:.2} s wall"))?;
    Ok(format!(
        "Done, 40 records, 40 twin slots, {wall:.2} s wall ({:.0} s sim)",
        world.time_s()
    ))
}

fn verification_gate() -> Outcome {
    let mut spec = UniformLayout::new(1, 3, 4).build(0);
    spec.sensor_noise.p_false_positive = 0.1;
    spec.stock.clutter = 0.3;
    let mut spurious_seen = 0usize;
    for seed in 0..10_000u64 {
        let truth = GroundTruth::generate(&spec, seed);
        let mut twin = generate_twin(&spec).expect("valid");
        let mut sensors = Sensors::new(truth.clone(), &spec, seed);
        for face in spec.reachable_faces() {
            for c in sensors.detect(&spec, face).candidates() {
                let spurious = truth.occupant(&c.address).is_none();
                let rec = sensors.verify(c);
                if spurious {
                    spurious_seen += 1;
                    check(
                        !rec.is_verified(),
                        format!("seed {seed}: spurious {} verified", c.address),
                    )?;
                }
                twin.mark_candidate(c).map_err(|e| e.to_string())?;
                let _ = twin.apply_verification(&rec);
            }
        }
        for (addr, s) in twin.slots() {
            if s.is_verified() {
                check(
                    truth.occupant(addr).is_some(),
                    format!("seed {seed}: twin shows {addr} verified"),
                )?;
            }
        }
    }
    // End to end through mission control for a handful of seeds.
    for seed in 0..20u64 {
        let truth = GroundTruth::generate(&spec, seed);
        let mut world = small_world(spec.clone(), truth.clone(), seed);
        world.start_mission(MissionMode::Full).map_err(|e| e.to_string())?;
        world.run_until_done(5_000_000);
        for r in world.inventory().records() {
            check(
                truth.occupant(&r.address).is_some(),
                format!("mission seed {seed}: {} stored", r.address),
            )?;
        }
    }
    check(
        spurious_seen > 1000,
        format!("only {spurious_seen} spurious candidates exercised"),
    )?;
    Ok(format!(
        "10^4 seeds, {spurious_seen} spurious candidates, none verified"
    ))
}

fn waypoint_removal() -> Outcome {
    let mut spec = UniformLayout::new(2, 4, 6).build(3);
    spec.sensor_noise.p_laser_read = 0.0;
    spec.sensor_noise.max_read_attempts = 3;
    let truth = GroundTruth::generate(&spec, 3);
    let mut world = small_world(spec, truth, 3);
    world.start_mission(MissionMode::Full).map_err(|e| e.to_string())?;
    let phase = world.run_until_done(5_000_000);
    check(phase == Some(Phase::Done), format!("mission ended {phase:?}"))?;

    // Replay the log.
    let text = world.log().to_ndjson();
    let mut planned: Vec<String> = Vec::new();
    let mut reached: BTreeMap<String, usize> = BTreeMap::new();
    let mut verified: BTreeMap<String, usize> = BTreeMap::new();
    for line in text.lines() {
        let e: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        match e["event_type"].as_str() {
            Some("path_planned") => {
                planned = e["payload"]["waypoints"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .filter_map(|w| w.as_str().map(String::from))
                    .collect()
            }
            Some("waypoint_reached") => {
                let a: SlotAddress =
                    serde_json::from_value(e["payload"]["address"].clone()).map_err(|e| e.to_string())?;
                *reached.entry(a.to_string()).or_default() += 1;
            }
            Some("verification") => {
                let p = &e["payload"];
                check(p["status"] == "failed", format!("verified at {}", p["address"]))?;
                check(p["attempts"] == 3, format!("{} attempts", p["attempts"]))?;
                let a: SlotAddress = serde_json::from_value(p["address"].clone()).map_err(|e| e.to_string())?;
                *verified.entry(a.to_string()).or_default() += 1;
            }
            _ => {}
        }
    }
    check(!planned.is_empty(), "no waypoints planned")?;
    check(
        reached.len() == planned.len(),
        format!("{} of {} reached", reached.len(), planned.len()),
    )?;
    check(reached.values().all(|n| *n == 1), "a waypoint was revisited")?;
    check(
        verified.values().all(|n| *n == 1) && verified.len() == planned.len(),
        "read count mismatch",
    )?;
    check(
        world.inventory().is_empty() && world.twin().verified_count() == 0,
        "something was stored",
    )?;
    Ok(format!(
        "{} candidates, each Failed after 3 attempts, each waypoint visited once",
        planned.len()
    ))
}

fn safety_containment() -> Outcome {
    let spec = WarehouseSpec::load(golden()).map_err(|e| e.to_string())?;
    let cfg = SimConfig::default();
    let env = SimEnv::new(&spec, cfg);
    // Independent map and checks.
    let map = FlyZoneMap::build(&spec, 1);
    let all = alleys(&spec);
    let stations: Vec<(DVec2, DVec2)> = all.iter().map(|a| (a.start, a.end)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut state = RobotState::docked_at(all[0].start, &cfg);
    sim::launch(&mut state, &env).map_err(|e| e.to_string())?;
    let mut steps = 0u64;
    let (mut fly_violations, mut cylinder_exits, mut flying_steps) = (0u64, 0u64, 0u64);
    while steps < 1_000_000 {
        if state.uav.flight_status == FlightStatus::Docked {
            state.battery = BatteryState::full(cfg.dt);
            let (a, b) = stations[rng.random_range(0..stations.len())];
            let t: f64 = rng.random();
            state.ugv.position = a + (b - a) * t;
            state.uav.position = env.deck(state.ugv.position);
            sim::launch(&mut state, &env).map_err(|e| e.to_string())?;
        }
        if state.ugv.route.is_empty() || rng.random_bool(0.002) {
            let (a, b) = stations[rng.random_range(0..stations.len())];
            let t: f64 = rng.random();
            state.ugv.route = [a + (b - a) * t].into_iter().collect();
        }
        let v = match rng.random_range(0..10) {
            0 => DVec3::new(f64::NAN, 0.0, f64::INFINITY),
            1 => DVec3::new(
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
            ),
            _ => DVec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ),
        };
        let cmd = VelocityCommand::new(v, rng.random_range(-3.0..3.0), CommandSource::Teleop);
        if rng.random_bool(0.0005) {
            let _ = sim::trigger_soft_landing(&mut state, SoftLandingReason::Recall);
        }
        state = sim::step(&state, &cmd, &env).state;
        steps += 1;
        if state.uav.flight_status == FlightStatus::Flying {
            flying_steps += 1;
            let p = state.uav.position;
            if (p.truncate() - state.ugv.position).length() > cfg.cylinder_radius + 1e-9 {
                cylinder_exits += 1;
            }
            let z_ok = p.z >= cfg.deck_height + cfg.deck_clearance - 1e-9
                && p.z <= spec.ceiling_height - cfg.ceiling_margin + 1e-9;
            if !map.is_flyable(p) || !z_ok {
                fly_violations += 1;
            }
        }
    }
    check(fly_violations == 0, format!("{fly_violations} fly-zone violations"))?;
    check(cylinder_exits == 0, format!("{cylinder_exits} cylinder exits"))?;
    Ok(format!(
        "10^6 steps ({flying_steps} flying): 0 fly-zone violations, 0 cylinder exits"
    ))
}

fn connection_loss() -> Outcome {
    let spec = WarehouseSpec::load(golden()).map_err(|e| e.to_string())?;
    let target: SlotAddress = "1:back:4:2".parse().map_err(|e| format!("{e:?}"))?;
    let mut lines = Vec::new();
    for heartbeat_for in [0u64, 150] {
        let mut world = World::new(spec.clone(), 5).map_err(|e| e.to_string())?;
        world
            .start_mission(MissionMode::VisualInspection { target })
            .map_err(|e| e.to_string())?;
        let mut manual_at = None;
        let mut last_heard = None;
        let mut landing_at = None;
        for _ in 0..100_000 {
            let t = world.tick_count();
            if let Some(m) = manual_at {
                if t < m + heartbeat_for && t % 10 == 0 {
                    world.apply(OperatorCommand::Heartbeat).map_err(|e| e.to_string())?;
                    last_heard = Some(t);
                }
            }
            world.tick();
            if manual_at.is_none() && world.mission().map(|m| m.phase()) == Some(Phase::ManualFlight) {
                // Granted during the tick that started at t.
                manual_at = Some(t);
            }
            if landing_at.is_none() && world.robot().uav.flight_status == FlightStatus::SoftLanding {
                landing_at = Some(t);
            }
            if landing_at.is_some() && world.robot().uav.flight_status == FlightStatus::Docked {
                break;
            }
        }
        let manual = manual_at.ok_or("manual flight never granted")?;
        let landed = landing_at.ok_or("no soft landing")?;
        let silence_from = last_heard.unwrap_or(manual).max(manual);
        let silence = landed - silence_from;
        check(
            (100..=101).contains(&silence),
            format!("soft landing {silence} ticks after silence began"),
        )?;
        check(world.robot().uav.flight_status == FlightStatus::Docked, "never docked")?;
        check(
            world.mission().map(|m| m.phase()) == Some(Phase::Aborted),
            "mission not aborted",
        )?;
        let reason_logged = world
            .log()
            .of_type("sim")
            .any(|e| e.payload["reason"] == "connection_loss");
        check(reason_logged, "landing reason not logged")?;
        lines.push(format!("{:.2} s", silence as f64 * 0.02));
    }
    Ok(format!(
        "soft landing after {} of silence, then Docked",
        lines.join(" / ")
    ))
}

fn battery() -> Outcome {
    let spec = WarehouseSpec::load(golden()).map_err(|e| e.to_string())?;
    let cfg = SimConfig::default();
    let env = SimEnv::new(&spec, cfg);
    let home = alleys(&spec)[0].start;

    // Continuous flight.
    let mut state = RobotState::docked_at(home, &cfg);
    sim::launch(&mut state, &env).map_err(|e| e.to_string())?;
    let hover = VelocityCommand::hover(CommandSource::Autonomous);
    let mut flight_ticks = 0u64;
    loop {
        let out = sim::step(&state, &hover, &env);
        state = out.state;
        flight_ticks += 1;
        if out.events.contains(&SimEvent::BatteryDepleted) {
            break;
        }
        check(flight_ticks < 200_000, "battery never ran out")?;
    }
    let flight_s = flight_ticks as f64 * cfg.dt;
    check((flight_s - 1500.0).abs() <= 1.0, format!("flight lasted {flight_s} s"))?;

    // Recharge from empty.
    let mut state = RobotState::docked_at(home, &cfg);
    state.battery = BatteryState::with_charge(cfg.dt, 0.0);
    let mut charge_ticks = 0u64;
    while !state.battery.is_full() {
        state = sim::step(&state, &hover, &env).state;
        charge_ticks += 1;
        check(charge_ticks < 100_000, "battery never filled")?;
    }
    let charge_s = charge_ticks as f64 * cfg.dt;
    check((charge_s - 500.0).abs() <= 1.0, format!("recharge took {charge_s} s"))?;

    // Mission on a low battery.
    let mut world = World::new(spec, 7).map_err(|e| e.to_string())?;
    world.robot_mut().battery = BatteryState::with_charge(cfg.dt, 0.22);
    world.start_mission(MissionMode::Full).map_err(|e| e.to_string())?;
    let phase = world.run_until_done(5_000_000);
    check(phase == Some(Phase::Done), format!("mission ended {phase:?}"))?;
    let ev = world.log().events();
    let critical = ev
        .iter()
        .position(|e| e.event_type == "battery_critical")
        .ok_or("no battery_critical")?;
    let landing = ev[critical..]
        .iter()
        .position(|e| e.payload["reason"] == "battery_critical")
        .map(|i| i + critical)
        .ok_or("no return to dock")?;
    let docked = ev[landing..]
        .iter()
        .position(|e| e.payload["event"] == "docked")
        .map(|i| i + landing)
        .ok_or("never docked")?;
    let recharged = ev[docked..]
        .iter()
        .position(|e| e.event_type == "recharged")
        .map(|i| i + docked)
        .ok_or("never recharged")?;
    let before = ev[..critical].iter().filter(|e| e.event_type == "verification").count();
    let after = ev[recharged..]
        .iter()
        .filter(|e| e.event_type == "verification")
        .count();
    check(after > 0, "no scanning after the recharge")?;
    let p = world.mission().expect("started").progress();
    check(p.verified + p.failed == p.total, "waypoints left over")?;

    // Starting below the threshold: charge first, then scan.
    let mut world = World::new(world.spec().clone(), 7).map_err(|e| e.to_string())?;
    world.robot_mut().battery = BatteryState::with_charge(cfg.dt, 0.15);
    world.start_mission(MissionMode::Full).map_err(|e| e.to_string())?;
    let phase = world.run_until_done(5_000_000);
    check(phase == Some(Phase::Done), format!("low start ended {phase:?}"))?;
    let ev = world.log().events();
    let recharged = ev
        .iter()
        .position(|e| e.event_type == "recharged")
        .ok_or("low start never recharged")?;
    let first_read = ev
        .iter()
        .position(|e| e.event_type == "verification")
        .ok_or("low start never scanned")?;
    check(first_read > recharged, "scanned before recharging")?;
    Ok(format!(
        "flight {flight_s:.2} s, recharge {charge_s:.2} s, mission at 22%: {before} reads, dock, recharge, {after} reads, Done; at 15%: recharge, then Done"
    ))
}

fn box_accuracy() -> Outcome {
    let catalog = default_catalog();
    let noise = SensorNoiseModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0C5);
    let mut worst: f64 = 0.0;
    let mut correct = 0usize;
    const N: usize = 100_000;
    for i in 0..N {
        let truth = &catalog[i % catalog.len()];
        let m = measure_box(truth.dims, &noise, &mut rng);
        let err = m
            .as_array()
            .iter()
            .zip(truth.dims.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        if classify_box(&m, &catalog) == Some(truth.name.as_str()) {
            correct += 1;
        }
    }
    check(worst <= 0.03, format!("worst axis error {worst}"))?;
    check(correct == N, format!("classification {correct}/{N}"))?;
    Ok(format!(
        "10^5 measurements, worst axis error {worst:.4} m, classification 100%"
    ))
}

fn tag_search() -> Outcome {
    let spec = UniformLayout::new(1, 4, 6).build(0);
    let twin = generate_twin(&spec).map_err(|e| e.to_string())?;
    let alley = alleys(&spec)
        .into_iter()
        .find(|a| a.faces.len() == 1)
        .ok_or("no single-face alley")?;
    let face = alley.faces[0];
    let slots = spec.face_addresses(face);
    check(slots.len() == 24, "grid is not 4 x 6")?;
    let mut cases = 0;
    for origin in &slots {
        for dest in &slots {
            let expected = origin
                .section
                .abs_diff(dest.section)
                .max(origin.tier.abs_diff(dest.tier));
            let mut s = TagSearchState::new("T", *origin, alley.id);
            let got = run_search(&mut s, &twin, |a| a == dest);
            check(
                got == SearchResult::Found {
                    address: *dest,
                    ring: expected,
                },
                format!("origin {origin} dest {dest}: {got:?}, expected ring {expected}"),
            )?;
            cases += 1;
        }
    }
    let mut s = TagSearchState::new("T", slots[0], alley.id);
    let exhausted = run_search(&mut s, &twin, |_| false);
    let both = vec![SearchOption::SelectAnotherAlley, SearchOption::SwitchToVisualInspection];
    check(
        exhausted
            == SearchResult::Exhausted {
                alley: alley.id,
                options: both.clone(),
            },
        format!("exhausted search gave {exhausted:?}"),
    )?;

    // The same through mission control: a pallet moved from its recorded slot.
    let mut spec = spec;
    spec.sensor_noise = SensorNoiseModel::noiseless();
    let mut truth = GroundTruth::default();
    let box_type = spec.box_catalog[0].clone();
    let origin = SlotAddress::new(face.rack, face.side, 1, 1);
    let dest = SlotAddress::new(face.rack, face.side, 4, 3);
    truth.place(origin, "PLT-MOVED", box_type);
    let mut world = small_world(spec, truth, 1);
    world
        .start_mission(MissionMode::Partial {
            racks: vec![],
            alleys: vec![alley.id],
        })
        .map_err(|e| e.to_string())?;
    world.run_until_done(5_000_000);
    world.truth_mut().move_tag("PLT-MOVED", dest);
    world
        .start_mission(MissionMode::TagSearch {
            tag: "PLT-MOVED".into(),
            alley: None,
        })
        .map_err(|e| e.to_string())?;
    world.run_until_done(5_000_000);
    let found = world.mission().and_then(|m| m.search_result()).cloned();
    check(
        found == Some(SearchResult::Found { address: dest, ring: 3 }),
        format!("mission search: {found:?}"),
    )?;
    world
        .start_mission(MissionMode::TagSearch {
            tag: "PLT-NONE".into(),
            alley: Some(alley.id),
        })
        .map_err(|e| e.to_string())?;
    world.run_until_done(5_000_000);
    let none = world.mission().and_then(|m| m.search_result()).cloned();
    check(
        none == Some(SearchResult::Exhausted {
            alley: alley.id,
            options: both,
        }),
        format!("mission exhaustion: {none:?}"),
    )?;
    Ok(format!(
        "{cases} origin/destination pairs at Chebyshev ring; exhaustion offers both options"
    ))
}

fn teleop_mapping() -> Outcome {
    let cfg = TeleopConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7E1E);
    let base = ControllerInput::at(0.3, 1.1, 0.9);
    let reference = capture_reference(&base);
    let map = |d: DVec3| {
        let i = ControllerInput::at(base.x_c + d.x, base.y_c + d.y, base.z_c + d.z);
        map_input(&i, Some(&reference), &cfg).expect("finite").v
    };
    let axis = |d: f64| -> f64 { map(DVec3::new(0.0, d, 0.0)).y };

    // Proportionality beyond the deadzone, below saturation.
    for _ in 0..10_000 {
        let d: f64 = rng.random_range(cfg.deadzone + 1e-6..cfg.deadzone + cfg.v_max / cfg.gain);
        let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let want = s * cfg.gain * (d - cfg.deadzone);
        check(
            (axis(s * d) - want).abs() < 1e-12,
            format!("v({}) = {}, want {want}", s * d, axis(s * d)),
        )?;
    }
    // Continuity across the deadzone boundary.
    let h = 1e-7;
    let mut max_jump: f64 = 0.0;
    for side in [1.0, -1.0] {
        let mut d = cfg.deadzone - 1e-3;
        while d < cfg.deadzone + 1e-3 {
            max_jump = max_jump.max((axis(side * (d + h)) - axis(side * d)).abs());
            d += h;
        }
    }
    check(max_jump < 1e-6, format!("max jump {max_jump}"))?;
    // Clamps.
    for _ in 0..10_000 {
        let d = DVec3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        );
        let v = map(d);
        check(v.abs().max_element() <= cfg.v_max, format!("{v:?} exceeds v_max"))?;
        let mut i = ControllerInput::at(d.x, d.y, d.z);
        i.yaw_input = rng.random_range(-10.0..10.0);
        let c = map_input(&i, Some(&reference), &cfg).expect("finite");
        check(c.yaw_rate.abs() <= cfg.yaw_rate_max, "yaw rate exceeds limit")?;
    }
    // Hold position: trigger held, or inside the deadzone, gives no translation.
    for _ in 0..10_000 {
        let d = DVec3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
        let mut i = ControllerInput::at(base.x_c + d.x, base.y_c + d.y, base.z_c + d.z);
        i.trigger_held = true;
        i.yaw_input = rng.random_range(-1.0..1.0);
        let c = map_input(&i, Some(&reference), &cfg).expect("finite");
        check(c.v == DVec3::ZERO, "translation while holding")?;
        check(
            (c.yaw_rate - i.yaw_input * cfg.yaw_rate_max).abs() < 1e-15,
            "yaw altered while holding",
        )?;
        let small = d.normalize_or_zero() * rng.random_range(0.0..cfg.deadzone) / 3f64.sqrt();
        check(map(small) == DVec3::ZERO, "motion inside the deadzone")?;
    }
    Ok(format!(
        "proportional, max jump {max_jump:.1e} m/s at the deadzone edge, clamped, hold is pure"
    ))
}

fn cli(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_warevr"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = golden();
    let spec = spec.to_str().ok_or("path")?;
    let mut outs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = cli(&[
            "mission",
            spec,
            "--mode",
            "full",
            "--seed",
            "7",
            "--out",
            out.to_str().ok_or("path")?,
        ])?;
        check(o.status.success(), String::from_utf8_lossy(&o.stderr).into_owned())?;
        outs.push(out);
    }
    let read = |p: &Path, f: &str| std::fs::read(p.join(f)).map_err(|e| e.to_string());
    let mut sizes = Vec::new();
    for f in ["events.ndjson", "report.csv"] {
        let (a, b) = (read(&outs[0], f)?, read(&outs[1], f)?);
        check(!a.is_empty() && a == b, format!("{f} differs"))?;
        sizes.push(format!("{f} {} B", a.len()));
    }
    Ok(format!("two runs byte-identical: {}", sizes.join(", ")))
}

fn scenario() -> Outcome {
    let spec = golden();
    let script = root().join("assets/pilot_visual_inspection.ndjson");
    let o = cli(&[
        "scenario",
        "visual-inspection",
        spec.to_str().ok_or("path")?,
        "--targets",
        "5",
        "--script",
        script.to_str().ok_or("path")?,
    ])?;
    check(o.status.success(), String::from_utf8_lossy(&o.stderr).into_owned())?;
    let report: Value = serde_json::from_slice(&o.stdout).map_err(|e| e.to_string())?;
    let targets = report["targets"].as_array().ok_or("no targets")?;
    check(targets.len() == 5, format!("{} targets", targets.len()))?;
    check(
        report["transitions"] == 5,
        format!("{} transitions", report["transitions"]),
    )?;
    check(
        targets.iter().all(|t| t["scanned_tick"].is_u64()),
        "a target never turned green",
    )?;
    let d = report["duration_s"].as_f64().ok_or("no duration")?;
    check(d > 0.0, "no duration")?;
    Ok(format!("5 of 5 red -> green in {d:.2} s sim time"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("full-stocktaking completeness", full_stocktaking),
        ("verification gate", verification_gate),
        ("waypoint removal", waypoint_removal),
        ("safety containment", safety_containment),
        ("connection loss", connection_loss),
        ("battery", battery),
        ("box accuracy", box_accuracy),
        ("tag search", tag_search),
        ("teleop mapping", teleop_mapping),
        ("determinism", determinism),
        ("scenario harness", scenario),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  A{:02} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  A{:02} {name}: {why} [{secs:.1} s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
