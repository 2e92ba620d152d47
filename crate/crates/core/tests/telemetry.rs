use std::time::Duration;

use serde_json::json;
use warevr::mission::MissionMode;
use warevr::telemetry::{frames_after_tick, Client, Frame, FrameKind, Sequencer, Server, ServerConfig};
use warevr::warehouse::{SlotAddress, WarehouseSpec};
use warevr::world::{OperatorCommand, World};

const WAIT: Duration = Duration::from_secs(10);

fn world() -> World {
    let spec = WarehouseSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/warehouse_golden.json")).unwrap();
    World::new(spec, 5).unwrap()
}

fn serve(speed: f64) -> Server {
    Server::start(
        world(),
        ServerConfig {
            listen: "127.0.0.1:0".into(),
            speed,
            ..ServerConfig::default()
        },
    )
    .unwrap()
}

fn error_code(f: &Frame) -> &str {
    f.payload["code"].as_str().unwrap_or("")
}

#[test]
fn hello_comes_first_and_numbers_increase() {
    let server = serve(5.0);
    let mut a = Client::connect(&server.url()).unwrap();
    let hello = a.recv(WAIT).unwrap();
    assert_eq!(hello.kind, FrameKind::Hello);
    assert_eq!(hello.payload["protocol_version"], 1);
    assert!(hello.payload["spec"]["racks"].is_array());

    let mut b = Client::connect(&server.url()).unwrap();
    assert_eq!(b.recv(WAIT).unwrap().kind, FrameKind::Hello);
    for c in [&mut a, &mut b] {
        let mut last = 0;
        for _ in 0..40 {
            let f = c.recv(WAIT).unwrap();
            assert!(f.seq > last, "seq {} after {last}", f.seq);
            last = f.seq;
        }
    }
    a.close();
    b.close();
    server.stop();
}

#[test]
fn rejects_bad_frames_with_error_frames() {
    let server = serve(5.0);
    let mut c = Client::connect(&server.url()).unwrap();
    c.recv(WAIT).unwrap();
    let is_error = |f: &Frame| f.kind == FrameKind::Error;

    c.send_raw("not json").unwrap();
    let e = c.recv_until(WAIT, is_error).unwrap();
    assert_eq!(error_code(&e), "MALFORMED");
    assert!(e.payload["in_reply_to"].is_null());

    c.send_raw(r#"{"kind":"command","seq":10,"payload":{"type":"pause"}}"#)
        .unwrap();
    c.send_raw(r#"{"kind":"command","seq":10,"payload":{"type":"pause"}}"#)
        .unwrap();
    let e = c.recv_until(WAIT, is_error).unwrap();
    assert_eq!(error_code(&e), "OUT_OF_ORDER");
    assert_eq!(e.payload["in_reply_to"], 10);

    c.send_raw(r#"{"kind":"command","seq":11,"payload":{"type":"warp_drive"}}"#)
        .unwrap();
    let e = c.recv_until(WAIT, is_error).unwrap();
    assert_eq!(error_code(&e), "BAD_COMMAND");
    assert_eq!(e.payload["in_reply_to"], 11);

    c.send_raw(r#"{"kind":"state_snapshot","seq":12,"payload":{}}"#)
        .unwrap();
    let e = c.recv_until(WAIT, is_error).unwrap();
    assert_eq!(error_code(&e), "UNEXPECTED_KIND");
    server.stop();
}

#[test]
fn rejected_commands_are_reported_as_events() {
    let server = serve(5.0);
    let mut c = Client::connect(&server.url()).unwrap();
    c.recv(WAIT).unwrap();
    // Nothing to pause yet.
    c.send(&OperatorCommand::Pause).unwrap();
    let f = c
        .recv_until(WAIT, |f| {
            f.kind == FrameKind::Event && f.payload["event_type"] == "command_rejected"
        })
        .unwrap();
    assert_eq!(f.payload["payload"]["command"]["type"], "pause");
    server.stop();
}

#[test]
fn mission_starts_over_the_link() {
    let server = serve(10.0);
    let mut c = Client::connect(&server.url()).unwrap();
    c.recv(WAIT).unwrap();
    c.send(&OperatorCommand::StartMission {
        mode: MissionMode::Full,
    })
    .unwrap();
    c.recv_until(WAIT, |f| {
        f.kind == FrameKind::Event && f.payload["event_type"] == "mission_started"
    })
    .unwrap();
    let snap = c
        .recv_until(WAIT, |f| {
            f.kind == FrameKind::StateSnapshot && !f.payload["phase"].is_null()
        })
        .unwrap();
    assert_eq!(snap.payload["mode"], json!({"mode": "full"}));
    let view = c.recv_until(WAIT, |f| f.kind == FrameKind::ViewFrame).unwrap();
    assert!(view.payload.is_object());
    c.send(&OperatorCommand::Abort).unwrap();
    c.recv_until(WAIT, |f| {
        f.kind == FrameKind::Event && f.payload["event_type"] == "mission_aborted"
    })
    .unwrap();
    let world = server.stop();
    assert!(world.mission().unwrap().phase().is_terminal());
}

#[test]
fn snapshot_and_view_rates() {
    let mut w = world();
    let seq = Sequencer::default();
    let mut cursor = 0;
    let (mut snaps, mut views, mut last) = (0, 0, 0);
    // 10 s of simulated time.
    for _ in 0..500 {
        w.tick();
        for f in frames_after_tick(&w, &mut cursor, &seq, false) {
            assert!(f.seq > last);
            last = f.seq;
            match f.kind {
                FrameKind::StateSnapshot => snaps += 1,
                FrameKind::ViewFrame => views += 1,
                _ => {}
            }
        }
    }
    assert_eq!(snaps, 200);
    assert_eq!(views, 100);
}

#[test]
fn silent_operator_triggers_soft_landing() {
    let server = serve(20.0);
    let mut c = Client::connect(&server.url()).unwrap();
    c.recv(WAIT).unwrap();
    let target: SlotAddress = "1:back:4:2".parse().unwrap();
    c.send(&OperatorCommand::StartMission {
        mode: MissionMode::VisualInspection { target },
    })
    .unwrap();
    let long = Duration::from_secs(30);
    let granted = c
        .recv_until(long, |f| {
            f.kind == FrameKind::Event && f.payload["event_type"] == "manual_control_granted"
        })
        .unwrap();
    let landing = c
        .recv_until(long, |f| {
            f.kind == FrameKind::Event
                && f.payload["event_type"] == "sim"
                && f.payload["payload"]["reason"] == "connection_loss"
        })
        .unwrap();
    let silence = landing.payload["tick"].as_u64().unwrap() - granted.payload["tick"].as_u64().unwrap();
    assert!((100..=101).contains(&silence), "{silence} ticks");
    server.stop();
}

#[test]
fn heartbeats_keep_manual_flight_alive() {
    let server = serve(20.0);
    let mut c = Client::connect(&server.url()).unwrap();
    c.recv(WAIT).unwrap();
    let target: SlotAddress = "1:back:4:2".parse().unwrap();
    c.send(&OperatorCommand::StartMission {
        mode: MissionMode::VisualInspection { target },
    })
    .unwrap();
    c.recv_until(Duration::from_secs(30), |f| {
        f.kind == FrameKind::Event && f.payload["event_type"] == "manual_control_granted"
    })
    .unwrap();
    // 4 s of simulated time at 20x, with a heartbeat every 50 ms of wall time.
    let until = std::time::Instant::now() + Duration::from_millis(200);
    while std::time::Instant::now() < until {
        c.send(&OperatorCommand::Heartbeat).unwrap();
        while let Ok(f) = c.recv(Duration::from_millis(10)) {
            assert_ne!(f.payload["event_type"], "mission_aborted", "aborted despite heartbeats");
        }
    }
    let world = server.stop();
    assert_eq!(world.mission().unwrap().phase(), warevr::mission::Phase::ManualFlight);
}

#[test]
fn documented_frames_parse() {
    let doc = include_str!("../docs/protocol.md");
    let mut commands = 0;
    for line in doc.lines().filter(|l| l.starts_with("{\"type\"")) {
        let cmd: OperatorCommand = serde_json::from_str(line).unwrap_or_else(|e| panic!("{line}: {e}"));
        let f = Frame::command(1, &cmd);
        assert_eq!(Frame::decode(&f.encode()).unwrap().to_command().unwrap(), cmd);
        commands += 1;
    }
    assert_eq!(commands, 15);
    for line in doc.lines().filter(|l| l.starts_with("{\"kind\"") && !l.contains("<kind>")) {
        Frame::decode(line).unwrap_or_else(|e| panic!("{line}: {e}"));
    }
}
