//! Serve the operator endpoint and talk to it like a console would.
//!
//!     cargo run --example telemetry_server

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use warevr::mission::MissionMode;
use warevr::telemetry::{Client, FrameKind, Server, ServerConfig};
use warevr::warehouse::WarehouseSpec;
use warevr::world::{OperatorCommand, World};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = WarehouseSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/warehouse_golden.json"))?;
    let world = World::new(spec, 7)?;
    let server = Server::start(
        world,
        ServerConfig {
            listen: "127.0.0.1:0".into(),
            speed: 20.0,
            ..ServerConfig::default()
        },
    )?;
    println!("serving on {}", server.url());

    let mut client = Client::connect(&server.url())?;
    let hello = client.recv(Duration::from_secs(2))?;
    println!(
        "hello: protocol {} twin rev {}",
        hello.payload["protocol_version"], hello.payload["twin_revision"]
    );
    client.send(&OperatorCommand::StartMission {
        mode: MissionMode::Full,
    })?;

    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let until = Instant::now() + Duration::from_secs(3);
    while Instant::now() < until {
        let Ok(f) = client.recv(Duration::from_millis(200)) else {
            continue;
        };
        *seen.entry(format!("{:?}", f.kind)).or_default() += 1;
        if f.kind == FrameKind::Event && f.payload["event_type"] == "phase_changed" {
            println!("seq {:>5}  {}", f.seq, f.payload["payload"]);
        }
    }
    client.close();
    let world = server.stop();
    println!("frames received {seen:?}; sim ran to {:.1} s", world.time_s());
    Ok(())
}
