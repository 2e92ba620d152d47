pub mod cli;
pub mod geometry;
pub mod inventory;
pub mod mission;
pub mod render;
pub mod rng;
pub mod scan;
pub mod scenario;
pub mod sim;
pub mod telemetry;
pub mod teleop;
pub mod warehouse;
pub mod world;
