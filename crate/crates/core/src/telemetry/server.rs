use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, Sender, TrySendError};
use serde_json::Value;
use thiserror::Error;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use super::{
    accept_client_frame, frames_after_tick, hello_payload, Frame, FrameKind, InboundGuard, ProtocolError, Sequencer,
};
use crate::world::{OperatorCommand, World};

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub listen: String,
    /// Simulated seconds per wall second; `0` runs unpaced.
    pub speed: f64,
    /// Outbound frames buffered per session before frames are dropped.
    pub queue: usize,
    pub with_raster: bool,
    /// Stop after this many ticks.
    pub max_ticks: Option<u64>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8765".into(),
            speed: 1.0,
            queue: 256,
            with_raster: false,
            max_ticks: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error(transparent)]
    Ws(Box<tungstenite::Error>),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("timed out waiting for a frame")]
    Timeout,
}

impl From<tungstenite::Error> for TelemetryError {
    fn from(e: tungstenite::Error) -> Self {
        TelemetryError::Ws(Box::new(e))
    }
}

struct Outbox {
    sessions: Vec<Sender<String>>,
}

struct Hub {
    outbox: Mutex<Outbox>,
    seq: Sequencer,
    hello: Mutex<Value>,
    dropped: AtomicU64,
    stop: AtomicBool,
}

impl Hub {
    fn broadcast(&self, out: &mut Outbox, frames: impl IntoIterator<Item = Frame>) {
        for frame in frames {
            let text = frame.encode();
            out.sessions.retain(|tx| match tx.try_send(text.clone()) {
                Ok(()) => true,
                Err(TrySendError::Full(_)) => {
                    self.dropped.fetch_add(1, Ordering::Relaxed);
                    true
                }
                Err(TrySendError::Disconnected(_)) => false,
            });
        }
    }

    /// Numbers and queues a frame for one session under the outbox lock, so
    /// every connection sees increasing numbers.
    fn send_one(&self, tx: &Sender<String>, make: impl FnOnce(u64) -> Frame) {
        let _guard = self.outbox.lock().expect("outbox lock");
        let frame = make(self.seq.next());
        if tx.try_send(frame.encode()).is_err() {
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
    }

    fn register(&self, queue: usize) -> (Sender<String>, Receiver<String>) {
        let (tx, rx) = bounded(queue.max(1));
        let mut out = self.outbox.lock().expect("outbox lock");
        let hello = Frame::new(
            FrameKind::Hello,
            self.seq.next(),
            self.hello.lock().expect("hello lock").clone(),
        );
        tx.try_send(hello.encode()).expect("fresh queue has room");
        out.sessions.push(tx.clone());
        (tx, rx)
    }
}

/// WebSocket endpoint driving a [`World`] in its own tick thread.
pub struct Server {
    addr: SocketAddr,
    hub: Arc<Hub>,
    ticker: Option<JoinHandle<World>>,
    acceptor: Option<JoinHandle<()>>,
}

impl Server {
    pub fn start(world: World, cfg: ServerConfig) -> io::Result<Self> {
        let listener = TcpListener::bind(&cfg.listen)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let hub = Arc::new(Hub {
            outbox: Mutex::new(Outbox { sessions: Vec::new() }),
            seq: Sequencer::default(),
            hello: Mutex::new(hello_payload(&world)),
            dropped: AtomicU64::new(0),
            stop: AtomicBool::new(false),
        });
        let commands = world.sender();

        let acceptor = {
            let hub = hub.clone();
            let queue = cfg.queue;
            thread::spawn(move || {
                while !hub.stop.load(Ordering::Relaxed) {
                    match listener.accept() {
                        Ok((stream, peer)) => {
                            log::info!("operator connected from {peer}");
                            let hub = hub.clone();
                            let commands = commands.clone();
                            thread::spawn(move || {
                                if let Err(e) = session(stream, &hub, queue, &commands) {
                                    log::debug!("session {peer} ended: {e}");
                                }
                            });
                        }
                        Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
                        Err(e) => log::warn!("accept failed: {e}"),
                    }
                }
            })
        };

        let ticker = {
            let hub = hub.clone();
            thread::spawn(move || ticker(world, &hub, &cfg))
        };
        Ok(Self {
            addr,
            hub,
            ticker: Some(ticker),
            acceptor: Some(acceptor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}", self.addr)
    }

    /// Frames dropped because a session's queue was full.
    pub fn dropped_frames(&self) -> u64 {
        self.hub.dropped.load(Ordering::Relaxed)
    }

    /// Stops all threads and hands back the world.
    pub fn stop(mut self) -> World {
        self.hub.stop.store(true, Ordering::Relaxed);
        self.join()
    }

    /// Blocks until the tick budget runs out.
    pub fn wait(mut self) -> World {
        let world = self
            .ticker
            .take()
            .expect("ticker runs")
            .join()
            .expect("tick thread panicked");
        self.hub.stop.store(true, Ordering::Relaxed);
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
        world
    }

    fn join(&mut self) -> World {
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
        self.ticker
            .take()
            .expect("ticker runs")
            .join()
            .expect("tick thread panicked")
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.hub.stop.store(true, Ordering::Relaxed);
    }
}

fn ticker(mut world: World, hub: &Hub, cfg: &ServerConfig) -> World {
    let dt = world.config().sim.dt;
    let mut cursor = 0;
    let start = Instant::now();
    let mut n: u64 = 0;
    while !hub.stop.load(Ordering::Relaxed) && cfg.max_ticks.is_none_or(|m| n < m) {
        world.tick();
        n += 1;
        {
            let mut hello = hub.hello.lock().expect("hello lock");
            hello["tick"] = world.tick_count().into();
            hello["twin_revision"] = world.twin().revision().into();
        }
        {
            // Number and queue under one lock so numbers stay increasing.
            let mut out = hub.outbox.lock().expect("outbox lock");
            let frames = frames_after_tick(&world, &mut cursor, &hub.seq, cfg.with_raster);
            hub.broadcast(&mut out, frames);
        }
        if cfg.speed > 0.0 {
            let due = start + Duration::from_secs_f64(n as f64 * dt / cfg.speed);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
    }
    world
}

fn session(
    stream: TcpStream,
    hub: &Hub,
    queue: usize,
    commands: &Sender<OperatorCommand>,
) -> Result<(), TelemetryError> {
    stream.set_nonblocking(false)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
    ws.get_mut().set_read_timeout(Some(Duration::from_millis(2)))?;
    let (tx, rx) = hub.register(queue);
    let mut guard = InboundGuard::default();
    loop {
        if hub.stop.load(Ordering::Relaxed) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        match ws.read() {
            Ok(Message::Text(text)) => match accept_client_frame(text.as_str(), &mut guard) {
                Ok((_, cmd)) => {
                    if commands.send(cmd).is_err() {
                        return Ok(());
                    }
                }
                Err(e) => {
                    let in_reply_to = Frame::decode(text.as_str()).ok().map(|f| f.seq);
                    hub.send_one(&tx, |seq| Frame::error(seq, &e, in_reply_to));
                }
            },
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e.into()),
        }
        let mut wrote = false;
        while let Ok(text) = rx.try_recv() {
            ws.write(Message::text(text))?;
            wrote = true;
        }
        if wrote {
            ws.flush()?;
        }
    }
}

/// Minimal blocking client, for tests, examples and scripted operators.
pub struct Client {
    ws: WebSocket<MaybeTlsStream<TcpStream>>,
    seq: u64,
}

impl Client {
    pub fn connect(url: &str) -> Result<Self, TelemetryError> {
        let (ws, _) = tungstenite::connect(url)?;
        Ok(Self { ws, seq: 0 })
    }

    /// Sends a command with the next sequence number; returns that number.
    pub fn send(&mut self, cmd: &OperatorCommand) -> Result<u64, TelemetryError> {
        self.seq += 1;
        let frame = if *cmd == OperatorCommand::Heartbeat {
            Frame::new(FrameKind::Heartbeat, self.seq, Value::Null)
        } else {
            Frame::command(self.seq, cmd)
        };
        self.send_raw(&frame.encode())?;
        Ok(self.seq)
    }

    pub fn send_raw(&mut self, text: &str) -> Result<(), TelemetryError> {
        self.ws.send(Message::text(text))?;
        Ok(())
    }

    pub fn recv(&mut self, timeout: Duration) -> Result<Frame, TelemetryError> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(TelemetryError::Timeout);
            }
            if let MaybeTlsStream::Plain(s) = self.ws.get_mut() {
                s.set_read_timeout(Some(left))?;
            }
            match self.ws.read() {
                Ok(Message::Text(t)) => return Ok(Frame::decode(t.as_str())?),
                Ok(_) => {}
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) =>
                {
                    return Err(TelemetryError::Timeout)
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Reads frames until one matches.
    pub fn recv_until(
        &mut self,
        timeout: Duration,
        mut pred: impl FnMut(&Frame) -> bool,
    ) -> Result<Frame, TelemetryError> {
        let deadline = Instant::now() + timeout;
        loop {
            let f = self.recv(deadline.saturating_duration_since(Instant::now()))?;
            if pred(&f) {
                return Ok(f);
            }
        }
    }

    pub fn close(mut self) {
        let _ = self.ws.close(None);
        let _ = self.ws.flush();
    }
}
