//! Websocket policy server for interactive steering.
//!
//! One simulation thread owns the walker and steps it at 50 Hz times a pace
//! multiplier, but only while at least one client is connected and nobody
//! has paused it. Each step is serialized once and the same text frame is
//! queued to every client. Connection threads only parse commands and
//! forward them to the simulation thread.
//!
//! Client → server: `{"type":"set_task","name":"forward"}`, `{"type":"pause"}`,
//! `{"type":"resume"}`, `{"type":"reset"}`.
//!
//! Server → client: `{"type":"state","t":…,"x":…,"y":…,"yaw":…,"roll":…,
//! "pitch":…,"f_s":…,"reward":…,"task":"forward","fall_count":0,
//! "workspace":{"w":5.0,"h":2.0}}` after every step (`t` in simulated
//! seconds), and `{"type":"error","message":…}` for rejected input.

use std::collections::VecDeque;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use super::{Checkpoint, HarnessError};
use crate::env::{ResetMode, Terrain, TraceRecord, Walker, DT};
use crate::tasks::{ComposeOptions, Controller};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    SetTask { name: String },
    Pause,
    Resume,
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceDims {
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub roll: f64,
    pub pitch: f64,
    pub f_s: f64,
    pub reward: f64,
    pub task: String,
    pub fall_count: u64,
    pub workspace: WorkspaceDims,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(StateFrame),
    Error { message: String },
}

impl ServerMessage {
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("server message serializes")
    }
}

#[derive(Debug, Clone)]
pub struct TeleopOptions {
    pub bind: String,
    /// 0 picks a free port.
    pub port: u16,
    /// Wall-clock speed-up; 1.0 steps at 50 Hz.
    pub pace: f64,
    pub seed: u64,
    /// Steps kept in the server-side trajectory log.
    pub log_capacity: usize,
}

impl Default for TeleopOptions {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8765,
            pace: 1.0,
            seed: 0,
            log_capacity: 60_000,
        }
    }
}

/// A step as the server saw it: the trace record plus the active task.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedStep {
    pub task: String,
    pub record: TraceRecord,
}

type ClientId = u64;

enum Command {
    Connected(ClientId, Sender<Arc<str>>),
    Disconnected(ClientId),
    Message(ClientId, ClientMessage),
}

struct Shared {
    shutdown: AtomicBool,
    steps: AtomicU64,
    log: Mutex<VecDeque<LoggedStep>>,
}

/// Handle to a running server; dropping it stops all threads.
pub struct TeleopServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl TeleopServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Steps simulated so far.
    pub fn steps(&self) -> u64 {
        self.shared.steps.load(Ordering::SeqCst)
    }

    pub fn trajectory(&self) -> Vec<LoggedStep> {
        self.shared.log.lock().unwrap().iter().cloned().collect()
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    /// Blocks until the server stops (it only stops on shutdown).
    pub fn join(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    fn stop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for TeleopServer {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds the port and starts the simulation and accept threads.
pub fn serve_teleop(
    ckpt: &Checkpoint,
    options: TeleopOptions,
) -> Result<TeleopServer, HarnessError> {
    if !(options.pace.is_finite() && options.pace > 0.0) {
        return Err(HarnessError::Config(format!(
            "pace must be positive, got {}",
            options.pace
        )));
    }
    let controller = ckpt.controller()?;
    let listener = TcpListener::bind((options.bind.as_str(), options.port)).map_err(|e| {
        HarnessError::Io(format!(
            "cannot listen on {}:{}: {e}",
            options.bind, options.port
        ))
    })?;
    listener
        .set_nonblocking(true)
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    let addr = listener
        .local_addr()
        .map_err(|e| HarnessError::Io(e.to_string()))?;

    let shared = Arc::new(Shared {
        shutdown: AtomicBool::new(false),
        steps: AtomicU64::new(0),
        log: Mutex::new(VecDeque::new()),
    });
    let (tx, rx) = mpsc::channel();
    let mut walker = Walker::new(
        Terrain::of(ckpt.config.terrain),
        ckpt.config.workspace,
        ckpt.config.dynamics,
        options.seed,
    );
    walker.reset(ResetMode::AfterFall);

    let sim = SimLoop {
        controller,
        walker,
        shared: Arc::clone(&shared),
        period: Duration::from_secs_f64(DT / options.pace),
        log_capacity: options.log_capacity,
    };
    let sim_thread = std::thread::Builder::new()
        .name("teleop-sim".into())
        .spawn(move || sim.run(rx))
        .map_err(|e| HarnessError::Io(e.to_string()))?;

    let accept_shared = Arc::clone(&shared);
    let accept_thread = std::thread::Builder::new()
        .name("teleop-accept".into())
        .spawn(move || accept_loop(listener, tx, accept_shared))
        .map_err(|e| HarnessError::Io(e.to_string()))?;

    log::info!("teleop server listening on ws://{addr}");
    Ok(TeleopServer {
        addr,
        shared,
        threads: vec![sim_thread, accept_thread],
    })
}

fn accept_loop(listener: TcpListener, commands: Sender<Command>, shared: Arc<Shared>) {
    let mut next_id: ClientId = 0;
    let mut handlers = Vec::new();
    while !shared.shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = next_id;
                next_id += 1;
                let commands = commands.clone();
                let shared = Arc::clone(&shared);
                handlers.push(std::thread::spawn(move || {
                    if let Err(e) = handle_client(stream, id, commands, shared) {
                        log::debug!("client {peer}: {e}");
                    }
                }));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => log::warn!("accept failed: {e}"),
        }
        handlers.retain(|h: &JoinHandle<()>| !h.is_finished());
    }
    for h in handlers {
        let _ = h.join();
    }
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io)
        if matches!(io.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut))
}

fn handle_client(
    stream: TcpStream,
    id: ClientId,
    commands: Sender<Command>,
    shared: Arc<Shared>,
) -> Result<(), String> {
    stream.set_nonblocking(false).map_err(|e| e.to_string())?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream).map_err(|e| e.to_string())?;
    ws.get_mut()
        .set_read_timeout(Some(Duration::from_millis(2)))
        .map_err(|e| e.to_string())?;
    let (out_tx, out_rx) = mpsc::channel::<Arc<str>>();
    commands
        .send(Command::Connected(id, out_tx.clone()))
        .map_err(|e| e.to_string())?;
    let result = client_loop(&mut ws, id, &commands, &out_tx, &out_rx, &shared);
    let _ = commands.send(Command::Disconnected(id));
    let _ = ws.close(None);
    let _ = ws.flush();
    result
}

fn client_loop(
    ws: &mut WebSocket<TcpStream>,
    id: ClientId,
    commands: &Sender<Command>,
    out_tx: &Sender<Arc<str>>,
    out_rx: &Receiver<Arc<str>>,
    shared: &Shared,
) -> Result<(), String> {
    loop {
        if shared.shutdown.load(Ordering::SeqCst) {
            return Ok(());
        }
        match ws.read() {
            Ok(Message::Text(text)) => match serde_json::from_str::<ClientMessage>(text.as_str()) {
                Ok(msg) => commands
                    .send(Command::Message(id, msg))
                    .map_err(|e| e.to_string())?,
                Err(e) => {
                    let reply = ServerMessage::Error {
                        message: format!("malformed message: {e}"),
                    };
                    let _ = out_tx.send(Arc::from(reply.to_text()));
                }
            },
            Ok(Message::Binary(_)) => {
                let reply = ServerMessage::Error {
                    message: "binary frames are not supported".into(),
                };
                let _ = out_tx.send(Arc::from(reply.to_text()));
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                return Ok(())
            }
            Err(e) => return Err(e.to_string()),
        }
        loop {
            match out_rx.try_recv() {
                Ok(frame) => ws
                    .send(Message::text(frame.as_ref()))
                    .map_err(|e| e.to_string())?,
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Ok(()),
            }
        }
    }
}

struct SimLoop {
    controller: Controller,
    walker: Walker,
    shared: Arc<Shared>,
    period: Duration,
    log_capacity: usize,
}

impl SimLoop {
    fn run(mut self, commands: Receiver<Command>) {
        let mut clients: Vec<(ClientId, Sender<Arc<str>>)> = Vec::new();
        let mut paused = false;
        let mut cursor = ComposeOptions::start(&self.walker, 0);
        let dims = WorkspaceDims {
            w: self.walker.workspace.width(),
            h: self.walker.workspace.height(),
        };
        let mut next_tick = Instant::now();
        while !self.shared.shutdown.load(Ordering::SeqCst) {
            loop {
                match commands.try_recv() {
                    Ok(Command::Connected(id, tx)) => clients.push((id, tx)),
                    Ok(Command::Disconnected(id)) => clients.retain(|(c, _)| *c != id),
                    Ok(Command::Message(id, msg)) => {
                        if let Err(message) = self.apply(msg, &mut cursor, &mut paused) {
                            let reply: Arc<str> =
                                Arc::from(ServerMessage::Error { message }.to_text());
                            if let Some((_, tx)) = clients.iter().find(|(c, _)| *c == id) {
                                let _ = tx.send(reply);
                            }
                        }
                    }
                    Err(TryRecvError::Empty) | Err(TryRecvError::Disconnected) => break,
                }
            }
            if clients.is_empty() || paused {
                std::thread::sleep(Duration::from_millis(5));
                next_tick = Instant::now();
                continue;
            }
            let record = match self.controller.step(&mut self.walker, &mut cursor) {
                Ok(r) => r,
                Err(e) => {
                    log::error!("simulation step failed: {e}");
                    self.walker.reset(ResetMode::AfterFall);
                    continue;
                }
            };
            let steps = self.shared.steps.fetch_add(1, Ordering::SeqCst) + 1;
            let task = self.controller.tasks.tasks[cursor.task].name.clone();
            let frame = ServerMessage::State(StateFrame {
                t: steps as f64 * DT,
                x: record.x,
                y: record.y,
                yaw: record.yaw,
                roll: record.roll,
                pitch: record.pitch,
                f_s: record.f_s,
                reward: record.reward,
                task: task.clone(),
                fall_count: cursor.falls,
                workspace: dims,
            });
            {
                let mut log = self.shared.log.lock().unwrap();
                if log.len() == self.log_capacity {
                    log.pop_front();
                }
                if self.log_capacity > 0 {
                    log.push_back(LoggedStep { task, record });
                }
            }
            let text: Arc<str> = Arc::from(frame.to_text());
            clients.retain(|(_, tx)| tx.send(Arc::clone(&text)).is_ok());

            next_tick += self.period;
            let now = Instant::now();
            if next_tick > now {
                std::thread::sleep(next_tick - now);
            } else {
                next_tick = now;
            }
        }
    }

    fn apply(
        &mut self,
        msg: ClientMessage,
        cursor: &mut ComposeOptions,
        paused: &mut bool,
    ) -> Result<(), String> {
        match msg {
            ClientMessage::SetTask { name } => self
                .controller
                .switch(&self.walker, cursor, &name)
                .map_err(|e| e.to_string()),
            ClientMessage::Pause => {
                *paused = true;
                Ok(())
            }
            ClientMessage::Resume => {
                *paused = false;
                Ok(())
            }
            ClientMessage::Reset => {
                self.walker.reset(ResetMode::AfterFall);
                let task = cursor.task;
                let (t, falls) = (cursor.t, cursor.falls);
                *cursor = ComposeOptions::start(&self.walker, task);
                cursor.t = t;
                cursor.falls = falls;
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_messages_parse() {
        let m: ClientMessage =
            serde_json::from_str(r#"{"type":"set_task","name":"forward"}"#).unwrap();
        assert_eq!(
            m,
            ClientMessage::SetTask {
                name: "forward".into()
            }
        );
        let m: ClientMessage = serde_json::from_str(r#"{"type":"pause"}"#).unwrap();
        assert_eq!(m, ClientMessage::Pause);
        assert!(serde_json::from_str::<ClientMessage>(r#"{"type":"jump"}"#).is_err());
        assert!(serde_json::from_str::<ClientMessage>(r#"{"type":"set_task"}"#).is_err());
    }

    #[test]
    fn state_frame_shape() {
        let frame = ServerMessage::State(StateFrame {
            t: 0.02,
            x: 0.0,
            y: 0.0,
            yaw: 0.0,
            roll: 0.0,
            pitch: 0.0,
            f_s: 0.25,
            reward: 0.0,
            task: "forward".into(),
            fall_count: 0,
            workspace: WorkspaceDims { w: 5.0, h: 2.0 },
        });
        let v: serde_json::Value = serde_json::from_str(&frame.to_text()).unwrap();
        assert_eq!(v["type"], "state");
        assert_eq!(v["workspace"]["w"], 5.0);
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        for k in [
            "t",
            "x",
            "y",
            "yaw",
            "roll",
            "pitch",
            "f_s",
            "reward",
            "task",
            "fall_count",
            "workspace",
        ] {
            assert!(keys.contains(&k), "missing {k}");
        }
        let err = ServerMessage::Error {
            message: "bad".into(),
        }
        .to_text();
        assert_eq!(err, r#"{"type":"error","message":"bad"}"#);
    }
}
