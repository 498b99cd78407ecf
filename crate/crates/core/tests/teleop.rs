//! Teleop server against real websocket clients on loopback.

use std::net::{TcpListener, TcpStream};
use std::time::{Duration, Instant};

use serde_json::Value;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use autowalk::env::{wrap_angle, ResetMode, Terrain, Walker};
use autowalk::harness::teleop::{ServerMessage, StateFrame};
use autowalk::harness::{serve_teleop, Checkpoint, TeleopOptions, TeleopServer};
use autowalk::sac::SacConfig;
use autowalk::tasks::{compose_controller, training_session, SessionConfig};

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn checkpoint() -> Checkpoint {
    let config = SessionConfig {
        steps_per_task: 0,
        seed: 3,
        sac: SacConfig {
            hidden: vec![16, 16],
            ..SacConfig::default()
        },
        ..SessionConfig::default()
    };
    Checkpoint::from_session(&training_session(config).unwrap())
}

fn server(ckpt: &Checkpoint, pace: f64) -> TeleopServer {
    serve_teleop(
        ckpt,
        TeleopOptions {
            port: 0,
            pace,
            seed: 17,
            ..TeleopOptions::default()
        },
    )
    .unwrap()
}

fn connect(server: &TeleopServer) -> Client {
    let (ws, _) = tungstenite::connect(format!("ws://{}", server.local_addr())).unwrap();
    if let MaybeTlsStream::Plain(s) = ws.get_ref() {
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    }
    ws
}

fn next_text(ws: &mut Client) -> String {
    loop {
        match ws.read().expect("server keeps talking") {
            Message::Text(t) => return t.as_str().to_owned(),
            Message::Close(_) => panic!("server closed the connection"),
            _ => {}
        }
    }
}

fn next_state(ws: &mut Client) -> StateFrame {
    match serde_json::from_str(&next_text(ws)).unwrap() {
        ServerMessage::State(f) => f,
        ServerMessage::Error { message } => panic!("unexpected error frame: {message}"),
    }
}

fn next_error(ws: &mut Client) -> String {
    loop {
        if let ServerMessage::Error { message } = serde_json::from_str(&next_text(ws)).unwrap() {
            return message;
        }
    }
}

fn send(ws: &mut Client, text: &str) {
    ws.send(Message::text(text)).unwrap();
}

fn wait_until(what: &str, mut cond: impl FnMut() -> bool) {
    let deadline = Instant::now() + Duration::from_secs(10);
    while !cond() {
        assert!(Instant::now() < deadline, "timed out waiting for {what}");
        std::thread::sleep(Duration::from_millis(5));
    }
}

#[test]
fn state_frames_follow_the_wire_format() {
    let ckpt = checkpoint();
    let srv = server(&ckpt, 10.0);
    let mut ws = connect(&srv);
    let first: Value = serde_json::from_str(&next_text(&mut ws)).unwrap();
    let mut keys: Vec<&str> = first
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        [
            "f_s",
            "fall_count",
            "pitch",
            "reward",
            "roll",
            "t",
            "task",
            "type",
            "workspace",
            "x",
            "y",
            "yaw"
        ]
    );
    assert_eq!(first["type"], "state");
    assert_eq!(first["workspace"]["w"], 5.0);
    assert_eq!(first["workspace"]["h"], 2.0);
    let a = next_state(&mut ws);
    let b = next_state(&mut ws);
    assert!((b.t - a.t - 0.02).abs() < 1e-12, "{} then {}", a.t, b.t);
}

#[test]
fn idles_without_clients_or_when_paused() {
    let ckpt = checkpoint();
    let srv = server(&ckpt, 20.0);
    std::thread::sleep(Duration::from_millis(150));
    assert_eq!(srv.steps(), 0, "stepped with nobody connected");

    let mut ws = connect(&srv);
    next_state(&mut ws);
    wait_until("steps while connected", || srv.steps() > 5);

    send(&mut ws, r#"{"type":"pause"}"#);
    std::thread::sleep(Duration::from_millis(100));
    let frozen = srv.steps();
    std::thread::sleep(Duration::from_millis(150));
    assert_eq!(srv.steps(), frozen, "stepped while paused");

    send(&mut ws, r#"{"type":"resume"}"#);
    wait_until("steps after resume", || srv.steps() > frozen + 5);

    ws.close(None).unwrap();
    while ws.read().is_ok() {}
    std::thread::sleep(Duration::from_millis(100));
    let idle = srv.steps();
    std::thread::sleep(Duration::from_millis(150));
    assert_eq!(srv.steps(), idle, "stepped after the last client left");
}

#[test]
fn set_task_routes_through_the_composed_controller() {
    let ckpt = checkpoint();
    let srv = server(&ckpt, 20.0);
    let mut ws = connect(&srv);
    for _ in 0..10 {
        assert_eq!(next_state(&mut ws).task, "forward");
    }
    send(&mut ws, r#"{"type":"set_task","name":"backward"}"#);
    let mut frame = next_state(&mut ws);
    while frame.task != "backward" {
        frame = next_state(&mut ws);
    }
    for _ in 0..30 {
        assert_eq!(next_state(&mut ws).task, "backward");
    }
    drop(ws);
    wait_until("the log to settle", || {
        let n = srv.steps();
        std::thread::sleep(Duration::from_millis(50));
        srv.steps() == n
    });
    let log = srv.trajectory();
    srv.shutdown();

    // Replaying the logged command stream offline reproduces every step.
    let mut walker = Walker::new(
        Terrain::of(ckpt.config.terrain),
        ckpt.config.workspace,
        ckpt.config.dynamics,
        17,
    );
    walker.reset(ResetMode::AfterFall);
    let commands: Vec<&str> = log.iter().map(|s| s.task.as_str()).collect();
    assert!(commands.contains(&"forward") && commands.contains(&"backward"));
    let replay = compose_controller(&ckpt.controller().unwrap(), &mut walker, commands).unwrap();
    let served: Vec<_> = log.iter().map(|s| s.record.clone()).collect();
    assert_eq!(served, replay);
}

#[test]
fn two_clients_receive_identical_frames() {
    let ckpt = checkpoint();
    let srv = server(&ckpt, 10.0);
    let mut a = connect(&srv);
    next_text(&mut a);
    let mut b = connect(&srv);
    let from_b: Vec<String> = (0..40).map(|_| next_text(&mut b)).collect();
    let mut from_a: Vec<String> = (0..400).map(|_| next_text(&mut a)).collect();
    let start = from_a
        .iter()
        .position(|f| *f == from_b[0])
        .expect("the second client's first frame reached the first client too");
    from_a.drain(..start);
    from_a.truncate(from_b.len());
    assert_eq!(from_a, from_b);
}

#[test]
fn bad_input_gets_an_error_frame_and_is_ignored() {
    let ckpt = checkpoint();
    let srv = server(&ckpt, 10.0);
    let mut ws = connect(&srv);
    next_state(&mut ws);

    send(&mut ws, "not json");
    assert!(next_error(&mut ws).contains("malformed"));
    send(&mut ws, r#"{"type":"jump"}"#);
    assert!(next_error(&mut ws).contains("malformed"));
    send(&mut ws, r#"{"type":"set_task","name":"moonwalk"}"#);
    assert!(next_error(&mut ws).contains("moonwalk"));
    ws.send(Message::binary(vec![1u8, 2, 3])).unwrap();
    assert!(next_error(&mut ws).contains("binary"));

    // Still stepping, still on the original task.
    let before = srv.steps();
    let f = next_state(&mut ws);
    assert_eq!(f.task, "forward");
    wait_until("more steps", || srv.steps() > before + 3);
}

#[test]
fn reset_reorients_the_walker_at_the_center() {
    let ckpt = checkpoint();
    let srv = server(&ckpt, 20.0);
    let mut ws = connect(&srv);
    let before: Vec<StateFrame> = (0..20).map(|_| next_state(&mut ws)).collect();
    let turn = |a: &StateFrame, b: &StateFrame| wrap_angle(b.yaw - a.yaw).abs();
    assert!(before.windows(2).all(|w| turn(&w[0], &w[1]) < 0.05));
    send(&mut ws, r#"{"type":"reset"}"#);
    // A reset draws a fresh heading, which shows up as one large yaw jump.
    let after: Vec<StateFrame> = (0..100).map(|_| next_state(&mut ws)).collect();
    let mut all = before;
    all.extend(after);
    let jumps = all.windows(2).filter(|w| turn(&w[0], &w[1]) > 0.05).count();
    assert_eq!(jumps, 1);
    assert!(all
        .iter()
        .all(|f| f.x.abs() < 0.3 && f.y.abs() < 0.3 && f.fall_count == 0));
}

#[test]
fn port_in_use_is_an_error() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    let err = serve_teleop(
        &checkpoint(),
        TeleopOptions {
            port,
            ..TeleopOptions::default()
        },
    )
    .err()
    .expect("bind must fail");
    assert!(err.to_string().contains(&port.to_string()), "{err}");
}
