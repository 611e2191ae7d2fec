use std::io::{BufRead, BufReader};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};
use yolo_core::classifier::shapes::{generate_shape, scaled};
use yolo_core::classifier::{NoiseProfile, ShapeClass, STROKE_SAMPLES};

type Socket = WebSocket<MaybeTlsStream<TcpStream>>;

struct Server {
    child: Child,
    port: u16,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start(extra: &[&str]) -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_yolo"))
        .args(["serve", "--port", "0", "--once"])
        .args(extra)
        .env_remove("YOLO_CONFIG")
        .stdout(Stdio::piped())
        .spawn()
        .expect("spawn server");
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let port = line.trim().rsplit(':').next().unwrap().parse().expect("port in banner");
    Server { child, port }
}

fn connect(server: &Server) -> Socket {
    let (ws, _) = tungstenite::connect(format!("ws://127.0.0.1:{}", server.port)).expect("connect");
    ws
}

fn send(ws: &mut Socket, v: Value) {
    ws.send(Message::text(v.to_string())).unwrap();
}

fn recv(ws: &mut Socket) -> Option<Value> {
    loop {
        match ws.read() {
            Ok(Message::Text(t)) => return Some(serde_json::from_str(&t).unwrap()),
            Ok(Message::Close(_)) => return None,
            Ok(_) => {}
            Err(_) => return None,
        }
    }
}

fn hello(ws: &mut Socket) -> Value {
    send(ws, json!({"kind": "hello", "seq": 1, "t": 0.0, "version": 1}));
    let reply = recv(ws).expect("server hello");
    assert_eq!(reply["kind"], "hello");
    reply
}

/// Read until `pred` matches, checking that server seq numbers are gapless.
fn wait_for(ws: &mut Socket, limit: Duration, last_seq: &mut i64, mut pred: impl FnMut(&Value) -> bool) -> Value {
    let deadline = Instant::now() + limit;
    while Instant::now() < deadline {
        let m = recv(ws).expect("connection open");
        let seq = m["seq"].as_i64().unwrap();
        assert_eq!(seq, *last_seq + 1, "gap before {m}");
        *last_seq = seq;
        if pred(&m) {
            return m;
        }
    }
    panic!("timed out");
}

#[test]
fn circle_drag_is_mirrored() {
    let server = start(&["--profile", "aloof", "--time-scale", "20"]);
    let mut ws = connect(&server);
    let mut last_seq = hello(&mut ws)["seq"].as_i64().unwrap();
    let state = wait_for(&mut ws, Duration::from_secs(10), &mut last_seq, |m| m["kind"] == "state");
    let t0 = state["t"].as_f64().unwrap() + 2.0;

    let stroke = scaled(&generate_shape(ShapeClass::Circle, &NoiseProfile::clean(3), STROKE_SAMPLES), 0.3);
    let pts = stroke.points();
    let mut seq = 2;
    send(&mut ws, json!({"kind": "touch", "seq": seq, "t": t0, "on": true}));
    for (i, w) in pts.windows(2).enumerate() {
        seq += 1;
        let t = t0 + 0.1 + i as f64 * 0.05;
        send(&mut ws, json!({"kind": "drag", "seq": seq, "t": t, "dx": w[1].x - w[0].x, "dy": w[1].y - w[0].y}));
    }
    seq += 1;
    send(&mut ws, json!({"kind": "touch", "seq": seq, "t": t0 + 3.4, "on": false}));

    let mut touched_white = false;
    let ev = wait_for(&mut ws, Duration::from_secs(20), &mut last_seq, |m| {
        if m["kind"] == "state" && m["touched"] == true {
            touched_white = json!([m["r"], m["g"], m["b"]]) == json!([255, 255, 255]);
            assert!(touched_white, "touched but not white: {m}");
        }
        m["kind"] == "event" && m["event"] == "execute_start"
    });
    assert!(touched_white);
    assert_eq!(ev["technique"], "mirror");
    assert_eq!(ev["shape"], "circle");
    assert_eq!(ev["phase"], "rising");
}

#[test]
fn config_switches_palette() {
    let server = start(&["--profile", "exuberant", "--time-scale", "20"]);
    let mut ws = connect(&server);
    let mut last_seq = hello(&mut ws)["seq"].as_i64().unwrap();
    let state = wait_for(&mut ws, Duration::from_secs(10), &mut last_seq, |m| m["kind"] == "state");
    assert_eq!(state["profile"], "exuberant");
    let t = state["t"].as_f64().unwrap();
    send(&mut ws, json!({"kind": "config", "seq": 2, "t": t, "key": "profile", "value": "aloof"}));
    wait_for(&mut ws, Duration::from_secs(10), &mut last_seq, |m| m["kind"] == "event" && m["event"] == "config_applied");
    let aloof = [json!([0, 128, 0]), json!([0, 0, 255])];
    for _ in 0..40 {
        let m = wait_for(&mut ws, Duration::from_secs(10), &mut last_seq, |m| m["kind"] == "state");
        assert_eq!(m["profile"], "aloof");
        if m["state"] != "executing" {
            let rgb = json!([m["r"], m["g"], m["b"]]);
            assert!(aloof.contains(&rgb), "{m}");
        }
    }
}

#[test]
fn malformed_kind_closes_with_reason() {
    let server = start(&["--time-scale", "20"]);
    let mut ws = connect(&server);
    hello(&mut ws);
    send(&mut ws, json!({"kind": "dance", "seq": 2, "t": 0.0}));
    let mut error = None;
    let mut close_reason = None;
    loop {
        match ws.read() {
            Ok(Message::Text(t)) => {
                let v: Value = serde_json::from_str(&t).unwrap();
                if v["kind"] == "error" {
                    error = Some(v);
                }
            }
            Ok(Message::Close(frame)) => {
                close_reason = frame.map(|f| f.reason.to_string());
            }
            Ok(_) => {}
            Err(_) => break,
        }
    }
    let error = error.expect("error payload");
    assert!(error["message"].as_str().unwrap().contains("dance"), "{error}");
    assert!(close_reason.expect("close frame").contains("dance"));
}

#[test]
fn out_of_order_seq_closes() {
    let server = start(&["--time-scale", "20"]);
    let mut ws = connect(&server);
    hello(&mut ws);
    send(&mut ws, json!({"kind": "touch", "seq": 5, "t": 0.0, "on": true}));
    send(&mut ws, json!({"kind": "touch", "seq": 4, "t": 0.0, "on": false}));
    let mut saw_error = false;
    while let Some(m) = recv(&mut ws) {
        saw_error |= m["kind"] == "error";
    }
    assert!(saw_error);
}

#[test]
fn port_in_use_exits_2() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = Command::new(env!("CARGO_BIN_EXE_yolo")).args(["serve", "--port", &port]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("in use"));
}
