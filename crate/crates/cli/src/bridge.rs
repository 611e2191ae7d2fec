//! Live session bridge: one WebSocket client drives a simulated robot.
//!
//! The connection thread pumps the socket; a simulation thread runs the
//! session at real-time pace (scaled by `time_scale`). They share only the
//! input mailbox (a channel drained at each tick start) and the output
//! buffer, which holds at most [`OUTPUT_CAPACITY`] messages and drops the
//! oldest when the client falls behind.

use std::collections::VecDeque;
use std::io;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use tungstenite::protocol::frame::coding::CloseCode;
use tungstenite::protocol::CloseFrame;
use tungstenite::{Message, WebSocket};
use yolo_core::behavior::ProfileTable;
use yolo_core::planner::ArcSchedule;
use yolo_core::sim::{Input, Session, SimConfig, SimError};

use crate::protocol::{ClientMessage, ServerMessage, PROTOCOL_VERSION};

pub const OUTPUT_CAPACITY: usize = 1000;

const POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Clone)]
pub struct BridgeOptions {
    pub sim: SimConfig,
    pub profiles: ProfileTable,
    pub profile: String,
    pub schedule: ArcSchedule,
    /// Simulated seconds per wall-clock second.
    pub time_scale: f64,
}

/// Outbound messages awaiting the socket. Sequence numbers are assigned on
/// entry, so they stay gapless even when old messages are dropped.
#[derive(Debug, Default)]
pub struct OutputBuffer {
    queue: VecDeque<ServerMessage>,
    next_seq: u64,
    dropped: u64,
}

impl OutputBuffer {
    pub fn push(&mut self, make: impl FnOnce(u64, u64) -> ServerMessage) {
        let msg = make(self.next_seq, self.dropped);
        self.next_seq += 1;
        if self.queue.len() == OUTPUT_CAPACITY {
            self.queue.pop_front();
            self.dropped += 1;
        }
        self.queue.push_back(msg);
    }

    pub fn drain(&mut self) -> Vec<ServerMessage> {
        self.queue.drain(..).collect()
    }
}

/// Serve clients one at a time until `max_clients` have disconnected
/// (forever if `None`).
pub fn serve(listener: TcpListener, opts: &BridgeOptions, max_clients: Option<usize>) -> io::Result<()> {
    for (served, stream) in listener.incoming().enumerate() {
        if let Err(e) = handle_client(stream?, opts) {
            eprintln!("client session ended with error: {e}");
        }
        if max_clients.is_some_and(|m| served + 1 >= m) {
            break;
        }
    }
    Ok(())
}

#[derive(Debug)]
struct Violation(String);

fn parse_client(text: &str, last_seq: Option<u64>) -> Result<ClientMessage, Violation> {
    let msg: ClientMessage = serde_json::from_str(text).map_err(|e| Violation(format!("bad message: {e}")))?;
    if last_seq.is_some_and(|s| msg.seq() <= s) {
        return Err(Violation(format!("seq {} not greater than {}", msg.seq(), last_seq.unwrap_or(0))));
    }
    if !(msg.t().is_finite() && msg.t() >= 0.0) {
        return Err(Violation(format!("bad time {}", msg.t())));
    }
    if let ClientMessage::Drag { dx, dy, .. } = msg {
        if !(dx.is_finite() && dy.is_finite()) {
            return Err(Violation("non-finite drag".into()));
        }
    }
    Ok(msg)
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut))
}

fn handle_client(stream: TcpStream, opts: &BridgeOptions) -> Result<(), String> {
    let mut ws = tungstenite::accept(stream).map_err(|e| format!("handshake: {e}"))?;
    ws.get_ref().set_read_timeout(Some(POLL)).map_err(|e| e.to_string())?;
    let out = Arc::new(Mutex::new(OutputBuffer::default()));

    // the session starts with the client's hello
    let last_seq = loop {
        match ws.read() {
            Ok(Message::Text(text)) => match parse_client(&text, None) {
                Ok(ClientMessage::Hello { seq, version, .. }) if version == PROTOCOL_VERSION => break seq,
                Ok(ClientMessage::Hello { version, .. }) => {
                    return close_with(&mut ws, &out, 0.0, format!("unsupported version {version}"));
                }
                Ok(_) => return close_with(&mut ws, &out, 0.0, "expected hello first".into()),
                Err(Violation(msg)) => return close_with(&mut ws, &out, 0.0, msg),
            },
            Ok(Message::Close(_)) => return finish_close(&mut ws),
            Ok(Message::Binary(_)) => return close_with(&mut ws, &out, 0.0, "binary frames are not supported".into()),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(e) => return Err(e.to_string()),
        }
    };

    let session = Session::new(opts.sim, opts.profiles.clone(), &opts.profile, opts.schedule).map_err(|e| e.to_string())?;
    out.lock().expect("output lock").push(|seq, _| ServerMessage::Hello {
        seq,
        t: 0.0,
        version: PROTOCOL_VERSION,
        tick: opts.sim.tick,
        arena_width: opts.sim.arena_width,
        arena_height: opts.sim.arena_height,
        profile: opts.profile.clone(),
    });

    let (tx, rx) = mpsc::channel();
    let stop = Arc::new(AtomicBool::new(false));
    let clock = Arc::new(Mutex::new(0.0f64));
    let sim = {
        let (out, stop, clock) = (Arc::clone(&out), Arc::clone(&stop), Arc::clone(&clock));
        let time_scale = opts.time_scale;
        thread::spawn(move || run_sim(session, rx, out, stop, clock, time_scale))
    };

    let result = pump(&mut ws, &out, &tx, last_seq, &clock);
    stop.store(true, Ordering::SeqCst);
    let sim_result = sim.join().map_err(|_| "simulation thread panicked".to_string())?;
    result.and(sim_result.map_err(|e| e.to_string()))
}

fn pump(
    ws: &mut WebSocket<TcpStream>,
    out: &Mutex<OutputBuffer>,
    mailbox: &Sender<(f64, Input)>,
    mut last_seq: u64,
    clock: &Mutex<f64>,
) -> Result<(), String> {
    loop {
        match ws.read() {
            Ok(Message::Text(text)) => match parse_client(&text, Some(last_seq)) {
                Ok(msg) => {
                    last_seq = msg.seq();
                    let input = match msg {
                        ClientMessage::Hello { .. } => {
                            let t = *clock.lock().expect("clock lock");
                            return close_with(ws, out, t, "duplicate hello".into());
                        }
                        ClientMessage::Drag { t, dx, dy, .. } => (t, Input::DragDelta(dx, dy)),
                        ClientMessage::Touch { t, on, .. } => (t, Input::Touch(on)),
                        ClientMessage::Config { t, key, value, .. } => (t, Input::Config { key, value }),
                    };
                    if mailbox.send(input).is_err() {
                        return Err("simulation stopped".into());
                    }
                }
                Err(Violation(msg)) => {
                    let t = *clock.lock().expect("clock lock");
                    return close_with(ws, out, t, msg);
                }
            },
            Ok(Message::Binary(_)) => {
                let t = *clock.lock().expect("clock lock");
                return close_with(ws, out, t, "binary frames are not supported".into());
            }
            Ok(Message::Close(_)) => return finish_close(ws),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e.to_string()),
        }
        flush_output(ws, out)?;
    }
}

fn flush_output(ws: &mut WebSocket<TcpStream>, out: &Mutex<OutputBuffer>) -> Result<(), String> {
    let pending = out.lock().expect("output lock").drain();
    for msg in pending {
        let text = serde_json::to_string(&msg).map_err(|e| e.to_string())?;
        ws.send(Message::text(text)).map_err(|e| e.to_string())?;
    }
    Ok(())
}

/// Send an error message and a close frame carrying the same diagnostic.
fn close_with(ws: &mut WebSocket<TcpStream>, out: &Mutex<OutputBuffer>, t: f64, message: String) -> Result<(), String> {
    out.lock().expect("output lock").push(|seq, _| ServerMessage::Error { seq, t, message: message.clone() });
    flush_output(ws, out)?;
    let mut reason = message;
    while reason.len() > 120 {
        reason.pop();
    }
    ws.close(Some(CloseFrame { code: CloseCode::Protocol, reason: reason.into() })).map_err(|e| e.to_string())?;
    finish_close(ws)
}

fn finish_close(ws: &mut WebSocket<TcpStream>) -> Result<(), String> {
    let deadline = Instant::now() + Duration::from_secs(2);
    while Instant::now() < deadline {
        match ws.read() {
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(_) => break,
        }
    }
    Ok(())
}

fn run_sim(
    mut session: Session,
    mailbox: Receiver<(f64, Input)>,
    out: Arc<Mutex<OutputBuffer>>,
    stop: Arc<AtomicBool>,
    clock: Arc<Mutex<f64>>,
    time_scale: f64,
) -> Result<(), SimError> {
    let start = Instant::now();
    let tick = session.config().tick;
    while !stop.load(Ordering::SeqCst) {
        while let Ok((t, input)) = mailbox.try_recv() {
            session.schedule_input(t, input);
        }
        if session.ended() {
            thread::sleep(POLL);
            continue;
        }
        let record = session.step()?.clone();
        *clock.lock().expect("clock lock") = record.t;
        let profile = session.profile().name.clone();
        {
            let mut buf = out.lock().expect("output lock");
            for e in &record.events {
                buf.push(|seq, _| ServerMessage::event(seq, e));
            }
            buf.push(|seq, dropped| ServerMessage::state(seq, &record, &profile, dropped));
        }
        if time_scale > 0.0 {
            let due = start + Duration::from_secs_f64(session.ticks() as f64 * tick / time_scale);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
    }
    Ok(())
}
