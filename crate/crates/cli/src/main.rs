//! `yolo`: train and evaluate the shape classifier, run and replay simulated
//! sessions, and serve a live session to the play UI.
//!
//! Exit codes: 0 success, 1 a threshold or replay check failed, 2 bad input.

mod bridge;
mod protocol;

use std::io::{self, BufRead, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use yolo_core::behavior::EngineConfig;
use yolo_core::classifier::knn::{feature_corpus_to_text, parse_feature_corpus};
use yolo_core::classifier::{
    default_model, evaluate, fit_features, generate_corpus, KnnConfig, NoiseProfile, ShapeClass, TrainedModel,
    STROKE_SAMPLES,
};
use yolo_core::geometry::features_of;
use yolo_core::planner::ArcSchedule;
use yolo_core::sim::{parse_script, replay, run_session, Session, SimConfig, StopRule};

#[derive(Debug, Parser)]
#[command(name = "yolo", version, about = "Behavior engine tools for a storytelling play robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a KNN shape model and write it to a file.
    Train(TrainArgs),
    /// Measure a model's accuracy on generated held-out strokes.
    Eval(EvalArgs),
    /// Run a simulated session and write its trace.
    Simulate(SimulateArgs),
    /// Re-run a trace and check that every tick matches.
    Replay {
        trace: PathBuf,
    },
    /// Serve a live simulated session over WebSocket.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Strokes per class to generate.
    #[arg(long, conflicts_with = "corpus")]
    generate: Option<usize>,
    /// Noise for generated strokes: mouse, robot, train, clean or a sigma.
    #[arg(long, default_value = "train")]
    noise: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Feature corpus file: one `label f1 ... f8` line per example.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write the training features as a corpus file.
    #[arg(long)]
    features_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model file; the built-in model when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "mouse")]
    noise: String,
    /// Test strokes per class.
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Exit 1 when accuracy falls below this.
    #[arg(long)]
    min_accuracy: Option<f64>,
}

#[derive(Debug, Args)]
struct SessionArgs {
    /// exuberant, aloof, harmonious or a profile from $YOLO_CONFIG.
    #[arg(long, default_value = "harmonious")]
    profile: String,
    /// Arc phase lengths in seconds: `rising,climax,falling`.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Timed input script.
    #[arg(long, conflicts_with = "interactive")]
    script: Option<PathBuf>,
    /// Trace file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stop this many seconds after the last scripted input instead of at
    /// the end of the arc.
    #[arg(long)]
    grace: Option<f64>,
    /// Read script commands (without times) from stdin as the session runs.
    #[arg(long)]
    interactive: bool,
    /// Simulated seconds per wall-clock second in interactive mode.
    #[arg(long, default_value_t = 1.0)]
    time_scale: f64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[command(flatten)]
    session: SessionArgs,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8765)]
    port: u16,
    /// Simulated seconds per wall-clock second.
    #[arg(long, default_value_t = 1.0)]
    time_scale: f64,
    /// Exit after the first client disconnects.
    #[arg(long)]
    once: bool,
}

#[derive(Debug)]
enum Failure {
    /// Exit 1.
    Check(String),
    /// Exit 2.
    Input(String),
}

type CmdResult = Result<(), Failure>;

fn input<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Input(format!("{context}: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Simulate(a) => simulate(a),
        Command::Replay { trace } => replay_cmd(&trace),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Print to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let mut stdout = io::stdout().lock();
    let _ = stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush());
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(input(&path.display().to_string()))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(input(&path.display().to_string()))
}

fn train(a: TrainArgs) -> CmdResult {
    let corpus = match &a.corpus {
        Some(path) => parse_feature_corpus(&read_file(path)?).map_err(input(&path.display().to_string()))?,
        None => {
            let noise = NoiseProfile::preset(&a.noise, a.seed).map_err(input("--noise"))?;
            generate_corpus(a.generate.unwrap_or(50), &noise, STROKE_SAMPLES)
                .iter()
                .map(|(t, c)| Ok((features_of(t)?, *c)))
                .collect::<Result<Vec<_>, yolo_core::trajectory::TrajectoryError>>()
                .map_err(input("generated corpus"))?
        }
    };
    let model = fit_features(corpus.clone(), KnnConfig { k: a.k }).map_err(input("train"))?;
    for class in ShapeClass::ALL {
        emit(&format!("{:<8} {}\n", class.name(), corpus.iter().filter(|(_, c)| *c == class).count()));
    }
    write_file(&a.out, &model.to_text())?;
    if let Some(path) = &a.features_out {
        write_file(path, &feature_corpus_to_text(&corpus))?;
    }
    emit(&format!("wrote {} exemplars (k={}) to {}\n", model.exemplars().len(), model.k(), a.out.display()));
    Ok(())
}

fn eval(a: EvalArgs) -> CmdResult {
    let model = match &a.model {
        Some(path) => TrainedModel::parse(&read_file(path)?).map_err(input(&path.display().to_string()))?,
        None => (*default_model()).clone(),
    };
    let noise = NoiseProfile::preset(&a.noise, a.seed).map_err(input("--noise"))?;
    let test = generate_corpus(a.count, &noise, STROKE_SAMPLES);
    let report = evaluate(&model, &test).map_err(input("eval"))?;
    emit(&report.to_string());
    match a.min_accuracy {
        Some(min) if report.accuracy < min => {
            Err(Failure::Check(format!("accuracy {:.4} below minimum {min}", report.accuracy)))
        }
        _ => Ok(()),
    }
}

fn engine_config() -> Result<EngineConfig, Failure> {
    match std::env::var_os("YOLO_CONFIG") {
        Some(path) => {
            let path = PathBuf::from(path);
            EngineConfig::parse(&read_file(&path)?).map_err(input(&path.display().to_string()))
        }
        None => Ok(EngineConfig::default()),
    }
}

fn session_setup(a: &SessionArgs) -> Result<(EngineConfig, ArcSchedule, SimConfig), Failure> {
    let cfg = engine_config()?;
    let schedule = match &a.schedule {
        Some(s) => {
            let parts: Vec<f64> = s
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(input("--schedule"))?;
            let [r, c, f] = parts[..] else {
                return Err(Failure::Input(format!("--schedule: expected rising,climax,falling, got {s:?}")));
            };
            ArcSchedule::new(r, c, f).map_err(input("--schedule"))?
        }
        None => cfg.arc,
    };
    cfg.profiles.get(&a.profile).map_err(input("--profile"))?;
    Ok((cfg, schedule, SimConfig { seed: a.seed, ..SimConfig::default() }))
}

fn simulate(a: SimulateArgs) -> CmdResult {
    let (cfg, schedule, sim) = session_setup(&a.session)?;
    let trace = if a.interactive {
        interactive(&cfg, &a.session.profile, schedule, sim, a.time_scale)?
    } else {
        let script = match &a.script {
            Some(path) => parse_script(&read_file(path)?, path.parent()).map_err(input(&path.display().to_string()))?,
            None => Vec::new(),
        };
        let stop = a.grace.map_or(StopRule::ArcEnd, |grace| StopRule::AfterScript { grace });
        let trace = run_session(sim, &cfg.profiles, &a.session.profile, schedule, &script, stop).map_err(input("simulate"))?;
        emit(&trace.event_log());
        trace
    };
    if let Some(path) = &a.out {
        write_file(path, &trace.to_text())?;
    }
    Ok(())
}

/// Session fed by stdin commands such as `touch on` or
/// `drag_shape circle 0.3`, each applied at the next tick. Ends at the end
/// of the arc, on `quit`, or when stdin closes.
fn interactive(
    cfg: &EngineConfig,
    profile: &str,
    schedule: ArcSchedule,
    sim: SimConfig,
    time_scale: f64,
) -> Result<yolo_core::sim::SessionTrace, Failure> {
    let mut session = Session::new(sim, cfg.profiles.clone(), profile, schedule).map_err(input("simulate"))?;
    let (tx, rx) = mpsc::channel::<Option<String>>();
    thread::spawn(move || {
        for line in io::stdin().lock().lines() {
            let Ok(line) = line else { break };
            if tx.send(Some(line)).is_err() {
                return;
            }
        }
        let _ = tx.send(None);
    });
    let start = Instant::now();
    let mut stdout = io::stdout().lock();
    'run: while !session.ended() {
        while let Ok(msg) = rx.try_recv() {
            let Some(line) = msg else { break 'run };
            let line = line.trim();
            if line == "quit" {
                break 'run;
            }
            if line.is_empty() {
                continue;
            }
            match parse_script(&format!("0 {line}"), None) {
                Ok(inputs) => {
                    for i in inputs {
                        session.schedule_input(session.next_time(), i.input);
                    }
                }
                Err(e) => eprintln!("ignored: {e}"),
            }
        }
        let record = session.step().map_err(input("simulate"))?;
        for e in &record.events {
            let _ = writeln!(stdout, "{e}");
        }
        let _ = stdout.flush();
        if time_scale > 0.0 {
            let due = start + Duration::from_secs_f64(session.ticks() as f64 * sim.tick / time_scale);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
    }
    Ok(session.into_trace())
}

fn replay_cmd(path: &Path) -> CmdResult {
    let report = replay(&read_file(path)?).map_err(input(&path.display().to_string()))?;
    match report.first_divergence {
        None => {
            emit(&format!("replayed {} ticks: no divergence\n", report.ticks));
            Ok(())
        }
        Some(d) => Err(Failure::Check(format!(
            "divergence at tick {}\n  expected: {}\n  actual:   {}",
            d.tick, d.expected, d.actual
        ))),
    }
}

fn serve(a: ServeArgs) -> CmdResult {
    let (cfg, schedule, sim) = session_setup(&a.session)?;
    if !(a.time_scale.is_finite() && a.time_scale >= 0.0) {
        return Err(Failure::Input(format!("--time-scale {}", a.time_scale)));
    }
    let listener = TcpListener::bind((a.host.as_str(), a.port)).map_err(|e| match e.kind() {
        io::ErrorKind::AddrInUse => Failure::Input(format!("port {} is already in use", a.port)),
        _ => Failure::Input(format!("bind {}:{}: {e}", a.host, a.port)),
    })?;
    let addr = listener.local_addr().map_err(input("listener"))?;
    emit(&format!("listening on ws://{addr}\n"));
    let opts = bridge::BridgeOptions {
        sim,
        profiles: cfg.profiles,
        profile: a.session.profile.to_ascii_lowercase(),
        schedule,
        time_scale: a.time_scale,
    };
    bridge::serve(listener, &opts, a.once.then_some(1)).map_err(input("serve"))
}
