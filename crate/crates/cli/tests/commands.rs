use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn yolo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_yolo")).args(args).env_remove("YOLO_CONFIG").output().expect("run yolo")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn accuracy(o: &Output) -> f64 {
    let text = stdout(o);
    let line = text.lines().next().expect("report line");
    line.split_whitespace().nth(1).expect("accuracy field").parse().expect("number")
}

#[test]
fn train_generates_six_classes_deterministically() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a.knn"), path(&dir, "b.knn"));
    let o = yolo(&["train", "--generate", "50", "--noise", "mouse", "--seed", "42", "--out", &a]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("wrote 300 exemplars"));
    for class in ["circle", "rect", "loop", "curl", "spike", "line"] {
        assert!(stdout(&o).lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == [class, "50"]), "{class}");
    }
    let o = yolo(&["train", "--generate", "50", "--noise", "mouse", "--seed", "42", "--out", &b]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn train_without_spike_exits_2() {
    let dir = TempDir::new().unwrap();
    let feats = path(&dir, "f.txt");
    let o = yolo(&["train", "--generate", "5", "--out", &path(&dir, "m.knn"), "--features-out", &feats]);
    assert!(o.status.success());
    let kept: String = std::fs::read_to_string(&feats)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("spike"))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&feats, kept).unwrap();
    let o = yolo(&["train", "--corpus", &feats, "--out", &path(&dir, "x.knn")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("spike"), "{}", stderr(&o));
    assert!(!Path::new(&path(&dir, "x.knn")).exists());
}

#[test]
fn eval_thresholds() {
    let o = yolo(&["eval", "--noise", "mouse", "--min-accuracy", "0.89"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(accuracy(&o) >= 0.89);

    let o = yolo(&["eval", "--noise", "robot"]);
    let acc = accuracy(&o);
    assert!((0.72..=0.88).contains(&acc), "robot accuracy {acc}");

    let o = yolo(&["eval", "--min-accuracy", "1.01"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_with_trained_model_file() {
    let dir = TempDir::new().unwrap();
    let m = path(&dir, "m.knn");
    assert!(yolo(&["train", "--out", &m]).status.success());
    let o = yolo(&["eval", "--model", &m, "--count", "20", "--min-accuracy", "0.89"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(yolo(&["eval", "--model", &path(&dir, "missing.knn")]).status.code(), Some(2));
}

#[test]
fn bad_input_exits_2() {
    assert_eq!(yolo(&["eval", "--noise", "fog"]).status.code(), Some(2));
    assert_eq!(yolo(&["simulate", "--profile", "grumpy"]).status.code(), Some(2));
    assert_eq!(yolo(&["simulate", "--schedule", "1,2"]).status.code(), Some(2));
    assert_eq!(yolo(&["bogus"]).status.code(), Some(2));
}

const SCRIPT: &str = "\
5    touch on
5.1  drag_shape circle 0.3
8.3  touch off
25   touch on
25.1 drag_shape spike 0.3
28.3 touch off
";

#[test]
fn simulate_replay_round_trip() {
    let dir = TempDir::new().unwrap();
    let script = path(&dir, "s.txt");
    std::fs::write(&script, SCRIPT).unwrap();
    let (a, b) = (path(&dir, "a.trace"), path(&dir, "b.trace"));
    let args = |out: &str| {
        ["simulate", "--profile", "aloof", "--schedule", "20,15,10", "--seed", "5", "--script", &script, "--out", out]
            .map(String::from)
    };
    let o = Command::new(env!("CARGO_BIN_EXE_yolo")).args(args(&a)).env_remove("YOLO_CONFIG").output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let log = stdout(&o);
    let mirror = log.lines().position(|l| l.contains("technique=mirror") && l.contains("shape=circle"));
    let contrast = log.lines().position(|l| l.contains("technique=contrast") && l.contains("phase=climax"));
    assert!(mirror.is_some() && contrast.is_some() && mirror < contrast, "{log}");

    assert!(Command::new(env!("CARGO_BIN_EXE_yolo")).args(args(&b)).output().unwrap().status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let o = yolo(&["replay", &a]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("no divergence"));

    // one LED channel changed on one tick
    let text = std::fs::read_to_string(&a).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let first = lines.iter().position(|l| !l.starts_with('#')).unwrap();
    let mut fields: Vec<String> = lines[first + 100].split(' ').map(String::from).collect();
    fields[8] = if fields[8] == "1" { "2".into() } else { "1".into() };
    lines[first + 100] = fields.join(" ");
    let tampered = path(&dir, "t.trace");
    std::fs::write(&tampered, lines.join("\n") + "\n").unwrap();
    let o = yolo(&["replay", &tampered]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("divergence at tick 100"), "{}", stderr(&o));

    let truncated = path(&dir, "cut.trace");
    std::fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert_eq!(yolo(&["replay", &truncated]).status.code(), Some(2));
}

#[test]
fn simulate_grace_stops_early() {
    let dir = TempDir::new().unwrap();
    let script = path(&dir, "s.txt");
    std::fs::write(&script, "2 touch on\n3 touch off\n").unwrap();
    let out = path(&dir, "g.trace");
    let o = yolo(&["simulate", "--profile", "aloof", "--script", &script, "--grace", "2", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.ends_with("#end ticks=101\n"), "{}", &text[text.len() - 40..]);
}

#[test]
fn config_file_profiles() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "yolo.conf");
    std::fs::write(
        &cfg,
        "shy.speed = 0.05\nshy.amplitude = 0.05\nshy.palette = 0,0,90\nshy.brightness = 0.1\nshy.proactivity = inf\narc.rising = 3\narc.climax = 1\narc.falling = 1\n",
    )
    .unwrap();
    let out = path(&dir, "c.trace");
    let o = Command::new(env!("CARGO_BIN_EXE_yolo"))
        .args(["simulate", "--profile", "shy", "--out", &out])
        .env("YOLO_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("#cfg profile=shy"));
    assert!(text.ends_with("#end ticks=101\n"));
    assert!(yolo(&["replay", &out]).status.success());

    std::fs::write(&cfg, "shy.speed = 0.05\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_yolo")).args(["simulate"]).env("YOLO_CONFIG", &cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn interactive_reads_stdin() {
    use std::io::Write;
    use std::process::Stdio;
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "i.trace");
    let mut child = Command::new(env!("CARGO_BIN_EXE_yolo"))
        .args(["simulate", "--interactive", "--profile", "aloof", "--schedule", "2,2,2", "--time-scale", "0", "--out", &out])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"touch on\nquit\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    assert!(yolo(&["replay", &out]).status.success());
}
