//! Run artifacts: `lyapunov.csv`, `messages.csv`, `trace.csv`,
//! `metrics.json` and `timing.json`.
//!
//! Everything except `timing.json` is a pure function of the run, so two
//! runs of the same configuration and seed write byte-identical files.

use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;

use crate::engine::RunOutput;
use crate::error::Result;

/// Lossless float formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Summary formatting (6 significant digits).
pub fn fmt_summary(x: f64) -> String {
    format!("{x:.5e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_lyapunov(run: &RunOutput, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "V"])?;
    for (t, v) in &run.lyapunov {
        w.write_record([fmt_f64(t.secs()), fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_messages(run: &RunOutput, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "sent_at",
        "deliver_at",
        "kind",
        "sender",
        "receiver",
        "size_class",
    ])?;
    for m in &run.messages {
        w.write_record([
            fmt_f64(m.sent_at.secs()),
            m.deliver_at
                .map_or_else(|| "DROPPED".to_string(), |t| fmt_f64(t.secs())),
            m.kind.to_string(),
            m.sender.to_string(),
            m.receiver.to_string(),
            m.size_class.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_header(agents: usize) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    for i in 0..agents {
        for field in ["x", "y", "theta", "mode"] {
            header.push(format!("{field}{i}"));
        }
    }
    header
}

pub fn write_trace(run: &RunOutput, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(trace_header(run.config.agent_count()))?;
    for row in &run.trace {
        let mut rec = vec![fmt_f64(row.t.secs())];
        for &(x, y, th, mode) in &row.agents {
            rec.extend([
                fmt_f64(x),
                fmt_f64(y),
                fmt_f64(th),
                mode.as_str().to_string(),
            ]);
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics(run: &RunOutput, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&run.metrics)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct Timing {
    wall_seconds: f64,
}

/// Wall time is kept out of `metrics.json` so that file stays deterministic.
pub fn write_timing(wall: Duration, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&Timing {
        wall_seconds: wall.as_secs_f64(),
    })?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes the four run artifacts and `timing.json` into `dir`.
pub fn write_run(run: &RunOutput, wall: Duration, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_lyapunov(run, &dir.join("lyapunov.csv"))?;
    write_messages(run, &dir.join("messages.csv"))?;
    write_trace(run, &dir.join("trace.csv"))?;
    write_metrics(run, &dir.join("metrics.json"))?;
    write_timing(wall, &dir.join("timing.json"))?;
    Ok(())
}
