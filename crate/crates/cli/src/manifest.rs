use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;

/// Record of one invocation, written when the run starts and rewritten
/// when it ends.
#[derive(Serialize)]
pub struct Manifest {
    command: &'static str,
    config: serde_json::Value,
    seed: Option<u64>,
    version: &'static str,
    out_dir: String,
    outputs: Vec<String>,
    started: String,
    finished: Option<String>,
    wall_clock_secs: Option<f64>,
    status: &'static str,
    error: Option<String>,
    #[serde(skip)]
    clock: Instant,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl Manifest {
    pub fn start(command: &'static str, config: serde_json::Value, seed: Option<u64>, out: &Path, outputs: &[&str]) -> Self {
        Manifest {
            command,
            config,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            out_dir: out.display().to_string(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            started: now(),
            finished: None,
            wall_clock_secs: None,
            status: "running",
            error: None,
            clock: Instant::now(),
        }
    }

    pub fn finish(&mut self, error: Option<String>) {
        self.finished = Some(now());
        self.wall_clock_secs = Some(self.clock.elapsed().as_secs_f64());
        self.status = if error.is_some() { "failed" } else { "ok" };
        self.error = error;
    }

    /// Atomically replace `<dir>/manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        coopsteer::checkpoint::write_atomic(&dir.join("manifest.json"), text.as_bytes())?;
        Ok(())
    }
}
