//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain/model errors (reported on stderr as a
//! single `error: <kind>: <detail>` line), 2 malformed flags.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::bb84sim::{self, OutcomeCounts, ProtocolConfig, StratumFrequencies};
use crate::channel::QubitChannel;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::keyrate::{self, BiasTarget, Direction};

#[derive(Debug, Parser)]
#[command(
    name = "biased-bb84",
    version,
    about = "BB84 key rates with a biased bit source"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Worst-case key rate of a channel at a fixed bias.
    Rate {
        /// `amplitude_damping:<p>`, inline channel JSON, or a path to a channel JSON file.
        #[arg(long)]
        channel: String,
        #[arg(long)]
        q: f64,
        #[arg(long, value_parser = parse_direction)]
        direction: Direction,
    },
    /// Rate-maximizing bias for amplitude damping.
    Optimize {
        #[arg(long)]
        p: f64,
        #[arg(long, value_parser = parse_direction)]
        direction: Direction,
    },
    /// Conventional vs. optimized rates over a grid of damping probabilities.
    Sweep {
        #[arg(long)]
        p_min: f64,
        #[arg(long)]
        p_max: f64,
        /// Number of grid points, endpoints included.
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate rows on a single thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Complete-positivity and trace-preservation diagnostics.
    Validate {
        #[arg(long)]
        channel: String,
    },
    /// Simulate the protocol, estimate the channel and report the key rate.
    Simulate {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 1_000_000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use expected frequencies instead of sampled counts.
        #[arg(long)]
        exact: bool,
        #[arg(long, value_parser = parse_direction, default_value = "reverse")]
        direction: Direction,
        #[arg(long, default_value_t = 0.5)]
        basis_prob_z: f64,
        /// Also write the sampled counts to this file.
        #[arg(long)]
        counts_out: Option<PathBuf>,
    },
    /// Estimate channel parameters from a counts file.
    Estimate {
        #[arg(long)]
        counts: PathBuf,
    },
}

fn parse_direction(s: &str) -> std::result::Result<Direction, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// `amplitude_damping:<p>`, inline JSON, or a JSON file path.
pub fn parse_channel_arg(arg: &str) -> Result<QubitChannel> {
    if let Some(p) = arg.strip_prefix("amplitude_damping:") {
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad damping probability `{p}`")))?;
        QubitChannel::amplitude_damping(p)
    } else if arg.trim_start().starts_with('{') {
        QubitChannel::from_json_str(arg)
    } else {
        QubitChannel::from_json_file(Path::new(arg))
    }
}

/// Writes via a temporary file in the destination directory and renames it
/// into place, so failures never leave partial output.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

fn to_pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n"
}

pub fn execute(command: Command) -> Result<String> {
    match command {
        Command::Rate {
            channel,
            q,
            direction,
        } => {
            let ch = parse_channel_arg(&channel)?;
            let report = keyrate::channel_key_rate(&ch, q, direction)?;
            Ok(to_pretty(&json!({
                "channel": ch.to_json(),
                "report": report,
                "rate_clamped": report.clamped_rate(),
            })))
        }
        Command::Optimize { p, direction } => {
            let opt = keyrate::optimize_bias(&BiasTarget::AmplitudeDamping(p), direction)?;
            Ok(to_pretty(&json!({
                "p": p,
                "direction": direction,
                "q_hat": opt.q_hat,
                "rate": opt.rate,
                "rate_clamped": opt.rate.max(0.0),
            })))
        }
        Command::Sweep {
            p_min,
            p_max,
            steps,
            out,
            sequential,
        } => {
            if steps == 0 {
                return Err(Error::domain("--steps must be at least 1"));
            }
            if !(0.0..=1.0).contains(&p_min) || !(0.0..=1.0).contains(&p_max) || p_min > p_max {
                return Err(Error::domain(format!(
                    "need 0 <= p-min <= p-max <= 1, got [{p_min}, {p_max}]"
                )));
            }
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let rows = keyrate::sweep(&keyrate::linspace(p_min, p_max, steps), exec)?;
            let csv = keyrate::sweep_csv(&rows);
            match out {
                Some(path) => {
                    write_atomic(&path, &csv)?;
                    Ok(String::new())
                }
                None => Ok(csv),
            }
        }
        Command::Validate { channel } => {
            let ch = parse_channel_arg(&channel)?;
            let diag = ch.is_tpcp();
            Ok(to_pretty(&json!({
                "channel": ch.to_json(),
                "valid": diag.valid,
                "min_eigenvalue": diag.min_eigenvalue,
                "trace_defect": diag.trace_defect,
            })))
        }
        Command::Simulate {
            channel,
            q,
            shots,
            seed,
            exact,
            direction,
            basis_prob_z,
            counts_out,
        } => {
            let ch = parse_channel_arg(&channel)?;
            let cfg = ProtocolConfig::new(q, basis_prob_z, shots, seed)?;
            if !ch.is_tpcp().valid {
                return Err(Error::InvalidChoi {
                    min_eigenvalue: ch.is_tpcp().min_eigenvalue,
                });
            }
            let (counts, freqs): (Option<OutcomeCounts>, StratumFrequencies) = if exact {
                (None, bb84sim::exact_frequencies(&ch, &cfg))
            } else {
                let counts = bb84sim::simulate(&ch, &cfg);
                (Some(counts), counts.frequencies())
            };
            let e2e = bb84sim::end_to_end_from_frequencies(&ch, &cfg, direction, &freqs)?;
            if let (Some(path), Some(c)) = (&counts_out, &counts) {
                write_atomic(path, &(serde_json::to_string_pretty(&c.to_json())? + "\n"))?;
            }
            Ok(to_pretty(&json!({
                "config": cfg,
                "exact": exact,
                "counts": counts.map(|c| c.to_json()),
                "estimate": e2e.estimate,
                "fit": e2e.fit,
                "report": e2e.report,
                "rate_clamped": e2e.report.clamped_rate(),
                "true_report": e2e.true_report,
            })))
        }
        Command::Estimate { counts } => {
            let counts = OutcomeCounts::from_json_str(&std::fs::read_to_string(&counts)?)?;
            let est = bb84sim::estimate_omega(&counts)?;
            Ok(to_pretty(&json!(est)))
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match execute(cli.command) {
        Ok(out) => {
            let _ = stdout.write_all(out.as_bytes());
            0
        }
        Err(e) => {
            let detail = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error: {}: {}", e.kind(), detail);
            1
        }
    }
}
