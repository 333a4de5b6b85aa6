//! Configuration files, output files and the `kkmem` command line.
//!
//! A run directory holds `config.echo` (the resolved configuration),
//! `trace.csv` (one row per step) and `summary.txt` (one verdict per line).
//! Campaigns add one CSV per table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{all_passed, parameter_sweep, verify, Check, SweepOutcome};
use crate::monitors::{key_estimate_check, MonitorRecord};
use crate::parabolic::{simulate, steady_state, MeshSpec, SimConfig, Trajectory};

pub const SCHEMA_LINE: &str = "# schema=1";

/// Parses and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path)?;
    parse_config_str(&text, &path.display().to_string())
}

/// Parses and validates configuration text; `origin` prefixes error messages.
pub fn parse_config_str(text: &str, origin: &str) -> Result<SimConfig> {
    let config: SimConfig = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("{origin}:{}:{}: {}", e.line(), e.column(), strip_position(&e.to_string()))))?;
    config.validate().map_err(|e| match e {
        Error::Config(msg) => {
            let line = key_line(text, &msg).map_or(String::new(), |l| format!("{l}:"));
            Error::Config(format!("{origin}:{line} {msg}"))
        }
        other => other,
    })?;
    Ok(config)
}

fn strip_position(msg: &str) -> &str {
    msg.rfind(" at line ").map_or(msg, |i| &msg[..i])
}

/// Line of the key named by a validation message of the form `a.b[2].c: ...`.
fn key_line(text: &str, msg: &str) -> Option<usize> {
    let path = msg.split(':').next()?;
    let keys: Vec<&str> = path.split('.').map(|k| k.split('[').next().unwrap_or(k)).collect();
    let mut from = 0;
    let mut found = None;
    for key in keys {
        let needle = format!("\"{key}\"");
        let pos = text[from..].find(&needle)? + from;
        found = Some(pos);
        from = pos + needle.len();
    }
    found.map(|p| text[..p].matches('\n').count() + 1)
}

/// The configuration with every default filled in.
pub fn resolved_config(config: &SimConfig) -> String {
    serde_json::to_string_pretty(config).expect("configuration serializes") + "\n"
}

fn num(v: f64) -> String {
    format!("{v:.14e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn trace_header(config: &SimConfig) -> Vec<String> {
    let m = config.species.len();
    let mut h = vec!["t".to_string()];
    h.extend((0..m).map(|i| format!("mass_{i}")));
    h.push("total_mass".into());
    h.extend((0..m).map(|i| format!("l2_{i}")));
    h.extend(["dual_norm_U", "E_t", "jump_L2", "min_value"].map(String::from));
    h.extend(["substeps", "budget_residual", "sq_integral"].map(String::from));
    for b in &config.monitors.truncation_levels {
        h.push(format!("truncation_lhs_b{b}"));
        h.push(format!("truncation_rhs_b{b}"));
    }
    if config.monitors.weighted_gradient_alpha.is_some() {
        h.push("weighted_gradient".into());
    }
    if config.monitors.lbeta.is_some() {
        h.push("lbeta_gradient".into());
        h.push("lbeta_trace".into());
    }
    h
}

pub fn trace_row(r: &MonitorRecord) -> Vec<String> {
    let mut row = vec![num(r.t)];
    row.extend(r.mass.iter().copied().map(num));
    row.push(num(r.total_mass));
    row.extend(r.l2.iter().copied().map(num));
    row.extend([opt(r.dual_norm_u), opt(r.e_t), num(r.jump_l2), num(r.min_value)]);
    row.extend([r.substeps.to_string(), num(r.budget_residual), num(r.sq_integral)]);
    for (a, b) in &r.truncation {
        row.push(num(*a));
        row.push(num(*b));
    }
    row.extend(r.weighted_gradient.map(num));
    if let Some((a, b)) = r.lbeta {
        row.push(num(a));
        row.push(num(b));
    }
    row
}

/// `trace.csv` contents: schema line, header, one row per step.
pub fn trace_csv(config: &SimConfig, traj: &Trajectory) -> String {
    let mut out = format!("{SCHEMA_LINE}\n{}\n", trace_header(config).join(","));
    for r in &traj.records {
        out.push_str(&trace_row(r).join(","));
        out.push('\n');
    }
    if let Some(e) = &traj.failure {
        let _ = writeln!(out, "# failed: {e}");
    }
    out
}

pub fn table_csv(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = format!("{SCHEMA_LINE}\n{}\n", header.join(","));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| if v.is_nan() { String::new() } else { num(*v) }).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn summary_text(title: &str, checks: &[Check], failure: Option<&Error>) -> String {
    let mut out = format!("{title}\n");
    for c in checks {
        let _ = writeln!(out, "{c}");
    }
    if let Some(e) = failure {
        let _ = writeln!(out, "FAIL run aborted: {e}");
    }
    let ok = failure.is_none() && all_passed(checks);
    let _ = writeln!(out, "verdict: {}", if ok { "PASS" } else { "FAIL" });
    out
}

/// Verdicts a finished (or aborted) run is held to.
pub fn run_checks(config: &SimConfig, traj: &Trajectory) -> Vec<Check> {
    let tol = &config.tolerances;
    let mut checks = Vec::new();
    let min = traj.records.iter().map(|r| r.min_value).fold(traj.initial.min_value, f64::min);
    checks.push(Check::at_least("nonnegativity", min, -tol.positivity, "min over cells and steps"));
    let budget = traj.records.iter().map(|r| r.budget_residual).fold(0.0, f64::max);
    checks.push(Check::at_most("membrane flux balances both sides", budget, 1e-12, "largest per-side budget residual"));
    let dissipating = config.reaction_system().ok().and_then(|s| s.constants()).is_some_and(|c| c.mass_dissipating);
    if dissipating {
        let mut prev = traj.initial.total_mass;
        let mut worst = f64::NEG_INFINITY;
        for r in &traj.records {
            worst = worst.max((r.total_mass - prev) / prev.max(f64::MIN_POSITIVE));
            prev = r.total_mass;
        }
        if !traj.records.is_empty() {
            checks.push(Check::at_most("total mass nonincreasing", worst, 1e-14, "largest relative step increase"));
        }
    }
    if config.monitors.key_estimate {
        match key_estimate_check(traj, config) {
            Ok(rep) => {
                checks.push(Check::at_most(
                    "key estimate",
                    rep.worst_ratio,
                    1.0,
                    format!("max E(t)/(E(0)+C1 t(1+slack)); C = {}, C1 = {:.6e}, E(0) = {:.6e}", rep.c, rep.c1, rep.e0),
                ));
                checks.push(Check::at_most("space-time L2 bound", rep.sq_integral, rep.c3, "sum_i int int u_i^2 <= C3"));
            }
            Err(e) => checks.push(Check::new("key estimate", false, f64::NAN, f64::NAN, e.to_string())),
        }
    }
    if let Some(last) = traj.records.last() {
        for ((lhs, rhs), b) in last.truncation.iter().zip(&config.monitors.truncation_levels) {
            let bound = rhs * (1.0 + tol.truncation_slack);
            checks.push(Check::at_most(format!("truncation energy b = {b}"), *lhs, bound, "right side uses int int |f|"));
        }
    }
    checks
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

/// `kkmem run`: simulate, write the run directory, report whether every check passed.
pub fn run_to_dir(config: &SimConfig, out: &Path) -> Result<bool> {
    fs::create_dir_all(out)?;
    write(out, "config.echo", &resolved_config(config))?;
    let traj = simulate(config)?;
    write(out, "trace.csv", &trace_csv(config, &traj))?;
    let checks = run_checks(config, &traj);
    let summary = summary_text("run", &checks, traj.failure.as_ref());
    write(out, "summary.txt", &summary)?;
    Ok(traj.failure.is_none() && all_passed(&checks))
}

/// `kkmem sweep`: one table plus verdicts.
pub fn sweep_to_dir(config: &SimConfig, outcome: &SweepOutcome, out: &Path) -> Result<bool> {
    fs::create_dir_all(out)?;
    write(out, "config.echo", &resolved_config(config))?;
    write(out, &format!("{}.csv", outcome.name), &table_csv(&outcome.header, &outcome.rows))?;
    write(out, "summary.txt", &summary_text(&format!("sweep {}", outcome.name), &outcome.checks, None))?;
    Ok(all_passed(&outcome.checks))
}

/// `kkmem steady`: the 1D stationary profile for the first species, with wall
/// values `left` and `right`, against its closed form. Membrane flux density is
/// `D·k·[u]`, as in the time-dependent runs.
pub fn steady_report(config: &SimConfig, left: f64, right: f64) -> Result<(String, bool)> {
    let (l1, l2) = match config.mesh {
        MeshSpec::Interval { length1, length2, .. } => (length1, length2),
        MeshSpec::Rectangle { .. } => {
            return Err(Error::Config("mesh: the steady fixture needs an interval mesh".into()));
        }
    };
    let s = &config.species[0];
    let mesh = Arc::new(config.mesh.build()?);
    let kappa = s.diffusion * s.permeability;
    let st = steady_state(&mesh, [s.diffusion; 2], kappa, left, right)?;
    let (j, jump) = crate::parabolic::steady_closed_form((l1, l2), [s.diffusion; 2], kappa, left, right);
    let checks = vec![
        Check::at_most("membrane flux", (st.flux - j).abs(), 1e-10, format!("computed {:.14e}, closed form {j:.14e}", st.flux)),
        Check::at_most("membrane jump", (st.jump - jump).abs(), 1e-10, format!("computed {:.14e}, closed form {jump:.14e}", st.jump)),
    ];
    let mut text = summary_text("steady", &checks, None);
    let _ = writeln!(text, "traces: {:.14e} {:.14e}", st.traces.0, st.traces.1);
    Ok((text, all_passed(&checks)))
}

#[derive(Debug, Parser)]
#[command(name = "kkmem", version, about = "Reaction-diffusion through a permeable membrane")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one configuration and write config.echo, trace.csv and summary.txt.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a built-in check suite: all, elliptic, parabolic or monitors.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a run over values of n, h, dt or k.
    Sweep {
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stationary 1D profile with the given wall values.
    Steady {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        left: f64,
        #[arg(long, default_value_t = 0.0)]
        right: f64,
    },
}

/// Executes a parsed command. `Ok(true)` means every enabled check passed.
pub fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = parse_config(&config)?;
            let ok = run_to_dir(&cfg, &out)?;
            print!("{}", fs::read_to_string(out.join("summary.txt"))?);
            Ok(ok)
        }
        Command::Verify { suite, out } => {
            let checks = verify(suite.parse()?);
            let text = summary_text(&format!("verify {suite}"), &checks, None);
            print!("{text}");
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                write(&dir, "summary.txt", &text)?;
            }
            Ok(all_passed(&checks))
        }
        Command::Sweep { param, values, config, out } => {
            let cfg = parse_config(&config)?;
            let outcome = parameter_sweep(&cfg, param.parse()?, &values)?;
            let ok = sweep_to_dir(&cfg, &outcome, &out)?;
            print!("{}", fs::read_to_string(out.join("summary.txt"))?);
            Ok(ok)
        }
        Command::Steady { config, left, right } => {
            let cfg = parse_config(&config)?;
            let (text, ok) = steady_report(&cfg, left, right)?;
            print!("{text}");
            Ok(ok)
        }
    }
}

/// Entry point of the `kkmem` binary: exit 0 when all checks pass, 1 when some
/// fail, 2 on errors.
pub fn main_from_env() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "mesh": {"kind": "interval", "length1": 1.0, "length2": 1.0, "n1": 8, "n2": 8},
  "species": [{"diffusion": 1.0, "permeability": 1.0, "initial": {"kind": "constant", "value": 1.0}}],
  "reaction": {"label": "zero"},
  "t_end": 0.1,
  "dt": 0.01
}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str(MINIMAL, "minimal.json").unwrap();
        assert_eq!(cfg.regularization, None);
        assert!(cfg.monitors.dual_norm);
        let echo = resolved_config(&cfg);
        assert!(echo.contains("\"positivity\": 1e-12"));
        assert_eq!(parse_config_str(&echo, "echo").unwrap(), cfg);
    }

    #[test]
    fn distinct_k_with_key_estimate_is_rejected_at_its_line() {
        let text = r#"{
  "mesh": {"kind": "interval", "length1": 1.0, "length2": 1.0, "n1": 8, "n2": 8},
  "species": [
    {"diffusion": 1.0, "permeability": 1.0, "initial": {"kind": "zero"}},
    {"diffusion": 1.0, "permeability": 2.0, "initial": {"kind": "zero"}}
  ],
  "reaction": {"label": "annihilation"},
  "t_end": 0.1,
  "dt": 0.01,
  "monitors": {
    "key_estimate": true
  }
}"#;
        let msg = parse_config_str(text, "k.json").unwrap_err().to_string();
        assert!(msg.contains("equal permeabilities"), "{msg}");
        assert!(msg.contains("k.json:11:"), "{msg}");
    }

    #[test]
    fn unknown_label_lists_available() {
        let text = MINIMAL.replace("\"zero\"", "\"lotka\"");
        let msg = parse_config_str(&text, "x").unwrap_err().to_string();
        assert!(msg.contains("annihilation") && msg.contains("transport_demo"), "{msg}");
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let text = MINIMAL.replace("\"dt\": 0.01", "\"dt\": \"fast\"");
        let msg = parse_config_str(&text, "bad.json").unwrap_err().to_string();
        assert!(msg.contains("bad.json:6:"), "{msg}");
        let text = MINIMAL.replace("  \"dt\": 0.01\n", "");
        let text = text.replace("\"t_end\": 0.1,", "\"t_end\": 0.1");
        assert!(parse_config_str(&text, "m").unwrap_err().to_string().contains("dt"));
    }

    #[test]
    fn trace_has_schema_and_matching_columns() {
        let cfg = parse_config_str(MINIMAL, "m").unwrap();
        let traj = simulate(&cfg).unwrap();
        let csv = trace_csv(&cfg, &traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(SCHEMA_LINE));
        let width = lines.next().unwrap().split(',').count();
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.split(',').count() == width));
    }
}
