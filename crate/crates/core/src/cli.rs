//! Command-line front end.
//!
//! Exit status: 0 on success, 2 when the input is rejected (bad flags,
//! malformed or invalid scenario, bad policy spec), 1 on runtime failure.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{RmabError, Result};
use crate::format::load_scenario;
use crate::index::{IndexConfig, IndexTable};
use crate::model::{validate_scenario, Scenario};
use crate::oracle::{default_baselines, evaluate_policy_exact, run_oracle, OracleReport};
use crate::policy::{run_policy, AllocationTrace, Bandit, PolicySpec};
use crate::simulate::monte_carlo;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

/// Restricted multi-armed bandits: indices, index policies and exact oracles.
#[derive(Debug, Parser)]
#[command(name = "rmab", version)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file and report every violated invariant.
    Validate(ScenarioArgs),
    /// Compute the index of every switch point.
    Index {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Bisection tolerance relative to max_rate / beta.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of a policy's value.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "gittins")]
        policy: String,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides the scenario horizon (grid steps).
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the step-by-step trace of the path drawn with `--seed`.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Exact optimum, index-policy value and envelope formula.
    Oracle {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum, default_value_t = OutputFormat::Plain)]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gap table of several policies against the exact optimum.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Policy to include; repeat for several. Defaults to the index
        /// policy plus the standard baselines.
        #[arg(long = "policy")]
        policies: Vec<String>,
        /// Also estimate each policy by simulation with this many paths.
        #[arg(long, default_value_t = 0)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub scenario: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Plain,
    Csv,
}

/// Maps an error to its exit status.
pub fn exit_code(err: &RmabError) -> i32 {
    match err {
        RmabError::InvalidModel(_)
        | RmabError::Rejected(_)
        | RmabError::Parse { .. }
        | RmabError::PolicySpec(_)
        | RmabError::HorizonTail { .. } => EXIT_INVALID,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(&config.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn load(args: &ScenarioArgs) -> Result<(Scenario, f64)> {
    let (file, scenario) = load_scenario(&args.scenario).map_err(|e| match e {
        RmabError::Parse { line, column, message } => RmabError::Parse {
            line,
            column,
            message: format!("{}: {message}", args.scenario.display()),
        },
        other => other,
    })?;
    Ok((scenario, file.tail_tolerance()))
}

fn load_valid(args: &ScenarioArgs) -> Result<Scenario> {
    let (scenario, tol) = load(args)?;
    validate_scenario(&scenario, tol).into_result()?;
    Ok(scenario)
}

fn tables(scenario: &Scenario, config: &IndexConfig) -> Result<Vec<IndexTable>> {
    let d = scenario.discount();
    scenario.arms.iter().map(|a| IndexTable::compute_with(a, &d, config)).collect()
}

fn csv_writer(path: &Path, kind: &str) -> Result<csv::Writer<File>> {
    let mut file = File::create(path)?;
    writeln!(file, "# rmab {kind} v1")?;
    Ok(csv::Writer::from_writer(file))
}

fn dispatch(command: &Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Validate(args) => {
            let (scenario, tol) = load(args)?;
            let report = validate_scenario(&scenario, tol);
            if !report.is_ok() {
                return Err(RmabError::Rejected(report));
            }
            writeln!(out, "{}: ok", args.scenario.display())?;
            for arm in &scenario.arms {
                let sw = arm.switchable_flags().iter().filter(|&&b| b).count();
                writeln!(out, "  {}: {} states, {} switch points", arm.name(), arm.len(), sw)?;
            }
            writeln!(
                out,
                "  horizon {} steps, tail bound {:.3e}",
                scenario.horizon_steps,
                scenario.tail_bound()
            )?;
        }
        Command::Index { scenario, tol, out: path } => {
            if !(*tol > 0.0 && tol.is_finite()) {
                return Err(RmabError::InvalidModel(format!("--tol {tol} must be positive")));
            }
            let sc = load_valid(scenario)?;
            let config = IndexConfig {
                tol_m_rel: *tol,
                ..IndexConfig::default()
            };
            let tables = tables(&sc, &config)?;
            if let Some(path) = path {
                let mut w = csv_writer(path, "index")?;
                w.write_record(["arm_id", "state_id", "switchable", "index_value", "bisection_iterations"])?;
                for (k, (arm, t)) in sc.arms.iter().zip(&tables).enumerate() {
                    for s in 0..arm.len() {
                        w.write_record([
                            k.to_string(),
                            s.to_string(),
                            arm.is_switchable(s).to_string(),
                            t.index(s).map_or(String::new(), |v| format!("{v:.15e}")),
                            t.iterations(s).to_string(),
                        ])?;
                    }
                }
                w.flush()?;
            }
            for (arm, t) in sc.arms.iter().zip(&tables) {
                writeln!(out, "{}", arm.name())?;
                for s in 0..arm.len() {
                    match t.index(s) {
                        Some(v) => writeln!(out, "  {:<12} {v:.10}", arm.label(s))?,
                        None => writeln!(out, "  {:<12} (committed)", arm.label(s))?,
                    }
                }
            }
        }
        Command::Simulate {
            scenario,
            policy,
            paths,
            seed,
            horizon,
            out: path,
            trace,
        } => {
            let policy: PolicySpec = policy.parse()?;
            if *paths == 0 {
                return Err(RmabError::InvalidModel("--paths must be at least 1".into()));
            }
            let sc = load_valid(scenario)?;
            policy.check(sc.num_arms())?;
            let tables = tables(&sc, &IndexConfig::default())?;
            let bandit = Bandit::new(&sc, &tables)?;
            let h = horizon.unwrap_or(sc.horizon_steps);
            let r = monte_carlo(&bandit, &policy, *paths, *seed, h)?;
            if let Some(trace_path) = trace {
                write_trace(trace_path, &run_policy(&bandit, &policy, *seed, h)?)?;
            }
            if let Some(path) = path {
                let mut w = csv_writer(path, "simulate")?;
                let mut header = vec!["policy".to_string(), "n_paths".into(), "mean".into(), "se".into()];
                header.extend((0..sc.num_arms()).map(|k| format!("reward_{k}")));
                header.extend((0..sc.num_arms()).map(|k| format!("occupancy_{k}")));
                w.write_record(&header)?;
                let mut row = vec![policy.to_string(), r.n_paths.to_string(), format!("{:.15e}", r.mean), format!("{:.15e}", r.se)];
                row.extend(r.per_arm_reward.iter().map(|v| format!("{v:.15e}")));
                row.extend(r.per_arm_occupancy.iter().map(|v| format!("{v:.15e}")));
                w.write_record(&row)?;
                w.flush()?;
            }
            writeln!(out, "{policy}: {:.10} ± {:.2e} ({} paths, horizon {h})", r.mean, r.se, r.n_paths)?;
            for (k, arm) in sc.arms.iter().enumerate() {
                writeln!(
                    out,
                    "  {:<12} reward {:.10}  occupancy {:.3}",
                    arm.name(),
                    r.per_arm_reward[k],
                    r.per_arm_occupancy[k]
                )?;
            }
            let tail = sc.discount().tail_bound(h, sc.max_rate());
            if tail > 1e-8 {
                writeln!(out, "  warning: horizon tail bound {tail:.3e}")?;
            }
        }
        Command::Oracle { scenario, format, out: path } => {
            let sc = load_valid(scenario)?;
            let tables = tables(&sc, &IndexConfig::default())?;
            let report = run_oracle(&sc, &tables, &default_baselines(sc.num_arms()))?;
            if let Some(path) = path {
                write_oracle_csv(path, &report)?;
            }
            match format {
                OutputFormat::Plain => write_oracle_plain(out, &report)?,
                OutputFormat::Csv => {
                    writeln!(out, "# rmab oracle v1")?;
                    let mut w = csv::Writer::from_writer(&mut *out);
                    oracle_rows(&mut w, &report)?;
                    w.flush()?;
                }
            }
        }
        Command::Compare {
            scenario,
            policies,
            paths,
            seed,
            out: path,
        } => {
            let sc = load_valid(scenario)?;
            let mut specs = vec![PolicySpec::gittins()];
            if policies.is_empty() {
                specs.extend(default_baselines(sc.num_arms()));
            } else {
                specs = policies.iter().map(|p| p.parse()).collect::<Result<_>>()?;
            }
            for p in &specs {
                p.check(sc.num_arms())?;
            }
            let tables = tables(&sc, &IndexConfig::default())?;
            let bandit = Bandit::new(&sc, &tables)?;
            let report = run_oracle(&sc, &tables, &[])?;
            let mut w = match path {
                Some(p) => {
                    let mut w = csv_writer(p, "compare")?;
                    w.write_record(["policy", "exact", "gap", "mc_mean", "mc_se"])?;
                    Some(w)
                }
                None => None,
            };
            writeln!(out, "optimal value {:.12} (horizon {}, {} joint states)", report.optimal, report.horizon, report.product_states)?;
            writeln!(out, "envelope formula {:.12}  gap {:.3e}", report.envelope, report.envelope_gap())?;
            writeln!(out, "{:<16} {:>16} {:>12} {:>16} {:>10}", "policy", "exact", "gap", "mc_mean", "mc_se")?;
            for p in &specs {
                let v = evaluate_policy_exact(&bandit, p, sc.horizon_steps)?;
                let gap = (report.optimal - v.total).abs();
                let mc = if *paths > 0 { Some(monte_carlo(&bandit, p, *paths, *seed, sc.horizon_steps)?) } else { None };
                let (mean, se) = mc.as_ref().map_or((String::from("-"), String::from("-")), |r| {
                    (format!("{:.10}", r.mean), format!("{:.2e}", r.se))
                });
                writeln!(out, "{:<16} {:>16.12} {:>12.3e} {:>16} {:>10}", p.to_string(), v.total, gap, mean, se)?;
                if let Some(w) = w.as_mut() {
                    w.write_record([
                        p.to_string(),
                        format!("{:.15e}", v.total),
                        format!("{gap:.15e}"),
                        mc.as_ref().map_or(String::new(), |r| format!("{:.15e}", r.mean)),
                        mc.as_ref().map_or(String::new(), |r| format!("{:.15e}", r.se)),
                    ])?;
                }
            }
            if let Some(mut w) = w {
                w.flush()?;
            }
        }
    }
    Ok(())
}

fn oracle_rows<W: Write>(w: &mut csv::Writer<W>, r: &OracleReport) -> Result<()> {
    w.write_record(["quantity", "value", "gap_to_optimal"])?;
    let mut row = |name: String, v: f64| w.write_record([name, format!("{v:.15e}"), format!("{:.15e}", (v - r.optimal).abs())]);
    row("optimal".into(), r.optimal)?;
    row("envelope_formula".into(), r.envelope)?;
    row(r.index_policy.policy.to_string(), r.index_policy.total)?;
    for b in &r.baselines {
        row(b.policy.to_string(), b.total)?;
    }
    Ok(())
}

fn write_oracle_csv(path: &Path, r: &OracleReport) -> Result<()> {
    let mut w = csv_writer(path, "oracle")?;
    oracle_rows(&mut w, r)?;
    w.flush()?;
    Ok(())
}

fn write_oracle_plain(out: &mut dyn Write, r: &OracleReport) -> Result<()> {
    writeln!(out, "horizon {} steps, tail bound {:.3e}, {} joint states", r.horizon, r.tail_bound, r.product_states)?;
    writeln!(out, "{:<20} {:>18} {:>12}", "quantity", "value", "gap")?;
    writeln!(out, "{:<20} {:>18.12} {:>12}", "optimal", r.optimal, "-")?;
    writeln!(out, "{:<20} {:>18.12} {:>12.3e}", "envelope_formula", r.envelope, r.envelope_gap())?;
    writeln!(out, "{:<20} {:>18.12} {:>12.3e}", r.index_policy.policy.to_string(), r.index_policy.total, r.index_gap())?;
    for b in &r.baselines {
        writeln!(out, "{:<20} {:>18.12} {:>12.3e}", b.policy.to_string(), b.total, (b.total - r.optimal).abs())?;
    }
    Ok(())
}

/// Columns: t, arm, state, switchable, decision, step_reward,
/// discounted_cumulative, then local_time_k, carried_k, envelope_k per arm.
fn write_trace(path: &Path, trace: &AllocationTrace) -> Result<()> {
    let mut w = csv_writer(path, "trace")?;
    let d = trace.steps.first().map_or(0, |s| s.local_times.len());
    let mut header: Vec<String> = ["t", "arm", "state", "switchable", "decision", "step_reward", "discounted_cumulative"]
        .map(String::from)
        .to_vec();
    for prefix in ["local_time", "carried", "envelope"] {
        header.extend((0..d).map(|k| format!("{prefix}_{k}")));
    }
    w.write_record(&header)?;
    for s in &trace.steps {
        let mut row = vec![
            s.t.to_string(),
            s.arm.to_string(),
            s.state.to_string(),
            s.switchable.to_string(),
            s.decision.to_string(),
            format!("{:.15e}", s.step_reward),
            format!("{:.15e}", s.discounted_cumulative),
        ];
        row.extend(s.local_times.iter().map(ToString::to_string));
        row.extend(s.carried.iter().map(|v| format!("{v:.15e}")));
        row.extend(s.envelope.iter().map(|v| format!("{v:.15e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
