//! Command-line front end: analyze, synthesize, verify, simulate and sweep,
//! each emitting a run report (human-readable lines or `--json`).
//!
//! Exit codes: 0 = success / feasible / pass, 2 = a sound negative verdict
//! (infeasible design, failed verification), 1 = usage or I/O problems. On
//! exit 1 nothing is printed to stdout, so scripts never mistake an error
//! for a verdict.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use pfsyn::analysis::{certify_stability, spectral_radii, StabilityAnalysis, StabilityVariant};
use pfsyn::lp::margin_threshold;
use pfsyn::model::{check_model_positivity, load_model, FuzzyModel};
use pfsyn::sim::{export_csv, simulate, Realization};
use pfsyn::synthesis::{
    feasibility_region, load_gains, save_gains, synthesize, verify_closed_loop, Gains, ParamSpec,
    SynthesisMode,
};
use pfsyn::Vec64;

#[derive(Parser)]
#[command(name = "pfsyn", version, about = "Positive fuzzy-system controller toolbox")]
struct Cli {
    /// Emit the run report as JSON.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Positivity check, open-loop stability LPs and per-rule spectral radii.
    Analyze {
        /// Model JSON file.
        model: PathBuf,
    },
    /// Design state-feedback gains by margin maximization.
    Synthesize {
        /// Model JSON file.
        model: PathBuf,
        /// standard, positive-input or robust; inferred from the model shape
        /// when omitted.
        #[arg(long)]
        mode: Option<SynthesisMode>,
        /// Write the resulting gains as JSON.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a gains file against the closed loop, vertex pair by vertex
    /// pair.
    Verify {
        /// Model JSON file.
        model: PathBuf,
        /// Gains JSON file.
        gains: PathBuf,
    },
    /// Run the state recursion and export the trajectory.
    Simulate {
        /// Model JSON file.
        model: PathBuf,
        /// Gains JSON file; omitted means open loop.
        #[arg(long)]
        gains: Option<PathBuf>,
        /// Initial state, comma-separated (e.g. `0.01,0.03`).
        #[arg(long)]
        x0: String,
        /// Number of steps to advance.
        #[arg(long)]
        steps: usize,
        /// Interval realization: upper, lower or nominal.
        #[arg(long, default_value = "upper")]
        realization: Realization,
        /// Write the trajectory CSV here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Map design feasibility over one or two matrix entries.
    Sweep {
        /// Model JSON file.
        model: PathBuf,
        /// Axis spec `rules[i].A[r][c]=start:stop:step`; repeat for a second
        /// axis.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        /// Synthesis mode applied at every grid point.
        #[arg(long)]
        mode: Option<SynthesisMode>,
        /// Write the region CSV here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct RunReport {
    command: &'static str,
    verdicts: BTreeMap<String, Value>,
    artifacts_written: Vec<String>,
}

impl RunReport {
    fn new(command: &'static str) -> Self {
        RunReport {
            command,
            verdicts: BTreeMap::new(),
            artifacts_written: Vec::new(),
        }
    }

    fn set(&mut self, key: &str, value: Value) {
        self.verdicts.insert(key.to_string(), value);
    }

    fn render_text(&self) -> String {
        let mut out = format!("command: {}\n", self.command);
        for (key, value) in &self.verdicts {
            match value {
                Value::String(s) => out.push_str(&format!("{key}: {s}\n")),
                other => out.push_str(&format!("{key}: {other}\n")),
            }
        }
        if self.artifacts_written.is_empty() {
            out.push_str("artifacts: none\n");
        } else {
            out.push_str(&format!("artifacts: {}\n", self.artifacts_written.join(", ")));
        }
        out
    }
}

/// A completed command: the report plus whether the verdict was positive.
struct Outcome {
    report: RunReport,
    pass: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(outcome) => {
            if cli.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&outcome.report).expect("report serializes")
                );
            } else {
                print!("{}", outcome.report.render_text());
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run(command: &Command) -> Result<Outcome, String> {
    match command {
        Command::Analyze { model } => cmd_analyze(model),
        Command::Synthesize { model, mode, output } => cmd_synthesize(model, *mode, output),
        Command::Verify { model, gains } => cmd_verify(model, gains),
        Command::Simulate {
            model,
            gains,
            x0,
            steps,
            realization,
            output,
        } => cmd_simulate(model, gains.as_deref(), x0, *steps, *realization, output),
        Command::Sweep {
            model,
            params,
            mode,
            output,
        } => cmd_sweep(model, params, *mode, output),
    }
}

fn load(path: &PathBuf) -> Result<FuzzyModel, String> {
    load_model(path).map_err(|e| e.to_string())
}

fn stability_value(analysis: &StabilityAnalysis) -> Value {
    match analysis.verdict.certificate() {
        Some(cert) => json!({
            "feasible": true,
            "margin": cert.margin,
            "p": cert.p.to_vec(),
        }),
        None => json!({
            "feasible": false,
            "margin": analysis.margin,
        }),
    }
}

fn cmd_analyze(model_path: &PathBuf) -> Result<Outcome, String> {
    let model = load(model_path)?;
    let mut report = RunReport::new("analyze");

    let positivity = check_model_positivity(&model);
    report.set("positive", json!(positivity.positive));
    if !positivity.positive {
        report.set(
            "positivity_violations",
            json!(positivity
                .violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()),
        );
    }

    let mut warnings = Vec::new();
    let mut any_feasible = false;
    for (key, variant) in [("lp1", StabilityVariant::Lp1), ("lp2", StabilityVariant::Lp2)] {
        let analysis = certify_stability(&model, variant).map_err(|e| e.to_string())?;
        any_feasible |= analysis.verdict.is_feasible();
        report.set(key, stability_value(&analysis));
        for w in analysis.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }

    let uppers: Vec<_> = model.rules.iter().map(|r| r.a.upper.clone()).collect();
    let radii = spectral_radii(&uppers).map_err(|e| e.to_string())?;
    report.set("rule_upper_radii", json!(radii));
    report.set("margin_threshold", json!(margin_threshold()));
    if !warnings.is_empty() {
        report.set("warnings", json!(warnings));
    }

    Ok(Outcome {
        report,
        pass: any_feasible,
    })
}

fn cmd_synthesize(
    model_path: &PathBuf,
    mode: Option<SynthesisMode>,
    output: &Option<PathBuf>,
) -> Result<Outcome, String> {
    let model = load(model_path)?;
    let outcome = synthesize(&model, mode).map_err(|e| e.to_string())?;

    let mut report = RunReport::new("synthesize");
    report.set("mode", json!(outcome.mode.to_string()));
    report.set(
        "mode_source",
        json!(if outcome.auto_mode { "auto" } else { "requested" }),
    );
    report.set("margin_threshold", json!(margin_threshold()));
    if !outcome.warnings.is_empty() {
        report.set("warnings", json!(outcome.warnings));
    }

    match outcome.verdict.certificate() {
        Some(result) => {
            report.set("feasible", json!(true));
            report.set("margin", json!(result.margin));
            report.set("p", json!(result.p.to_vec()));
            report.set(
                "gains",
                json!(result.gains.iter().map(|k| k.to_rows()).collect::<Vec<_>>()),
            );
            if let Some(path) = output {
                let gains = Gains::from_result(outcome.mode, result);
                save_gains(&gains, path).map_err(|e| e.to_string())?;
                report.artifacts_written.push(path.display().to_string());
            }
            Ok(Outcome { report, pass: true })
        }
        None => {
            report.set("feasible", json!(false));
            report.set("margin", json!(outcome.margin));
            Ok(Outcome {
                report,
                pass: false,
            })
        }
    }
}

fn cmd_verify(model_path: &PathBuf, gains_path: &PathBuf) -> Result<Outcome, String> {
    let model = load(model_path)?;
    let gains = load_gains(gains_path).map_err(|e| e.to_string())?;
    let check = verify_closed_loop(&model, &gains.gains).map_err(|e| e.to_string())?;

    let mut report = RunReport::new("verify");
    report.set("pass", json!(check.pass));
    report.set("outputs_nonnegative", json!(check.outputs_nonneg));
    report.set(
        "vertices",
        json!(check
            .vertices
            .iter()
            .map(|v| {
                json!({
                    "plant_rule": v.plant_rule,
                    "gain_rule": v.gain_rule,
                    "verdict": format!("{:?}", v.verdict),
                    "min_lower_entry": v.min_lower_entry,
                    "upper_radius": v.upper_radius,
                })
            })
            .collect::<Vec<_>>()),
    );

    Ok(Outcome {
        report,
        pass: check.pass,
    })
}

fn parse_x0(text: &str) -> Result<Vec64, String> {
    let values = text
        .split(',')
        .map(|chunk| {
            chunk
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("bad x0 entry `{}`", chunk.trim()))
        })
        .collect::<Result<Vec<f64>, String>>()?;
    Vec64::new(values).map_err(|e| format!("bad x0: {e}"))
}

fn cmd_simulate(
    model_path: &PathBuf,
    gains_path: Option<&std::path::Path>,
    x0_text: &str,
    steps: usize,
    realization: Realization,
    output: &Option<PathBuf>,
) -> Result<Outcome, String> {
    let model = load(model_path)?;
    let gains = match gains_path {
        Some(path) => Some(load_gains(path).map_err(|e| e.to_string())?),
        None => None,
    };
    let x0 = parse_x0(x0_text)?;
    let trajectory = simulate(
        &model,
        gains.as_ref().map(|g| g.gains.as_slice()),
        &x0,
        steps,
        realization,
    )
    .map_err(|e| e.to_string())?;

    let norms = trajectory.state_norms();
    let last = trajectory.steps.last().expect("at least one record");
    let mut report = RunReport::new("simulate");
    report.set("steps", json!(steps));
    report.set("realization", json!(realization.to_string()));
    report.set("closed_loop", json!(gains.is_some()));
    report.set("initial_norm", json!(norms[0]));
    report.set("final_norm", json!(norms[norms.len() - 1]));
    report.set("final_state", json!(last.x.to_vec()));
    let min_entry = trajectory
        .steps
        .iter()
        .flat_map(|rec| rec.x.iter())
        .cloned()
        .fold(f64::INFINITY, f64::min);
    report.set("min_state_entry", json!(min_entry));
    if !trajectory.warnings.is_empty() {
        report.set("warnings", json!(trajectory.warnings));
    }
    if let Some(path) = output {
        export_csv(&trajectory, path).map_err(|e| e.to_string())?;
        report.artifacts_written.push(path.display().to_string());
    }

    Ok(Outcome { report, pass: true })
}

fn parse_param(text: &str) -> Result<ParamSpec, String> {
    let (path_text, range_text) = text
        .split_once('=')
        .ok_or_else(|| format!("bad param `{text}`: expected `path=start:stop:step`"))?;
    let path = path_text.trim().parse().map_err(|e| format!("{e}"))?;
    let parts: Vec<&str> = range_text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("bad param `{text}`: range must be `start:stop:step`"));
    }
    let nums = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad range number `{}`", p.trim()))
        })
        .collect::<Result<Vec<f64>, String>>()?;
    Ok(ParamSpec {
        path,
        start: nums[0],
        stop: nums[1],
        step: nums[2],
    })
}

fn cmd_sweep(
    model_path: &PathBuf,
    params: &[String],
    mode: Option<SynthesisMode>,
    output: &Option<PathBuf>,
) -> Result<Outcome, String> {
    let model = load(model_path)?;
    let specs = params
        .iter()
        .map(|p| parse_param(p))
        .collect::<Result<Vec<ParamSpec>, String>>()?;
    let grid = feasibility_region(&model, &specs, mode).map_err(|e| e.to_string())?;

    // Row-major rows `value[,value],flag`, matching the grid layout.
    let mut csv = String::new();
    let inner: &[f64] = grid.axes.get(1).map(|a| a.as_slice()).unwrap_or(&[]);
    let mut cursor = grid.feasible.iter();
    for outer in &grid.axes[0] {
        if inner.is_empty() {
            let flag = cursor.next().expect("grid sized to axes");
            csv.push_str(&format!("{outer},{}\n", u8::from(*flag)));
        } else {
            for value in inner {
                let flag = cursor.next().expect("grid sized to axes");
                csv.push_str(&format!("{outer},{value},{}\n", u8::from(*flag)));
            }
        }
    }

    let feasible_count = grid.feasible.iter().filter(|f| **f).count();
    let mut report = RunReport::new("sweep");
    report.set(
        "params",
        json!(specs.iter().map(|s| s.path.to_string()).collect::<Vec<_>>()),
    );
    report.set(
        "grid_shape",
        json!(grid.axes.iter().map(|a| a.len()).collect::<Vec<_>>()),
    );
    report.set("grid_points", json!(grid.len()));
    report.set("feasible_points", json!(feasible_count));
    report.set("margin_threshold", json!(margin_threshold()));
    if let Some(path) = output {
        std::fs::write(path, &csv).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        report.artifacts_written.push(path.display().to_string());
    }

    Ok(Outcome {
        report,
        pass: feasible_count > 0,
    })
}
