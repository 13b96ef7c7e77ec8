use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mfold::decomposition::{level, level_minimality_check, minimal_elliptic_subcurve};
use mfold::degeneration::{stable_limit_traced, weighted_reduce_traced, DegenerationModel};
use mfold::enumeration::{build_poset, enumerate_strata};
use mfold::io::{
    emit_dot_frames, emit_dot_model, emit_dot_poset, model_to_json, parse_model, parse_tail, parse_weights, signature,
};
use mfold::model::{CurveModel, WeightVector};
use mfold::stability::is_mA_stable;
use mfold::tails::{discrepancy_closed_form, discrepancy_solve};

#[derive(Parser)]
#[command(name = "mfold", version, about = "Stable pointed genus-one curves: checks, limits and strata")]
struct Cli {
    /// Output format for results on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Structural validation of a model file.
    Validate { input: PathBuf },
    /// Minimal elliptic subcurve and its rational trees.
    Decompose { input: PathBuf },
    /// Level of the minimal elliptic subcurve; with --m, the level condition.
    Level {
        input: PathBuf,
        #[arg(long)]
        m: Option<usize>,
    },
    /// (m,A)-stability with itemised failures.
    Check {
        input: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Balanced test or discrepancy divisor of a semistable tail.
    Tail {
        input: PathBuf,
        #[arg(long, conflicts_with = "discrepancy", required_unless_present = "discrepancy")]
        check: bool,
        #[arg(long)]
        discrepancy: bool,
    },
    /// m-stable limit of a family with the given semistable special fibre.
    Limit {
        input: PathBuf,
        #[arg(long)]
        m: usize,
        /// Write one DOT graph per pipeline frame.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// (m,A)-stable limit: the m-stable limit followed by weighted contractions.
    Reduce {
        input: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Equisingular strata of (m,A)-stable n-pointed curves.
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Also compute witness-certified specialisations.
        #[arg(long)]
        poset: bool,
        /// Write the strata (and poset) as DOT.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Component bound for the witness search; defaults to n + 2.
        #[arg(long)]
        bound: Option<usize>,
    },
}

/// Failure carrying its exit code.
struct Exit {
    code: u8,
    message: String,
}

fn malformed(e: impl std::fmt::Display) -> Exit {
    Exit { code: 2, message: e.to_string() }
}

fn read(path: &Path) -> Result<String, Exit> {
    fs::read_to_string(path).map_err(|e| malformed(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<CurveModel, Exit> {
    parse_model(&read(path)?).map_err(|e| malformed(format!("{}: {e}", path.display())))
}

fn load_valid(path: &Path) -> Result<CurveModel, Exit> {
    let model = load_model(path)?;
    let report = model.validate();
    if !report.is_valid() {
        let detail = serde_json::to_string(&report.violations).unwrap_or_default();
        return Err(malformed(format!("{}: invalid model: {detail}", path.display())));
    }
    Ok(model)
}

fn load_weights(path: &Path) -> Result<WeightVector, Exit> {
    parse_weights(&read(path)?).map_err(|e| malformed(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Exit> {
    fs::write(path, text).map_err(|e| malformed(format!("{}: {e}", path.display())))
}

/// What a command produced: JSON, optional DOT rendering, a summary line and a status.
struct Outcome {
    json: Value,
    dot: Option<String>,
    summary: String,
    ok: bool,
}

impl Outcome {
    fn ok(json: Value, summary: String) -> Self {
        Outcome { json, dot: None, summary, ok: true }
    }
}

fn run(cli: &Cli) -> Result<Outcome, Exit> {
    match &cli.command {
        Command::Validate { input } => {
            let model = load_model(input)?;
            let report = model.validate();
            let ok = report.is_valid();
            let summary = if ok {
                "valid".to_string()
            } else {
                format!("invalid: {} violation(s)", report.violations.len())
            };
            Ok(Outcome { json: json!({ "valid": ok, "violations": report.violations }), dot: None, summary, ok })
        }
        Command::Decompose { input } => {
            let model = load_valid(input)?;
            let dec = minimal_elliptic_subcurve(&model).map_err(malformed)?;
            let summary = format!("Z = {:?}, {} tree(s)", dec.z_components, dec.trees.len());
            Ok(Outcome { json: json!(dec), dot: Some(emit_dot_model(&model, "curve")), summary, ok: true })
        }
        Command::Level { input, m } => {
            let model = load_valid(input)?;
            match m {
                None => {
                    let l = level(&model).map_err(malformed)?;
                    Ok(Outcome::ok(json!({ "level": l }), format!("level {l}")))
                }
                Some(m) => {
                    let check = level_minimality_check(&model, *m).map_err(malformed)?;
                    let summary = format!("level {}, condition level > {m} {}", check.level, pass(check.passes));
                    Ok(Outcome { json: json!(check), dot: None, summary, ok: check.passes })
                }
            }
        }
        Command::Check { input, m, weights } => {
            let model = load_valid(input)?;
            let weights = match weights {
                Some(p) => load_weights(p)?,
                None => model.own_weights(),
            };
            let report = is_mA_stable(&model, *m, &weights).map_err(malformed)?;
            let mut summary = if report.stable { "stable".to_string() } else { "not stable".to_string() };
            for f in &report.failures {
                summary.push_str(&format!("\n  {f}"));
            }
            let ok = report.stable;
            Ok(Outcome { json: json!(report), dot: None, summary, ok })
        }
        Command::Tail { input, check, .. } => {
            let tail = parse_tail(&read(input)?).map_err(|e| malformed(format!("{}: {e}", input.display())))?;
            if *check {
                let balanced = tail.is_balanced();
                let distances: Vec<usize> =
                    tail.attach().iter().map(|a| tail.distance_to_core(a.component).unwrap_or(usize::MAX)).collect();
                let summary = if balanced { "balanced" } else { "not balanced" }.to_string();
                return Ok(Outcome {
                    json: json!({ "balanced": balanced, "attach_distances": distances }),
                    dot: None,
                    summary,
                    ok: balanced,
                });
            }
            let solution = discrepancy_solve(&tail).map_err(malformed)?;
            let closed = discrepancy_closed_form(&tail).ok();
            let ok = solution.divisor().is_some();
            let summary = match solution.divisor() {
                Some(d) => format!("D = {}", fmt_divisor(&d.coefficients)),
                None => "no integral discrepancy divisor".to_string(),
            };
            Ok(Outcome { json: json!({ "solution": solution, "closed_form": closed }), dot: None, summary, ok })
        }
        Command::Limit { input, m, trace } => {
            let fiber = load_valid(input)?;
            let model = DegenerationModel::new(fiber).map_err(malformed)?;
            let run = stable_limit_traced(&model, *m).map_err(malformed)?;
            if let Some(p) = trace {
                write(p, &emit_dot_frames(&run.frames))?;
            }
            let out = run.model.fiber();
            let summary = format!("{} iteration(s), levels {:?}: {}", run.iterations, run.levels, signature(out));
            Ok(Outcome {
                json: json!({
                    "limit": model_to_json(out),
                    "levels": run.levels,
                    "iterations": run.iterations,
                    "moves": run.model.history().moves(),
                    "frames": run.frames.iter().map(|f| &f.label).collect::<Vec<_>>(),
                }),
                dot: Some(emit_dot_model(out, "limit")),
                summary,
                ok: true,
            })
        }
        Command::Reduce { input, m, weights, trace } => {
            let fiber = load_valid(input)?;
            let weights = load_weights(weights)?;
            let fiber = fiber.with_weights(&weights).map_err(malformed)?;
            let model = DegenerationModel::new(fiber).map_err(malformed)?;
            let limit = stable_limit_traced(&model, *m).map_err(malformed)?;
            let run = weighted_reduce_traced(&limit.model, *m, &weights).map_err(malformed)?;
            if let Some(p) = trace {
                let frames: Vec<_> = limit.frames.iter().chain(&run.frames).cloned().collect();
                write(p, &emit_dot_frames(&frames))?;
            }
            let out = run.model.fiber();
            let summary = format!("contracted {:?}: {}", run.contracted, signature(out));
            Ok(Outcome {
                json: json!({
                    "limit": model_to_json(out),
                    "contracted": run.contracted,
                    "moves": run.model.history().moves(),
                }),
                dot: Some(emit_dot_model(out, "limit")),
                summary,
                ok: true,
            })
        }
        Command::Enumerate { n, m, weights, poset, dot, bound } => {
            let weights = weights.as_deref().map(load_weights).transpose()?;
            let strata = enumerate_strata(*n, *m, weights.as_ref()).map_err(malformed)?;
            let edges = if *poset { build_poset(&strata, *m, bound.unwrap_or(n + 2)) } else { Vec::new() };
            let position = |s: &mfold::Stratum| strata.iter().position(|t| t.form == s.form).unwrap();
            let strata_json: Vec<Value> = strata
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    json!({
                        "index": i,
                        "dimension": s.dimension,
                        "signature": signature(&s.representative),
                        "model": model_to_json(&s.representative),
                    })
                })
                .collect();
            let mut doc = json!({ "n": n, "m": m, "strata": strata_json });
            if *poset {
                doc["witness_certified_edges"] = edges
                    .iter()
                    .map(|e| {
                        json!({
                            "from": position(&e.from),
                            "to": position(&e.to),
                            "witness": model_to_json(e.witness.fiber()),
                        })
                    })
                    .collect();
            }
            let title = format!("n={n}, m={m}");
            let rendered = emit_dot_poset(&strata, &edges, &title);
            if let Some(p) = dot {
                write(p, &rendered)?;
            }
            let summary = format!("{} strata, {} edge(s)", strata.len(), edges.len());
            Ok(Outcome { json: doc, dot: Some(rendered), summary, ok: true })
        }
    }
}

fn pass(b: bool) -> &'static str {
    if b {
        "holds"
    } else {
        "fails"
    }
}

fn fmt_divisor(d: &std::collections::BTreeMap<mfold::ComponentId, i64>) -> String {
    let terms: Vec<String> = d.iter().map(|(c, k)| format!("{k}*{c}")).collect();
    terms.join(" + ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            match (cli.format, &out.dot) {
                (Format::Dot, Some(dot)) => print!("{dot}"),
                _ => println!("{}", serde_json::to_string_pretty(&out.json).expect("JSON output")),
            }
            eprintln!("{}", out.summary);
            ExitCode::from(if out.ok { 0 } else { 1 })
        }
        Err(e) => {
            println!("{}", json!({ "error": e.message }));
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

