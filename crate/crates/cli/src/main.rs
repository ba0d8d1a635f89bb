use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use scvar::feature_model::{kernel, nsf, validate_configuration, Configuration};
use scvar::fuzz::fuzz;
use scvar::generate::Limits;
use scvar::io::{parse_configuration, parse_document, parse_product_line, serialize_statechart, serialize_trace};
use scvar::io::{Document, IoError, ProductLineDocument};
use scvar::strategy::{
    check_confluence, check_confluence_exhaustive, instantiate, validate_all, validate_product_line, InstantiateError,
};
use scvar::{check_well_formed_star, export_dot, nsc};

const EXIT_VALIDATION: u8 = 1;
const EXIT_SYNTAX: u8 = 2;
const EXIT_REWRITE: u8 = 3;

#[derive(Parser)]
#[command(name = "scvar", version, about = "Instantiate statecharts from a feature-model product line")]
struct Cli {
    /// Print one JSON object on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a product line (or a bare statechart) for violations.
    Validate { file: PathBuf },
    /// List the kernel features.
    Kernel { product_line: PathBuf },
    /// Check a configuration against the product line's feature model.
    ConfigCheck { product_line: PathBuf, configuration: PathBuf },
    /// List non-selected features and the elements they remove.
    Nsc { product_line: PathBuf, configuration: PathBuf },
    /// Build the concrete statechart for a configuration.
    Instantiate {
        product_line: PathBuf,
        configuration: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare instantiations under different rule orders.
    Confluence {
        product_line: PathBuf,
        configuration: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Let elements still pending deletion count for reachability.
        #[arg(long)]
        paper_literal: bool,
        /// Try every order instead of sampling.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Generate random product lines and check every property on them.
    Fuzz {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        max_depth: usize,
        #[arg(long, default_value_t = 4)]
        max_substates: usize,
        #[arg(long, default_value_t = 8)]
        max_features: usize,
    },
}

/// What a command prints and how it exits.
struct Report {
    json: Value,
    text: String,
    exit: u8,
}

impl Report {
    fn ok(json: Value, text: String) -> Self {
        Self { json, text, exit: 0 }
    }
}

struct Failure {
    exit: u8,
    code: &'static str,
    message: String,
    details: Value,
}

impl Failure {
    fn new(exit: u8, code: &'static str, message: impl Into<String>) -> Self {
        Self { exit, code, message: message.into(), details: Value::Null }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::new(EXIT_SYNTAX, e.code(), e.to_string())
    }
}

impl From<InstantiateError> for Failure {
    fn from(e: InstantiateError) -> Self {
        let exit = match &e {
            InstantiateError::InvalidInput(_) | InstantiateError::Configuration(_) => EXIT_VALIDATION,
            _ => EXIT_REWRITE,
        };
        let details = match &e {
            InstantiateError::InvalidInput(report) => serde_json::to_value(report).unwrap_or_default(),
            _ => Value::Null,
        };
        Failure { exit, code: e.code(), message: e.to_string(), details }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_SYNTAX, "E_IO", format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::new(EXIT_SYNTAX, "E_IO", format!("{}: {e}", path.display())))
}

fn load(pl: &Path, conf: Option<&Path>) -> Result<(ProductLineDocument, Option<Configuration>), Failure> {
    let doc = parse_product_line(&read(pl)?)?;
    let conf = conf.map(|c| read(c).and_then(|t| Ok(parse_configuration(&t)?))).transpose()?;
    Ok((doc, conf))
}

/// Validation failures become exit 1 with the violation list.
fn require_valid(doc: &ProductLineDocument, conf: &Configuration) -> Result<(), Failure> {
    let report = validate_all(&doc.feature_model, conf, &doc.statechart, &doc.imp)
        .map_err(|e| Failure::new(EXIT_VALIDATION, "E_UNKNOWN_FEATURE", e.to_string()))?;
    if report.is_clean() {
        return Ok(());
    }
    Err(InstantiateError::InvalidInput(report).into())
}

fn lines(items: impl IntoIterator<Item = String>) -> String {
    items.into_iter().map(|s| s + "\n").collect()
}

fn run(command: Command) -> Result<Report, Failure> {
    match command {
        Command::Validate { file } => {
            let (messages, details) = match parse_document(&read(&file)?)? {
                Document::ProductLine(doc) => {
                    let report = validate_product_line(&doc.feature_model, &doc.statechart, &doc.imp);
                    (report.messages(), serde_json::to_value(&report).unwrap_or_default())
                }
                Document::Statechart(sc) => {
                    let violations = check_well_formed_star(&sc);
                    let messages = violations.iter().map(|v| format!("statechart: {v}")).collect();
                    (messages, json!({ "statechart": violations }))
                }
            };
            let valid = messages.is_empty();
            let text = if valid { "valid\n".to_owned() } else { lines(messages.clone()) };
            Ok(Report {
                json: json!({ "valid": valid, "violations": details }),
                text,
                exit: if valid { 0 } else { EXIT_VALIDATION },
            })
        }
        Command::Kernel { product_line } => {
            let (doc, _) = load(&product_line, None)?;
            let k: Vec<String> = kernel(&doc.feature_model).into_iter().collect();
            Ok(Report::ok(json!({ "kernel": k }), lines(k.clone())))
        }
        Command::ConfigCheck { product_line, configuration } => {
            let (doc, conf) = load(&product_line, Some(&configuration))?;
            let conf = conf.unwrap_or_default();
            let violations = validate_configuration(&doc.feature_model, &conf)
                .map_err(|e| Failure::new(EXIT_VALIDATION, "E_UNKNOWN_FEATURE", e.to_string()))?;
            let valid = violations.is_empty();
            let text = if valid { "valid\n".to_owned() } else { lines(violations.iter().map(ToString::to_string)) };
            Ok(Report {
                json: json!({ "valid": valid, "violations": violations }),
                text,
                exit: if valid { 0 } else { EXIT_VALIDATION },
            })
        }
        Command::Nsc { product_line, configuration } => {
            let (doc, conf) = load(&product_line, Some(&configuration))?;
            let conf = conf.unwrap_or_default();
            require_valid(&doc, &conf)?;
            let features: Vec<String> = nsf(&doc.feature_model, &conf).into_iter().collect();
            let elements: Vec<String> = nsc(&doc.feature_model, &conf, &doc.statechart, &doc.imp).into_iter().collect();
            let text = format!(
                "NSF\n{}NSC\n{}",
                lines(features.iter().map(|f| format!("  {f}"))),
                lines(elements.iter().map(|e| format!("  {e}")))
            );
            Ok(Report::ok(json!({ "nsf": features, "nsc": elements }), text))
        }
        Command::Instantiate { product_line, configuration, output, dot, trace } => {
            let (doc, conf) = load(&product_line, Some(&configuration))?;
            let conf = conf.unwrap_or_default();
            let inst = instantiate(&doc.feature_model, &conf, &doc.statechart, &doc.imp)?;
            write(&output, &serialize_statechart(&inst.product))?;
            if let Some(path) = &dot {
                write(path, &export_dot(&inst.product))?;
            }
            if let Some(path) = &trace {
                write(path, &serialize_trace(&inst.trace))?;
            }
            let text = lines(inst.trace.steps.iter().map(|s| format!("{}({})", s.rule, s.subject)));
            Ok(Report::ok(json!({ "output": output, "trace": inst.trace, "nsc": inst.nsc }), text))
        }
        Command::Confluence { product_line, configuration, trials, seed, paper_literal, exhaustive } => {
            let (doc, conf) = load(&product_line, Some(&configuration))?;
            let conf = conf.unwrap_or_default();
            let (fm, sc, imp) = (&doc.feature_model, &doc.statechart, &doc.imp);
            let report = if exhaustive {
                check_confluence_exhaustive(fm, &conf, sc, imp, paper_literal)?
            } else {
                check_confluence(fm, &conf, sc, imp, trials.max(1), seed, paper_literal)?
            };
            let mut text = format!(
                "{} after {} runs (longest trace {}, bound {})\n",
                if report.confluent { "confluent" } else { "NOT confluent" },
                report.trials,
                report.max_trace_len,
                report.step_bound
            );
            if let Some(d) = &report.divergence {
                text += &format!("first order:  {}\nsecond order: {}\n", d.first_order.join(" "), d.second_order.join(" "));
            }
            let exit = if report.confluent { 0 } else { EXIT_REWRITE };
            Ok(Report { json: serde_json::to_value(&report).unwrap_or_default(), text, exit })
        }
        Command::Fuzz { seed, count, max_depth, max_substates, max_features } => {
            let report = fuzz(seed, count, &Limits::new(max_depth, max_substates, max_features));
            let mut text = format!("{} cases, {} failures\n", report.cases, report.failures.len());
            for f in &report.failures {
                text += &format!("seed {}:\n{}", f.seed, lines(f.problems.iter().map(|p| format!("  {p}"))));
            }
            let exit = if report.passed() { 0 } else { EXIT_VALIDATION };
            Ok(Report { json: serde_json::to_value(&report).unwrap_or_default(), text, exit })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(report) => {
            if cli.json {
                println!("{}", report.json);
            } else {
                print!("{}", report.text);
            }
            ExitCode::from(report.exit)
        }
        Err(failure) => {
            if cli.json {
                println!(
                    "{}",
                    json!({ "error": { "code": failure.code, "message": failure.message, "details": failure.details } })
                );
            } else {
                eprintln!("error[{}]: {}", failure.code, failure.message);
            }
            ExitCode::from(failure.exit)
        }
    }
}
