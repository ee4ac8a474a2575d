//! `levocc`: evaluate, validate, sweep and tabulate occupation-time and Parisian ruin identities.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levy_occupation::identity::{self, Params, ValidationReport, Verdict};
use levy_occupation::mc::McConfig;
use levy_occupation::{occupation, Error, LevyModel};
use serde_json::json;

#[derive(Parser)]
#[command(name = "levocc", version, about)]
struct Cli {
    /// Model file (JSON), or an inline JSON object.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Seed of the simulation streams.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Simulation replications.
    #[arg(long, global = true, default_value_t = 100_000)]
    reps: u64,
    /// Write the machine-readable output (JSON or CSV) here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an identity: `eval <identity> --key=value ...`.
    Eval {
        identity: String,
        #[arg(allow_hyphen_values = true, trailing_var_arg = true)]
        params: Vec<String>,
    },
    /// Compare an identity with its simulation estimate.
    Validate {
        identity: String,
        #[arg(allow_hyphen_values = true, trailing_var_arg = true)]
        params: Vec<String>,
    },
    /// Evaluate over a grid: `--key=v`, `--key=v1,v2,..` or `--key=min:max:count`.
    Sweep {
        identity: String,
        #[arg(allow_hyphen_values = true, trailing_var_arg = true)]
        params: Vec<String>,
    },
    /// Tabulate the law of the occupation time: `dist --lambda=.. --x=.. [--r=grid]`.
    Dist {
        #[arg(allow_hyphen_values = true, trailing_var_arg = true)]
        params: Vec<String>,
    },
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

type Outcome<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: &Cli) -> Outcome<ExitCode> {
    let model = load_model(cli.model.as_deref())?;
    match &cli.command {
        Command::Eval { identity, params } => eval(cli, model, identity, params),
        Command::Validate { identity, params } => validate(cli, model, identity, params),
        Command::Sweep { identity, params } => sweep(cli, model, identity, params),
        Command::Dist { params } => dist(cli, model, params),
    }
}

fn load_model(spec: Option<&str>) -> Outcome<LevyModel> {
    let spec = spec.ok_or_else(|| Failure::Usage("--model <path> is required".into()))?;
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        fs::read_to_string(spec).map_err(|e| Failure::Usage(format!("cannot read model file {spec}: {e}")))?
    };
    let model: LevyModel =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid model JSON: {e}")))?;
    model.validate()?;
    Ok(model)
}

/// Splits `--key=value` tokens, rejecting anything else and repeated keys.
fn raw_params(tokens: &[String]) -> Outcome<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for t in tokens {
        let (k, v) = t
            .strip_prefix("--")
            .and_then(|s| s.split_once('='))
            .ok_or_else(|| Failure::Usage(format!("expected --key=value, got `{t}`")))?;
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Failure::Usage(format!("parameter `{k}` given twice")));
        }
    }
    Ok(out)
}

fn number(key: &str, v: &str) -> Outcome<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| Failure::Usage(format!("parameter `{key}`: `{v}` is not a number")))
}

fn scalar_params(tokens: &[String]) -> Outcome<Params> {
    raw_params(tokens)?.iter().map(|(k, v)| Ok((k.clone(), number(k, v)?))).collect()
}

fn spec_for(name: &str) -> Outcome<&'static identity::IdentitySpec> {
    identity::lookup(name).ok_or_else(|| {
        Failure::Usage(format!("unknown identity `{name}`; registered: {}", identity::names().join(", ")))
    })
}

fn checked(name: &str, params: &Params) -> Outcome<()> {
    identity::check_params(spec_for(name)?, params).map_err(Failure::Usage)
}

fn mc_config(cli: &Cli) -> Outcome<McConfig> {
    if cli.reps == 0 {
        return Err(Failure::Usage("--reps must be at least 1".into()));
    }
    Ok(McConfig::new(cli.reps, cli.seed))
}

fn emit(cli: &Cli, machine: &str) -> Outcome<()> {
    match &cli.out {
        Some(path) => fs::write(path, machine)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{machine}");
            Ok(())
        }
    }
}

fn table(rows: &[(String, String)]) -> String {
    let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
}

fn model_rows(model: &LevyModel) -> Vec<(String, String)> {
    match *model {
        LevyModel::BrownianRisk { mu, sigma } => vec![
            ("model".into(), "brownian".into()),
            ("mu".into(), mu.to_string()),
            ("sigma".into(), sigma.to_string()),
        ],
        LevyModel::CramerLundbergExp { c, eta, alpha } => vec![
            ("model".into(), "cramer_lundberg".into()),
            ("c".into(), c.to_string()),
            ("eta".into(), eta.to_string()),
            ("alpha".into(), alpha.to_string()),
        ],
    }
}

/// Prints the human table to stdout, or to stderr when the machine output goes to stdout.
fn human(cli: &Cli, text: &str) {
    if cli.out.is_some() {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
}

fn eval(cli: &Cli, model: LevyModel, name: &str, tokens: &[String]) -> Outcome<ExitCode> {
    let params = scalar_params(tokens)?;
    checked(name, &params)?;
    let cfg = mc_config(cli)?;
    let e = identity::evaluate(model, name, &params, Some(&cfg))?;
    let mut rows = vec![("identity".to_string(), name.to_string())];
    rows.extend(model_rows(&model));
    rows.extend(params.iter().map(|(k, v)| (k.clone(), v.to_string())));
    rows.push(("value".into(), format!("{}", e.value)));
    if e.hybrid {
        rows.push(("std_error".into(), format!("{}", e.std_error)));
        rows.push(("seed".into(), cli.seed.to_string()));
    }
    let doc = json!({
        "identity": name,
        "model": model,
        "params": params,
        "value": e.value,
        "hybrid": e.hybrid,
        "std_error": e.std_error,
    });
    print!("{}", table(&rows));
    if cli.out.is_some() {
        emit(cli, &format!("{doc:#}\n"))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(cli: &Cli, model: LevyModel, name: &str, tokens: &[String]) -> Outcome<ExitCode> {
    let params = scalar_params(tokens)?;
    if identity::lookup(name).is_none() {
        return Err(Failure::Usage(format!(
            "`{name}` has no simulation counterpart; validatable: {}",
            identity::validatable().join(", ")
        )));
    }
    checked(name, &params)?;
    let cfg = mc_config(cli)?;
    if identity::functional(model, name, &params)?.is_none() {
        return Err(Failure::Usage(format!(
            "`{name}` has no simulation counterpart for these parameters; validatable: {}",
            identity::validatable().join(", ")
        )));
    }
    let r = identity::validate(model, name, &params, &cfg)?;
    human(cli, &report_table(&model, &r));
    let doc = json!({ "model": model, "report": r });
    emit(cli, &format!("{doc:#}\n"))?;
    Ok(match r.verdict {
        Verdict::Fail => ExitCode::from(1),
        Verdict::Pass | Verdict::Informational => ExitCode::SUCCESS,
    })
}

fn report_table(model: &LevyModel, r: &ValidationReport) -> String {
    let mut rows = vec![("identity".to_string(), r.identity.clone())];
    rows.extend(model_rows(model));
    rows.extend(r.params.iter().map(|(k, v)| (k.clone(), v.to_string())));
    rows.push(("analytic".into(), format!("{}", r.analytic)));
    rows.push(("mc".into(), format!("{}", r.mc.value)));
    rows.push(("std_error".into(), format!("{}", r.mc.std_error)));
    rows.push(("bias_bound".into(), format!("{:e}", r.mc.truncation_bound)));
    rows.push(("replications".into(), r.mc.replications.to_string()));
    rows.push(("seed".into(), r.seed.to_string()));
    rows.push(("z".into(), format!("{:.3}", r.z_score)));
    let verdict = match r.verdict {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Informational => "informational",
    };
    rows.push(("verdict".into(), verdict.into()));
    table(&rows)
}

/// Parses `v`, `v1,v2,..` or `min:max:count`.
fn grid(key: &str, v: &str) -> Outcome<Vec<f64>> {
    if let Some((lo, rest)) = v.split_once(':') {
        let (hi, count) = rest
            .split_once(':')
            .ok_or_else(|| Failure::Usage(format!("parameter `{key}`: range must be min:max:count")))?;
        let (lo, hi) = (number(key, lo)?, number(key, hi)?);
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("parameter `{key}`: count `{count}` is not an integer")))?;
        return Ok(match count {
            0 => vec![],
            1 => vec![lo],
            _ => (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect(),
        });
    }
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| number(key, s))
        .collect()
}

fn grids(tokens: &[String]) -> Outcome<BTreeMap<String, Vec<f64>>> {
    let mut out = BTreeMap::new();
    for (k, v) in raw_params(tokens)? {
        let g = grid(&k, &v)?;
        if g.is_empty() {
            return Err(Failure::Usage(format!("parameter `{k}`: empty grid")));
        }
        out.insert(k, g);
    }
    Ok(out)
}

/// Cartesian product in lexicographic order (first key slowest).
fn product(g: &BTreeMap<String, Vec<f64>>) -> Vec<Params> {
    let mut rows = vec![Params::new()];
    for (k, vs) in g {
        rows = rows
            .into_iter()
            .flat_map(|row| {
                vs.iter().map(move |v| {
                    let mut r = row.clone();
                    r.insert(k.clone(), *v);
                    r
                })
            })
            .collect();
    }
    rows
}

/// 17 significant digits, which parse back to the same `f64`.
fn csv_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn sweep(cli: &Cli, model: LevyModel, name: &str, tokens: &[String]) -> Outcome<ExitCode> {
    let g = grids(tokens)?;
    let template: Params = g.keys().map(|k| (k.clone(), 0.0)).collect();
    checked(name, &template)?;
    let cfg = mc_config(cli)?;
    let rows = product(&g);
    let hybrid_capable = name == "ruin_prob_erlang_n" || name == "fixed_delay_approx";
    let mut csv = g.keys().cloned().collect::<Vec<_>>().join(",");
    csv.push_str(",value");
    if hybrid_capable {
        csv.push_str(",std_error");
    }
    csv.push('\n');
    for p in rows {
        let e = identity::evaluate(model, name, &p, Some(&cfg))?;
        let mut line: Vec<String> = p.values().map(|v| csv_num(*v)).collect();
        line.push(csv_num(e.value));
        if hybrid_capable {
            line.push(csv_num(e.std_error));
        }
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    emit(cli, &csv)?;
    Ok(ExitCode::SUCCESS)
}

/// Points of the default grid on `(0, r_max]`, clustered at 0 where the density may blow up like `r^{-1/2}`.
const DIST_POINTS: usize = 1000;
/// Density tail mass left beyond the default grid.
const DIST_TAIL: f64 = 1e-6;

fn dist(cli: &Cli, model: LevyModel, tokens: &[String]) -> Outcome<ExitCode> {
    let mut raw = raw_params(tokens)?;
    let r_spec = raw.remove("r");
    let mut p = Params::new();
    for (k, v) in &raw {
        if k != "x" && k != "lambda" {
            return Err(Failure::Usage(format!("unknown parameter `{k}` for dist; accepted: x, lambda, r")));
        }
        p.insert(k.clone(), number(k, v)?);
    }
    let (x, lambda) = match (p.get("x"), p.get("lambda")) {
        (Some(&x), Some(&l)) => (x, l),
        _ => return Err(Failure::Usage("dist requires --x and --lambda".into())),
    };
    model.require_positive_drift("the occupation law")?;
    let law = occupation::occupation_law(model, x, lambda)?;
    let rs = match r_spec {
        Some(s) => {
            let rs = grid("r", &s)?;
            if rs.is_empty() {
                return Err(Failure::Usage("parameter `r`: empty grid".into()));
            }
            if let Some(bad) = rs.iter().find(|r| !(**r > 0.0)) {
                return Err(Failure::Usage(format!("parameter `r`: grid points must be > 0, got {bad}")));
            }
            rs
        }
        None => {
            let r_max = law.tail_r_max(DIST_TAIL);
            (1..=DIST_POINTS)
                .map(|i| r_max * (i as f64 / DIST_POINTS as f64).powi(4))
                .collect()
        }
    };
    let ds = law.density_grid(&rs)?;
    let mut integral = 0.0;
    for i in 1..rs.len() {
        integral += 0.5 * (ds[i] + ds[i - 1]) * (rs[i] - rs[i - 1]);
    }
    let mut csv = String::new();
    let m = serde_json::to_string(&model).unwrap_or_default();
    csv.push_str(&format!("# model {m}\n# x {}\n# lambda {}\n", csv_num(x), csv_num(lambda)));
    csv.push_str(&format!("# atom {}\n", csv_num(law.atom_at_zero)));
    csv.push_str("r,density\n");
    for (r, d) in rs.iter().zip(&ds) {
        csv.push_str(&format!("{},{}\n", csv_num(*r), csv_num(*d)));
    }
    csv.push_str(&format!(
        "# total atom+integral {} (trapezoid over [{}, {}])\n",
        csv_num(law.atom_at_zero + integral),
        csv_num(rs[0]),
        csv_num(rs[rs.len() - 1])
    ));
    emit(cli, &csv)?;
    Ok(ExitCode::SUCCESS)
}
