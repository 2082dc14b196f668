//! Command-line front end. Exit codes: 0 success, 1 verification failure,
//! 2 config or input error, 3 domain escape.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig, OutputSpec};
use super::experiment::{run_experiment, sampling_for};
use super::output::{to_json, trace_csv};
use super::presets::preset;
use super::verify::verify;
use crate::certificates::{
    asymptotic_certificate, compose_certificates, cyclic_projections_certificate,
    derive_certificate, km_certificate, prox_certificate, prox_km_prox_certificate,
    prox_prox_certificate, projected_gradient_certificate, rate_from_certificate,
    AsymptoticBuilder, Certificate,
};
use crate::error::{Error, Result};
use crate::operators::barycenter;
use crate::regularity::{estimate_subregularity, firmness_frontier};
use crate::spaces::{local_convexity_constant, ModelSpace, Point, SpaceKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "geoprox", version, about = "Proximal fixed-point experiments on geodesic spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Iterate an operator and report rates against the certificate.
    Run(RunArgs),
    /// Sampled firmness violation and subregularity modulus.
    Estimate(EstimateArgs),
    /// Certificate from the calculus.
    Certify(CertifyArgs),
    /// Rate predicted by a certificate and a modulus.
    Rate(RateArgs),
    /// Weighted p-barycenter of points.
    Barycenter(BarycenterArgs),
    /// Run the invariant suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct Source {
    /// Experiment config (JSON, schema geoprox-config/1).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Preset such as `two_halfspaces(pi/4)`.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving the trace CSV and report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// What to print when no output directory is given.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Firmness constants to test; defaults to the calculus constant.
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CertKind {
    Prox,
    ProxProx,
    Km,
    ProjectedGradient,
    ProxKmProx,
    Cyclic,
    Asymptotic,
    Compose,
    /// Derive from the operator of `--config` or `--preset`.
    Operator,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LimitKind {
    Prox,
    ProxProx,
    ProxAfter,
    Km,
    ProjectedGradient,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(value_enum)]
    kind: CertKind,
    /// Convexity modulus; defaults to the cap constant when `--delta` is set,
    /// else 2.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, value_enum, default_value = "prox")]
    of: LimitKind,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    epsilon0: Option<f64>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    epsilon1: Option<f64>,
    #[command(flatten)]
    source: Source,
}

#[derive(Debug, Args)]
struct RateArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 2.0)]
    c: f64,
}

#[derive(Debug, Args)]
struct BarycenterArgs {
    /// JSON file with `space`, `points`, `weights` and optional `p`.
    #[arg(long, conflicts_with = "json")]
    input: Option<PathBuf>,
    /// The same JSON given inline.
    #[arg(long)]
    json: Option<String>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving `verify.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BarycenterInput {
    space: SpaceKind,
    points: Vec<Point>,
    weights: Vec<f64>,
    #[serde(default = "two")]
    p: f64,
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    config: ExperimentConfig,
    seed: u64,
    fixed_point: Point,
    firmness: crate::regularity::FirmnessEstimate,
    subregularity: crate::regularity::SubregularityEstimate,
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

fn exit_for(e: &Error) -> i32 {
    if e.is_domain_escape() {
        EXIT_DOMAIN
    } else {
        EXIT_CONFIG
    }
}

/// Parse `args` (including the program name) and run. Output goes to the
/// given writers.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_CONFIG;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    let mut io = Io { out, err };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, &mut io),
        Command::Estimate(a) => cmd_estimate(a, &mut io),
        Command::Certify(a) => cmd_certify(a, &mut io),
        Command::Rate(a) => cmd_rate(a, &mut io),
        Command::Barycenter(a) => cmd_barycenter(a, &mut io),
        Command::Verify(a) => cmd_verify(a, &mut io),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            exit_for(&e)
        }
    }
}

fn load(source: &Source) -> Result<Experiment> {
    let cfg = match (&source.config, &source.preset) {
        (Some(p), None) => ExperimentConfig::from_path(p)?,
        (None, Some(name)) => preset(name)?,
        _ => return Err(Error::config("<cli>", "give exactly one of --config or --preset")),
    };
    cfg.resolve()
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::config(dir.display().to_string(), e.to_string()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
}

fn emit(io: &mut Io, text: &str) -> Result<()> {
    io.out
        .write_all(text.as_bytes())
        .map_err(|e| Error::config("<stdout>", e.to_string()))
}

fn cmd_run(a: RunArgs, io: &mut Io) -> Result<i32> {
    let exp = load(&a.source)?;
    let outcome = run_experiment(&exp, a.seed)?;
    let csv = trace_csv(&exp.space, &outcome.trace);
    let json = to_json(&outcome.report);
    let spec = exp.config.output.clone().unwrap_or_default();
    let dir = a.out.clone().or_else(|| spec.dir.clone().map(PathBuf::from));
    match dir {
        Some(d) => {
            let OutputSpec { trace, report, .. } = spec;
            write_file(&d, &trace, &csv)?;
            write_file(&d, &report, &json)?;
            let _ = writeln!(io.err, "wrote {} and {}", d.join(trace).display(), d.join(report).display());
        }
        None => emit(
            io,
            match a.format {
                Format::Csv => &csv,
                Format::Json => &json,
            },
        )?,
    }
    Ok(if outcome.escaped() {
        EXIT_DOMAIN
    } else if outcome.report.pass {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}

fn cmd_estimate(a: EstimateArgs, io: &mut Io) -> Result<i32> {
    let exp = load(&a.source)?;
    let fix = exp
        .fixed_set
        .clone()
        .ok_or(Error::UnknownFixedSet)?;
    let spec = sampling_for(&exp, &fix, a.seed)?
        .ok_or_else(|| Error::EmptySample("the start point is already fixed".into()))?;
    let y = fix.nearest_point(&exp.space, &exp.x0)?;
    let alphas = if a.alphas.is_empty() {
        vec![derive_certificate(&exp.operator, exp.space.c(), exp.space.p())?.alpha]
    } else {
        a.alphas
    };
    let firmness = firmness_frontier(&exp.space, &exp.operator, &y, &alphas, &spec)?;
    let mut sub_spec = spec.clone();
    if sub_spec.exclusion_radius == 0.0 {
        sub_spec.exclusion_radius = 1e-9;
    }
    let subregularity = estimate_subregularity(&exp.space, &exp.operator, &fix, &sub_spec)?;
    let report = EstimateReport {
        config: exp.config.clone(),
        seed: spec.seed,
        fixed_point: y,
        firmness,
        subregularity,
    };
    let json = to_json(&report);
    match a.out {
        Some(d) => write_file(&d, "estimate.json", &json)?,
        None => emit(io, &json)?,
    }
    Ok(EXIT_OK)
}

fn need(v: Option<f64>, name: &'static str) -> Result<f64> {
    v.ok_or_else(|| Error::config(format!("--{name}"), "required for this certificate"))
}

fn cmd_certify(a: CertifyArgs, io: &mut Io) -> Result<i32> {
    let c = match (a.c, a.delta) {
        (Some(c), _) => c,
        (None, Some(d)) => local_convexity_constant(a.kappa, d)?,
        (None, None) => 2.0,
    };
    let json = match a.kind {
        CertKind::Prox => to_json(&with_p(prox_certificate(c)?, a.p)),
        CertKind::ProxProx => to_json(&with_p(prox_prox_certificate(c)?, a.p)),
        CertKind::Km => to_json(&km_certificate(&with_p(prox_certificate(c)?, a.p), a.beta)?),
        CertKind::ProjectedGradient => to_json(&projected_gradient_certificate(a.beta, c, a.p)?),
        CertKind::ProxKmProx => to_json(&prox_km_prox_certificate(c, a.beta, a.p)?),
        CertKind::Cyclic => to_json(&cyclic_projections_certificate(a.n)?),
        CertKind::Compose => {
            let c0 = Certificate::new(need(a.alpha0, "alpha0")?, need(a.epsilon0, "epsilon0")?, a.p, c, "t0")?;
            let c1 = Certificate::new(need(a.alpha1, "alpha1")?, need(a.epsilon1, "epsilon1")?, a.p, c, "t1")?;
            to_json(&compose_certificates(&c0, &c1, c)?)
        }
        CertKind::Asymptotic => {
            let delta = need(a.delta, "delta")?;
            let builder = match a.of {
                LimitKind::Prox => AsymptoticBuilder::Prox,
                LimitKind::ProxProx => AsymptoticBuilder::ProxProx,
                LimitKind::ProxAfter => AsymptoticBuilder::ProxAfter {
                    alpha0: need(a.alpha0, "alpha0")?,
                    epsilon0: a.epsilon0.unwrap_or(0.0),
                },
                LimitKind::Km => AsymptoticBuilder::Km { beta: a.beta, p: a.p },
                LimitKind::ProjectedGradient => AsymptoticBuilder::ProjectedGradient { beta: a.beta, p: a.p },
            };
            to_json(&asymptotic_certificate(builder, a.kappa, delta)?)
        }
        CertKind::Operator => {
            let exp = load(&a.source)?;
            to_json(&derive_certificate(&exp.operator, exp.space.c(), exp.space.p())?)
        }
    };
    emit(io, &json)?;
    Ok(EXIT_OK)
}

fn with_p(mut c: Certificate, p: f64) -> Certificate {
    c.p = p;
    c
}

fn cmd_rate(a: RateArgs, io: &mut Io) -> Result<i32> {
    let cert = Certificate::new(a.alpha, a.epsilon, a.p, a.c, "cli")?;
    emit(io, &to_json(&rate_from_certificate(&cert, a.mu)?))?;
    Ok(EXIT_OK)
}

fn cmd_barycenter(a: BarycenterArgs, io: &mut Io) -> Result<i32> {
    let (text, origin) = match (&a.input, &a.json) {
        (Some(p), None) => (
            std::fs::read_to_string(p).map_err(|e| Error::config(p.display().to_string(), e.to_string()))?,
            p.display().to_string(),
        ),
        (None, Some(j)) => (j.clone(), "--json".to_string()),
        _ => return Err(Error::config("<cli>", "give exactly one of --input or --json")),
    };
    let de = &mut serde_json::Deserializer::from_str(&text);
    let input: BarycenterInput = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::config(format!("{origin}:{}", e.path()), e.into_inner().to_string()))?;
    let space = ModelSpace::from_kind(input.space)?;
    let z = barycenter(&space, &input.points, &input.weights, input.p)?;
    emit(io, &to_json(&z))?;
    Ok(EXIT_OK)
}

fn cmd_verify(a: VerifyArgs, io: &mut Io) -> Result<i32> {
    let report = verify(a.seed);
    let json = to_json(&report);
    match a.out {
        Some(d) => write_file(&d, "verify.json", &json)?,
        None => emit(io, &json)?,
    }
    for c in &report.checks {
        let _ = writeln!(io.err, "{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_errors_map_to_their_own_code() {
        assert_eq!(exit_for(&Error::OutsideDomain("x".into())), EXIT_DOMAIN);
        assert_eq!(exit_for(&Error::Antipodal), EXIT_DOMAIN);
        assert_eq!(exit_for(&Error::Unsupported("x".into())), EXIT_CONFIG);
    }

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli(
            std::iter::once("geoprox").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn certify_prox_at_two() {
        let (code, out, _) = call(&["certify", "prox", "--c", "2"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["alpha"], 0.5);
        assert_eq!(v["epsilon"], 0.0);
    }

    #[test]
    fn rate_json() {
        let (code, out, _) = call(&["rate", "--alpha", "0.5", "--mu", "2"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["validity"], "valid");
        assert_eq!(v["mu_upper"], "+inf");
    }

    #[test]
    fn bad_inputs_exit_two() {
        assert_eq!(call(&["frobnicate"]).0, EXIT_CONFIG);
        assert_eq!(call(&["run", "--preset", "nope"]).0, EXIT_CONFIG);
        assert_eq!(call(&["run"]).0, EXIT_CONFIG);
        assert_eq!(call(&["certify", "compose"]).0, EXIT_CONFIG);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn barycenter_inline() {
        let (code, out, _) = call(&[
            "barycenter",
            "--json",
            r#"{"space": {"kind": "euclidean", "dim": 2}, "points": [[0, 0], [2, 0]], "weights": [0.5, 0.5]}"#,
        ]);
        assert_eq!(code, 0);
        let p: Vec<f64> = serde_json::from_str(&out).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
    }

    #[test]
    fn run_halfspaces_csv_tail() {
        let (code, out, _) = call(&["run", "--preset", "two_halfspaces(pi/4)"]);
        assert_eq!(code, 0);
        let ratios: Vec<f64> = out
            .lines()
            .skip(2)
            .filter_map(|l| l.rsplit(',').next().and_then(|r| r.parse().ok()))
            .collect();
        let tail = &ratios[ratios.len() / 2..];
        assert!(tail.iter().all(|r| (r - 0.5).abs() <= 0.01));
    }
}
