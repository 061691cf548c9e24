//! `vep`: check, solve and inspect vector equilibrium problems.
//!
//! Exit codes: 0 success, 2 invalid input, 3 solver did not converge. Errors
//! are printed to stderr as `{"error": {"code": …, "message": …}}`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use vep_core::discretize::{density_to_plane, grid_csv};
use vep_core::io::{parse_problem, problem_to_json};
use vep_core::scenarios::{describe, load_builtin, Params, BUILTINS};
use vep_core::sphere::pole_distance;
use vep_core::{
    assemble, classify_admissibility, discretize, map_point, validate_spec, vector_energy, AdmissibilityClass,
    AdmissibilityReport, DiscreteMeasure, ExtendedComplex, GridOptions, ProblemSpec, SolveOptions, ValidatedProblem,
    VepError,
};

#[derive(Parser)]
#[command(
    name = "vep",
    version,
    about = "Vector equilibrium problems with logarithmic interaction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a problem and report its admissibility class.
    Check(Source),
    /// Discretize and solve a problem, writing summary, densities and grids.
    Solve {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        grid: GridArgs,
        /// Target KKT residual.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
        /// Start from a seeded random feasible point instead of the uniform one.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, created if missing.
        #[arg(long, default_value = "vep-out")]
        out: PathBuf,
    },
    /// Print the sphere image of a point (`1+2i`, `-3`, `inf`).
    Map {
        #[arg(allow_hyphen_values = true)]
        point: String,
    },
    /// List the builtin problems, or print one as a problem file.
    Scenario {
        name: Option<String>,
        /// Scenario parameter `key=value`; repeatable.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
    },
    /// Evaluate the energy of given per-cell weights.
    Energy {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        grid: GridArgs,
        /// JSON file `{"weights": [[…], …]}` with one array per component
        /// over the full grid.
        #[arg(long)]
        weights: PathBuf,
    },
}

#[derive(Args)]
struct Source {
    /// Problem file.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    problem: Option<PathBuf>,
    /// Builtin problem name.
    #[arg(long)]
    builtin: Option<String>,
    /// Builtin parameter `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Args)]
struct GridArgs {
    /// Cells per component.
    #[arg(long, default_value_t = GridOptions::default().cells)]
    cells: usize,
    /// Sphere distance kept free around the north pole.
    #[arg(long, default_value_t = GridOptions::default().pole_clearance)]
    pole_clearance: f64,
}

impl GridArgs {
    fn options(&self) -> GridOptions {
        GridOptions {
            cells: self.cells,
            pole_clearance: self.pole_clearance,
        }
    }
}

struct Failure {
    exit: u8,
    code: &'static str,
    message: String,
}

impl From<VepError> for Failure {
    fn from(e: VepError) -> Self {
        let exit = if matches!(e, VepError::MaxIterExceeded { .. }) {
            3
        } else {
            2
        };
        Failure {
            exit,
            code: e.code(),
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        exit: 2,
        code: "Io",
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn parse_params(raw: &[String]) -> CliResult<Params> {
    let mut out = Params::new();
    for item in raw {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| VepError::BadParams(format!("expected key=value, got `{item}`")))?;
        let v = match v.trim() {
            "inf" | "+inf" | "infinity" => f64::INFINITY,
            s => s
                .parse()
                .map_err(|_| VepError::BadParams(format!("`{k}` needs a number, got `{s}`")))?,
        };
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn load(source: &Source) -> CliResult<ProblemSpec> {
    let params = parse_params(&source.params)?;
    match (&source.problem, &source.builtin) {
        (Some(path), _) => {
            if !params.is_empty() {
                return Err(VepError::BadParams("--param only applies to builtins".into()).into());
            }
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            Ok(parse_problem(&text)?)
        }
        (None, Some(name)) => Ok(load_builtin(name, &params)?),
        (None, None) => Err(VepError::BadParams("give --problem or --builtin".into()).into()),
    }
}

fn classify(source: &Source) -> CliResult<(ValidatedProblem, AdmissibilityReport)> {
    let validated = validate_spec(load(source)?)?;
    let report = classify_admissibility(&validated)?;
    Ok((validated, report))
}

fn require_admissible(report: &AdmissibilityReport) -> CliResult<()> {
    match report
        .components
        .iter()
        .find(|c| c.class == AdmissibilityClass::Inadmissible)
    {
        Some(bad) => Err(VepError::Inadmissible {
            component: bad.component,
        }
        .into()),
        None => Ok(()),
    }
}

/// Print to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn print_json<T: Serialize>(value: &T) {
    emit(&serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn write(path: PathBuf, text: &str) -> CliResult<()> {
    fs::write(&path, text).map_err(|e| io_failure(&path, e))
}

fn check(source: &Source) -> CliResult<()> {
    let (validated, report) = classify(source)?;
    print_json(&json!({
        "valid": true,
        "d": validated.dim(),
        "admissibility": report,
    }));
    require_admissible(&report)
}

#[derive(Serialize)]
struct Summary<'a> {
    converged: bool,
    energy: f64,
    kkt_residual: f64,
    iterations: usize,
    #[serde(rename = "Cm")]
    cm: &'a [f64],
    class: &'static str,
    masses: Vec<f64>,
    multipliers: &'a [f64],
    cells: usize,
    pole_clearance: f64,
    tol: f64,
    seed: Option<u64>,
}

fn solve(source: &Source, grid: &GridArgs, opts: SolveOptions, out: &Path) -> CliResult<()> {
    let (validated, report) = classify(source)?;
    require_admissible(&report)?;
    let sp = discretize(&validated, grid.options())?;
    let qp = assemble(&sp)?;
    let s = vep_core::solve(&qp, &opts)?;

    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    for (i, (w, plane)) in s.weights.iter().zip(&sp.plane_grids).enumerate() {
        let mut csv = String::from("x_re,x_im,density,sphere_weight\n");
        for p in density_to_plane(w, plane)? {
            csv.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                p.x.re, p.x.im, p.density, p.sphere_weight
            ));
        }
        write(out.join(format!("density_{}.csv", i + 1)), &csv)?;
        write(out.join(format!("grid_{}.csv", i + 1)), &grid_csv(&sp.grids[i]))?;
    }
    let summary = Summary {
        converged: s.converged,
        energy: s.energy,
        kkt_residual: s.kkt_residual,
        iterations: s.iterations,
        cm: validated.cm(),
        class: report.class.as_str(),
        masses: s.masses(),
        multipliers: &s.multipliers,
        cells: grid.cells,
        pole_clearance: grid.pole_clearance,
        tol: opts.tol,
        seed: opts.seed,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write(out.join("summary.json"), &(text.clone() + "\n"))?;
    emit(&text);
    s.check_converged()?;
    Ok(())
}

fn parse_point(raw: &str) -> CliResult<ExtendedComplex> {
    let s = raw.trim();
    if matches!(s, "inf" | "infinity" | "∞") {
        return Ok(ExtendedComplex::Infinity);
    }
    let bad = || Failure {
        exit: 2,
        code: "Parse",
        message: format!("not a complex number or `inf`: `{raw}`"),
    };
    let z: Complex64 = s.parse().map_err(|_| bad())?;
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(bad());
    }
    Ok(ExtendedComplex::Finite(z))
}

fn map(point: &str) -> CliResult<()> {
    let x = parse_point(point)?;
    let p = map_point(x);
    let pole = match x {
        ExtendedComplex::Finite(z) => pole_distance(z),
        ExtendedComplex::Infinity => 0.0,
    };
    print_json(&json!({ "x1": p.x1, "x2": p.x2, "x3": p.x3, "pole_distance": pole }));
    Ok(())
}

fn scenario(name: Option<&str>, params: &[String]) -> CliResult<()> {
    match name {
        None => {
            let infos = BUILTINS.iter().map(|n| describe(n)).collect::<Result<Vec<_>, _>>()?;
            print_json(&infos);
        }
        Some(name) => {
            let spec = load_builtin(name, &parse_params(params)?)?;
            emit(&problem_to_json(&spec)?);
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct WeightsFile {
    weights: Vec<Vec<f64>>,
}

fn energy(source: &Source, grid: &GridArgs, weights: &Path) -> CliResult<()> {
    let validated = validate_spec(load(source)?)?;
    let sp = discretize(&validated, grid.options())?;
    let text = fs::read_to_string(weights).map_err(|e| io_failure(weights, e))?;
    let file: WeightsFile = serde_json::from_str(&text).map_err(|e| VepError::Parse(e.to_string()))?;
    if file.weights.len() != sp.dim() {
        return Err(VepError::DimensionMismatch(format!(
            "{} weight arrays for {} components",
            file.weights.len(),
            sp.dim()
        ))
        .into());
    }
    let candidate = file
        .weights
        .into_iter()
        .zip(&sp.grids)
        .map(|(w, g)| DiscreteMeasure::new(g.clone(), w))
        .collect::<Result<Vec<_>, _>>()?;
    let e = vector_energy(&sp, &candidate)?;
    print_json(&json!({ "energy": e }));
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    if let Ok(raw) = std::env::var("VEP_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| VepError::BadParams(format!("VEP_THREADS must be a positive integer, got `{raw}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| VepError::BadParams(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Check(source) => check(&source),
        Command::Solve {
            source,
            grid,
            tol,
            max_iter,
            seed,
            out,
        } => solve(&source, &grid, SolveOptions { tol, max_iter, seed }, &out),
        Command::Map { point } => map(&point),
        Command::Scenario { name, params } => scenario(name.as_deref(), &params),
        Command::Energy { source, grid, weights } => energy(&source, &grid, &weights),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let body = json!({ "error": { "code": f.code, "message": f.message } });
            eprintln!("{body}");
            ExitCode::from(f.exit)
        }
    }
}
