use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nlbiplot::{Algorithm, Baseline, EmConfig, RidgeConfig};
use nlbiplot_cli::commands::{self, GeometryOptions};
use nlbiplot_cli::error::{exit, CliError, Result};
use nlbiplot_cli::input;

#[derive(Parser)]
#[command(name = "nlbiplot", version, about = "Nominal logistic biplots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV table and write the model JSON.
    Fit(FitArgs),
    /// Compare observed and predicted categories of every row.
    Predict(PredictArgs),
    /// Build prediction tessellations on a score plane.
    Tessellate(TessellateArgs),
    /// Recover category points from a tessellation file.
    Invert(InvertArgs),
    /// Render SVG figures of a model.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    First,
    Last,
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with a header row.
    data: PathBuf,
    /// Column holding row identifiers.
    #[arg(long)]
    id_col: Option<String>,
    /// Latent dimensions.
    #[arg(long, default_value_t = 2)]
    dims: usize,
    /// Quadrature nodes per dimension.
    #[arg(long, default_value_t = 15)]
    nodes: usize,
    /// Ridge penalty.
    #[arg(long, default_value_t = 0.1)]
    ridge: f64,
    /// Maximum EM iterations.
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Stop when the objective gains less than this.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, value_enum, default_value = "last")]
    baseline: BaselineArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model file.
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    model: PathBuf,
    data: PathBuf,
    #[arg(long)]
    id_col: Option<String>,
    /// Comma-separated variable names; an empty list selects none.
    #[arg(long)]
    vars: Option<String>,
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GeometryArgs {
    /// Display plane as two 1-based dimensions.
    #[arg(long, default_value = "1,2")]
    plane: String,
    /// Half-width multiplier of the score extent.
    #[arg(long, default_value_t = 1.3)]
    bbox_inflate: f64,
}

#[derive(Args)]
struct TessellateArgs {
    model: PathBuf,
    /// Variable to tessellate; all when omitted.
    #[arg(long = "var")]
    variable: Option<String>,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long, default_value = "tessellation.json")]
    out: PathBuf,
}

#[derive(Args)]
struct InvertArgs {
    tessellation: PathBuf,
    /// 1: combined least squares, 2: slope given distance, 3: distance given slope.
    #[arg(long, default_value_t = 1)]
    algorithm: u8,
    #[arg(long, default_value = "category_points.json")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    model: PathBuf,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long, default_value_t = 1)]
    algorithm: u8,
    /// Output directory.
    #[arg(long, default_value = "plots")]
    out: PathBuf,
}

fn parse_plane(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || CliError::invalid(format!("--plane expects two 1-based dimensions like `1,2`, got `{text}`"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let a: usize = parts[0].parse().map_err(|_| bad())?;
    let b: usize = parts[1].parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a - 1, b - 1))
}

fn parse_algorithm(n: u8) -> Result<Algorithm> {
    Algorithm::from_number(n).ok_or_else(|| CliError::invalid(format!("--algorithm must be 1, 2 or 3, got {n}")))
}

impl GeometryArgs {
    fn options(&self) -> Result<GeometryOptions> {
        Ok(GeometryOptions {
            plane: parse_plane(&self.plane)?,
            bbox_inflate: self.bbox_inflate,
        })
    }
}

fn run_fit(a: &FitArgs) -> Result<i32> {
    let dataset = input::load_csv(&a.data, a.id_col.as_deref())?;
    let cfg = EmConfig {
        dims: a.dims,
        nodes: a.nodes,
        max_em_iters: a.max_iter,
        loglik_tol: a.tol,
        ridge: RidgeConfig::with_lambda(a.ridge),
        baseline: match a.baseline {
            BaselineArg::First => Baseline::First,
            BaselineArg::Last => Baseline::Last,
        },
        seed: a.seed,
    };
    let outcome = commands::fit(&dataset, &cfg)?;
    print!("{}", commands::fit_report(&outcome));
    write(&a.out, &outcome.json)?;
    println!("model written to {}", a.out.display());
    if outcome.converged() {
        Ok(exit::SUCCESS)
    } else {
        eprintln!("error: EM did not reach the tolerance; the last iterate was written");
        Ok(exit::NON_CONVERGENCE)
    }
}

fn run_predict(a: &PredictArgs) -> Result<i32> {
    let loaded = commands::load_model(&a.model)?;
    let data = commands::load_data_for_model(&loaded, &a.data, a.id_col.as_deref())?;
    let names: Option<Vec<String>> = a.vars.as_ref().map(|v| {
        v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
    });
    let vars = commands::select_variables(&loaded, names.as_deref())?;
    let table = commands::predict(&loaded, &data, &vars)?;
    print!("{}", table.render());
    if let Some(out) = &a.out {
        write(out, &table.to_csv()?)?;
    }
    Ok(exit::SUCCESS)
}

fn run_tessellate(a: &TessellateArgs) -> Result<i32> {
    let loaded = commands::load_model(&a.model)?;
    let names = a.variable.as_ref().map(|v| vec![v.clone()]);
    let vars = commands::select_variables(&loaded, names.as_deref())?;
    let file = commands::tessellations(&loaded, &vars, &a.geometry.options()?)?;
    for v in &file.variables {
        let t = &v.tessellation;
        println!(
            "{}: {} edges, {} real vertices, hidden [{}]",
            v.name,
            t.edges.len(),
            t.real_vertices().count(),
            v.hidden.join(", ")
        );
    }
    write(&a.out, &file.to_json()?)?;
    Ok(exit::SUCCESS)
}

fn run_invert(a: &InvertArgs) -> Result<i32> {
    let algorithm = parse_algorithm(a.algorithm)?;
    let file = nlbiplot_cli::artifacts::TessellationFile::from_json(&input::read_to_string(&a.tessellation)?)?;
    let points = commands::invert(&file, algorithm);
    for v in &points.variables {
        let score = v.fit_score.map_or("n/a".to_string(), |s| format!("{s:.4}"));
        println!("{}: algorithm {}, fit score {score}", v.name, v.algorithm);
        for n in &v.notes {
            eprintln!("warning: {}: {n}", v.name);
        }
    }
    write(&a.out, &points.to_json()?)?;
    Ok(exit::SUCCESS)
}

fn run_plot(a: &PlotArgs) -> Result<i32> {
    let algorithm = parse_algorithm(a.algorithm)?;
    let loaded = commands::load_model(&a.model)?;
    let figures = commands::plots(&loaded, &a.geometry.options()?, algorithm)?;
    for p in commands::write_plots(&a.out, &figures)? {
        println!("wrote {}", p.display());
    }
    Ok(exit::SUCCESS)
}

fn write(path: &Path, body: &str) -> Result<()> {
    input::write(path, body)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::PARSE } else { exit::SUCCESS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Predict(a) => run_predict(a),
        Command::Tessellate(a) => run_tessellate(a),
        Command::Invert(a) => run_invert(a),
        Command::Plot(a) => run_plot(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
