//! `bsde-lab`: run a convergence study on a builtin problem and write CSV or JSON.

use std::path::PathBuf;
use std::process::ExitCode;

use bsde_core::{
    builtin, convergence_study, BackendKind, BsdeError, MeshKind, PsiWeight, SchemeKind, StudyConfig, TerminalMode,
    DEFAULT_BETA,
};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mesh {
    Uniform,
    Graded,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "bsde-lab", version, about = "Convergence studies for backward SDE schemes")]
struct Args {
    /// Builtin problem: bm_linear, manufactured_sin or call_lipschitz.
    #[arg(long)]
    problem: String,
    /// Problem parameter override, repeatable.
    #[arg(long = "param", value_name = "K=V", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    #[arg(long, default_value = "cn2", value_parser = parse_from_str::<SchemeKind>)]
    scheme: SchemeKind,
    #[arg(long, default_value = "grid", value_parser = parse_from_str::<BackendKind>)]
    backend: BackendKind,
    #[arg(long, value_enum, default_value = "uniform")]
    mesh: Mesh,
    /// Grading exponent, used with `--mesh graded`.
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    /// Comma-separated numbers of time steps.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value = "auto", value_parser = parse_from_str::<TerminalMode>)]
    terminal_mode: TerminalMode,
    #[arg(long)]
    grid_nodes: Option<usize>,
    #[arg(long)]
    quad_order: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Number of probe states for the error metric.
    #[arg(long)]
    probes: Option<usize>,
    #[arg(long)]
    fp_tol: Option<f64>,
    #[arg(long)]
    fp_max_iter: Option<usize>,
    /// Driver weight inside the cn2 `Psi` term.
    #[arg(long, default_value = "half", value_parser = parse_from_str::<PsiWeight>)]
    psi_weight: PsiWeight,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected K=V, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value for '{k}': {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_from_str<T: std::str::FromStr<Err = BsdeError>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: BsdeError| e.to_string())
}

fn study_config(args: &Args) -> StudyConfig {
    let mesh = match args.mesh {
        Mesh::Uniform => MeshKind::Uniform,
        Mesh::Graded => MeshKind::Graded { beta: args.beta },
    };
    let mut c = StudyConfig::new(args.scheme, args.backend, mesh, args.n.clone());
    let b = &mut c.backend_config;
    if let Some(v) = args.grid_nodes {
        b.grid.nodes = v;
    }
    if let Some(v) = args.quad_order {
        b.quad_order = v;
    }
    if let Some(v) = args.mc_samples {
        b.mc_samples = v;
    }
    if let Some(v) = args.seed {
        b.seed = v;
    }
    if let Some(v) = args.probes {
        c.probes = v;
    }
    if let Some(v) = args.fp_tol {
        c.options.fp_tol = v;
    }
    if let Some(v) = args.fp_max_iter {
        c.options.fp_max_iter = v;
    }
    c.options.terminal_mode = args.terminal_mode;
    c.options.psi_weight = args.psi_weight;
    c
}

fn run(args: &Args) -> Result<(), BsdeError> {
    let problem = builtin(&args.problem, &args.params)?;
    let report = convergence_study(&problem, &study_config(args))?;
    let text = match args.format {
        Format::Csv => report.to_csv()?,
        Format::Json => report.to_json()?,
    };
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| BsdeError::InvalidArgument(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn exit_code(err: &BsdeError) -> u8 {
    if err.is_numerical() || matches!(err, BsdeError::StepSize { .. }) {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bsde-lab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
