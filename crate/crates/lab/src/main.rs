use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nehari_core::solvers::ground_state_with;
use nehari_core::compute_critical_values;
use nehari_lab::config::Linspace;
use nehari_lab::runs::{region_csv, solver_config};
use nehari_lab::table::fmt_f64;
use nehari_lab::{
    build, certify, run_region_map, run_sweep, run_three_solutions, BranchRow, BranchTable, Format,
    LabError, Result, RunConfig,
};

#[derive(Parser)]
#[command(name = "nehari", version, about = "Variational experiments for the indefinite p-Laplacian")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Run configuration (flat key = value file)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<Format>,
    /// RNG seed for multi-starts
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Solver tolerance on the sup-norm residual
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads for λ sweeps
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// First eigenvalue and eigenfunction of the p-Laplacian
    Eigen,
    /// λ₁, λ*, λ₊*, λ₋*, λ₀* and the pairing of the weight with φ
    Critical,
    /// Ground state at the configured `lambda`
    Ground,
    /// Branch table over the configured λ grid
    Sweep,
    /// Three nonnegative solutions below λ₁ for a perturbed weight
    Three,
    /// Existence/nonexistence regimes over a (p, q) grid
    Region,
    /// Nonnegative candidates at `lambda` against the Picone certificate
    Certify,
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse()
}

fn load(common: &Common, needs_config: bool) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None if needs_config => return Err(LabError::Config("--config is required".into())),
        None => RunConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if let Some(f) = common.format {
        cfg.format = f;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.tol {
        cfg.tol = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_out(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text).map_err(|source| io_err(path, source)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| io_err(Path::new("<stdout>"), source)),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> LabError {
    LabError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_of(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("UTF-8")
}

fn json_of<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LabError::Config(format!("threads: {e}")))?;
    }
    match cli.command {
        Command::Eigen => {
            let cfg = load(&cli.common, true)?;
            let pb = build(&cfg)?;
            eprintln!("lambda1 = {}", fmt_f64(pb.lambda1()));
            let x = pb.mesh().nodes();
            let phi = pb.pair.phi.values();
            let text = match cfg.format {
                Format::Csv => {
                    let rows: Vec<Vec<String>> = x.iter().zip(phi).map(|(x, v)| vec![fmt_f64(*x), fmt_f64(*v)]).collect();
                    csv_of(&["x", "phi"], &rows)
                }
                Format::Json => json_of(&serde_json::json!({
                    "p": cfg.p,
                    "lambda1": pb.lambda1(),
                    "x": x,
                    "phi": phi,
                }))?,
            };
            write_out(&cfg, &text)
        }
        Command::Critical => {
            let cfg = load(&cli.common, true)?;
            let pb = build(&cfg)?;
            let cv = compute_critical_values(&pb.spec, &pb.pair)?;
            let text = match cfg.format {
                Format::Csv => csv_of(
                    &["lambda1", "lambda_star", "lambda_plus", "lambda_minus", "lambda_zero", "pairing", "pairing_sign", "converged"],
                    &[vec![
                        fmt_f64(cv.lambda1),
                        fmt_f64(cv.lambda_star),
                        fmt_f64(cv.lambda_plus),
                        fmt_f64(cv.lambda_minus),
                        fmt_f64(cv.lambda_zero),
                        fmt_f64(cv.pairing),
                        format!("{:?}", cv.pairing_sign).to_lowercase(),
                        cv.converged.to_string(),
                    ]],
                ),
                Format::Json => json_of(&cv)?,
            };
            write_out(&cfg, &text)
        }
        Command::Ground => {
            let cfg = load(&cli.common, true)?;
            let pb = build(&cfg)?;
            let lambda = cfg.single_lambda(pb.lambda1())?;
            let sc = solver_config(&cfg);
            let r = ground_state_with(&pb.spec.with_lambda(lambda), &sc, true, Some(&pb.pair))?;
            let table = BranchTable::new(vec![BranchRow::from_report(&r, sc.tol)]);
            write_out(&cfg, &table.render(cfg.format)?)
        }
        Command::Sweep => {
            let cfg = load(&cli.common, true)?;
            let table = run_sweep(&cfg)?;
            write_out(&cfg, &table.render(cfg.format)?)
        }
        Command::Three => {
            let cfg = load(&cli.common, true)?;
            let run = run_three_solutions(&cfg)?;
            write_out(&cfg, &run.table.render(cfg.format)?)?;
            match run.triple {
                Some(t) => {
                    eprintln!("three solutions at lambda = {} (separation {:e})", fmt_f64(t.lambda), t.separation());
                    Ok(())
                }
                None => Err(nehari_core::Error::SaddleNotFound("no three-solution point on the scan".into()).into()),
            }
        }
        Command::Region => {
            let cfg = load(&cli.common, false)?;
            let pg = cfg.p_grid.unwrap_or(Linspace { start: 1.1, stop: 6.0, count: 50 });
            let qg = cfg.q_grid.unwrap_or(Linspace { start: 1.02, stop: 5.9, count: 50 });
            let rows = run_region_map(&pg.values(), &qg.values());
            let text = match cfg.format {
                Format::Csv => region_csv(&rows),
                Format::Json => json_of(&rows)?,
            };
            write_out(&cfg, &text)
        }
        Command::Certify => {
            let cfg = load(&cli.common, true)?;
            let rows = certify(&cfg)?;
            let text = match cfg.format {
                Format::Csv => {
                    let body: Vec<Vec<String>> = rows
                        .iter()
                        .map(|r| {
                            vec![
                                r.source.clone(),
                                r.index.to_string(),
                                fmt_f64(r.energy),
                                fmt_f64(r.linf_norm),
                                fmt_f64(r.residual),
                                r.positive_on_plus.to_string(),
                                r.dead_cores.to_string(),
                                fmt_f64(r.certificate),
                                r.verdict.as_str().to_string(),
                            ]
                        })
                        .collect();
                    csv_of(
                        &["source", "index", "energy", "linf_norm", "residual", "positive_on_plus", "dead_cores", "certificate", "verdict"],
                        &body,
                    )
                }
                Format::Json => json_of(&rows)?,
            };
            write_out(&cfg, &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
