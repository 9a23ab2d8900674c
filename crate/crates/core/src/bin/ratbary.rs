use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ratbary::aaa::Solver;
use ratbary::commands::{
    cmd_approx, cmd_bench, cmd_eval, cmd_gen, cmd_verify, parse_point, ApproxOptions, BenchOptions, GridOverrides,
};
use ratbary::io::{MatrixFile, Method};
use ratbary::linalg::{PNorm, C64};
use ratbary::pqr::{Merge, Strategy};
use ratbary::problems::ProblemName;
use ratbary::qr_aaa::TolMode;

#[derive(Parser)]
#[command(name = "ratbary", version, about = "Set-valued barycentric rational approximation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a generated problem into a matrix file (plus `<out>.manifest.json`).
    Gen {
        #[arg(long)]
        problem: ProblemName,
        /// Number of functions (ignored by the scalar problems).
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, allow_hyphen_values = true)]
        grid_a: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        grid_b: Option<f64>,
        #[arg(long)]
        grid_count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a model from a matrix file. Exits with status 2 if the
    /// tolerance was not met; the model is written either way.
    Approx {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "qr")]
        method: Method,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value = "inf")]
        norm: PNorm,
        #[arg(long, default_value = "practical")]
        tol_mode: TolMode,
        #[arg(long, default_value_t = 150)]
        max_degree: usize,
        #[arg(long, default_value_t = 1)]
        partitions: usize,
        /// `random` or `mock-cheb`; chosen automatically when omitted.
        #[arg(long)]
        extension: Option<Strategy>,
        #[arg(long, default_value = "flat")]
        merge: Merge,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use the explicit-assembly weight solver.
        #[arg(long)]
        reference_solver: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        history_out: Option<PathBuf>,
    },
    /// Evaluate a model at points (`re,im`, repeatable) or on a matrix file's grid.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "point", allow_hyphen_values = true)]
        points: Vec<String>,
        #[arg(long)]
        grid_file: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a model with samples; writes `<report>` and `<report>.csv`.
    /// Exits with status 2 on failure.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Time the QR stage, SV-AAA on QΓ and direct SV-AAA.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "beam")]
        problems: Vec<ProblemName>,
        #[arg(long, value_delimiter = ',', default_value = "250")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        duplicates: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip direct SV-AAA above this many columns.
        #[arg(long)]
        direct_max_n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> ratbary::Result<ExitCode> {
    match cli.cmd {
        Cmd::Gen {
            problem,
            n,
            seed,
            grid_a,
            grid_b,
            grid_count,
            out,
        } => {
            let grid = GridOverrides {
                a: grid_a,
                b: grid_b,
                count: grid_count,
            };
            cmd_gen(problem, n, seed, grid, &out)?;
        }
        Cmd::Approx {
            input,
            method,
            tol,
            norm,
            tol_mode,
            max_degree,
            partitions,
            extension,
            merge,
            seed,
            reference_solver,
            out,
            history_out,
        } => {
            let opts = ApproxOptions {
                method,
                tol,
                p_norm: norm,
                tol_mode,
                max_degree,
                partitions,
                extension,
                merge,
                seed,
                workers: None,
                solver: if reference_solver {
                    Solver::Reference
                } else {
                    Solver::Incremental
                },
            };
            let a = cmd_approx(&input, &opts, &out, history_out.as_deref())?;
            eprintln!(
                "m = {}, max relative error {:e}, residual {:e}",
                a.model.m(),
                a.check.max_rel_error,
                a.check.residual
            );
            if !a.converged() {
                eprintln!("ratbary: not converged to tol {tol:e}; model written with converged = false");
                return Ok(ExitCode::from(2));
            }
        }
        Cmd::Eval {
            model,
            points,
            grid_file,
            out,
        } => {
            let mut z: Vec<C64> = points.iter().map(|s| parse_point(s)).collect::<ratbary::Result<_>>()?;
            if let Some(g) = grid_file {
                z.extend_from_slice(MatrixFile::read(&g)?.grid.points());
            }
            let poles = cmd_eval(&model, &z, &out)?;
            if poles > 0 {
                eprintln!("ratbary: {poles} point(s) hit a pole");
            }
        }
        Cmd::Verify { model, input, report } => {
            let v = cmd_verify(&model, &input, &report)?;
            eprintln!(
                "{}: max relative error {:e} (limit {:e}), residual {:e}",
                if v.pass { "pass" } else { "FAIL" },
                v.max_rel_error,
                v.limit,
                v.residual
            );
            if !v.pass {
                return Ok(ExitCode::from(2));
            }
        }
        Cmd::Bench {
            problems,
            sizes,
            duplicates,
            repetitions,
            tol,
            seed,
            direct_max_n,
            out,
        } => {
            let opts = BenchOptions {
                problems,
                sizes,
                duplicates,
                repetitions,
                tol,
                seed,
                direct_max_n,
            };
            cmd_bench(&opts, &out)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ratbary: {e}");
            ExitCode::FAILURE
        }
    }
}
