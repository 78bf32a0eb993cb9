use clap::{Parser, Subcommand};
use mortar_bddc::harness::{
    self, build_pipeline, run_experiment, run_oracle, ExperimentConfig, ScalingSpec, ThetaSpec,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mortar-bddc",
    about = "Mortar-discretized elliptic solver with an adaptive BDDC-preconditioned PCG"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file and report PCG statistics.
    Solve {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the scaling choice (m1 = multiplicity, m2 = deluxe).
        #[arg(long, value_parser = parse_scaling)]
        scaling: Option<ScalingSpec>,
        /// Override the eigenvalue tolerance Theta (>= 1).
        #[arg(long)]
        theta: Option<f64>,
        /// Also compute the dense spectrum of the preconditioned operator.
        #[arg(long)]
        oracle: bool,
        /// Output directory for report.csv / edges.csv / report.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dump subdomain and edge Schur matrices as text files.
        #[arg(long)]
        dump_schur: Option<PathBuf>,
    },
}

fn parse_scaling(s: &str) -> Result<ScalingSpec, String> {
    match s {
        "m1" => Ok(ScalingSpec::M1),
        "m2" => Ok(ScalingSpec::M2),
        other => Err(format!("unknown scaling '{other}' (use m1 or m2)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve {
            config,
            scaling,
            theta,
            oracle,
            out,
            dump_schur,
        } => match solve(config, scaling, theta, oracle, out, dump_schur) {
            Ok(converged) => {
                if converged {
                    ExitCode::SUCCESS
                } else {
                    eprintln!("error: PCG did not reach the requested tolerance");
                    ExitCode::from(1)
                }
            }
            Err(err) => {
                eprintln!("error: {err}");
                ExitCode::from(2)
            }
        },
    }
}

fn solve(
    config_path: PathBuf,
    scaling: Option<ScalingSpec>,
    theta: Option<f64>,
    oracle: bool,
    out: Option<PathBuf>,
    dump_schur: Option<PathBuf>,
) -> Result<bool, harness::HarnessError> {
    let (mut config, base) = ExperimentConfig::load(&config_path)?;
    if let Some(s) = scaling {
        config.scaling = s;
    }
    if let Some(t) = theta {
        config.theta = ThetaSpec::Fixed { value: t };
    }
    let pipeline = build_pipeline(&config, &base)?;
    let (report, _solution) = run_experiment(&pipeline);
    println!(
        "scaling={} dim={} iter={} lambda_min={:.4} lambda_max={:.4} kappa={:.4} pnum={} ppnum={:.2}% theta={:.4} C={:.4}",
        match report.scaling {
            ScalingSpec::M1 => "m1",
            ScalingSpec::M2 => "m2",
        },
        report.dim_multipliers,
        report.iterations,
        report.lambda_min,
        report.lambda_max,
        report.kappa,
        report.pnum,
        report.ppnum * 100.0,
        report.theta,
        report.kappa / report.theta,
    );
    let oracle_report = if oracle {
        let o = run_oracle(&pipeline)?;
        println!(
            "oracle: lambda_min={:.6} lambda_max={:.6} kappa={:.6} (cg kappa {:.6})",
            o.lambda_min, o.lambda_max, o.kappa, o.cg_kappa
        );
        Some(o)
    } else {
        None
    };
    if let Some(dir) = dump_schur {
        harness::dump_schur_matrices(&pipeline, &dir)?;
    }
    let out_dir = out.or_else(|| config.output.clone());
    if let Some(dir) = out_dir {
        harness::write_reports(&report, oracle_report.as_ref(), &dir)?;
    }
    Ok(report.converged)
}
