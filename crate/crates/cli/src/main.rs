//! `ratesim` — sweep correlation functions and transition rates over time,
//! study modular-step convergence, and self-validate the numerical core.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ratesim::config::ExperimentConfig;
use ratesim::experiment::{convergence_study, run_experiment};
use ratesim::output::{
    convergence_json, sweep_json, write_convergence_csv, write_sweep_csv,
};
use ratesim::HarnessError;

#[derive(Parser)]
#[command(
    name = "ratesim",
    version,
    about = "Correlation functions and transition rates of damped quantum systems via circuit emulation",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate C(t) and/or Ċ(t) over a time grid and write CSV.
    Sweep(RunArgs),
    /// Compare the modular evolver against exact propagation across step
    /// counts at one fixed time.
    Converge(ConvergeArgs),
    /// Run the built-in cross-check suite and report pass/fail.
    Validate,
}

/// Configuration-building flags shared by the computing subcommands.
/// Precedence: dedicated flags beat `--set`, which beats `--config`, which
/// beats `--preset` defaults.
#[derive(Args, Clone)]
struct RunArgs {
    /// Starting profile: spin, cl-desk, or cl-full.
    #[arg(long)]
    preset: Option<String>,
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generic override, repeatable (e.g. --set mu=0.2).
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// spin_half or caldeira_leggett.
    #[arg(long)]
    model: Option<String>,
    /// heisenberg or schrodinger.
    #[arg(long)]
    picture: Option<String>,
    /// exact, rk4, or modular.
    #[arg(long)]
    evolver: Option<String>,
    /// Step count for the modular evolver.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    t_start: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    t_count: Option<usize>,
    /// Finite-shot sampling instead of exact expectation reads.
    #[arg(long)]
    shots: Option<u64>,
    /// Seed for all sampling; per-point streams are derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads over time points.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a JSON mirror next to the CSV (or to stdout).
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated ascending step counts, e.g. 10,20,40,80.
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    /// The fixed time at which to compare.
    #[arg(long)]
    t_fixed: f64,
}

impl RunArgs {
    fn build_config(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut config = match &self.preset {
            Some(name) => ExperimentConfig::preset(name)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.config {
            config.apply_file(path)?;
        }
        for assignment in &self.set {
            let Some((key, value)) = assignment.split_once('=') else {
                return Err(HarnessError::Config {
                    field: "set".to_string(),
                    message: format!("expected KEY=VALUE, got {assignment:?}"),
                });
            };
            config.apply_kv(key.trim(), value)?;
        }
        if let Some(model) = &self.model {
            config.apply_kv("model", model)?;
        }
        if let Some(picture) = &self.picture {
            config.apply_kv("picture", picture)?;
        }
        if let Some(evolver) = &self.evolver {
            config.apply_kv("evolver", evolver)?;
        }
        if let Some(steps) = self.steps {
            config.apply_kv("steps", &steps.to_string())?;
        }
        if let Some(t) = self.t_start {
            config.apply_kv("t_start", &t.to_string())?;
        }
        if let Some(t) = self.t_end {
            config.apply_kv("t_end", &t.to_string())?;
        }
        if let Some(count) = self.t_count {
            config.apply_kv("t_count", &count.to_string())?;
        }
        if let Some(shots) = self.shots {
            config.apply_kv("shots", &shots.to_string())?;
        }
        if let Some(seed) = self.seed {
            config.apply_kv("seed", &seed.to_string())?;
        }
        if let Some(jobs) = self.jobs {
            config.apply_kv("jobs", &jobs.to_string())?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Writes `csv` to `--out` (or stdout), plus the JSON mirror when
    /// requested (next to the CSV with extension `.json`).
    fn emit(&self, csv: &[u8], json: Option<String>) -> Result<(), HarnessError> {
        match &self.out {
            Some(path) => {
                std::fs::write(path, csv)?;
                if let Some(text) = json {
                    let mirror = path.with_extension("json");
                    std::fs::write(mirror, text)?;
                }
            }
            None => {
                std::io::stdout().write_all(csv)?;
                if let Some(text) = json {
                    println!("{text}");
                }
            }
        }
        Ok(())
    }
}

fn run_sweep(args: &RunArgs) -> Result<(), HarnessError> {
    let config = args.build_config()?;
    let output = run_experiment(&config)?;
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &output)?;
    let json = args.json.then(|| sweep_json(&output)).transpose()?;
    args.emit(&csv, json)
}

fn run_converge(args: &ConvergeArgs) -> Result<(), HarnessError> {
    let config = args.run.build_config()?;
    let study = convergence_study(&config, &args.n_list, args.t_fixed)?;
    let mut csv = Vec::new();
    write_convergence_csv(&mut csv, &config, &study)?;
    let json = args
        .run
        .json
        .then(|| convergence_json(&config, &study))
        .transpose()?;
    args.run.emit(&csv, json)
}

/// Deterministic self-checks spanning the estimator stack. Prints one line
/// per check; any failure turns into exit code 3.
fn run_validate() -> Result<(), HarnessError> {
    use ratesim_core::lindblad::{propagate_exact, Picture};
    use ratesim_core::models::{
        build_grid_1d, double_well_value, spin_half_analytic, spin_half_model, SpinHalfParams,
    };
    use ratesim_core::modular::ModularConfig;
    use ratesim_core::operators::{identity, max_abs_diff};
    use ratesim_core::rate::{
        estimate_correlation, estimate_rate_heisenberg, estimate_rate_schrodinger,
        heisenberg_circuit_expectation, sample_correlation, trace_formula_expectation,
        CircuitParams, CorrelationMethod, Evolver,
    };

    let params = SpinHalfParams {
        mu: 0.1,
        gamma: 1.0,
        hbar: 1.0,
    };
    let (model, setup) = spin_half_model(&params).expect("reference model builds");
    let placeholder = ModularConfig {
        steps: 1,
        total_time: 0.0,
        picture: Picture::Heisenberg,
    };

    let mut checks: Vec<(&str, bool)> = Vec::new();

    {
        let t = 1.0;
        let reference = spin_half_analytic(&params, t);
        let c = estimate_correlation(
            &model,
            &setup,
            t,
            &placeholder,
            CorrelationMethod::TraceFormula,
            Evolver::Exact,
        )?;
        let rate = estimate_rate_heisenberg(&model, &setup, t, &placeholder, Evolver::Exact)?;
        checks.push((
            "closed-form agreement (spin, t=1)",
            (c - reference.correlation).abs() <= 1e-10 && (rate - reference.rate).abs() <= 1e-10,
        ));
    }

    {
        let mut ok = true;
        for t in [0.2, 1.0] {
            let h = estimate_rate_heisenberg(&model, &setup, t, &placeholder, Evolver::Exact)?;
            let s = estimate_rate_schrodinger(&model, &setup, t, &placeholder, Evolver::Exact)?;
            ok &= (h - s).abs() <= 1e-10;
        }
        checks.push(("picture duality", ok));
    }

    {
        let theta_b_t = propagate_exact(&model, setup.theta_b(), 1.0, Picture::Heisenberg)?;
        let lindblad = &model.lindblads()[0];
        let mut ok = true;
        for params in [
            CircuitParams::plain(2),
            CircuitParams {
                chi: -std::f64::consts::FRAC_PI_2,
                n_gate: identity(2),
                m_gate: model.hamiltonian().clone(),
            },
            CircuitParams {
                chi: 0.0,
                n_gate: lindblad.adjoint(),
                m_gate: lindblad.clone(),
            },
        ] {
            let circuit = heisenberg_circuit_expectation(&setup, &theta_b_t, &params)?;
            let formula = trace_formula_expectation(&setup, &theta_b_t, &params)?;
            ok &= (circuit - formula).abs() <= 1e-12;
        }
        checks.push(("register emulation matches trace formula", ok));
    }

    {
        let t = 1.0;
        let reference = spin_half_analytic(&params, t).rate;
        let error_at = |steps: usize| -> Result<f64, HarnessError> {
            let config = ModularConfig {
                steps,
                total_time: t,
                picture: Picture::Heisenberg,
            };
            let rate = estimate_rate_heisenberg(&model, &setup, t, &config, Evolver::Modular)?;
            Ok(((rate - reference) / reference).abs())
        };
        let coarse = error_at(10)?;
        let fine = error_at(40)?;
        let ratio = coarse / fine;
        checks.push(("modular first-order convergence", (2.5..=6.0).contains(&ratio)));
    }

    {
        let grid = build_grid_1d(4, 0.01).expect("grid builds");
        let product = grid.delta_x() * grid.delta_p();
        let expected = 2.0 * std::f64::consts::PI * 0.01 / 16.0;
        let unitarity = max_abs_diff(&(grid.fourier() * grid.fourier().adjoint()), &identity(16));
        checks.push((
            "grid identities (spacings, unitarity, barrier value)",
            product == expected
                && unitarity <= 1e-10
                && (double_well_value(0.5) - 0.162).abs() <= 1e-15,
        ));
    }

    {
        let a = sample_correlation(&model, &setup, 0.8, &placeholder, Evolver::Exact, 4_000, 3)?;
        let b = sample_correlation(&model, &setup, 0.8, &placeholder, Evolver::Exact, 4_000, 3)?;
        checks.push(("finite-shot determinism", a.value == b.value));
    }

    let mut failed = 0;
    for (label, ok) in &checks {
        println!("[VALIDATE] {} — {label}", if *ok { "PASS" } else { "FAIL" });
        if !ok {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(HarnessError::Validation { failed });
    }
    println!("[VALIDATE] all {} checks passed", checks.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(args) => run_sweep(args),
        Command::Converge(args) => run_converge(args),
        Command::Validate => run_validate(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
