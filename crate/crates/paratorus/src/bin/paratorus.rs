//! Command-line harness: property verification, the iterative solver, a
//! comparison against a direct dealiased integration, and a paralinearization
//! report.
//!
//! Exit codes: 0 success, 1 a verified property failed, 2 configuration
//! error, 3 numerical failure (ellipticity, stability, nonconvergence).

use clap::{Parser, Subcommand};
use paratorus::{
    analyze, apply_operator, build_generator_symbol, cancellation_check, conjugator,
    energy_apparatus, energy_value, oracle_solve, parse_config, quantize_bw,
    residual_remainder, solve, trajectory_to_text, Error, ExperimentConfig, FrequencyMultiplier,
    GridFunction, PeriodicFn, SobolevIndex, Symbol,
};
use rand::SeedableRng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "paratorus",
    about = "Paradifferential calculus on the torus and a paralinearized solver \
             for quasilinear Hamiltonian KdV-type equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Sectioned "key = value" configuration file; defaults apply if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for randomized data (initial profiles, sampling, perturbations).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Check the configuration and print the plan without computing.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the calculus property suite at the configured truncation.
    Verify,
    /// Run the iterative scheme and write the trajectory and ledger.
    Solve,
    /// Run the scheme and an independent direct integration, then compare.
    Compare,
    /// Report the paralinearization of the configured model at the datum.
    Paralinearize,
}

fn exit_code_for(e: &Error) -> ExitCode {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::InvalidParameter(_) | Error::Dimension(_) => {
            ExitCode::from(2)
        }
        Error::Io(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    match path {
        None => Ok(ExperimentConfig::standard()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            parse_config(&text)
        }
    }
}

fn write_report(out: &Path, name: &str, text: &str) -> Result<(), Error> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(name), text)?;
    Ok(())
}

fn from_fn<F: Fn(f64) -> f64>(trunc: usize, f: F) -> GridFunction<f64> {
    let n = (8 * (trunc + 1)).next_power_of_two();
    let samples: Vec<f64> = (0..n)
        .map(|k| f(2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    analyze(&samples, trunc).expect("sampling a smooth profile cannot fail")
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            println!("PASS {name}: {detail}");
        } else {
            println!("FAIL {name}: {detail}");
            self.failures += 1;
        }
    }
}

fn cmd_verify(cfg: &ExperimentConfig, seed: u64) -> Result<usize, Error> {
    let trunc = cfg.solver.trunc;
    let eps = cfg.solver.eps_para;
    let mut suite = Suite { failures: 0 };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    // quantizing the constant symbol 1 gives the identity
    {
        let one = Symbol::build(
            vec![(
                PeriodicFn::constant(paratorus::Cx::new(1.0, 0.0), 2),
                FrequencyMultiplier::one(),
            )],
            0.0,
            SobolevIndex(4.0),
        )
        .expect("constant symbol");
        let op = quantize_bw(&one, trunc, eps)?;
        let v = GridFunction::<f64>::random_real(trunc, 2.0, 1.0, &mut rng);
        let err = apply_operator(&op, &v)?.sub(&v).sobolev_norm(SobolevIndex(0.0));
        suite.check("identity-quantization", err <= 1e-12, format!("defect {err:.3e}"));
    }

    // quantizing i xi gives exact differentiation
    {
        let d = Symbol::build(
            vec![(
                PeriodicFn::constant(paratorus::Cx::new(1.0, 0.0), 2),
                FrequencyMultiplier::power_i_xi(1),
            )],
            1.0,
            SobolevIndex(4.0),
        )
        .expect("derivative symbol");
        let op = quantize_bw(&d, trunc, eps)?;
        let v = GridFunction::<f64>::random_real(trunc, 3.0, 1.0, &mut rng);
        let err = apply_operator(&op, &v)?
            .sub(&v.differentiate())
            .sobolev_norm(SobolevIndex(0.0));
        suite.check("derivative-quantization", err <= 1e-12, format!("defect {err:.3e}"));
    }

    // the three-way paraproduct splitting reconstructs the product
    {
        let f = GridFunction::<f64>::random_real(trunc, 2.5, 1.0, &mut rng);
        let g = GridFunction::<f64>::random_real(trunc, 2.5, 1.0, &mut rng);
        let split = paratorus::paraproduct(&f, &g, eps)?;
        let n = (8 * (trunc + 1)).next_power_of_two();
        let prod: Vec<f64> = f
            .synthesize(n)?
            .iter()
            .zip(g.synthesize(n)?)
            .map(|(&a, b)| a * b)
            .collect();
        let full = analyze(&prod, trunc)?;
        let err = split
            .tf_g
            .add(&split.tg_f)
            .add(&split.remainder)
            .sub(&full)
            .sobolev_norm(SobolevIndex(0.0));
        suite.check("paraproduct-reconstruction", err <= 1e-12, format!("defect {err:.3e}"));
    }

    // conjugation by the sixth-root density kills the fitted order-two
    // content of the mollified generator
    {
        let u = from_fn(trunc, |x| 0.1 * x.cos());
        let a = build_generator_symbol(&cfg.density, &u)?;
        let eps_moll = cfg
            .solver
            .eps_mollify
            .unwrap_or_else(|| paratorus::safeguard_mollification(a.margin, trunc));
        let with = cancellation_check(&a, trunc, eps_moll, eps, true)?;
        suite.check(
            "conjugation-cancellation",
            with <= 1e-3,
            format!("residual order-2/order-3 ratio {with:.3e}"),
        );
    }

    // the modified energy is uniformly equivalent to the Sobolev norm
    {
        let u = from_fn(trunc, |x| 0.1 * x.cos());
        let sigma = SobolevIndex(cfg.solver.sigma);
        let app = energy_apparatus(&cfg.density, &u, sigma, trunc, eps)?;
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let v = GridFunction::<f64>::random_real(trunc, 2.0, 1.0, &mut rng);
            let e = energy_value(&app, &v)?;
            let n2 = v.sobolev_norm(sigma).powi(2);
            worst = worst.max(e / n2).max(n2 / e);
        }
        suite.check(
            "energy-equivalence",
            worst <= 10.0,
            format!("two-sided constant {worst:.3e}"),
        );
    }

    Ok(suite.failures)
}

fn cmd_solve(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<(), Error> {
    let u0 = cfg.initial.build(cfg.solver.trunc, seed)?;
    let (traj, ledger) = solve(&cfg.density, &u0, &cfg.solver)?;
    write_report(out, "trajectory.txt", &trajectory_to_text(&traj))?;
    write_report(out, "ledger.txt", &ledger.to_text())?;
    println!(
        "converged in {} passes to T = {:.6e}; reports in {}",
        ledger.rows.len(),
        ledger.t_final,
        out.display()
    );
    Ok(())
}

fn cmd_compare(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<(), Error> {
    let trunc = cfg.solver.trunc;
    let u0 = cfg.initial.build(trunc, seed)?;
    let (traj, ledger) = solve(&cfg.density, &u0, &cfg.solver)?;
    let trunc_hi = cfg.oracle_trunc.unwrap_or(2 * trunc);
    let h = match cfg.oracle_step {
        Some(h) => h,
        None => 0.5 * paratorus::oracle_step_cap(&cfg.density, &u0, trunc_hi)?,
    };
    let oracle = oracle_solve(&cfg.density, &u0, trunc_hi, ledger.t_final, h)?;
    let u_scheme = &traj.last().unwrap().1;
    let u_direct = oracle.last().unwrap().1.retrunc(trunc);
    let s0 = SobolevIndex(cfg.solver.s0);
    let denom = u0.sobolev_norm(s0).max(1e-300);
    let rel = u_scheme.sub(&u_direct).sobolev_norm(s0) / denom;
    let text = format!(
        "# scheme vs direct integration at T = {:.6e}\n\
         scheme_trunc = {trunc}\ndirect_trunc = {trunc_hi}\ndirect_step = {h:.6e}\n\
         relative_low_norm_difference = {rel:.12e}\n",
        ledger.t_final
    );
    write_report(out, "compare.txt", &text)?;
    write_report(out, "trajectory.txt", &trajectory_to_text(&traj))?;
    write_report(out, "ledger.txt", &ledger.to_text())?;
    println!("relative difference {rel:.6e} at T = {:.6e}", ledger.t_final);
    if !rel.is_finite() {
        return Err(Error::Nonconvergence(format!(
            "comparison produced non-finite difference {rel}"
        )));
    }
    Ok(())
}

fn periodic_fn_report(name: &str, p: &PeriodicFn<f64>) -> String {
    let mut s = format!("# {name}: mean then modes n re im\n");
    s.push_str(&format!("{:.12e} {:.12e}\n", p.mean().re, p.mean().im));
    let j = p.trunc() as i64;
    for n in (-j..=j).filter(|&n| n != 0) {
        let c = p.coeff(n);
        if c.norm() > 1e-14 {
            s.push_str(&format!("{n} {:.12e} {:.12e}\n", c.re, c.im));
        }
    }
    s
}

fn cmd_paralinearize(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<(), Error> {
    let trunc = cfg.solver.trunc;
    let u0 = cfg.initial.build(trunc, seed)?;
    let a = build_generator_symbol(&cfg.density, &u0)?;
    let r0 = residual_remainder(&cfg.density, &u0, &a, trunc, cfg.solver.eps_para)?;
    let conj = conjugator(&cfg.density, &u0, trunc, cfg.solver.eps_para)?;
    let mut text = String::new();
    text.push_str(&format!("# paralinearization at the configured datum\n"));
    text.push_str(&format!("ellipticity_margin = {:.12e}\n", a.margin));
    text.push_str(&format!(
        "residual_low_norm = {:.12e}\n",
        r0.sobolev_norm(SobolevIndex(cfg.solver.s0))
    ));
    text.push_str(&periodic_fn_report("leading coefficient (order 3)", &a.c2));
    text.push_str(&periodic_fn_report("first-order coefficient", &a.a1));
    text.push_str(&periodic_fn_report("conjugating density (sixth root)", &conj.d));
    write_report(out, "paralinearization.txt", &text)?;
    println!(
        "margin {:.6e}, residual low norm {:.6e}; report in {}",
        a.margin,
        r0.sobolev_norm(SobolevIndex(cfg.solver.s0)),
        out.display()
    );
    Ok(())
}

fn describe_plan(cmd: &Command, cfg: &ExperimentConfig, out: &Path, seed: u64) {
    let what = match cmd {
        Command::Verify => "verify the calculus property suite",
        Command::Solve => "run the iterative scheme",
        Command::Compare => "run the scheme and a direct integration, then compare",
        Command::Paralinearize => "report the paralinearization at the datum",
    };
    println!("plan: {what}");
    println!(
        "  trunc = {}, s0 = {}, s = {}, sigma = {}, horizon = {}, seed = {seed}",
        cfg.solver.trunc, cfg.solver.s0, cfg.solver.s, cfg.solver.sigma, cfg.solver.t_horizon
    );
    println!("  initial = {:?}", cfg.initial);
    println!("  output directory = {}", out.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.dry_run {
        describe_plan(&cli.command, &cfg, &cli.out, cli.seed);
        return ExitCode::SUCCESS;
    }
    let outcome = match cli.command {
        Command::Verify => cmd_verify(&cfg, cli.seed).map(|failures| {
            if failures > 0 {
                println!("{failures} property check(s) failed");
            }
            failures
        }),
        Command::Solve => cmd_solve(&cfg, &cli.out, cli.seed).map(|_| 0),
        Command::Compare => cmd_compare(&cfg, &cli.out, cli.seed).map(|_| 0),
        Command::Paralinearize => cmd_paralinearize(&cfg, &cli.out, cli.seed).map(|_| 0),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
