use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use idgsem::physics::{square_entropy, EntropyKind, EntropyPair};
use idgsem::reference::fv_oracle;
use idgsem::suite::{
    low_order_bases, operator_identities, property_check, run_checks, table_scheme, CheckResult, PROPERTY_CHECKS,
    SAMPLES,
};
use idgsem::verify::step_diagnostics;
use idgsem::{
    advance, make_problem, Discretization, EcEntropy, Error, Grid1D, InterfaceKind, RunReport, SchemeKind,
    SolverConfig, ViscosityMode,
};

const EXIT_USAGE: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "idgsem", version, about = "Implicit DGSEM solvers for 1D scalar conservation laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one benchmark problem and write solution and diagnostics files.
    Run(RunArgs),
    /// Run the property sweeps and the five benchmark runs.
    Verify(VerifyArgs),
    /// Write finite-volume reference profiles.
    Golden(GoldenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Be,
    St,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViscosityArg {
    None,
    Full,
    Adaptive,
}

#[derive(Clone, Copy, ValueEnum)]
enum FluxArg {
    Godunov,
    Rusanov,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Benchmark problem, 1 to 5.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    problem: u8,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Polynomial degree in space.
    #[arg(long)]
    p: Option<usize>,
    /// Polynomial degree in time (space-time scheme only).
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, default_value_t = 40)]
    n_cells: usize,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long, value_enum, default_value = "full")]
    viscosity: ViscosityArg,
    /// Interface flux.
    #[arg(long, value_enum, default_value = "godunov")]
    flux: FluxArg,
    /// Solution CSV.
    #[arg(long, default_value = "solution.csv")]
    output: PathBuf,
    /// Per-step diagnostics CSV.
    #[arg(long, default_value = "diagnostics.csv")]
    diagnostics: PathBuf,
    /// Exit with status 3 when a verification check fails.
    #[arg(long)]
    strict: bool,
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// Run only the named check, or the runs of one problem (`problem4`).
    #[arg(long)]
    only: Option<String>,
    #[arg(long, default_value_t = SAMPLES)]
    samples: usize,
    /// Fault injection: perturb one entry of a differentiation matrix.
    #[arg(long, hide = true)]
    corrupt_d: bool,
}

#[derive(clap::Args)]
struct GoldenArgs {
    #[arg(long, default_value = "crates/core/tests/data/v1")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    cells: usize,
    /// Samples averaged into each written point.
    #[arg(long, default_value_t = 10)]
    block: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1u8, 2, 4, 5])]
    problems: Vec<u8>,
}

/// `%.17g` formatting, independent of locale.
fn fmt_g17(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("IDGSEM_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // a second initialisation in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn print_check(c: &CheckResult) {
    println!("CHECK {} {} {:e}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.worst);
}

fn write_solution(path: &Path, disc: &Discretization, report: &RunReport) -> idgsem::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "t", "u", "cell", "node"])?;
    let levels: Vec<(f64, &idgsem::Field)> = match (report.steps.last(), &disc.time_basis) {
        (Some(step), Some(tb)) if report.scheme == SchemeKind::SpaceTime => tb
            .nodes()
            .iter()
            .zip(&step.levels)
            .map(|(xi, lv)| (step.t_start + 0.5 * (1.0 + xi) * step.dt, lv))
            .collect(),
        _ => vec![(report.final_time(), report.final_field())],
    };
    for (t, field) in levels {
        for c in 0..field.n_cells() {
            for (i, &u) in field.cell(c).iter().enumerate() {
                let x = disc.grid.node_x(&disc.basis, c, i);
                w.write_record([fmt_g17(x), fmt_g17(t), fmt_g17(u), c.to_string(), i.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_diagnostics(path: &Path, disc: &Discretization, report: &RunReport) -> idgsem::Result<()> {
    let flux = disc.problem.flux;
    let entropies = [square_entropy(flux), EntropyPair { kind: EntropyKind::Kruzkov(0.0), flux }];
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "t", "dt", "umin", "umax", "mass", "solver_iters", "entropy_defect_sq", "entropy_defect_k0"])?;
    for d in step_diagnostics(disc, report, &entropies) {
        w.write_record([
            d.step.to_string(),
            fmt_g17(d.t),
            fmt_g17(d.dt),
            fmt_g17(d.u_min),
            fmt_g17(d.u_max),
            fmt_g17(d.mass),
            d.solver_iters.to_string(),
            fmt_g17(d.entropy_defects[0]),
            fmt_g17(d.entropy_defects[1]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run(args: &RunArgs) -> Result<u8, Error> {
    let problem = make_problem(args.problem)?;
    let (table_kind, table_p, table_q, table_cfl) = table_scheme(args.problem);
    let kind = match args.scheme {
        Some(SchemeArg::Be) => SchemeKind::BackwardEuler,
        Some(SchemeArg::St) => SchemeKind::SpaceTime,
        None => table_kind,
    };
    let p = args.p.unwrap_or(table_p);
    let q = match kind {
        SchemeKind::SpaceTime => Some(args.q.or(table_q).unwrap_or(p)),
        SchemeKind::BackwardEuler => None,
    };
    let iface = match args.flux {
        FluxArg::Godunov => InterfaceKind::Godunov,
        FluxArg::Rusanov => InterfaceKind::Rusanov,
    };
    let viscosity = match args.viscosity {
        ViscosityArg::None => ViscosityMode::None,
        ViscosityArg::Full => ViscosityMode::Full,
        ViscosityArg::Adaptive => ViscosityMode::Adaptive,
    };
    let grid = Grid1D::unit(args.n_cells, &problem)?;
    let disc = Discretization::new(&problem, grid, p, q, iface, EcEntropy::Square)?;
    let cfg = SolverConfig { cfl: args.cfl.unwrap_or(table_cfl), viscosity, ..SolverConfig::default() };
    let report = match advance(&disc, kind, &cfg) {
        Ok(r) => r,
        Err(e @ Error::SolverFailure { .. }) => {
            eprintln!("error: {e}");
            return Ok(EXIT_SOLVER);
        }
        Err(e) => return Err(e),
    };
    write_solution(&args.output, &disc, &report)?;
    write_diagnostics(&args.diagnostics, &disc, &report)?;
    println!(
        "problem {} ({}): {} steps to t = {}",
        args.problem,
        problem.name,
        report.steps.len(),
        fmt_g17(report.final_time())
    );
    if let Some(converged) = report.steady_converged {
        println!("steady state {}", if converged { "reached" } else { "not reached" });
    }
    let checks = run_checks(args.problem, &disc, &report);
    checks.iter().for_each(print_check);
    let failed = checks.iter().any(|c| !c.pass);
    Ok(if failed && args.strict { EXIT_VERIFY } else { 0 })
}

fn verify(args: &VerifyArgs) -> Result<u8, Error> {
    let wanted = |name: &str| args.only.as_deref().is_none_or(|o| o == name);
    let mut all_pass = true;
    let mut ran = false;
    let mut report = |c: CheckResult| {
        all_pass &= c.pass;
        print_check(&c);
    };
    for name in PROPERTY_CHECKS.iter().copied().filter(|n| wanted(n)) {
        ran = true;
        if name == "sbp" && args.corrupt_d {
            let mut bases = low_order_bases();
            bases[2].corrupt_deriv_entry(1, 2, 1e-3);
            let worst = operator_identities(&bases);
            report(CheckResult { name: name.into(), pass: worst <= 1e-13, worst });
        } else {
            report(property_check(name, args.samples).expect("listed check"));
        }
    }
    for id in 1..=5u8 {
        let tag = format!("problem{id}");
        if !wanted(&tag) {
            continue;
        }
        ran = true;
        let (kind, p, q, cfl) = table_scheme(id);
        let problem = make_problem(id)?;
        let disc = Discretization::new(&problem, Grid1D::unit(40, &problem)?, p, q, InterfaceKind::Godunov, EcEntropy::Square)?;
        let cfg = SolverConfig { cfl, ..SolverConfig::default() };
        match advance(&disc, kind, &cfg) {
            Ok(run) => run_checks(id, &disc, &run).into_iter().for_each(&mut report),
            Err(e) => {
                eprintln!("error: {tag}: {e}");
                report(CheckResult { name: format!("{tag}_run"), pass: false, worst: f64::NAN });
            }
        }
    }
    if !ran {
        eprintln!("error: no check named {:?}", args.only.as_deref().unwrap_or(""));
        return Ok(EXIT_USAGE);
    }
    Ok(if all_pass { 0 } else { EXIT_VERIFY })
}

fn golden(args: &GoldenArgs) -> Result<u8, Error> {
    std::fs::create_dir_all(&args.out_dir)?;
    for &id in &args.problems {
        let problem = make_problem(id)?;
        let start = std::time::Instant::now();
        let profile = fv_oracle(&problem, args.cells, problem.final_time)?.block_average(args.block.max(1));
        let path = args.out_dir.join(format!("problem{id}.csv"));
        profile.write_csv(&path)?;
        println!("wrote {} ({} points, {:.1} s)", path.display(), profile.x.len(), start.elapsed().as_secs_f64());
        std::io::stdout().flush()?;
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Golden(a) => golden(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_g17;

    #[test]
    fn g17_matches_printf() {
        assert_eq!(fmt_g17(0.0), "0");
        assert_eq!(fmt_g17(1.0), "1");
        assert_eq!(fmt_g17(-2.5), "-2.5");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(fmt_g17(123456.0), "123456");
        assert_eq!(fmt_g17(1e17), "1e+17");
        assert_eq!(fmt_g17(0.025), "0.025000000000000001");
    }
}
