use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fermimap::choi;
use fermimap::io;
use fermimap::linalg;
use fermimap::maps::{self, DomainSpec};
use fermimap::models::{self, DimerModel, ModelSpec, QuadraticModel};
use fermimap::verify::{self, Selection, SuiteOptions, Tolerances};

/// Completely positive maps for one fermion out of many.
#[derive(Parser)]
#[command(name = "fermimap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the occupation-number basis of F_N over L+1 modes.
    Basis {
        #[arg(short = 'N')]
        particles: usize,
        /// Highest mode index; the basis uses L+1 modes.
        #[arg(short = 'L')]
        l: usize,
    },
    /// Build the Kraus set of a model at one or more times.
    Map(MapArgs),
    /// Run verification scenarios and write JSONL reports.
    Verify(VerifyArgs),
    /// Reproduce one of the worked models.
    Example(ExampleArgs),
}

#[derive(Args)]
struct MapArgs {
    /// Model JSON (inline or a file path). Without it, --u/--v select the dimer.
    #[arg(long)]
    model: Option<String>,
    /// Domain JSON (inline or a file path). Without it, --mu selects Pure2.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    mu: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    u: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    v: Option<f64>,
    /// Times, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0")]
    t: Vec<f64>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    all: bool,
    #[arg(long)]
    algebra: bool,
    #[arg(long)]
    tp: bool,
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    noninteracting: bool,
    #[arg(long)]
    dimer: bool,
    #[arg(long)]
    bounds: bool,
    #[arg(long)]
    probe: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Override a limit, as name=value.
    #[arg(long = "tolerance")]
    tolerances: Vec<String>,
    /// Shift one Kraus entry by this amount (harness self-test).
    #[arg(long, hide = true, allow_negative_numbers = true)]
    perturb: Option<f64>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleName {
    Noninteracting,
    Dimer,
}

#[derive(Args)]
struct ExampleArgs {
    name: ExampleName,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    u: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    v: f64,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    /// Bad input or configuration: exit 2.
    Usage(anyhow::Error),
    /// A check did not pass: exit 1.
    Verification,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Basis { particles, l } => cmd_basis(particles, l),
        Command::Map(args) => cmd_map(args).map_err(Failure::Usage),
        Command::Verify(args) => cmd_verify(args),
        Command::Example(args) => cmd_example(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("FERMIMAP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("FERMIMAP_THREADS must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

/// Inline JSON if it looks like an object, otherwise a file path.
fn read_json_arg(arg: &str) -> anyhow::Result<String> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}"))
    }
}

fn emit(out: Option<&Path>, body: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_basis(particles: usize, l: usize) -> Outcome {
    let modes = l.checked_add(1).ok_or_else(|| anyhow!("-L is too large"))?;
    let basis = fermimap::fock::enumerate_basis(particles, modes)?;
    println!("{}", io::encode_basis(&basis));
    Ok(())
}

fn cmd_map(args: MapArgs) -> anyhow::Result<()> {
    let model = match (&args.model, args.u, args.v) {
        (Some(m), None, None) => io::decode_model_spec(&read_json_arg(m)?)?,
        (None, u, v) if u.is_some() || v.is_some() => {
            ModelSpec::Dimer(DimerModel::new(u.unwrap_or(0.0), v.unwrap_or(0.0))?)
        }
        (Some(_), _, _) => bail!("--model cannot be combined with --u/--v"),
        (None, _, _) => bail!("give --model or --u/--v"),
    };
    let modes = model.num_modes();
    let domain = match (&args.domain, args.mu) {
        (Some(d), None) => io::decode_domain_spec(&read_json_arg(d)?)?,
        (None, Some(mu)) => DomainSpec::pure2(mu, modes)?,
        (Some(_), Some(_)) => bail!("--domain cannot be combined with --mu"),
        (None, None) => bail!("give --domain or --mu"),
    };
    if domain.num_modes != modes {
        bail!("domain has {} modes but the model has {modes}", domain.num_modes);
    }
    if args.t.is_empty() || args.t.iter().any(|t| !t.is_finite()) {
        bail!("--t needs at least one finite time");
    }

    let h = model.hamiltonian(domain.num_particles)?;
    let mut lines = Vec::with_capacity(args.t.len());
    let mut summaries = Vec::with_capacity(args.t.len());
    for &t in &args.t {
        let u = models::unitary_at_time(&h, t)?;
        let ks = maps::kraus_for(&u, &domain, None)?.at_time(t);
        let d = choi::choi_from_kraus(&ks);
        let cp = choi::is_cp(&d, fermimap::tol::POSITIVITY)?;
        let tp: Vec<f64> = ks.tp_defect().diagonal().iter().map(|z| z.re).collect();
        lines.push(json!({
            "kraus_set": io::kraus_set_to_value(&ks),
            "num_operators": ks.len(),
            "tp_defect_diagonal": tp,
            "choi_min_eigenvalue": cp.min_eigenvalue,
            "choi_eigenvalues": d.eigenvalues(),
        }));
        summaries.push(json!({
            "t": t,
            "num_operators": ks.len(),
            "tp_defect_diagonal": tp,
            "choi_min_eigenvalue": cp.min_eigenvalue,
        }));
    }

    let body = if lines.len() == 1 {
        format!("{}\n", lines[0])
    } else {
        lines.iter().map(|l| format!("{l}\n")).collect()
    };
    emit(args.out.as_deref(), &body)?;
    if args.out.is_some() {
        for s in &summaries {
            if args.json {
                println!("{s}");
            } else {
                println!(
                    "t={} operators={} tp_defect_diag={} choi_min_eigenvalue={}",
                    s["t"], s["num_operators"], s["tp_defect_diagonal"], s["choi_min_eigenvalue"]
                );
            }
        }
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Outcome {
    let mut selection = Selection {
        algebra: args.algebra,
        tp: args.tp,
        oracle: args.oracle,
        noninteracting: args.noninteracting,
        dimer: args.dimer,
        bounds: args.bounds,
        probe: args.probe,
    };
    if args.all || selection.is_empty() {
        selection = Selection::all();
    }
    let mut tolerances = Tolerances::default();
    for spec in &args.tolerances {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| anyhow!("--tolerance expects name=value, got '{spec}'"))?;
        let value: f64 = value
            .parse()
            .with_context(|| format!("tolerance value '{value}'"))?;
        tolerances.set(name, value)?;
    }
    let options = SuiteOptions {
        tolerances,
        perturb: args.perturb,
    };

    let reports = verify::run_suite(args.seed, selection, &options);
    emit(args.out.as_deref(), &verify::to_jsonl(&reports))?;
    if args.out.is_some() && !args.json {
        for r in &reports {
            println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.scenario);
        }
    }
    if reports.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn cmd_example(args: ExampleArgs) -> Outcome {
    let (report, passed) = match args.name {
        ExampleName::Noninteracting => example_noninteracting(args.seed)?,
        ExampleName::Dimer => example_dimer(args.u, args.v)?,
    };
    let body = if args.json || args.out.is_some() {
        format!("{report}\n")
    } else {
        format!("{}\n", serde_json::to_string_pretty(&report)?)
    };
    emit(args.out.as_deref(), &body)?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn example_noninteracting(seed: u64) -> anyhow::Result<(Value, bool)> {
    use rand::Rng;
    const MODES: usize = 4;
    let mut rng = verify::case_rng(seed, "example/noninteracting", 0);
    let model = QuadraticModel::new(linalg::random_hermitian(MODES, &mut rng))?;
    let times: Vec<f64> = (0..20).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut deviation = 0.0_f64;
    let mut purity = 0.0_f64;
    let mut choi_gap = 0.0_f64;
    for &t in &times {
        for mu in 0..MODES {
            let r = models::noninteracting_unitarity_check(&model, mu, t)?;
            deviation = deviation.max(r.max_deviation);
            purity = purity.max(r.max_purity_change);
            let closed = models::noninteracting_kraus_closed_form(&model, mu, t)?;
            let generic = models::noninteracting_kraus_generic(&model, mu, t)?;
            choi_gap = choi_gap.max(choi::trace_norm_distance(
                &choi::choi_from_kraus(&closed),
                &choi::choi_from_kraus(&generic),
            )?);
        }
    }
    let (energies, _) = model.eigen();
    let passed = deviation < fermimap::tol::ORACLE
        && purity < fermimap::tol::ORACLE
        && choi_gap < fermimap::tol::CHOI_MATCH;
    let report = json!({
        "example": "noninteracting",
        "seed": seed,
        "num_modes": MODES,
        "single_particle_energies": energies,
        "times": times,
        "max_unitarity_deviation": deviation,
        "max_purity_change": purity,
        "max_choi_distance_closed_form_vs_generic": choi_gap,
        "passed": passed,
    });
    Ok((report, passed))
}

fn example_dimer(u: f64, v: f64) -> anyhow::Result<(Value, bool)> {
    let model = DimerModel::new(u, v)?;
    let diag = models::dimer_analytic_diag(&model)?;
    let diff = models::dimer_listing_diff(&model)?;
    let axis = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut grid = Vec::new();
    let mut worst = diag.spectrum_gap;
    for &gu in &axis {
        for &gv in &axis {
            let d = models::dimer_analytic_diag(&DimerModel::new(gu, gv)?)?;
            worst = worst.max(d.spectrum_gap);
            grid.push(json!({
                "u": gu,
                "v": gv,
                "spectrum_gap": d.spectrum_gap,
                "residual_V_H_Vdag": d.residual_v_h_vdag,
                "residual_Vdag_H_V": d.residual_vdag_h_v,
            }));
        }
    }
    let passed = worst < fermimap::tol::SPECTRUM;
    let report = json!({
        "example": "dimer",
        "u": u,
        "v": v,
        "delta": model.delta(),
        "a": diag.a,
        "b": diag.b,
        "analytic_spectrum": diag.analytic_spectrum,
        "numerical_spectrum": diag.numerical_spectrum,
        "spectrum_gap": diag.spectrum_gap,
        "residual_V_H_Vdag": diag.residual_v_h_vdag,
        "residual_Vdag_H_V": diag.residual_vdag_h_v,
        "listing_diff": diff,
        "grid": grid,
        "passed": passed,
    });
    Ok((report, passed))
}
