use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use causal_unravel::algorithms::{
    unravel_general_c, unravel_memoryless, unravel_recursive, unravel_total_order, Mode, Statistics, UnravelParams,
    UnravelReport,
};
use causal_unravel::channel::{membership_residuals, ProcessMatrix, Step, Unravelling, FACTOR_TOL};
use causal_unravel::rng::Rng;
use causal_unravel::sampling::{default_povm, povm_sidecar_json, sample_outcome_matrix, Povm};
use causal_unravel::synth::{random_comb, Family, SynthSpec};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "unravel", version, about = "Recover the causal order of multipartite quantum processes")]
struct Cli {
    /// Seed for every random draw; required by sampled runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sampling. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Tolerance of exact factorisation tests.
    #[arg(long, global = true, default_value_t = FACTOR_TOL)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    IsometricChain,
    Memoryless,
    TotalOrderChain,
    EntanglingC2,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::IsometricChain => Family::IsometricChain,
            FamilyArg::Memoryless => Family::Memoryless,
            FamilyArg::TotalOrderChain => Family::TotalOrderChain,
            FamilyArg::EntanglingC2 => Family::EntanglingC2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Recursive,
    TotalOrder,
    Memoryless,
    GeneralC,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random comb and write it with its ground truth.
    Generate {
        #[arg(long, value_enum, default_value = "isometric-chain")]
        family: FamilyArg,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        mem_dim: usize,
        #[arg(long, default_value_t = 1)]
        d_env: usize,
        #[arg(long, default_value_t = 0.1)]
        chi_min_target: f64,
        /// Memoryless family: number of constant channels.
        #[arg(long, default_value_t = 0)]
        n_constant: usize,
        /// Comb file; the truth goes next to it as `<stem>.truth.json`.
        #[arg(long, default_value = "comb.json")]
        out: PathBuf,
    },
    /// Recover a causal unravelling of a process.
    Unravel {
        #[arg(long)]
        process: PathBuf,
        #[arg(long, value_enum, default_value = "recursive")]
        algorithm: Algorithm,
        #[arg(long, value_enum, default_value = "exact")]
        mode: ModeArg,
        #[arg(long, default_value_t = 1)]
        c: usize,
        #[arg(long, default_value_t = 0.1)]
        chi_min: f64,
        #[arg(long, default_value_t = 0.05)]
        kappa: f64,
        #[arg(long)]
        rank_bound: Option<usize>,
        #[arg(long)]
        eta_max: Option<f64>,
        #[arg(long)]
        r_max: Option<usize>,
        /// Outcome rows for sampled total-order and memoryless runs.
        #[arg(long)]
        queries: Option<usize>,
        /// Result file; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that an unravelling is valid for a process.
    Verify {
        #[arg(long)]
        process: PathBuf,
        /// Result or truth file.
        #[arg(long)]
        unravelling: PathBuf,
    },
    /// Simulate local IC measurements and write the outcome matrix.
    Sample {
        #[arg(long)]
        process: PathBuf,
        #[arg(long)]
        queries: usize,
        /// CSV file; the POVMs go next to it as `<stem>.povm.json`.
        #[arg(long, default_value = "outcomes.csv")]
        out: PathBuf,
    },
    /// Summarise a result file.
    Report {
        #[arg(long)]
        result: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Verification(String),
}

impl From<causal_unravel::Error> for Failure {
    fn from(e: causal_unravel::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn require_seed(seed: Option<u64>) -> Result<u64, Failure> {
    seed.ok_or_else(|| Failure::Usage("--seed is required for randomized runs".into()))
}

fn generate(cli: &Cli) -> Result<(), Failure> {
    let Command::Generate { family, n, dim, mem_dim, d_env, chi_min_target, n_constant, out } = &cli.command else {
        unreachable!()
    };
    let spec = SynthSpec {
        family: (*family).into(),
        n: *n,
        d: *dim,
        d_mem: *mem_dim,
        d_env: *d_env,
        chi_min_target: *chi_min_target,
        seed: cli.seed.unwrap_or(0),
        n_constant: *n_constant,
    };
    let s = random_comb(&spec)?;
    let truth_path = sibling(out, ".truth.json");
    fs::write(out, s.comb.to_json()?)?;
    fs::write(&truth_path, s.truth.to_json()?)?;
    eprintln!("wrote {} and {}", out.display(), truth_path.display());
    Ok(())
}

fn unravel(cli: &Cli) -> Result<(), Failure> {
    let Command::Unravel { process, algorithm, mode, c, chi_min, kappa, rank_bound, eta_max, r_max, queries, out } =
        &cli.command
    else {
        unreachable!()
    };
    let p = ProcessMatrix::from_json(&read(process)?)?;
    let mode = match mode {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Sampled => Mode::Sampled,
    };
    let seed = match mode {
        Mode::Exact => cli.seed.unwrap_or(0),
        Mode::Sampled => require_seed(cli.seed)?,
    };
    let params = UnravelParams {
        chi_min: *chi_min,
        kappa0: *kappa,
        mode,
        c: *c,
        rank_bound: *rank_bound,
        eta_max: *eta_max,
        r_max: *r_max,
        tol: cli.tol,
        seed,
        ..Default::default()
    };
    let stats = match mode {
        Mode::Exact => Statistics::Exact,
        Mode::Sampled => match queries {
            Some(0) => return Err(Failure::Usage("--queries must be positive".into())),
            Some(q) => Statistics::Sampled(*q),
            None if matches!(algorithm, Algorithm::TotalOrder | Algorithm::Memoryless) => {
                return Err(Failure::Usage("sampled local algorithms need --queries".into()))
            }
            None => Statistics::Exact,
        },
    };
    let report = match algorithm {
        Algorithm::Recursive => unravel_recursive(&p, &params)?,
        Algorithm::GeneralC => unravel_general_c(&p, &params)?,
        Algorithm::TotalOrder => unravel_total_order(&p, stats, *chi_min, &Rng::new(seed))?,
        Algorithm::Memoryless => unravel_memoryless(&p, stats, *chi_min, &Rng::new(seed))?.report,
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let json = report.to_json()?;
    match out {
        Some(path) => fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(())
}

#[derive(Deserialize)]
struct StepsFile {
    #[serde(alias = "ordering")]
    steps: Vec<Step>,
}

fn verify(cli: &Cli) -> Result<(), Failure> {
    let Command::Verify { process, unravelling } = &cli.command else { unreachable!() };
    let p = ProcessMatrix::from_json(&read(process)?)?;
    let file: StepsFile = serde_json::from_str(&read(unravelling)?).map_err(|e| Failure::Usage(e.to_string()))?;
    let u = Unravelling::new(file.steps);
    let residuals = membership_residuals(&p, &u)?;
    let mut first_bad = None;
    for (k, (step, r)) in u.steps.iter().zip(&residuals).enumerate() {
        let ok = *r <= cli.tol;
        println!(
            "step {}: ({}) -> ({})  residual {r:.3e}  {}",
            k + 1,
            step.inputs.join(","),
            step.outputs.join(","),
            if ok { "ok" } else { "FAIL" }
        );
        if !ok && first_bad.is_none() {
            first_bad = Some(k + 1);
        }
    }
    match first_bad {
        None => {
            println!("valid unravelling");
            Ok(())
        }
        Some(k) => Err(Failure::Verification(format!("step {k} is not a last tooth of the reduced process"))),
    }
}

fn sample(cli: &Cli) -> Result<(), Failure> {
    let Command::Sample { process, queries, out } = &cli.command else { unreachable!() };
    if *queries == 0 {
        return Err(Failure::Usage("--queries must be positive".into()));
    }
    let seed = require_seed(cli.seed)?;
    let p = ProcessMatrix::from_json(&read(process)?)?.canonical()?;
    let root = Rng::new(seed);
    let mut povm_rng = root.substream(0);
    let ins: Vec<Povm> = p.inputs.iter().map(|w| default_povm(w.dim, &mut povm_rng)).collect::<Result<_, _>>()?;
    let outs: Vec<Povm> = p.outputs.iter().map(|w| default_povm(w.dim, &mut povm_rng)).collect::<Result<_, _>>()?;
    let m = sample_outcome_matrix(&p, &ins, &outs, *queries, &root.substream(1))?;
    m.write_csv(fs::File::create(out)?)?;
    let labels: Vec<String> = p.input_labels().into_iter().chain(p.output_labels()).collect();
    let povms: Vec<Povm> = ins.into_iter().chain(outs).collect();
    let side = sibling(out, ".povm.json");
    fs::write(&side, povm_sidecar_json(&labels, &povms)?)?;
    eprintln!("wrote {} and {}", out.display(), side.display());
    Ok(())
}

fn render_report(r: &UnravelReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "algorithm: {} ({} mode)", r.algorithm, if r.mode == Mode::Exact { "exact" } else { "sampled" });
    let _ = writeln!(s, "ordering:");
    for (k, step) in r.steps.iter().enumerate() {
        let _ = writeln!(s, "  {:>2}. ({}) -> ({})", k + 1, step.inputs.join(","), step.outputs.join(","));
    }
    match (&r.budget, &r.independence) {
        (Some(b), _) => {
            let _ = writeln!(s, "queries: {}", r.queries);
            let _ = writeln!(
                s,
                "budget: N = ceil(2 ln(2/kappa) / eps^2) = {} with eps = {:.6e}, kappa = {:.6e}; delta = {:.6e}; max queries 3 n^3 N = {}",
                b.shots_per_estimate, b.eps, b.kappa, b.delta, b.max_queries
            );
        }
        (None, Some(ind)) if ind.queries > 0 => {
            let _ = writeln!(s, "queries: {} outcome rows", ind.queries);
        }
        _ => {
            let _ = writeln!(s, "queries: {} (exact mode)", r.queries);
        }
    }
    if let Some(ind) = &r.independence {
        let _ = writeln!(s, "estimated correlations (* = dependent at threshold {:.4}):", ind.chi_minus);
        let _ = write!(s, "  {:>8}", "");
        for b in &ind.outputs {
            let _ = write!(s, " {b:>9}");
        }
        let _ = writeln!(s);
        for (i, a) in ind.inputs.iter().enumerate() {
            let _ = write!(s, "  {a:>8}");
            for j in 0..ind.outputs.len() {
                let mark = if ind.ind[i][j] { ' ' } else { '*' };
                let _ = write!(s, " {:>8.4}{mark}", ind.chi_hat[i][j]);
            }
            let _ = writeln!(s);
        }
    }
    if let Some(bound) = r.error_bound {
        let rmax = r.certificate.iter().map(|e| e.r).max().unwrap_or(1);
        let eta = r.certificate.iter().map(|e| e.eta).fold(0.0, f64::max);
        let _ = writeln!(
            s,
            "error bound: 8 sqrt(2) m r^(1/4) eta^(1/2) = {bound:.6} (m = {}, r = {rmax}, eta = {eta})",
            r.steps.len()
        );
    }
    if r.warnings.is_empty() {
        let _ = writeln!(s, "warnings: none");
    } else {
        let _ = writeln!(s, "warnings:");
        for w in &r.warnings {
            let _ = writeln!(s, "  - {w}");
        }
    }
    s
}

fn report(cli: &Cli) -> Result<(), Failure> {
    let Command::Report { result } = &cli.command else { unreachable!() };
    let r = UnravelReport::from_json(&read(result)?)?;
    print!("{}", render_report(&r));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Generate { .. } => generate(&cli),
        Command::Unravel { .. } => unravel(&cli),
        Command::Verify { .. } => verify(&cli),
        Command::Sample { .. } => sample(&cli),
        Command::Report { .. } => report(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
