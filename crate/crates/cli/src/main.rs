use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use chansim_core::ansatz::{
    self, check_extremality, extreme_choi, ExtremalityReport, EXTREMALITY_TOL,
};
use chansim_core::blocks::{
    blockwise_mixture_residual, certify_generalized_extreme, GenExtReport, CERTIFY_TOL,
};
use chansim_core::channel::{kraus_to_choi, mix_choi, trace_distance, ChoiState};
use chansim_core::circuit::{
    circuit_kraus, cost_estimate, synthesize, Circuit, CostEstimate, GateCounts,
};
use chansim_core::decompose::{mixture_choi, optimize, OptimizerConfig};
use chansim_core::io::{self as cio, MixtureDoc, ReferenceMixture};
use chansim_core::linalg::{max_abs, Tolerances};
use chansim_core::qutrit;
use chansim_core::random::{random_channel, stream, streams};
use chansim_core::sampler::{sample_channel, SampleReport, StatePreset};

const EXIT_NOT_CONVERGED: u8 = 1;
const EXIT_INVALID_INPUT: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "chansim",
    version,
    about = "Simulate qudit channels with mixtures of extreme-channel circuits"
)]
struct Cli {
    /// Worker threads for the optimizer.
    #[arg(long, env = "CHANSIM_THREADS", global = true)]
    threads: Option<usize>,

    /// Where to write the run manifest (default: next to --out, else stderr).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a random channel from a Haar-random dilation.
    GenChannel(GenArgs),
    /// Approximate a channel by a mixture of extreme channels.
    Decompose(DecomposeArgs),
    /// Compile a decomposition into circuits.
    Synth(SynthArgs),
    /// Compare a channel with a decomposition.
    Verify(VerifyArgs),
    /// Run the randomized simulation on a preset input state.
    Sample(SampleArgs),
    /// Print parameter and gate counts for a dimension.
    Info(InfoArgs),
    /// Write the built-in qutrit example (target channel and three-term mixture).
    Reference(ReferenceArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    dim: usize,
    /// Environment dimension (Kraus rank); defaults to dim².
    #[arg(long)]
    env_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    restarts: Option<usize>,
    /// Iterations per restart for each local stage.
    #[arg(long)]
    iters: Option<usize>,
    /// Quasi-Newton iterations on the smooth surrogate (0: simplex only).
    #[arg(long)]
    surrogate_iters: Option<usize>,
    /// Number of mixture terms (default: dim).
    #[arg(long)]
    terms: Option<usize>,
    /// Keep running all restarts after convergence.
    #[arg(long)]
    exhaustive: bool,
    /// Tolerance for validating the input channel.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Accuracy for the cost estimate (default: the decomposition's epsilon).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Also write a plain-text gate listing.
    #[arg(long)]
    listing: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Target channel (Kraus or Choi document).
    #[arg(long)]
    channel: PathBuf,
    /// Decomposition or reference mixture.
    #[arg(long = "in")]
    input: PathBuf,
    /// Exit with the non-converged status if D_t exceeds epsilon/2.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// mixed, zero or random-pure.
    #[arg(long, default_value = "mixed")]
    state: String,
    #[arg(long, default_value_t = 10_000)]
    shots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InfoArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ReferenceArgs {
    #[arg(long)]
    out_dir: PathBuf,
}

/// Failure classes with distinct exit statuses.
#[derive(Debug)]
enum Failure {
    Invalid(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID_INPUT,
            Failure::Io(_) => EXIT_IO,
        }
    }
}

impl From<chansim_core::Error> for Failure {
    fn from(e: chansim_core::Error) -> Self {
        Failure::Invalid(e.into())
    }
}

type CmdResult<T> = Result<T, Failure>;

fn invalid(msg: impl std::fmt::Display) -> Failure {
    Failure::Invalid(anyhow!("{msg}"))
}

fn read_text(path: &Path) -> CmdResult<String> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Io)?;
    if text.trim().is_empty() {
        return Err(invalid(format!("{} is empty", path.display())));
    }
    Ok(text)
}

fn write_text(path: &Path, text: &str) -> CmdResult<()> {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(invalid)?;
    write_text(path, &text)
}

fn tolerances(tol: Option<f64>) -> CmdResult<Tolerances> {
    match tol {
        None => Ok(Tolerances::default()),
        Some(t) if t > 0.0 && t.is_finite() => Ok(Tolerances::uniform(t)),
        Some(t) => Err(invalid(format!("tolerance must be positive, got {t}"))),
    }
}

fn read_channel(path: &Path, tol: Option<f64>) -> CmdResult<cio::ChannelInput> {
    let text = read_text(path)?;
    Ok(cio::parse_channel(&text, tolerances(tol)?)?)
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Everything needed to rerun a command.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    argv: Vec<String>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    dim: Option<usize>,
    epsilon: Option<f64>,
    seed: Option<u64>,
    budgets: Option<Budgets>,
    threads: usize,
    started_unix: u64,
    finished_unix: u64,
    exit_status: u8,
    version: String,
    format_version: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Budgets {
    restarts: usize,
    iters_per_restart: usize,
    surrogate_iters: usize,
    terms: usize,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            dim: None,
            epsilon: None,
            seed: None,
            budgets: None,
            threads: rayon::current_num_threads(),
            started_unix: now(),
            finished_unix: 0,
            exit_status: 0,
            version: env!("CARGO_PKG_VERSION").to_string(),
            format_version: 1,
        }
    }
}

fn gen_channel(a: &GenArgs, m: &mut RunManifest) -> CmdResult<u8> {
    let env = a.env_dim.unwrap_or(a.dim * a.dim);
    if a.dim < 2 {
        return Err(invalid(format!(
            "dimension must be at least 2, got {}",
            a.dim
        )));
    }
    if env != a.dim && env != a.dim * a.dim {
        return Err(invalid(format!(
            "env-dim must be {} or {}, got {env}",
            a.dim,
            a.dim * a.dim
        )));
    }
    m.dim = Some(a.dim);
    m.seed = Some(a.seed);
    let ch = random_channel(a.dim, env, &mut stream(a.seed, streams::CHANNEL))?;
    write_text(&a.out, &cio::kraus_to_json(&ch)?)?;
    m.outputs.push(a.out.clone());
    println!(
        "wrote {} (d = {}, {} Kraus operators)",
        a.out.display(),
        a.dim,
        ch.num_ops()
    );
    Ok(0)
}

fn decompose(a: &DecomposeArgs, m: &mut RunManifest) -> CmdResult<u8> {
    let target = read_channel(&a.input, a.tol)?.choi();
    let d = target.dim();
    let mut cfg = OptimizerConfig::for_dim(d, a.epsilon, a.seed);
    if let Some(r) = a.restarts {
        cfg.max_restarts = r;
    }
    if let Some(i) = a.iters {
        cfg.max_iters_per_restart = i;
        cfg.surrogate_iters = i;
    }
    if let Some(i) = a.surrogate_iters {
        cfg.surrogate_iters = i;
    }
    cfg.terms = a.terms;
    cfg.stop_when_converged = !a.exhaustive;
    cfg.validate()?;
    m.inputs.push(a.input.clone());
    m.dim = Some(d);
    m.epsilon = Some(a.epsilon);
    m.seed = Some(a.seed);
    m.budgets = Some(Budgets {
        restarts: cfg.max_restarts,
        iters_per_restart: cfg.max_iters_per_restart,
        surrogate_iters: cfg.surrogate_iters,
        terms: cfg.terms.unwrap_or(d),
    });
    let result = optimize(&target, &cfg)?;
    write_json(&a.out, &result)?;
    m.outputs.push(a.out.clone());
    println!(
        "D_t = {:.6e}  diamond bound = {:.6e}  restarts = {}  {}",
        result.achieved_dt,
        result.diamond_bound,
        result.restarts_used,
        if result.converged {
            "converged"
        } else {
            "NOT converged"
        }
    );
    Ok(if result.converged {
        0
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CircuitBundle {
    dim: usize,
    probabilities: Vec<f64>,
    circuits: Vec<Circuit>,
    census: Vec<GateCounts>,
    cost_epsilon: f64,
    cost: CostEstimate,
    /// Max entry of (circuit mixture Choi − decomposition Choi).
    choi_residual: f64,
}

fn synth(a: &SynthArgs, m: &mut RunManifest) -> CmdResult<u8> {
    let result = cio::parse_decomposition(&read_text(&a.input)?)?;
    let p = &result.params;
    let d = p.dim;
    let circuits = p
        .components
        .iter()
        .map(synthesize)
        .collect::<Result<Vec<_>, _>>()?;
    let probabilities = p.probabilities();
    let chois: Vec<ChoiState> = circuits
        .iter()
        .map(|c| circuit_kraus(c).map(|k| kraus_to_choi(&k)))
        .collect::<Result<_, _>>()?;
    let parts: Vec<(f64, &ChoiState)> = probabilities.iter().copied().zip(chois.iter()).collect();
    let choi_residual = max_abs(&(mix_choi(&parts)?.matrix() - mixture_choi(p)?.matrix()));
    let cost_epsilon = a.epsilon.unwrap_or(result.epsilon);
    if !(cost_epsilon > 0.0 && cost_epsilon < 1.0) {
        return Err(invalid(format!(
            "cost epsilon must lie in (0, 1), got {cost_epsilon}"
        )));
    }
    let bundle = CircuitBundle {
        dim: d,
        census: circuits.iter().map(Circuit::census).collect(),
        probabilities,
        circuits,
        cost_epsilon,
        cost: cost_estimate(d, cost_epsilon)?,
        choi_residual,
    };
    m.inputs.push(a.input.clone());
    m.dim = Some(d);
    m.epsilon = Some(cost_epsilon);
    write_json(&a.out, &bundle)?;
    m.outputs.push(a.out.clone());
    if let Some(path) = &a.listing {
        let mut text = String::new();
        for (i, (c, p)) in bundle
            .circuits
            .iter()
            .zip(&bundle.probabilities)
            .enumerate()
        {
            text.push_str(&format!("## component {i}, p = {p:.6}\n{c}\n"));
        }
        write_text(path, &text)?;
        m.outputs.push(path.clone());
    }
    for (i, n) in bundle.census.iter().enumerate() {
        println!(
            "component {i}: p = {:.4}  givens = {}  controlled swaps = {}",
            bundle.probabilities[i], n.givens, n.controlled_swaps
        );
    }
    println!(
        "cost at epsilon = {}: {} continuous gates, ~{} compiled gates",
        cost_epsilon, bundle.cost.continuous_gates, bundle.cost.compiled_estimate
    );
    Ok(0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ComponentCheck {
    probability: f64,
    extremality: Option<ExtremalityReport>,
    certification: GenExtReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VerifyReport {
    dim: usize,
    achieved_dt: f64,
    diamond_bound: f64,
    distinguishing_probability: f64,
    blockwise_residual: f64,
    components: Vec<ComponentCheck>,
}

fn verify(a: &VerifyArgs, m: &mut RunManifest) -> CmdResult<u8> {
    let target = read_channel(&a.channel, a.tol)?.choi();
    let doc = cio::parse_mixture(&read_text(&a.input)?)?;
    if doc.dim() != target.dim() {
        return Err(invalid(format!(
            "dimension mismatch: channel has d = {}, decomposition has d = {}",
            target.dim(),
            doc.dim()
        )));
    }
    let (probabilities, chois, extremality) = match &doc {
        MixtureDoc::Ansatz(r) => {
            let p = &r.params;
            let chois = p
                .components
                .iter()
                .map(extreme_choi)
                .collect::<Result<Vec<_>, _>>()?;
            let ext = p
                .components
                .iter()
                .map(|c| check_extremality(c.dim, &c.mux_angles, EXTREMALITY_TOL).map(Some))
                .collect::<Result<Vec<_>, _>>()?;
            (p.probabilities(), chois, ext)
        }
        MixtureDoc::Reference(r) => {
            let chois = r.component_chois()?;
            let n = chois.len();
            (r.probabilities.clone(), chois, vec![None; n])
        }
    };
    let parts: Vec<(f64, &ChoiState)> = probabilities.iter().copied().zip(chois.iter()).collect();
    let mix = mix_choi(&parts)?;
    let dt = trace_distance(target.matrix(), mix.matrix())?;
    let components = chois
        .iter()
        .zip(&probabilities)
        .zip(extremality)
        .map(|((c, &probability), extremality)| {
            Ok(ComponentCheck {
                probability,
                extremality,
                certification: certify_generalized_extreme(c, CERTIFY_TOL)?,
            })
        })
        .collect::<Result<Vec<_>, chansim_core::Error>>()?;
    let report = VerifyReport {
        dim: target.dim(),
        achieved_dt: dt,
        diamond_bound: 2.0 * dt,
        distinguishing_probability: 0.5 * (1.0 + dt),
        blockwise_residual: blockwise_mixture_residual(&target, &parts)?,
        components,
    };
    m.inputs.extend([a.channel.clone(), a.input.clone()]);
    m.dim = Some(report.dim);
    m.epsilon = a.epsilon;
    println!("D_t                        {:.6e}", report.achieved_dt);
    println!("diamond bound              {:.6e}", report.diamond_bound);
    println!(
        "distinguishing probability {:.6}",
        report.distinguishing_probability
    );
    println!(
        "blockwise residual         {:.3e}",
        report.blockwise_residual
    );
    for (i, c) in report.components.iter().enumerate() {
        let class = c
            .extremality
            .as_ref()
            .map(|e| format!("{:?}", e.class))
            .unwrap_or_else(|| "n/a".into());
        println!(
            "component {i}: p = {:.4}  rank = {}  certified = {}  class = {class}",
            c.probability, c.certification.rank, c.certification.certified
        );
    }
    if let Some(out) = &a.out {
        write_json(out, &report)?;
        m.outputs.push(out.clone());
    }
    Ok(match a.epsilon {
        Some(eps) if dt > eps / 2.0 => EXIT_NOT_CONVERGED,
        _ => 0,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SampleOutput {
    seed: u64,
    state: StatePreset,
    #[serde(flatten)]
    report: SampleReport,
}

fn sample(a: &SampleArgs, m: &mut RunManifest) -> CmdResult<u8> {
    let result = cio::parse_decomposition(&read_text(&a.input)?)?;
    let preset: StatePreset = a.state.parse()?;
    let d = result.params.dim;
    let rho = preset.state(d, &mut stream(a.seed, streams::STATE))?;
    let report = sample_channel(
        &result.params,
        &rho,
        a.shots,
        &mut stream(a.seed, streams::SAMPLE),
    )?;
    m.inputs.push(a.input.clone());
    m.dim = Some(d);
    m.seed = Some(a.seed);
    println!(
        "shots = {}  counts = {:?}  deviation = {:.6e}",
        report.shots, report.empirical_counts, report.deviation
    );
    let out = SampleOutput {
        seed: a.seed,
        state: preset,
        report,
    };
    if let Some(path) = &a.out {
        write_json(path, &out)?;
        m.outputs.push(path.clone());
    }
    Ok(0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InfoTable {
    dim: usize,
    kappa: usize,
    parameters: usize,
    channel_parameters: usize,
    census: GateCounts,
    epsilon: f64,
    cost: CostEstimate,
}

fn info(a: &InfoArgs, m: &mut RunManifest) -> CmdResult<u8> {
    if !(a.epsilon > 0.0 && a.epsilon < 1.0) {
        return Err(invalid(format!(
            "epsilon must lie in (0, 1), got {}",
            a.epsilon
        )));
    }
    let d = a.dim;
    let table = InfoTable {
        dim: d,
        kappa: ansatz::kappa(d)?,
        parameters: ansatz::parameter_count(d)?,
        channel_parameters: d.pow(4) - d * d,
        census: synthesize(&ansatz::ExtremeParams::identity(d)?)?.census(),
        epsilon: a.epsilon,
        cost: cost_estimate(d, a.epsilon)?,
    };
    m.dim = Some(d);
    m.epsilon = Some(a.epsilon);
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&table).map_err(invalid)?
        );
    } else {
        println!("dimension                 {}", table.dim);
        println!("kappa                     {}", table.kappa);
        println!("decomposition parameters  {}", table.parameters);
        println!("channel parameters        {}", table.channel_parameters);
        println!("givens per circuit        {}", table.census.givens);
        println!(
            "controlled swaps          {}",
            table.census.controlled_swaps
        );
        println!("  of which classical      {}", table.census.classical_swaps);
        println!("bits per gate             {}", table.cost.bits_per_gate);
        println!("compiled gate estimate    {}", table.cost.compiled_estimate);
    }
    Ok(0)
}

fn reference(a: &ReferenceArgs, m: &mut RunManifest) -> CmdResult<u8> {
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))
        .map_err(Failure::Io)?;
    let target = a.out_dir.join("target.json");
    let mixture = a.out_dir.join("mixture.json");
    write_text(
        &target,
        &cio::choi_to_json(&qutrit::printed_target_choi()?)?,
    )?;
    write_json(&mixture, &ReferenceMixture::table())?;
    m.dim = Some(3);
    m.outputs.extend([target.clone(), mixture.clone()]);
    println!("wrote {} and {}", target.display(), mixture.display());
    println!(
        "the target is printed to four decimals; verify it with --tol {}",
        qutrit::PRINTED_TOLERANCE
    );
    Ok(0)
}

fn manifest_path(cli: &Cli, m: &RunManifest) -> Option<PathBuf> {
    cli.manifest.clone().or_else(|| {
        m.outputs.first().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    })
}

fn run(cli: &Cli) -> (u8, RunManifest) {
    let (name, result) = {
        let mut m;
        let r = match &cli.command {
            Command::GenChannel(a) => {
                m = RunManifest::new("gen-channel");
                gen_channel(a, &mut m)
            }
            Command::Decompose(a) => {
                m = RunManifest::new("decompose");
                decompose(a, &mut m)
            }
            Command::Synth(a) => {
                m = RunManifest::new("synth");
                synth(a, &mut m)
            }
            Command::Verify(a) => {
                m = RunManifest::new("verify");
                verify(a, &mut m)
            }
            Command::Sample(a) => {
                m = RunManifest::new("sample");
                sample(a, &mut m)
            }
            Command::Info(a) => {
                m = RunManifest::new("info");
                info(a, &mut m)
            }
            Command::Reference(a) => {
                m = RunManifest::new("reference");
                reference(a, &mut m)
            }
        };
        (m, r)
    };
    let mut m = name;
    let code = match result {
        Ok(c) => c,
        Err(f) => {
            let code = f.code();
            match f {
                Failure::Invalid(e) => eprintln!("error (invalid input): {e:#}"),
                Failure::Io(e) => eprintln!("error (i/o): {e:#}"),
            }
            code
        }
    };
    m.exit_status = code;
    m.finished_unix = now();
    (code, m)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error (invalid input): {e}");
            return ExitCode::from(EXIT_INVALID_INPUT);
        }
    }
    let (mut code, m) = run(&cli);
    let text = serde_json::to_string_pretty(&m).unwrap_or_default();
    match manifest_path(&cli, &m) {
        Some(path) => {
            if let Err(e) = fs::write(&path, text) {
                eprintln!("error (i/o): writing {}: {e}", path.display());
                if code == 0 {
                    code = EXIT_IO;
                }
            }
        }
        None => eprintln!("{}", serde_json::to_string(&m).unwrap_or_default()),
    }
    ExitCode::from(code)
}
