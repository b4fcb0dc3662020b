//! Command-line front end: generation, threshold reports, simulation,
//! optimization, and sweep CSVs, all reproducible.
//!
//! Every run that writes an artifact also writes `<output>.manifest.json`
//! recording the command, resolved parameters, seed, and SHA-256 digests of
//! all inputs and outputs; identical manifests imply bit-identical outputs.
//! A JSON config file (`--config run.json`, flat map of long flag names to
//! values) can supply any flag; explicit command-line flags win.
//!
//! Exit codes are stable API: 0 success/subcritical, 10 supercritical,
//! 2 usage, 3 I/O or malformed input file, 4 partition problems, 5 size caps,
//! 6 asymmetry, 7 convergence failures.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::curing::{
    certify, optimal_threshold_2d_with, uniform_policy, write_sweep_csv, CostModel, CuringSolution,
    Effort, GeneralOptions, SubgradientMethod, SweepRecord, TwoLevelInstance, TwoLevelOptions,
};
use crate::error::{Error, Result};
use crate::exactsis::{build_generator, gillespie_marginals, transient_marginals};
use crate::netmodel::{
    generate_bipartite, generate_interconnected_stars, generate_star, network_from_edge_list_csv,
    network_from_json, network_to_json, CommunityKind, ContactNetwork, CuringVector,
    InterconnectedStarsConfig, FORMAT_TAG,
};
use crate::nimfa::{
    integrate_full, integrate_reduced, threshold, uniform_times, IntegrateOptions,
};
use crate::partition::{
    build_quotient, partition_from_json, partition_to_json, quotient_from_json, Partition,
    QuotientModel, ReducedCuringVector,
};
use crate::spectral::stability_modulus;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Maps every error variant onto the stable exit-code groups. The grouping is
/// by variant, not by call site: flag-level validation errors are usage (2),
/// anything arising from reading or parsing files is I/O (3).
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_)
        | Error::InvalidInstance(_)
        | Error::InvalidSize(_)
        | Error::InvalidProbability(_)
        | Error::DimensionMismatch { .. } => 2,
        Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_)
        | Error::Format(_)
        | Error::NegativeRate { .. }
        | Error::NonzeroDiagonal { .. }
        | Error::NonFiniteEntry { .. }
        | Error::NonSquare { .. } => 3,
        Error::NotEquitable { .. } | Error::PartitionMismatch(_) => 4,
        Error::TooLarge { .. } => 5,
        Error::AsymmetricQuotient(_) | Error::AsymmetricInput | Error::NotSymmetric(_) => 6,
        Error::NonConvergence(_)
        | Error::StepFailure(_)
        | Error::ToleranceUnreachable(_)
        | Error::NoRoot(_)
        | Error::InvariantViolation(_) => 7,
    }
}

pub const EXIT_SUPERCRITICAL: i32 = 10;

#[derive(Parser, Debug)]
#[command(name = "epi-curing", version = VERSION, about = "SIS epidemics on networks: simulation, reduction, and optimal curing")]
pub struct Cli {
    /// JSON file supplying default flag values (command line wins).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Generate a network + partition file pair.
    Gen(GenArgs),
    /// Stability-modulus report (full and, with a partition, reduced).
    Threshold(ThresholdArgs),
    /// Integrate or sample the epidemic; writes a trajectory CSV.
    Simulate(SimulateArgs),
    /// Solve for curing rates; writes a solution JSON with certificate.
    Optimize(OptimizeArgs),
    /// Optimal-vs-uniform cost sweep; writes a CSV, one row per point.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct GenArgs {
    #[command(subcommand)]
    pub topology: GenTopology,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GenTopology {
    /// Hub with k leaves at rate beta.
    Star {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        beta: f64,
        /// Output prefix; writes <out>.network.json and <out>.partition.json.
        #[arg(long, default_value = "star")]
        out: String,
    },
    /// Interconnected stars: ER(p) core of m hubs at rate beta0, m' terminal
    /// communities of k leaves each attached round-robin at rate beta1.
    Stars {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        mprime: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        beta0: f64,
        #[arg(long)]
        beta1: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Relative rate jitter in [0, 1); keeps the partition equitable.
        #[arg(long)]
        jitter: Option<f64>,
        #[arg(long, default_value = "stars")]
        out: String,
    },
    /// Complete bipartite network with k0 and k1 nodes per side.
    Bipartite {
        #[arg(long)]
        k0: usize,
        #[arg(long)]
        k1: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value = "bipartite")]
        out: String,
    },
    /// Import a rate matrix (network JSON or edge-list CSV) and emit the v1
    /// file pair with a singleton partition.
    Matrix {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "network")]
        out: String,
    },
}

#[derive(Args, Debug, Serialize)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Curing rates: one value for all nodes or a comma list (length N);
    /// falls back to rates embedded in the network file.
    #[arg(long)]
    pub delta: Option<String>,
    /// Equitability tolerance for the reduced check.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    /// Mean-field ODE system on the full network.
    Nimfa,
    /// Mean-field ODE system on the quotient (needs --partition).
    Reduced,
    /// Dense master-equation marginals (N capped).
    Exact,
    /// Stochastic simulation marginals over --runs sample paths.
    Gillespie,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, value_enum)]
    pub mode: SimMode,
    #[arg(long)]
    pub partition: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<String>,
    /// Initial infection probabilities: scalar, per-cell list (reduced), or
    /// per-node list. Gillespie requires 0/1 entries.
    #[arg(long, default_value = "0.5")]
    pub p0: String,
    #[arg(long = "t-end")]
    pub t_end: f64,
    /// Number of uniform sample intervals (samples+1 output rows).
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 10_000)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Override the dense master-equation size cap (hard limit 20).
    #[arg(long = "max-exact-n")]
    pub max_exact_n: Option<usize>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OptMode {
    #[value(name = "2d")]
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "general")]
    General,
    #[serde(rename = "uniform")]
    Uniform,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradMethod {
    Eigenvector,
    ForwardDifference,
}

impl From<GradMethod> for SubgradientMethod {
    fn from(g: GradMethod) -> Self {
        match g {
            GradMethod::Eigenvector => SubgradientMethod::Eigenvector,
            GradMethod::ForwardDifference => SubgradientMethod::ForwardDifference,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct OptimizeArgs {
    #[arg(long, value_enum)]
    pub mode: OptMode,
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Quotient JSON (as written by the library) instead of network+partition.
    #[arg(long)]
    pub quotient: Option<PathBuf>,
    /// Central community indices (comma list); overrides tagging from the
    /// partition file.
    #[arg(long)]
    pub central: Option<String>,
    /// Per-node cost for central communities (2d; also usable with tagging
    /// in general/uniform modes).
    #[arg(long)]
    pub c0: Option<f64>,
    /// Per-node cost for terminal communities.
    #[arg(long)]
    pub c1: Option<f64>,
    /// Per-community cost list (general/uniform modes).
    #[arg(long)]
    pub costs: Option<String>,
    /// Single per-node cost for every community.
    #[arg(long)]
    pub cost: Option<f64>,
    /// Cost tolerance (defaults to 1e-6 of the l_max budget).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Effort exponent p >= 1 (general/uniform modes; default linear).
    #[arg(long = "effort-power")]
    pub effort_power: Option<f64>,
    #[arg(long, value_enum, default_value_t = GradMethod::Eigenvector)]
    pub method: GradMethod,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepTopology {
    Star,
    Stars,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SweepVariable {
    #[serde(rename = "k")]
    K,
    /// c0/c1 with c1 held fixed.
    #[value(name = "cost_ratio", alias = "cost-ratio")]
    #[serde(rename = "cost_ratio")]
    CostRatio,
    #[serde(rename = "p")]
    P,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub topology: SweepTopology,
    #[arg(long, value_enum)]
    pub variable: SweepVariable,
    /// Comma list of sweep values.
    #[arg(long)]
    pub values: Option<String>,
    /// Inclusive start:end:step range.
    #[arg(long)]
    pub range: Option<String>,
    /// Leaves per community (baseline when k is not the swept variable).
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    #[arg(long, default_value_t = 50)]
    pub mprime: usize,
    #[arg(long, default_value_t = 0.3)]
    pub p: f64,
    /// Star rate (star topology).
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta0: f64,
    #[arg(long, default_value_t = 0.3)]
    pub beta1: f64,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Reuse the base seed at every sweep point (same ER core across k);
    /// default derives per-k seeds as seed+k.
    #[arg(long = "fixed-core", default_value_t = false)]
    pub fixed_core: bool,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub output: PathBuf,
}

// ---------------------------------------------------------------------------
// entry points
// ---------------------------------------------------------------------------

pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    init_thread_pool();
    let argv: Vec<String> = args.into_iter().map(Into::into).collect();
    let argv = match merge_config_args(argv) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code_for(e)
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("EPI_CURING_THREADS") {
        if let Ok(t) = v.parse::<usize>() {
            if t >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
        }
    }
}

/// Appends flags from the `--config` JSON file (a flat object of long flag
/// names to scalar values) for every flag not already present on the command
/// line. `true` adds a bare switch, `false`/`null` add nothing.
pub fn merge_config_args(mut argv: Vec<String>) -> Result<Vec<String>> {
    let mut cfg_path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            cfg_path = argv.get(i + 1).cloned();
        } else if let Some(rest) = a.strip_prefix("--config=") {
            cfg_path = Some(rest.to_string());
        }
    }
    let Some(path) = cfg_path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)?;
    let doc: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text)?;
    for (key, value) in &doc {
        if key == "config" {
            continue;
        }
        let flag = format!("--{key}");
        let with_eq = format!("{flag}=");
        if argv.iter().any(|a| a == &flag || a.starts_with(&with_eq)) {
            continue;
        }
        match value {
            serde_json::Value::Bool(true) => argv.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => {
                argv.push(flag);
                argv.push(s.clone());
            }
            other => {
                argv.push(flag);
                argv.push(other.to_string());
            }
        }
    }
    Ok(argv)
}

fn dispatch(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Threshold(a) => cmd_threshold(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

// ---------------------------------------------------------------------------
// manifests
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RunManifest<'a> {
    format: &'a str,
    command: &'a str,
    version: &'a str,
    parameters: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(format!("{:x}", h.finalize()))
}

pub fn manifest_path(anchor: &Path) -> PathBuf {
    let mut s = anchor.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_manifest(
    anchor: &Path,
    command: &str,
    parameters: serde_json::Value,
    seed: Option<u64>,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<()> {
    let mut input_digests = BTreeMap::new();
    for p in inputs {
        input_digests.insert(p.display().to_string(), sha256_file(p)?);
    }
    let mut output_digests = BTreeMap::new();
    for p in outputs {
        output_digests.insert(p.display().to_string(), sha256_file(p)?);
    }
    let man = RunManifest {
        format: FORMAT_TAG,
        command,
        version: VERSION,
        parameters,
        seed,
        inputs: input_digests,
        outputs: output_digests,
    };
    let text = serde_json::to_string_pretty(&man)?;
    std::fs::write(manifest_path(anchor), text + "\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// flag parsing helpers
// ---------------------------------------------------------------------------

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("not a number: {t:?}")))
        })
        .collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<usize>()
                .map_err(|_| Error::InvalidParameter(format!("not an index: {t:?}")))
        })
        .collect()
}

/// Resolves curing rates from the `--delta` flag (scalar broadcast or
/// length-N list), falling back to rates embedded in the network file.
fn resolve_delta(
    flag: Option<&str>,
    embedded: Option<CuringVector>,
    n: usize,
) -> Result<CuringVector> {
    match flag {
        Some(spec) => {
            let v = parse_f64_list(spec)?;
            if v.len() == 1 {
                CuringVector::uniform(n, v[0])
            } else if v.len() == n {
                CuringVector::new(DVector::from_vec(v))
            } else {
                Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                })
            }
        }
        None => embedded.ok_or_else(|| {
            Error::InvalidParameter(
                "no curing rates: pass --delta or embed them in the network file".into(),
            )
        }),
    }
}

fn p0_vector(spec: &str, n: usize) -> Result<DVector<f64>> {
    let v = parse_f64_list(spec)?;
    let out = if v.len() == 1 {
        DVector::from_element(n, v[0])
    } else if v.len() == n {
        DVector::from_vec(v)
    } else {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    };
    for &x in out.iter() {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidProbability(x));
        }
    }
    Ok(out)
}

/// Collapses a per-node vector to a per-cell vector, insisting the values are
/// constant on every cell.
fn reduce_cellwise(pi: &Partition, values: &DVector<f64>) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(pi.n_cells());
    let scale = values.amax().max(1.0);
    for (i, cell) in pi.cells().iter().enumerate() {
        let first = values[cell[0]];
        for &v in cell {
            if (values[v] - first).abs() > 1e-12 * scale {
                return Err(Error::PartitionMismatch(format!(
                    "values not cell-constant: node {v} has {} but its cell {i} starts at {first}",
                    values[v]
                )));
            }
        }
        out[i] = first;
    }
    Ok(out)
}

fn read_network(path: &Path) -> Result<(ContactNetwork, Option<CuringVector>)> {
    network_from_json(&std::fs::read_to_string(path)?)
}

fn read_partition(
    path: &Path,
    n_nodes: usize,
) -> Result<(Partition, Option<Vec<CommunityKind>>)> {
    partition_from_json(&std::fs::read_to_string(path)?, n_nodes)
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

fn cmd_gen(args: &GenArgs) -> Result<i32> {
    let (net, pi, kinds, curing, seed, out) = match &args.topology {
        GenTopology::Star { k, beta, out } => {
            let (net, pi) = generate_star(*k, *beta)?;
            let kinds = vec![CommunityKind::Central, CommunityKind::Terminal];
            (net, pi, Some(kinds), None, None, out.clone())
        }
        GenTopology::Stars {
            m,
            mprime,
            k,
            p,
            beta0,
            beta1,
            seed,
            jitter,
            out,
        } => {
            let cfg = InterconnectedStarsConfig {
                m: *m,
                m_prime: *mprime,
                k: *k,
                p: *p,
                beta0: *beta0,
                beta1: *beta1,
                seed: *seed,
                rate_jitter: *jitter,
            };
            let (net, pi, kinds) = generate_interconnected_stars(&cfg)?;
            (net, pi, Some(kinds), None, Some(*seed), out.clone())
        }
        GenTopology::Bipartite { k0, k1, beta, out } => {
            let (net, pi) = generate_bipartite(*k0, *k1, *beta)?;
            // side 0 is tagged central so the pair is optimizer-ready
            let kinds = vec![CommunityKind::Central, CommunityKind::Terminal];
            (net, pi, Some(kinds), None, None, out.clone())
        }
        GenTopology::Matrix { input, out } => {
            let text = std::fs::read_to_string(input)?;
            let (net, curing) = if input.extension().is_some_and(|e| e == "json") {
                network_from_json(&text)?
            } else {
                (network_from_edge_list_csv(&text)?, None)
            };
            let pi = Partition::singletons(net.n_nodes());
            (net, pi, None, curing, None, out.clone())
        }
    };
    let net_path = PathBuf::from(format!("{out}.network.json"));
    let part_path = PathBuf::from(format!("{out}.partition.json"));
    std::fs::write(&net_path, network_to_json(&net, curing.as_ref())? + "\n")?;
    std::fs::write(&part_path, partition_to_json(&pi, kinds.as_deref())? + "\n")?;
    let q = build_quotient(&net, &pi, None, 1e-9)?;
    println!(
        "N = {}, n = {}, l_max = {}",
        net.n_nodes(),
        q.n,
        q.l_max()
    );
    write_manifest(
        Path::new(&out),
        "gen",
        serde_json::to_value(&args.topology)?,
        seed,
        &[],
        &[&net_path, &part_path],
    )?;
    Ok(0)
}

fn cmd_threshold(a: &ThresholdArgs) -> Result<i32> {
    let (net, embedded) = read_network(&a.network)?;
    let delta = resolve_delta(a.delta.as_deref(), embedded, net.n_nodes())?;
    let rep = threshold(net.rates(), delta.values())?;
    println!("r_full = {}", rep.modulus);
    if let Some(ppath) = &a.partition {
        let (pi, _) = read_partition(ppath, net.n_nodes())?;
        let dbar = ReducedCuringVector::new(reduce_cellwise(&pi, delta.values())?)?;
        let q = build_quotient(&net, &pi, Some(&dbar), a.tol)?;
        let mut m = q.q_t.clone();
        for i in 0..q.n {
            m[(i, i)] -= dbar.values()[i];
        }
        let r_reduced = stability_modulus(&m)?;
        println!("r_reduced = {}", r_reduced);
        if (rep.modulus - r_reduced).abs() > 1e-9 * rep.modulus.abs().max(1.0) {
            return Err(Error::InvariantViolation(format!(
                "full and reduced stability moduli disagree: {} vs {}",
                rep.modulus, r_reduced
            )));
        }
    }
    println!(
        "{}",
        if rep.supercritical {
            "supercritical"
        } else {
            "subcritical"
        }
    );
    Ok(if rep.supercritical { EXIT_SUPERCRITICAL } else { 0 })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    if !(a.t_end > 0.0) || a.samples == 0 {
        return Err(Error::InvalidParameter(format!(
            "need t_end > 0 and samples >= 1, got t_end={} samples={}",
            a.t_end, a.samples
        )));
    }
    let (net, embedded) = read_network(&a.network)?;
    let n = net.n_nodes();
    let delta = resolve_delta(a.delta.as_deref(), embedded, n)?;
    let times = uniform_times(a.t_end, a.samples);
    let mut inputs: Vec<&Path> = vec![&a.network];
    let traj = match a.mode {
        SimMode::Nimfa => {
            let p0 = p0_vector(&a.p0, n)?;
            integrate_full(&net, &delta, &p0, &times, &IntegrateOptions::default())?
        }
        SimMode::Reduced => {
            let ppath = a.partition.as_ref().ok_or_else(|| {
                Error::InvalidParameter("reduced mode needs --partition".into())
            })?;
            inputs.push(ppath);
            let (pi, _) = read_partition(ppath, n)?;
            let dbar = ReducedCuringVector::new(reduce_cellwise(&pi, delta.values())?)?;
            let q = build_quotient(&net, &pi, Some(&dbar), a.tol)?;
            let spec = parse_f64_list(&a.p0)?;
            let pbar0 = if spec.len() == 1 {
                DVector::from_element(q.n, spec[0])
            } else if spec.len() == q.n {
                DVector::from_vec(spec)
            } else if spec.len() == n {
                reduce_cellwise(&pi, &DVector::from_vec(spec))?
            } else {
                return Err(Error::DimensionMismatch {
                    expected: q.n,
                    got: spec.len(),
                });
            };
            for &x in pbar0.iter() {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::InvalidProbability(x));
                }
            }
            integrate_reduced(&q, &dbar, &pbar0, &times, &IntegrateOptions::default())?
        }
        SimMode::Exact => {
            let p0 = p0_vector(&a.p0, n)?;
            let gen = build_generator(&net, &delta)?;
            crate::exactsis::check_dense_cap(n, a.max_exact_n)?;
            let mut dist = vec![0.0f64; gen.n_states()];
            for (state, slot) in dist.iter_mut().enumerate() {
                let mut prob = 1.0;
                for i in 0..n {
                    prob *= if state >> i & 1 == 1 { p0[i] } else { 1.0 - p0[i] };
                }
                *slot = prob;
            }
            transient_marginals(&gen, &dist, &times, a.max_exact_n)?
        }
        SimMode::Gillespie => {
            let p0 = p0_vector(&a.p0, n)?;
            let mut initial = 0u64;
            for i in 0..n {
                if p0[i] == 1.0 {
                    initial |= 1u64 << i;
                } else if p0[i] != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "gillespie needs 0/1 initial states, got p0[{i}] = {}",
                        p0[i]
                    )));
                }
            }
            gillespie_marginals(&net, &delta, initial, &times, a.runs, a.seed)?
        }
    };
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    std::fs::write(&a.output, &buf)?;
    println!(
        "wrote {} samples x {} columns to {}",
        traj.len(),
        traj.dimension(),
        a.output.display()
    );
    let seed = matches!(a.mode, SimMode::Gillespie).then_some(a.seed);
    write_manifest(
        &a.output,
        "simulate",
        serde_json::to_value(a)?,
        seed,
        &inputs,
        &[&a.output],
    )?;
    Ok(0)
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<i32> {
    let mut inputs: Vec<PathBuf> = Vec::new();
    let (q, file_kinds): (QuotientModel, Option<Vec<CommunityKind>>) =
        if let Some(qpath) = &a.quotient {
            inputs.push(qpath.clone());
            (quotient_from_json(&std::fs::read_to_string(qpath)?)?, None)
        } else {
            let npath = a.network.as_ref().ok_or_else(|| {
                Error::InvalidParameter(
                    "optimize needs --quotient, or --network together with --partition".into(),
                )
            })?;
            let ppath = a.partition.as_ref().ok_or_else(|| {
                Error::InvalidParameter(
                    "optimize needs --quotient, or --network together with --partition".into(),
                )
            })?;
            inputs.push(npath.clone());
            inputs.push(ppath.clone());
            let (net, _) = read_network(npath)?;
            let (pi, kinds) = read_partition(ppath, net.n_nodes())?;
            (build_quotient(&net, &pi, None, a.tol)?, kinds)
        };
    let kinds: Option<Vec<CommunityKind>> = if let Some(spec) = &a.central {
        let idx = parse_usize_list(spec)?;
        let mut v = vec![CommunityKind::Terminal; q.n];
        for &i in &idx {
            if i >= q.n {
                return Err(Error::InvalidParameter(format!(
                    "--central index {i} out of range for {} communities",
                    q.n
                )));
            }
            v[i] = CommunityKind::Central;
        }
        Some(v)
    } else {
        file_kinds
    };
    let effort = match a.effort_power {
        Some(p) => Effort::Power(p),
        None => Effort::Linear,
    };
    let community_costs: DVector<f64> = if let Some(cs) = &a.costs {
        let v = parse_f64_list(cs)?;
        if v.len() != q.n {
            return Err(Error::DimensionMismatch {
                expected: q.n,
                got: v.len(),
            });
        }
        DVector::from_vec(v)
    } else if a.c0.is_some() || a.c1.is_some() {
        let kk = kinds.as_ref().ok_or_else(|| {
            Error::InvalidParameter(
                "--c0/--c1 need a central/terminal tagging (partition kinds or --central)".into(),
            )
        })?;
        let c0 = a.c0.unwrap_or(1.0);
        let c1 = a.c1.unwrap_or(1.0);
        DVector::from_fn(q.n, |j, _| {
            if kk[j] == CommunityKind::Central {
                c0
            } else {
                c1
            }
        })
    } else {
        DVector::from_element(q.n, a.cost.unwrap_or(1.0))
    };

    let sol: CuringSolution = match a.mode {
        OptMode::TwoD => {
            if effort != Effort::Linear {
                return Err(Error::InvalidParameter(
                    "2d mode supports linear effort only; use mode=general for --effort-power"
                        .into(),
                ));
            }
            let kk = kinds.ok_or_else(|| {
                Error::InvalidInstance(
                    "2d mode needs a central/terminal tagging (partition kinds or --central)"
                        .into(),
                )
            })?;
            let inst = TwoLevelInstance::from_quotient(
                &q,
                &kk,
                a.c0.unwrap_or(1.0),
                a.c1.unwrap_or(1.0),
            )?;
            optimal_threshold_2d_with(
                &inst,
                &TwoLevelOptions {
                    eps_cost: a.eps,
                    method: a.method.into(),
                    ..TwoLevelOptions::default()
                },
            )?
        }
        OptMode::General => {
            let cost = CostModel::new(community_costs, effort)?;
            crate::curing::optimize_general(
                &q,
                &cost,
                &GeneralOptions {
                    eps_cost: a.eps,
                    ..GeneralOptions::default()
                },
            )?
        }
        OptMode::Uniform => {
            let cost = CostModel::new(community_costs, effort)?;
            let up = uniform_policy(&q, &cost)?;
            let rates = DVector::from_element(q.n, up.delta);
            let certificate = certify(&q.q_t, &rates, 1e-6 * q.l_max().max(1.0))?;
            CuringSolution {
                rates,
                two_level: None,
                cost: up.cost,
                certificate,
                iterations: 0,
                epsilon: a.eps.unwrap_or(0.0),
            }
        }
    };
    std::fs::write(&a.output, sol.to_json()? + "\n")?;
    match sol.two_level {
        Some((d0, d1)) => println!("U = {}, delta0 = {}, delta1 = {}", sol.cost, d0, d1),
        None => println!("U = {}", sol.cost),
    }
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    write_manifest(
        &a.output,
        "optimize",
        serde_json::to_value(a)?,
        None,
        &input_refs,
        &[&a.output],
    )?;
    Ok(0)
}

fn resolve_sweep_values(a: &SweepArgs) -> Result<Vec<f64>> {
    let vals = if let Some(vs) = &a.values {
        parse_f64_list(vs)?
    } else if let Some(r) = &a.range {
        let parts: Vec<&str> = r.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidParameter(format!(
                "range must be start:end:step, got {r:?}"
            )));
        }
        let nums = parse_f64_list(&parts.join(","))?;
        let (start, end, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) {
            return Err(Error::InvalidParameter(format!("range step {step}")));
        }
        let mut out = Vec::new();
        let mut i = 0u64;
        loop {
            let x = start + i as f64 * step;
            if x > end + 1e-9 * step {
                break;
            }
            out.push(x);
            i += 1;
        }
        out
    } else {
        return Err(Error::InvalidParameter(
            "sweep needs --values or --range".into(),
        ));
    };
    if vals.is_empty() {
        return Err(Error::InvalidParameter("empty sweep range".into()));
    }
    Ok(vals)
}

fn sweep_point(a: &SweepArgs, value: f64) -> Result<SweepRecord> {
    let (k, p, c0, c1) = match a.variable {
        SweepVariable::K => {
            if value.fract() != 0.0 || value < 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "k sweep values must be positive integers, got {value}"
                )));
            }
            (value as usize, a.p, a.c0, a.c1)
        }
        SweepVariable::CostRatio => {
            if !(value > 0.0) {
                return Err(Error::InvalidParameter(format!("cost ratio {value}")));
            }
            (a.k, a.p, value * a.c1, a.c1)
        }
        SweepVariable::P => (a.k, value, a.c0, a.c1),
    };
    let (q, kinds) = match a.topology {
        SweepTopology::Star => {
            if a.variable == SweepVariable::P {
                return Err(Error::InvalidParameter(
                    "p sweeps need --topology stars".into(),
                ));
            }
            let (net, pi) = generate_star(k, a.beta)?;
            (
                build_quotient(&net, &pi, None, 1e-9)?,
                vec![CommunityKind::Central, CommunityKind::Terminal],
            )
        }
        SweepTopology::Stars => {
            let seed = if a.fixed_core || a.variable != SweepVariable::K {
                a.seed
            } else {
                a.seed + k as u64
            };
            let cfg = InterconnectedStarsConfig {
                m: a.m,
                m_prime: a.mprime,
                k,
                p,
                beta0: a.beta0,
                beta1: a.beta1,
                seed,
                rate_jitter: a.jitter,
            };
            let (net, pi, kinds) = generate_interconnected_stars(&cfg)?;
            (build_quotient(&net, &pi, None, 1e-9)?, kinds)
        }
    };
    let inst = TwoLevelInstance::from_quotient(&q, &kinds, c0, c1)?;
    let sol = crate::curing::optimal_threshold_2d(&inst, a.eps)?;
    let (d0, d1) = sol.two_level.expect("two-level solver returns a pair");
    let costs = DVector::from_fn(q.n, |j, _| {
        if kinds[j] == CommunityKind::Central {
            c0
        } else {
            c1
        }
    });
    let up = uniform_policy(&q, &CostModel::new(costs, Effort::Linear)?)?;
    Ok(SweepRecord {
        k: value,
        u_star: sol.cost,
        u_uniform: up.cost,
        ratio: up.cost / sol.cost,
        delta0: d0,
        delta1: d1,
    })
}

fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    let values = resolve_sweep_values(a)?;
    // parallel over sweep points; collect keeps the output ordered by index
    let rows: Vec<SweepRecord> = values
        .par_iter()
        .map(|&v| sweep_point(a, v))
        .collect::<Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &rows)?;
    std::fs::write(&a.output, &buf)?;
    println!("wrote {} rows to {}", rows.len(), a.output.display());
    write_manifest(
        &a.output,
        "sweep",
        serde_json::to_value(a)?,
        Some(a.seed),
        &[],
        &[&a.output],
    )?;
    Ok(0)
}
