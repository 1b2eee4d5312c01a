//! `clusterfe`: experiment runner, micro-benchmarks and privacy evaluation.
//!
//! Exit codes: 0 success, 2 usage error, 3 runtime failure.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde_json::json;

use clustered_fe::bench::{encrypt_cost, filter_cost, Timing};
use clustered_fe::clustering::{cluster_weights, WeightVector};
use clustered_fe::dmcfe::SecurityLevel;
use clustered_fe::filter::BitsPerEntry;
use clustered_fe::harness::{run_experiment, ExperimentConfig, HarnessError, Mode, PartitionMode};
use clustered_fe::privacy::{
    aggregate_error_bound, attack_trial, estimation_error_bound, sign_test_p_value, AttackConfig,
    Setting, ATTACK_CSV_HEADER, BOUND_CSV_HEADER,
};
use clustered_fe::rng::{derive_seed, rng_from_seed};

#[derive(Parser)]
#[command(name = "clusterfe", version, about = "Clustered functional-encryption aggregation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a federated experiment and write per-round metrics as CSV.
    Simulate(SimulateArgs),
    /// Compare clustered and full encryption cost; prints a JSON report.
    BenchEncrypt(BenchEncryptArgs),
    /// Time filter construction and measure its false-positive rate.
    BenchFilter(BenchFilterArgs),
    /// Cluster-inference attack under IID and non-IID partitions.
    AttackEval(AttackArgs),
    /// Monte-Carlo check of the estimation-error lower bounds.
    BoundCheck(BoundArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fedavg,
    #[value(name = "fedavg_wc")]
    FedavgWc,
    Enccluster,
    #[value(name = "enccluster_nobf")]
    EncclusterNobf,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Fedavg => Mode::FedAvg,
            ModeArg::FedavgWc => Mode::FedAvgWc,
            ModeArg::Enccluster => Mode::EncCluster,
            ModeArg::EncclusterNobf => Mode::EncClusterNoBf,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 30)]
    clients: usize,
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    participation: f64,
    #[arg(long, default_value_t = 128)]
    clusters: usize,
    #[arg(long, default_value_t = 8)]
    bpe: u32,
    #[arg(long, default_value_t = 256)]
    key_size: u32,
    /// Dirichlet concentration α for a non-IID split.
    #[arg(long, conflicts_with = "iid")]
    dirichlet: Option<f64>,
    /// IID split (the default).
    #[arg(long)]
    iid: bool,
    #[arg(long, value_enum, default_value = "enccluster")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchEncryptArgs {
    #[arg(long, default_value_t = 128)]
    clusters: usize,
    #[arg(long, default_value_t = 256)]
    key_size: u32,
    #[arg(long, default_value_t = 100_000)]
    dims: usize,
    #[arg(long, default_value_t = 5)]
    repeat: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchFilterArgs {
    #[arg(long, default_value_t = 100_000)]
    dims: usize,
    #[arg(long, default_value_t = 128)]
    clusters: u32,
    #[arg(long, default_value_t = 8)]
    bpe: u32,
    #[arg(long, default_value_t = 4)]
    arity: u8,
    #[arg(long, default_value_t = 1_000_000)]
    probes: usize,
    #[arg(long, default_value_t = 5)]
    repeat: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SettingArg {
    Iid,
    Noniid,
    Both,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long, value_enum, default_value = "both")]
    setting: SettingArg,
    /// Number of paired trials; trial i uses seed + i.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 32)]
    kappa: usize,
    #[arg(long, default_value_t = 10)]
    clients: usize,
    #[arg(long, default_value_t = 5)]
    rounds: usize,
    /// Dirichlet concentration of the non-IID setting.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1000)]
    dims: usize,
    #[arg(long, default_value_t = 16)]
    kappa: usize,
    #[arg(long, default_value_t = 8)]
    bpe: u32,
    /// Clients per trial; 1 evaluates the single-client bound only.
    #[arg(long, default_value_t = 4)]
    clients: usize,
    /// Corruption draws averaged per trial.
    #[arg(long, default_value_t = 100)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidArgument(m) => Failure::Usage(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn usage(m: impl Into<String>) -> Failure {
    Failure::Usage(m.into())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::BenchEncrypt(a) => bench_encrypt(a),
        Command::BenchFilter(a) => bench_filter(a),
        Command::AttackEval(a) => attack_eval(a),
        Command::BoundCheck(a) => bound_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn emit(out: Option<&Path>, content: &str) -> Result<(), Failure> {
    let Some(path) = out else {
        print!("{content}");
        return Ok(());
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(runtime)?;
    tmp.write_all(content.as_bytes()).map_err(runtime)?;
    tmp.persist(path).map_err(runtime)?;
    Ok(())
}

fn header(command: &str, entries: &[(&str, String)]) -> String {
    let mut out = format!("# clusterfe {command}\n");
    for (k, v) in entries {
        writeln!(out, "# {k} = {v}").expect("write to string");
    }
    out
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let cfg = ExperimentConfig {
        clients: a.clients,
        rounds: a.rounds,
        epochs: a.epochs,
        participation: a.participation,
        kappa: a.clusters,
        bpe: a.bpe,
        key_size: a.key_size,
        seed: a.seed,
        mode: a.mode.into(),
        partition: match a.dirichlet {
            Some(alpha) if alpha.is_finite() && alpha > 0.0 => PartitionMode::Dirichlet(alpha),
            Some(alpha) => return Err(usage(format!("Dirichlet α must be positive, got {alpha}"))),
            None => PartitionMode::Iid,
        },
        ..ExperimentConfig::default()
    };
    cfg.validate()?;
    let metrics = run_experiment(&cfg)?;
    let mut text = header("simulate", &cfg.entries());
    text.push_str(&metrics.to_csv());
    emit(a.out.as_deref(), &text)
}

fn level(key_size: u32) -> Result<SecurityLevel, Failure> {
    SecurityLevel::from_bits(key_size).map_err(|e| usage(e.to_string()))
}

fn timing_json(pairs: &[(&str, Option<Timing>)], pick: fn(&Timing) -> f64) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for (name, t) in pairs {
        if let Some(t) = t {
            map.insert((*name).to_string(), json!(pick(t)));
        }
    }
    serde_json::Value::Object(map)
}

fn bench_encrypt(a: BenchEncryptArgs) -> Result<(), Failure> {
    let lvl = level(a.key_size)?;
    if a.clusters == 0 || a.dims == 0 || a.repeat == 0 {
        return Err(usage("clusters, dims and repeat must be positive"));
    }
    let b = encrypt_cost(lvl, a.clusters, a.dims, a.repeat, a.seed, true).map_err(runtime)?;
    let pairs = [
        ("clustered", Some(b.clustered)),
        ("filter", Some(b.filter)),
        ("full", b.full),
    ];
    let report = json!({
        "config": {
            "command": "bench-encrypt",
            "clusters": a.clusters,
            "key_size": a.key_size,
            "curve": lvl.curve().name(),
            "dims": a.dims,
            "repeat": a.repeat,
            "seed": a.seed,
            "bpe": 8,
            "arity": 4,
        },
        "median_ms": timing_json(&pairs, |t| t.median_ms),
        "p10_ms": timing_json(&pairs, |t| t.p10_ms),
        "p90_ms": timing_json(&pairs, |t| t.p90_ms),
        "ratio": b.ratio(),
    });
    emit(a.out.as_deref(), &format!("{report:#}\n"))
}

fn bench_filter(a: BenchFilterArgs) -> Result<(), Failure> {
    let bpe = BitsPerEntry::from_bits(a.bpe).map_err(|e| usage(e.to_string()))?;
    if a.dims == 0 || a.clusters == 0 || a.repeat == 0 {
        return Err(usage("dims, clusters and repeat must be positive"));
    }
    if a.arity != 3 && a.arity != 4 {
        return Err(usage(format!("arity must be 3 or 4, got {}", a.arity)));
    }
    let b = filter_cost(a.dims, a.clusters, a.arity, bpe, a.probes, a.repeat, a.seed).map_err(runtime)?;
    let report = json!({
        "config": {
            "command": "bench-filter",
            "dims": a.dims,
            "clusters": a.clusters,
            "bpe": a.bpe,
            "arity": a.arity,
            "probes": a.probes,
            "repeat": a.repeat,
            "seed": a.seed,
        },
        "median_ms": { "build": b.build.median_ms },
        "p10_ms": { "build": b.build.p10_ms },
        "p90_ms": { "build": b.build.p90_ms },
        "ratio": b.bits_per_key / f64::from(a.bpe),
        "bits_per_key": b.bits_per_key,
        "false_positive_rate": b.false_positive_rate,
    });
    emit(a.out.as_deref(), &format!("{report:#}\n"))
}

fn attack_eval(a: AttackArgs) -> Result<(), Failure> {
    if a.seeds == 0 {
        return Err(usage("seeds must be positive"));
    }
    if !(a.alpha.is_finite() && a.alpha > 0.0) {
        return Err(usage(format!("alpha must be positive, got {}", a.alpha)));
    }
    let cfg = AttackConfig {
        base: ExperimentConfig {
            clients: a.clients,
            rounds: a.rounds,
            kappa: a.kappa,
            mode: Mode::FedAvgWc,
            ..AttackConfig::default().base
        },
        alpha: a.alpha,
    };
    cfg.base.validate()?;
    let settings: &[Setting] = match a.setting {
        SettingArg::Iid => &[Setting::Iid],
        SettingArg::Noniid => &[Setting::NonIid],
        SettingArg::Both => &[Setting::Iid, Setting::NonIid],
    };
    let mut entries = vec![
        ("setting", settings.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",")),
        ("seeds", a.seeds.to_string()),
        ("alpha", a.alpha.to_string()),
    ];
    entries.extend(cfg.base.entries());
    let mut text = header("attack-eval", &entries);
    text.push_str(ATTACK_CSV_HEADER);
    text.push('\n');
    let mut wins = 0;
    for i in 0..a.seeds {
        let seed = a.seed + i;
        let mut finals = Vec::new();
        for &s in settings {
            let rows = attack_trial(&cfg, s, seed).map_err(|e| Failure::Runtime(e.to_string()))?;
            for r in &rows {
                writeln!(text, "{}", r.csv_row(seed)).expect("write to string");
            }
            finals.push(rows.last().map_or(0.0, |r| r.mse_weight_space));
        }
        if finals.len() == 2 && finals[1] > finals[0] {
            wins += 1;
        }
    }
    emit(a.out.as_deref(), &text)?;
    if settings.len() == 2 {
        eprintln!(
            "non-IID attack MSE above IID in {wins}/{} seeds; one-sided sign test p = {:.3e}",
            a.seeds,
            sign_test_p_value(wins, a.seeds as usize)
        );
    }
    Ok(())
}

fn bound_check(a: BoundArgs) -> Result<(), Failure> {
    if a.trials == 0 || a.dims == 0 || a.clients == 0 || a.draws == 0 {
        return Err(usage("trials, dims, clients and draws must be positive"));
    }
    if a.kappa == 0 || a.kappa > a.dims {
        return Err(usage(format!("kappa must be in [1, {}]", a.dims)));
    }
    if a.bpe == 0 || a.bpe > 64 {
        return Err(usage("bpe must be in [1, 64]"));
    }
    let entries = [
        ("trials", a.trials.to_string()),
        ("dims", a.dims.to_string()),
        ("kappa", a.kappa.to_string()),
        ("bpe", a.bpe.to_string()),
        ("clients", a.clients.to_string()),
        ("draws", a.draws.to_string()),
        ("seed", a.seed.to_string()),
        ("weights", "uniform[0,1)".to_string()),
        ("aggregate_divisor", "N".to_string()),
    ];
    let mut text = header("bound-check", &entries);
    text.push_str(BOUND_CSV_HEADER);
    text.push('\n');
    let mut held = 0;
    for t in 0..a.trials {
        let ts = derive_seed(a.seed, "trial", t as u64);
        let weights: Vec<WeightVector> = (0..a.clients)
            .map(|k| {
                let mut rng = rng_from_seed(derive_seed(ts, "weights", k as u64));
                WeightVector::new((0..a.dims).map(|_| rng.gen::<f64>()).collect()).expect("finite")
            })
            .collect();
        let models = weights
            .iter()
            .enumerate()
            .map(|(k, w)| cluster_weights(w, a.kappa, derive_seed(ts, "cluster", k as u64)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(runtime)?;
        let report = if a.clients == 1 {
            estimation_error_bound(&weights[0], &models[0], a.bpe, a.draws, ts)
        } else {
            let inputs: Vec<_> = weights.iter().zip(&models).collect();
            aggregate_error_bound(&inputs, a.bpe, a.draws, ts)
        }
        .map_err(runtime)?;
        held += usize::from(report.holds());
        writeln!(text, "{}", report.csv_row(t)).expect("write to string");
    }
    emit(a.out.as_deref(), &text)?;
    eprintln!("bounds hold in {held}/{} trials", a.trials);
    Ok(())
}
