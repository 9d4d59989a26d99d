use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pbprnn::checkpoint::{load_checkpoint, save_checkpoint};
use pbprnn::experiments::{
    curve, drop_sweep, evaluate_battery, for_repetitions, noise_sweep, parse_config, timing_benchmark,
    train_repetition, write_curves, write_metrics, MetricsRecord, ModelKind, RunConfig, TrainedModel,
};
use pbprnn::{Error, SeedTree};

const EXIT_USAGE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SELFTEST: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "pbprnn", version, about = "Train and evaluate recurrent PBP and MC-dropout collision predictors")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key = value run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Checkpoint to write (train) or read (eval, sweeps, bench-timing).
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Replaces the evaluation and sweep episode counts.
    #[arg(long, global = true)]
    episodes_override: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the training protocol once and save a checkpoint.
    Train,
    /// Evaluate the four-scenario battery.
    Eval,
    /// Collision proportion and variance across noise levels.
    SweepNoise,
    /// Collision proportion and variance across dropped-observation counts.
    SweepDrop,
    /// Per-query latency of both models.
    BenchTiming {
        #[arg(long, default_value_t = 1000)]
        queries: usize,
    },
    /// Run the numerical oracle suite.
    Selftest,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    #[value(name = "pbp_rnn", alias = "pbp-rnn")]
    PbpRnn,
    Mde,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::PbpRnn => ModelKind::PbpRnn,
            ModelArg::Mde => ModelKind::Mde,
        }
    }
}

fn load_config(cli: &Cli) -> pbprnn::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(m) = cli.model {
        cfg.model_kind = m.into();
    }
    if let Some(n) = cli.episodes_override {
        cfg.eval_episodes = n;
        cfg.sweep_episodes = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> pbprnn::Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Models to evaluate: the checkpoint alone, or one training run per repetition.
fn models(cli: &Cli, cfg: &RunConfig) -> pbprnn::Result<Vec<TrainedModel>> {
    match &cli.checkpoint {
        Some(path) => {
            let (model, _) = load_checkpoint(path)?;
            Ok(vec![model])
        }
        None => for_repetitions(cfg.repetitions, |r| Ok(train_repetition(cfg, cfg.model_kind, r)?.model)),
    }
}

fn train(cli: &Cli, cfg: &RunConfig) -> pbprnn::Result<()> {
    let outcome = train_repetition(cfg, cfg.model_kind, 0)?;
    let ckpt = cli
        .checkpoint
        .clone()
        .unwrap_or_else(|| cli.out.join(format!("{}.ckpt", cfg.model_kind)));
    if let Some(dir) = ckpt.parent() {
        fs::create_dir_all(dir)?;
    }
    save_checkpoint(&ckpt, &outcome.model, &outcome.pool)?;
    let mut out = create(&cli.out.join(format!("training_{}.csv", cfg.model_kind)))?;
    writeln!(out, "round,episodes,epochs,fit,collisions,epsilon,class_fallback")?;
    for r in &outcome.rounds {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.round,
            r.episodes,
            r.epochs,
            r.fit,
            r.collisions,
            r.epsilon,
            u8::from(r.class_fallback)
        )?;
    }
    out.flush()?;
    println!(
        "trained {} over {} control episodes; checkpoint {}",
        cfg.model_kind,
        outcome.control_episodes,
        ckpt.display()
    );
    Ok(())
}

fn eval(cli: &Cli, cfg: &RunConfig) -> pbprnn::Result<()> {
    let models = models(cli, cfg)?;
    let records = for_repetitions(models.len(), |r| evaluate_battery(&models[r], cfg, r))?;
    let rows: Vec<(usize, MetricsRecord)> = records
        .into_iter()
        .enumerate()
        .flat_map(|(r, ms)| ms.into_iter().map(move |m| (r, m)))
        .collect();
    let path = cli.out.join(format!("metrics_{}.csv", cfg.model_kind));
    let mut out = create(&path)?;
    write_metrics(&mut out, cfg.seed, &rows)?;
    out.flush()?;
    for (r, m) in &rows {
        println!(
            "rep {r} {:<20} collisions {:.2} fpr {:.2} fnr {:.2} loglik {:.4} variance {:.4e}",
            m.scenario.to_string(),
            m.collision_rate,
            m.fpr,
            m.fnr,
            m.loglik_mean,
            m.pred_var_mean
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

type SweepFn = fn(&TrainedModel, &RunConfig, usize) -> pbprnn::Result<Vec<MetricsRecord>>;

fn sweep(cli: &Cli, cfg: &RunConfig, name: &str, run: SweepFn) -> pbprnn::Result<()> {
    let models = models(cli, cfg)?;
    let per_rep = for_repetitions(models.len(), |r| run(&models[r], cfg, r))?;
    let rows: Vec<(usize, MetricsRecord)> = per_rep
        .iter()
        .enumerate()
        .flat_map(|(r, ms)| ms.iter().cloned().map(move |m| (r, m)))
        .collect();
    let mut out = create(&cli.out.join(format!("sweep_{name}_{}.csv", cfg.model_kind)))?;
    write_metrics(&mut out, cfg.seed, &rows)?;
    out.flush()?;
    let points = curve(&per_rep);
    let path = cli.out.join(format!("curves_{name}_{}.csv", cfg.model_kind));
    let mut out = create(&path)?;
    write_curves(&mut out, &points)?;
    out.flush()?;
    for p in &points {
        println!(
            "level {:<8} collisions {:.3} [{:.3}, {:.3}] variance {:.4e}",
            p.level, p.collision_proportion, p.ci95_low, p.ci95_high, p.variance_mean
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn bench(cli: &Cli, cfg: &RunConfig, queries: usize) -> pbprnn::Result<()> {
    let tree = SeedTree::new(cfg.seed).child("timing", 0);
    let (pbp, mde, pool) = match &cli.checkpoint {
        Some(path) => {
            let (model, pool) = load_checkpoint(path)?;
            let other = if model.kind() == ModelKind::PbpRnn { ModelKind::Mde } else { ModelKind::PbpRnn };
            let mut twin = TrainedModel::init(other, cfg.hidden_dim, &mut tree.stream("init", 0))?;
            twin.stats = model.stats.clone();
            if model.kind() == ModelKind::PbpRnn {
                (model, twin, pool)
            } else {
                (twin, model, pool)
            }
        }
        None => {
            let outcome = train_repetition(cfg, ModelKind::PbpRnn, 0)?;
            let mut mde = TrainedModel::init(ModelKind::Mde, cfg.hidden_dim, &mut tree.stream("init", 0))?;
            mde.stats = outcome.model.stats.clone();
            (outcome.model, mde, outcome.pool)
        }
    };
    let windows: Vec<_> = pool.positives().iter().chain(pool.negatives()).cloned().collect();
    if windows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let inputs: Vec<_> = (0..queries).map(|i| windows[i % windows.len()].clone()).collect();
    let report = timing_benchmark(&pbp, &mde, &inputs, &mut tree.stream("queries", 0))?;
    let path = cli.out.join("timing.csv");
    let mut out = create(&path)?;
    writeln!(out, "model,queries,mean_ms,std_ms")?;
    writeln!(out, "pbp_rnn,{},{},{}", report.queries, report.pbp.mean_ms, report.pbp.std_ms)?;
    writeln!(out, "mde,{},{},{}", report.queries, report.mde.mean_ms, report.mde.std_ms)?;
    out.flush()?;
    println!(
        "pbp_rnn {:.4} ± {:.4} ms, mde {:.4} ± {:.4} ms, ratio {:.2}",
        report.pbp.mean_ms, report.pbp.std_ms, report.mde.mean_ms, report.mde.std_ms, report.ratio
    );
    Ok(())
}

fn selftest(cfg: &RunConfig) -> pbprnn::Result<bool> {
    let mut ok = true;
    for report in pbprnn::oracle::run_all(cfg.seed)? {
        println!("{report}");
        ok &= report.passed;
    }
    Ok(ok)
}

fn run(cli: &Cli) -> Result<(), (u8, String)> {
    let cfg = load_config(cli).map_err(|e| match e {
        Error::Config { .. } => (EXIT_CONFIG, e.to_string()),
        Error::Io(_) => (EXIT_CONFIG, format!("cannot read config: {e}")),
        other => (EXIT_CONFIG, other.to_string()),
    })?;
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| (EXIT_USAGE, e.to_string()))?;
    }
    let fail = |e: Error| (EXIT_USAGE, e.to_string());
    match &cli.command {
        Command::Train => train(cli, &cfg).map_err(fail),
        Command::Eval => eval(cli, &cfg).map_err(fail),
        Command::SweepNoise => sweep(cli, &cfg, "noise", noise_sweep).map_err(fail),
        Command::SweepDrop => sweep(cli, &cfg, "drop", drop_sweep).map_err(fail),
        Command::BenchTiming { queries } => bench(cli, &cfg, *queries).map_err(fail),
        Command::Selftest => match selftest(&cfg) {
            Ok(true) => Ok(()),
            Ok(false) => Err((EXIT_SELFTEST, "self-test failed".into())),
            Err(e) => Err((EXIT_SELFTEST, e.to_string())),
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
