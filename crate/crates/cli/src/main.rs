use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qtmtt::codec::Frame;
use qtmtt::config::{Config, TRAIN_CNN_KEYS, TRAIN_DT_KEYS};
use qtmtt::dataset::{
    balance_hard, balance_soft, class_histogram, explode_hard, extract_samples_capped, load_corpus, read_dataset,
    write_dataset, FeatureSource, Manifest,
};
use qtmtt::harness::{evaluate_pipeline, run_anchor, sweep, Pipeline, RdPoint};
use qtmtt::nn::{self, Network};
use qtmtt::rdo::{encode_frame_capped, Predictor, RandomPredictor, SearchMode, TopNConfig, UniformPredictor};
use qtmtt::{ModelBank, Result};

#[derive(Parser)]
#[command(name = "qtmtt", version, about = "QT-MTT partition search with learned split pruning")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// Comma-separated QPs.
    #[arg(long, global = true, value_delimiter = ',', default_value = "22,27,32,37")]
    qps: Vec<i32>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// `key = value` file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Code PGM frames and report rate, PSNR and search effort.
    Encode(EncodeArgs),
    /// Build a training dataset from a directory of PGM frames.
    Dataset(DatasetArgs),
    /// Train the edge-probability network.
    TrainCnn(TrainCnnArgs),
    /// Train the per-size split classifiers.
    TrainDt(TrainDtArgs),
    /// Compare pruned coding against exhaustive search on a corpus.
    Eval(EvalArgs),
    /// Evaluate several top-N configurations against one anchor.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exhaustive,
    Pruned,
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictorKind {
    Pipeline,
    Uniform,
    Random,
}

#[derive(Args)]
struct PipelineFiles {
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    bank: Option<PathBuf>,
}

impl PipelineFiles {
    fn load(&self) -> Result<Pipeline> {
        let (Some(w), Some(b)) = (&self.weights, &self.bank) else {
            return Err(qtmtt::Error::Config("--weights and --bank are both required".into()));
        };
        Ok(Pipeline {
            net: Network::load(w)?,
            bank: ModelBank::load(b)?,
        })
    }
}

#[derive(Args)]
struct EncodeArgs {
    /// Input PGM (P5) files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "exhaustive")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "pipeline")]
    predictor: PredictorKind,
    /// Preset (C1..C4, full), a single N, or `6:3,5:3,4:3,3:3,2:2`.
    #[arg(long, default_value = "C2")]
    topn: TopNConfig,
    #[command(flatten)]
    files: PipelineFiles,
    /// CSV report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print the chosen tree of every 64x64 block.
    #[arg(long)]
    dump_tree: bool,
    /// Cap on nested MTT splits (default: no cap).
    #[arg(long)]
    max_mtt_depth: Option<usize>,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Equalize (depth class, qp) cells.
    #[arg(long)]
    balance: bool,
    #[arg(long, default_value_t = 1000)]
    per_class_target: usize,
    #[arg(long, default_value_t = 8000)]
    per_qp_target: usize,
    /// Cap on nested MTT splits in the ground-truth search (default: no cap).
    #[arg(long)]
    max_mtt_depth: Option<usize>,
}

#[derive(Args)]
struct TrainCnnArgs {
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch CSV log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct TrainDtArgs {
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Stage-1 weights supplying the features.
    #[arg(long, conflicts_with = "teacher_forcing", required_unless_present = "teacher_forcing")]
    weights: Option<PathBuf>,
    /// Use the ground-truth edge vectors as features.
    #[arg(long)]
    teacher_forcing: bool,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    shrinkage: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    images: PathBuf,
    #[command(flatten)]
    files: PipelineFiles,
    #[arg(long, default_value = "C2")]
    topn: TopNConfig,
    /// Training dataset whose manifest must not share images with the corpus.
    #[arg(long)]
    train_dataset: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    images: PathBuf,
    #[command(flatten)]
    files: PipelineFiles,
    /// Configs from least to most aggressive.
    #[arg(long, value_delimiter = ';', default_value = "C1;C2;C3;C4")]
    configs: Vec<String>,
    #[arg(long)]
    train_dataset: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    gnuplot: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.shared.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Encode(a) => encode(&cli.shared, a),
        Command::Dataset(a) => dataset(&cli.shared, a),
        Command::TrainCnn(a) => train_cnn(&cli.shared, config, a),
        Command::TrainDt(a) => train_dt(&cli.shared, config, a),
        Command::Eval(a) => eval(&cli.shared, a),
        Command::Sweep(a) => run_sweep(&cli.shared, a),
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn encode(shared: &Shared, a: EncodeArgs) -> Result<()> {
    let pipeline;
    let uniform = UniformPredictor;
    let random = RandomPredictor { seed: shared.seed };
    let predictor: &dyn Predictor = match a.predictor {
        PredictorKind::Uniform => &uniform,
        PredictorKind::Random => &random,
        PredictorKind::Pipeline => {
            if matches!(a.mode, Mode::Exhaustive) {
                &uniform
            } else {
                pipeline = a.files.load()?;
                &pipeline
            }
        }
    };
    let mode = match a.mode {
        Mode::Exhaustive => SearchMode::Exhaustive,
        Mode::Pruned => SearchMode::Pruned {
            predictor,
            config: a.topn,
        },
    };
    let mut csv = String::from("image,qp,rate,psnr,cost,evaluated_nodes,seconds\n");
    for path in &a.inputs {
        let frame = Frame::read_pgm(path)?;
        for &qp in &shared.qps {
            let enc = encode_frame_capped(&frame, qp, mode, a.max_mtt_depth)?;
            let p = RdPoint {
                qp,
                rate: enc.rd.rate,
                sse: enc.rd.distortion,
                pixels: enc.pixels,
            };
            csv.push_str(&format!(
                "{},{qp},{},{:.6},{:.3},{},{:.6}\n",
                path.display(),
                enc.rd.rate,
                p.psnr(),
                enc.rd.cost,
                enc.stats.evaluated_nodes,
                enc.stats.wall_time
            ));
            if a.dump_tree {
                for ((x, y), tree) in &enc.trees {
                    println!("# {} qp {qp} block {x},{y}", path.display());
                    print!("{tree}");
                }
            }
        }
    }
    write_or_print(a.report.as_deref(), &csv)
}

fn dataset(shared: &Shared, a: DatasetArgs) -> Result<()> {
    let corpus = load_corpus(&a.images)?;
    let mut samples = Vec::new();
    for (i, img) in corpus.iter().enumerate() {
        for &qp in &shared.qps {
            samples.extend(extract_samples_capped(&img.frame, qp, i as u32, a.max_mtt_depth)?);
        }
    }
    let total = samples.len();
    if a.balance {
        samples = balance_soft(samples, a.per_class_target, a.per_qp_target, shared.seed);
    }
    write_dataset(&a.out, &samples)?;
    Manifest::of(&corpus).write(Manifest::path_for(&a.out))?;
    eprintln!("{} images, {total} blocks, {} written", corpus.len(), samples.len());
    for ((class, qp), n) in class_histogram(&samples) {
        eprintln!("  depth class {} qp {qp}: {n}", class.0);
    }
    Ok(())
}

fn train_cnn(shared: &Shared, mut config: Config, a: TrainCnnArgs) -> Result<()> {
    config.check_keys(TRAIN_CNN_KEYS)?;
    if config.raw("seed").is_none() {
        config.set("seed", shared.seed);
    }
    let tc = config.train_config()?;
    let samples = read_dataset(&a.dataset)?;
    let mut net = Network::init(config.net_spec()?, tc.seed)?;
    let report = nn::train(&mut net, &samples, &tc)?;
    let mut log = String::from("epoch,train_loss,train_accuracy,validation_loss,validation_accuracy\n");
    for (i, e) in report.epochs.iter().enumerate() {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        log.push_str(&format!(
            "{},{:.6},{:.6},{},{}\n",
            i + 1,
            e.train_loss,
            e.train_accuracy,
            opt(e.validation_loss),
            opt(e.validation_accuracy)
        ));
    }
    match &a.log {
        Some(p) => fs::write(p, &log)?,
        None => eprint!("{log}"),
    }
    net.save(&a.out)
}

fn train_dt(shared: &Shared, mut config: Config, a: TrainDtArgs) -> Result<()> {
    config.check_keys(TRAIN_DT_KEYS)?;
    if config.raw("seed").is_none() {
        config.set("seed", shared.seed);
    }
    let mut params = config.gbdt_params()?;
    params.rounds = a.rounds.unwrap_or(params.rounds);
    params.shrinkage = a.shrinkage.unwrap_or(params.shrinkage);
    params.max_depth = a.max_depth.unwrap_or(params.max_depth);
    let samples = read_dataset(&a.dataset)?;
    let mut per_size = match &a.weights {
        Some(w) => {
            let net = Network::load(w)?;
            let edges = samples
                .iter()
                .map(|s| net.predict_edges(&s.pixels, s.qp as i32))
                .collect::<Result<Vec<_>>>()?;
            explode_hard(&samples, FeatureSource::Predicted(&edges))?
        }
        None => explode_hard(&samples, FeatureSource::TeacherForcing)?,
    };
    if let Some(target) = config.get::<usize>("per_cell_target")? {
        per_size = balance_hard(per_size, target, params.seed);
    }
    let (bank, losses) = ModelBank::train(&per_size, &params)?;
    for (model, (records, loss)) in bank.models().iter().zip(per_size.iter().zip(&losses)) {
        eprintln!(
            "{}: {} records, {} trees, loss {:.4} -> {:.4}",
            model.size_id,
            records.len(),
            model.tree_count(),
            loss.first().copied().unwrap_or(f64::NAN),
            loss.last().copied().unwrap_or(f64::NAN)
        );
    }
    bank.save(&a.out)
}

fn eval_corpus(images: &Path, train_dataset: Option<&Path>) -> Result<Vec<Frame>> {
    let corpus = load_corpus(images)?;
    if let Some(d) = train_dataset {
        Manifest::read(Manifest::path_for(d))?.check_disjoint(&corpus)?;
    }
    Ok(corpus.into_iter().map(|c| c.frame).collect())
}

fn eval(shared: &Shared, a: EvalArgs) -> Result<()> {
    let frames = eval_corpus(&a.images, a.train_dataset.as_deref())?;
    let pipeline = a.files.load()?;
    let anchor = run_anchor(&frames, &shared.qps)?;
    let report = evaluate_pipeline(&frames, &anchor, &pipeline, &a.topn.to_string(), a.topn)?;
    write_or_print(a.report.as_deref(), &report.to_csv())?;
    write_or_print(a.summary.as_deref(), &report.summary())
}

fn run_sweep(shared: &Shared, a: SweepArgs) -> Result<()> {
    let configs = a
        .configs
        .iter()
        .map(|c| Ok((c.clone(), c.parse::<TopNConfig>()?)))
        .collect::<Result<Vec<_>>>()?;
    let frames = eval_corpus(&a.images, a.train_dataset.as_deref())?;
    let pipeline = a.files.load()?;
    let anchor = run_anchor(&frames, &shared.qps)?;
    let report = sweep(&frames, &anchor, &pipeline, &configs)?;
    for r in &report.reports {
        eprint!("{}", r.summary());
    }
    eprintln!(
        "node counts strictly ordered: {}, BD-rate monotone: {}",
        report.nodes_strictly_ordered(),
        report.bd_rate_monotone()
    );
    write_or_print(a.report.as_deref(), &report.to_csv())?;
    if let Some(p) = &a.gnuplot {
        fs::write(p, report.to_gnuplot())?;
    }
    Ok(())
}
