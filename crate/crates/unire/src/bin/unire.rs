//! Experiment harness: generate data, train, decode, evaluate, sweep,
//! histogram, benchmark, and error-taxonomy subcommands.
//!
//! Exit codes: 0 success, 2 usage or validation error, 1 runtime error.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use unire::bench::bench_decoders;
use unire::corpus::{corrupt_tensor, CorpusGenerator, GenConfig, NoiseConfig, NoiseMode};
use unire::decode::{hard_decode, joint_decode, oracle_decode, DistanceMode};
use unire::eval::{
    distance_histogram, error_taxonomy, strict_eval_corpus, threshold_sweep, ErrorBreakdown,
};
use unire::io::{
    read_corpus, read_label_space, read_predictions, read_tensor_file, write_corpus,
    write_histogram_csv, write_label_space, write_predictions, write_sweep_csv, write_tensor_file,
};
use unire::label::{one_hot_tensor, render_gold_table};
use unire::model::{read_checkpoint, write_checkpoint};
use unire::train::EpochRecord;
use unire::{
    forward, softmax_cells, train, DecodeConfig, DecoderTag, Dropout, ProbTensor, Result,
    TrainConfig, UnireError, Vocab,
};

#[derive(Parser)]
#[command(name = "unire", about = "Unified-label-table entity and relation extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (and optionally rendered tensors).
    Generate(GenerateArgs),
    /// Train a model and write a checkpoint, vocab, and training log.
    Train(TrainArgs),
    /// Decode tensors or a checkpointed model into predictions.
    Decode(DecodeArgs),
    /// Score predictions against gold annotations.
    Eval(EvalArgs),
    /// Re-decode at a grid of thresholds and write a CSV.
    Sweep(SweepArgs),
    /// Histogram adjacent-boundary distances and write a CSV.
    Hist(HistArgs),
    /// Compare decoder throughput.
    Bench(BenchArgs),
    /// Break unrecovered gold relations into error categories.
    Errors(ErrorsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CliDistanceMode {
    Squared,
    L2,
}

impl From<CliDistanceMode> for DistanceMode {
    fn from(m: CliDistanceMode) -> Self {
        match m {
            CliDistanceMode::Squared => DistanceMode::SquaredL2Averaged,
            CliDistanceMode::L2 => DistanceMode::L2Averaged,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CliDecoder {
    Joint,
    Hard,
    Oracle,
}

impl From<CliDecoder> for DecoderTag {
    fn from(d: CliDecoder) -> Self {
        match d {
            CliDecoder::Joint => DecoderTag::Joint,
            CliDecoder::Hard => DecoderTag::Hard,
            CliDecoder::Oracle => DecoderTag::Oracle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CliNoise {
    DirichletJitter,
    LabelFlip,
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory for corpus.jsonl and labels.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of sentences.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Sentence length range, "min:max".
    #[arg(long, default_value = "6:14")]
    sentence_len: String,
    #[arg(long, default_value_t = 200)]
    vocab: usize,
    #[arg(long, default_value_t = 3)]
    entity_types: usize,
    #[arg(long, default_value_t = 2)]
    relation_types: usize,
    /// How many relation types are undirected.
    #[arg(long, default_value_t = 1)]
    symmetric: usize,
    /// Entities per sentence range, "min:max".
    #[arg(long, default_value = "0:3")]
    entities: String,
    /// Entity length range, "min:max".
    #[arg(long, default_value = "1:3")]
    entity_len: String,
    #[arg(long, default_value_t = 0.6)]
    relation_density: f64,
    #[arg(long, default_value_t = 1.0)]
    signal: f64,
    /// Also write rendered probability tensors under <out>/tensors.
    #[arg(long)]
    tensors: bool,
    /// Smoothing mass for rendered tensors.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Corrupt rendered tensors with this noise mode.
    #[arg(long)]
    noise: Option<CliNoise>,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// Training corpus (JSON lines).
    #[arg(long)]
    corpus: PathBuf,
    /// Dev corpus used for model selection.
    #[arg(long)]
    dev: PathBuf,
    /// Label-space sidecar JSON.
    #[arg(long)]
    labels: PathBuf,
    /// Checkpoint output path; vocab.json and train_log.jsonl are
    /// written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 150)]
    d: usize,
    #[arg(long, default_value_t = 32)]
    d_emb: usize,
    #[arg(long, default_value_t = 5e-5)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1e-5)]
    weight_decay: f64,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 200)]
    max_epochs: usize,
    #[arg(long, default_value_t = 20)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = false)]
    no_symmetry_loss: bool,
    #[arg(long, default_value_t = false)]
    no_implication_loss: bool,
    #[arg(long, default_value_t = 1.4)]
    alpha: f64,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    labels: PathBuf,
    /// Decode a corpus through a trained checkpoint.
    #[arg(long, requires = "corpus", conflicts_with = "tensors")]
    checkpoint: Option<PathBuf>,
    /// Vocab JSON; defaults to vocab.json next to the checkpoint.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Decode pre-rendered tensors from a directory.
    #[arg(long)]
    tensors: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.4)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = CliDistanceMode::Squared)]
    distance_mode: CliDistanceMode,
    #[arg(long, value_enum, default_value_t = CliDecoder::Joint)]
    decoder: CliDecoder,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    tensors: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Threshold grid "start:end:step" (end inclusive up to rounding).
    #[arg(long, default_value = "0.6:2.0:0.1")]
    alphas: String,
    #[arg(long, value_enum, default_value_t = CliDistanceMode::Squared)]
    distance_mode: CliDistanceMode,
}

#[derive(Args)]
struct HistArgs {
    #[arg(long)]
    tensors: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = CliDistanceMode::Squared)]
    distance_mode: CliDistanceMode,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    tensors: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Comma-separated decoder list.
    #[arg(long, default_value = "joint,hard", value_delimiter = ',')]
    decoders: Vec<CliDecoder>,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 1.4)]
    alpha: f64,
}

#[derive(Args)]
struct ErrorsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    labels: PathBuf,
}

fn parse_range(s: &str, flag: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err(UnireError::InvalidArgument(format!("{flag}: expected min:max, got {s:?}")));
    }
    let lo = parts[0]
        .parse()
        .map_err(|_| UnireError::InvalidArgument(format!("{flag}: bad integer {:?}", parts[0])))?;
    let hi = parts[1]
        .parse()
        .map_err(|_| UnireError::InvalidArgument(format!("{flag}: bad integer {:?}", parts[1])))?;
    Ok((lo, hi))
}

fn parse_alpha_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(UnireError::InvalidArgument(format!(
            "--alphas: expected start:end:step, got {s:?}"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse()
                .map_err(|_| UnireError::InvalidArgument(format!("--alphas: bad number {p:?}")))
        })
        .collect::<Result<_>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || end < start {
        return Err(UnireError::InvalidArgument("--alphas: degenerate grid".into()));
    }
    let count = ((end - start) / step + 0.5).floor() as usize + 1;
    Ok((0..count).map(|k| start + step * k as f64).collect())
}

/// UNIRE_SEED, when set, overrides every configured seed.
fn seed_override(configured: u64) -> Result<u64> {
    match std::env::var("UNIRE_SEED") {
        Ok(v) => v
            .parse()
            .map_err(|_| UnireError::InvalidArgument(format!("UNIRE_SEED: bad integer {v:?}"))),
        Err(_) => Ok(configured),
    }
}

fn tensor_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("tensor_{index:05}.bin"))
}

/// Reads tensor_00000.bin, tensor_00001.bin, ... until the first gap.
fn read_tensor_dir(dir: &Path) -> Result<Vec<ProbTensor>> {
    let mut tensors = Vec::new();
    loop {
        let path = tensor_path(dir, tensors.len());
        if !path.exists() {
            break;
        }
        tensors.push(read_tensor_file(&path)?.0);
    }
    if tensors.is_empty() {
        return Err(UnireError::InvalidArgument(format!(
            "no tensor files found under {}",
            dir.display()
        )));
    }
    Ok(tensors)
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let cfg = GenConfig {
        seed: seed_override(args.seed)?,
        sentence_len: parse_range(&args.sentence_len, "--sentence-len")?,
        vocab: args.vocab,
        num_entity_types: args.entity_types,
        num_relation_types: args.relation_types,
        num_symmetric_relations: args.symmetric,
        entities_per_sentence: parse_range(&args.entities, "--entities")?,
        entity_len: parse_range(&args.entity_len, "--entity-len")?,
        relation_density: args.relation_density,
        signal_strength: args.signal,
        ..GenConfig::default()
    };
    let mut gen = CorpusGenerator::new(cfg)?;
    let ls = gen.label_space().clone();
    let corpus = gen.generate_corpus(args.n)?;
    fs::create_dir_all(&args.out)?;
    write_corpus(&args.out.join("corpus.jsonl"), &corpus, &ls)?;
    write_label_space(&args.out.join("labels.json"), &ls)?;
    if args.tensors {
        let dir = args.out.join("tensors");
        fs::create_dir_all(&dir)?;
        let noise = args.noise.map(|mode| NoiseConfig {
            mode: match mode {
                CliNoise::DirichletJitter => NoiseMode::DirichletJitter,
                CliNoise::LabelFlip => NoiseMode::LabelFlip,
            },
            sigma: args.sigma,
            seed: gen.label_space().num_labels() as u64 ^ args.seed,
        });
        for (k, ann) in corpus.iter().enumerate() {
            let table = render_gold_table(ann, &ls)?;
            let mut p = one_hot_tensor(&table, ls.num_labels(), args.eps)?;
            if let Some(cfg) = &noise {
                let per = NoiseConfig { seed: cfg.seed.wrapping_add(k as u64), ..*cfg };
                p = corrupt_tensor(&p, &per)?;
            }
            write_tensor_file(&tensor_path(&dir, k), &p, &ls)?;
        }
    }
    println!("wrote {} sentences to {}", corpus.len(), args.out.display());
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<()> {
    let ls = read_label_space(&args.labels)?;
    let train_set = read_corpus(&args.corpus, &ls)?;
    let dev_set = read_corpus(&args.dev, &ls)?;
    let cfg = TrainConfig {
        d: args.d,
        d_emb: args.d_emb,
        learning_rate: args.learning_rate,
        weight_decay: args.weight_decay,
        logit_dropout_rate: args.dropout,
        batch_size: args.batch_size,
        max_epochs: args.max_epochs,
        patience: args.patience,
        seed: seed_override(args.seed)?,
        use_symmetry_loss: !args.no_symmetry_loss,
        use_implication_loss: !args.no_implication_loss,
        ..TrainConfig::default()
    };
    let decode_cfg = DecodeConfig { alpha: args.alpha, ..DecodeConfig::default() };
    let out = train(&train_set, &dev_set, &ls, &cfg, &decode_cfg)?;

    write_checkpoint(&out.params, BufWriter::new(File::create(&args.out)?))?;
    let dir = args.out.parent().unwrap_or_else(|| Path::new("."));
    serde_json::to_writer(BufWriter::new(File::create(dir.join("vocab.json"))?), &out.vocab)
        .map_err(UnireError::from)?;
    let mut log = BufWriter::new(File::create(dir.join("train_log.jsonl"))?);
    for rec in &out.log {
        serde_json::to_writer(&mut log, rec)?;
        log.write_all(b"\n")?;
    }
    let last: &EpochRecord = out.log.last().expect("training ran at least one epoch");
    println!(
        "trained {} epochs, best epoch {} (dev mean F1 {:.4}), final dev ent F1 {:.4} rel F1 {:.4}",
        out.log.len(),
        out.best_epoch,
        out.best_dev_f1,
        last.dev_ent_f1,
        last.dev_rel_f1
    );
    Ok(())
}

fn run_decode(args: DecodeArgs) -> Result<()> {
    let ls = read_label_space(&args.labels)?;
    let cfg = DecodeConfig { alpha: args.alpha, distance_mode: args.distance_mode.into() };
    let tensors: Vec<ProbTensor> = if let Some(dir) = &args.tensors {
        read_tensor_dir(dir)?
    } else if let Some(ckpt) = &args.checkpoint {
        let params = read_checkpoint(BufReader::new(File::open(ckpt)?))?;
        let vocab_path = args
            .vocab
            .clone()
            .unwrap_or_else(|| ckpt.parent().unwrap_or_else(|| Path::new(".")).join("vocab.json"));
        let mut vocab: Vocab =
            serde_json::from_reader(BufReader::new(File::open(&vocab_path)?))?;
        vocab.reindex();
        let corpus = read_corpus(args.corpus.as_ref().expect("clap enforces --corpus"), &ls)?;
        corpus
            .iter()
            .map(|ann| {
                let cache = forward::<rand_chacha::ChaCha8Rng>(
                    &params,
                    &vocab.encode(ann),
                    Dropout::Off,
                )?;
                Ok(softmax_cells(&cache.scores))
            })
            .collect::<Result<_>>()?
    } else {
        return Err(UnireError::InvalidArgument(
            "decode needs either --tensors or --checkpoint with --corpus".into(),
        ));
    };
    let preds = tensors
        .iter()
        .map(|p| match DecoderTag::from(args.decoder) {
            DecoderTag::Joint => Ok(joint_decode(p, &ls, &cfg)),
            DecoderTag::Hard => Ok(hard_decode(p, &ls)),
            DecoderTag::Oracle => oracle_decode(p, &ls),
        })
        .collect::<Result<Vec<_>>>()?;
    write_predictions(&args.out, &preds, &ls)?;
    println!("decoded {} sentences to {}", preds.len(), args.out.display());
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let ls = read_label_space(&args.labels)?;
    let gold = read_corpus(&args.gold, &ls)?;
    let preds = read_predictions(&args.pred, &ls)?;
    let report = strict_eval_corpus(&preds, &gold, &ls)?;
    println!(
        "entity   P {:.4} R {:.4} F1 {:.4} ({} gold, {} predicted, {} correct)",
        report.entity.precision(),
        report.entity.recall(),
        report.entity.f1(),
        report.entity.gold,
        report.entity.predicted,
        report.entity.correct
    );
    println!(
        "relation P {:.4} R {:.4} F1 {:.4} ({} gold, {} predicted, {} correct)",
        report.relation.precision(),
        report.relation.recall(),
        report.relation.f1(),
        report.relation.gold,
        report.relation.predicted,
        report.relation.correct
    );
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let ls = read_label_space(&args.labels)?;
    let gold = read_corpus(&args.gold, &ls)?;
    let tensors = read_tensor_dir(&args.tensors)?;
    let base = DecodeConfig { alpha: 0.0, distance_mode: args.distance_mode.into() };
    let rows = threshold_sweep(&tensors, &gold, &ls, &base, &parse_alpha_grid(&args.alphas)?)?;
    write_sweep_csv(&rows, BufWriter::new(File::create(&args.out)?))?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn run_hist(args: HistArgs) -> Result<()> {
    let ls = read_label_space(&args.labels)?;
    let gold = read_corpus(&args.gold, &ls)?;
    let tensors = read_tensor_dir(&args.tensors)?;
    let cfg = DecodeConfig { alpha: 1.4, distance_mode: args.distance_mode.into() };
    let hist = distance_histogram(&tensors, &gold, &ls, &cfg)?;
    write_histogram_csv(&hist, BufWriter::new(File::create(&args.out)?))?;
    println!("wrote histogram to {}", args.out.display());
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let ls = read_label_space(&args.labels)?;
    let tensors = read_tensor_dir(&args.tensors)?;
    let cfg = DecodeConfig { alpha: args.alpha, ..DecodeConfig::default() };
    let decoders: Vec<DecoderTag> = args.decoders.iter().map(|&d| d.into()).collect();
    let rows = bench_decoders(&tensors, &ls, &cfg, &decoders, args.runs)?;
    println!("decoder  sentences  median_secs  sentences_per_sec");
    for row in rows {
        println!(
            "{:<8} {:>9} {:>12.6} {:>18.1}",
            format!("{:?}", row.decoder).to_lowercase(),
            row.sentences,
            row.median_secs,
            row.sentences_per_sec
        );
    }
    Ok(())
}

fn run_errors(args: ErrorsArgs) -> Result<()> {
    let ls = read_label_space(&args.labels)?;
    let gold = read_corpus(&args.gold, &ls)?;
    let preds = read_predictions(&args.pred, &ls)?;
    if preds.len() != gold.len() {
        return Err(UnireError::InvalidArgument(format!(
            "{} predictions vs {} gold sentences",
            preds.len(),
            gold.len()
        )));
    }
    let mut total = ErrorBreakdown::default();
    for (pred, ann) in preds.iter().zip(&gold) {
        total.add(&error_taxonomy(pred, ann, &ls));
    }
    let fr = total.fractions();
    println!("unrecovered gold relations: {}", total.total());
    for (name, (count, frac)) in ["SSE", "ENF", "ETE", "RNF", "RTE"]
        .iter()
        .zip([total.sse, total.enf, total.ete, total.rnf, total.rte].into_iter().zip(fr))
    {
        println!("{name}  {count:>6}  {:.4}", frac);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Train(args) => run_train(args),
        Command::Decode(args) => run_decode(args),
        Command::Eval(args) => run_eval(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Hist(args) => run_hist(args),
        Command::Bench(args) => run_bench(args),
        Command::Errors(args) => run_errors(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                UnireError::InvalidArgument(_)
                | UnireError::InvalidAnnotation(_)
                | UnireError::Format { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
