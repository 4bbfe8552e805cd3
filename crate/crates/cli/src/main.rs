//! `hieroclf`: parse MdC, prepare corpora, run baselines and train, evaluate
//! and apply classifier taggers.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hieroclf::baselines::{
    resolve_rule, BaselinePredictor, BaselineRule, RuleChoice, SignFrequencyTable, DEFAULT_TOP_N_CANDIDATES,
};
use hieroclf::dataset::{
    dedup_types, format_labels, load_corpus, split, Corpus, CorpusStats, DataPoint, DatasetError, OutputStyle, SplitSpec,
};
use hieroclf::eval::{EvalReport, ResultsTable};
use hieroclf::mdc::{self, SignCode};
use hieroclf::neural::{checkpoint, grid_search, train, DecodeMode, GridSpec, ModelConfig, NeuralError, TrainConfig};
use hieroclf::vocab::{OovPolicy, VocabKind, Vocabulary};
use hieroclf::TaggerF32;
use thiserror::Error;

use config::{parse_list, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Ratios(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NeuralError> for CliError {
    fn from(e: NeuralError) -> Self {
        match e {
            _ if e.is_numeric() => CliError::Numeric(e.to_string()),
            NeuralError::Config(_) | NeuralError::Train(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

#[derive(Parser)]
#[command(name = "hieroclf", version, about = "Classifier tagging for hieroglyphic MdC transcriptions")]
struct Cli {
    /// key = value file; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse MdC strings and list signs with their classifier flags
    Parse(ParseArgs),
    /// Counts, sign vocabulary and the classifiers-per-type histogram
    Stats(StatsArgs),
    /// Deduplicate into types and write train/dev/test files
    Split(SplitArgs),
    /// Fit and score the frequency baselines
    Baseline(BaselineArgs),
    /// Train an LSTM encoder-decoder tagger
    Train(Box<TrainArgs>),
    /// Score a checkpoint or baseline table on an annotated corpus
    Eval(EvalArgs),
    /// Label signs in unannotated MdC input
    Predict(PredictArgs),
}

#[derive(Args)]
struct ParseArgs {
    /// MdC strings; read from --input when absent
    text: Vec<String>,
    /// File with one MdC string per line ("-" for stdin)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Print the normalised tree instead of (sign, flag) rows
    #[arg(long)]
    tree: bool,
}

#[derive(Args)]
struct StatsArgs {
    corpus: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    corpus: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    dev_ratio: Option<String>,
    #[arg(long)]
    test_ratio: Option<String>,
}

/// Train/dev/test/OOD corpus paths shared by baseline and train.
#[derive(Args)]
struct SplitPaths {
    #[arg(long)]
    train: Option<String>,
    #[arg(long)]
    dev: Option<String>,
    #[arg(long)]
    test: Option<String>,
    /// Out-of-domain corpus
    #[arg(long)]
    ood: Option<String>,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    paths: SplitPaths,
    /// all, top-n, clf-only or clf-majority
    #[arg(long)]
    rule: Option<String>,
    /// Comma-separated Top-N candidates
    #[arg(long)]
    top_n_candidates: Option<String>,
    /// Write the fitted frequency table here
    #[arg(long)]
    table_out: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    paths: SplitPaths,
    /// Checkpoint path
    #[arg(long)]
    out: Option<String>,
    /// History path, default <out>.history.tsv
    #[arg(long)]
    history: Option<String>,
    /// char or sign
    #[arg(long)]
    vocab: Option<String>,
    /// 3 layers, hidden 512, embedding 256
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    embedding_dim: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    patience: Option<String>,
    #[arg(long)]
    max_epochs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    init_scale: Option<String>,
    /// Gradient-norm cap, or "none"
    #[arg(long)]
    clip_norm: Option<String>,
    /// constrained or free
    #[arg(long)]
    decode: Option<String>,
    /// unk or sos
    #[arg(long)]
    oov: Option<String>,
    /// Search batch size and learning rate on dev
    #[arg(long)]
    grid: bool,
    #[arg(long)]
    grid_batch_sizes: Option<String>,
    #[arg(long)]
    grid_learning_rates: Option<String>,
}

/// A checkpoint, or a frequency table with a rule.
#[derive(Args)]
struct ModelSource {
    #[arg(long)]
    checkpoint: Option<String>,
    /// Frequency table written by `baseline --table-out`
    #[arg(long)]
    table: Option<String>,
    /// top-n, clf-only or clf-majority (with --table)
    #[arg(long)]
    rule: Option<String>,
    /// N for the top-n rule
    #[arg(long)]
    top_n: Option<String>,
    #[arg(long)]
    decode: Option<String>,
    #[arg(long)]
    oov: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Annotated corpus
    #[arg(long)]
    gold: Option<String>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    source: ModelSource,
    /// MdC strings; read from --input when absent
    text: Vec<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// rows, binary, tilde-pair or tilde-suffix
    #[arg(long)]
    format: Option<String>,
}

fn read_lines(text: &[String], input: Option<&Path>) -> Result<Vec<String>, CliError> {
    if !text.is_empty() {
        return Ok(text.to_vec());
    }
    let contents = match input {
        Some(p) if p != Path::new("-") => fs::read_to_string(p).map_err(|e| io_error(p, e))?,
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(|e| CliError::Data(format!("stdin: {e}")))?;
            s
        }
    };
    Ok(contents.lines().map(str::to_string).collect())
}

fn load(path: &str) -> Result<Corpus, CliError> {
    let corpus = load_corpus(path)?;
    if corpus.is_empty() {
        return Err(CliError::Data(format!("{path}: no data points")));
    }
    Ok(corpus)
}

fn cmd_parse(args: ParseArgs, cfg: &mut RunConfig) -> Result<String, CliError> {
    let tree = cfg.switch("tree", args.tree)?;
    let lines = read_lines(&args.text, args.input.as_deref())?;
    let mut out = String::new();
    let mut failures = 0;
    for (idx, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match mdc::parse(line.trim()) {
            Ok(parsed) if tree => writeln!(out, "{parsed}").unwrap(),
            Ok(parsed) => {
                if !out.is_empty() {
                    out.push('\n');
                }
                for (code, flag) in parsed.flatten() {
                    writeln!(out, "{code} {}", u8::from(flag)).unwrap();
                }
            }
            Err(e) => {
                failures += 1;
                eprintln!("line {}: {e}", idx + 1);
            }
        }
    }
    print!("{out}");
    if failures > 0 {
        return Err(CliError::Data(format!("{failures} line(s) failed to parse")));
    }
    Ok(String::new())
}

fn cmd_stats(args: StatsArgs, cfg: &mut RunConfig) -> Result<String, CliError> {
    let path: String = cfg.required("corpus", args.corpus.map(|p| p.display().to_string()))?;
    let corpus = load(&path)?;
    Ok(format!("{}{}", cfg.header(), CorpusStats::compute(&corpus)))
}

fn cmd_split(args: SplitArgs, cfg: &mut RunConfig) -> Result<String, CliError> {
    let path: String = cfg.required("corpus", args.corpus.map(|p| p.display().to_string()))?;
    let out_dir: PathBuf = cfg.required("out_dir", args.out_dir.map(|p| p.display().to_string()))?;
    let seed = cfg.get("seed", args.seed, "0")?;
    let dev: f64 = cfg.get("dev_ratio", args.dev_ratio, "0.1")?;
    let test: f64 = cfg.get("test_ratio", args.test_ratio, "0.1")?;
    let spec = SplitSpec { seed, ratios: [1.0 - dev - test, dev, test] };
    spec.validate()?;
    let corpus = load(&path)?;
    let types = dedup_types(&corpus);
    let parts = split(&types, &spec)?;
    fs::create_dir_all(&out_dir).map_err(|e| io_error(&out_dir, e))?;
    let header = cfg.header();
    let mut out = header.clone();
    writeln!(out, "tokens\t{}\ntypes\t{}", corpus.len(), types.len()).unwrap();
    for (name, part) in [("train", &parts.train), ("dev", &parts.dev), ("test", &parts.test)] {
        write_file(&out_dir.join(format!("{name}.txt")), part.to_text())?;
        writeln!(out, "{name}\t{}", part.len()).unwrap();
    }
    write_file(&out_dir.join("split.conf"), header.replace("# ", ""))?;
    Ok(out)
}

struct Splits {
    train: Corpus,
    dev: Corpus,
    /// Scored splits in table order; absent ones are None.
    scored: Vec<(&'static str, Option<Corpus>)>,
}

fn load_splits(paths: SplitPaths, cfg: &mut RunConfig) -> Result<Splits, CliError> {
    let train: String = cfg.required("train", paths.train)?;
    let dev: String = cfg.required("dev", paths.dev)?;
    let test: Option<String> = cfg.opt("test", paths.test)?;
    let ood: Option<String> = cfg.opt("ood", paths.ood)?;
    let dev = load(&dev)?;
    let mut scored = vec![("dev", Some(dev.clone()))];
    for (name, p) in [("test", test), ("ood", ood)] {
        scored.push((name, p.as_deref().map(load).transpose()?));
    }
    Ok(Splits { train: load(&train)?, dev, scored })
}

fn table_columns() -> ResultsTable {
    ResultsTable::new(&["Dev", "Test", "OOD"])
}

/// Key-value lines for each scored split plus the table row values.
fn report_splits(
    prefix: &str,
    splits: &Splits,
    mut eval: impl FnMut(&Corpus) -> Result<EvalReport, CliError>,
    out: &mut String,
) -> Result<Vec<Option<f64>>, CliError> {
    let mut row = Vec::new();
    for (name, corpus) in &splits.scored {
        match corpus {
            Some(c) => {
                let report = eval(c)?;
                out.push_str(&report.to_kv(&format!("{prefix}.{name}")));
                row.push(Some(report.mean_errors_per_point));
            }
            None => row.push(None),
        }
    }
    Ok(row)
}

fn rule_key(rule: BaselineRule) -> &'static str {
    match rule {
        BaselineRule::TopN(_) => "top_n",
        BaselineRule::ClfOnly => "clf_only",
        BaselineRule::ClfMajority => "clf_majority",
    }
}

fn cmd_baseline(args: BaselineArgs, cfg: &mut RunConfig) -> Result<String, CliError> {
    let rule: String = cfg.get("rule", args.rule, "all")?;
    let default_candidates = DEFAULT_TOP_N_CANDIDATES.map(|n| n.to_string()).join(",");
    let candidates_text: String = cfg.get("top_n_candidates", args.top_n_candidates, &default_candidates)?;
    let candidates: Vec<usize> = parse_list("top_n_candidates", &candidates_text)?;
    let table_out: Option<PathBuf> = cfg.opt("table_out", args.table_out)?;
    let choices = match rule.as_str() {
        "all" => vec![RuleChoice::ClfOnly, RuleChoice::TopN(candidates), RuleChoice::ClfMajority],
        other => match other.parse().map_err(CliError::Usage)? {
            RuleChoice::TopN(_) => vec![RuleChoice::TopN(candidates)],
            choice => vec![choice],
        },
    };
    let splits = load_splits(args.paths, cfg)?;
    let freq = SignFrequencyTable::fit(&splits.train);
    if let Some(path) = &table_out {
        write_file(path, freq.to_tsv())?;
    }

    let mut out = cfg.header();
    let mut table = table_columns();
    for choice in &choices {
        let rule = resolve_rule(choice, &freq, &splits.dev);
        if let BaselineRule::TopN(n) = rule {
            writeln!(out, "top_n.selected={n}").unwrap();
        }
        let predictor = BaselinePredictor::new(rule, &freq);
        let row = report_splits(rule_key(rule), &splits, |c| Ok(predictor.evaluate(c)), &mut out)?;
        table.push(rule.name(), row);
    }
    writeln!(out, "\n{table}").unwrap();
    Ok(out)
}

fn cmd_train(args: TrainArgs, cfg: &mut RunConfig) -> Result<String, CliError> {
    let out_path: String = cfg.required("out", args.out)?;
    let default_history = format!("{out_path}.history.tsv");
    let history_path: String = cfg.get("history", args.history, &default_history)?;
    let kind: VocabKind = cfg.get("vocab", args.vocab, "sign")?;
    let paper_scale = cfg.switch("paper_scale", args.paper_scale)?;
    let base = if paper_scale { ModelConfig::paper_scale(kind, 0) } else { ModelConfig::desk(kind, 0) };
    let layers = cfg.get("layers", args.layers, &base.layers.to_string())?;
    let hidden = cfg.get("hidden", args.hidden, &base.hidden.to_string())?;
    let embedding_dim = cfg.get("embedding_dim", args.embedding_dim, &base.embedding_dim.to_string())?;
    let defaults = TrainConfig::default();
    let clip: String = cfg.get("clip_norm", args.clip_norm, &defaults.clip_norm.map_or("none".into(), |c| c.to_string()))?;
    let clip_norm = match clip.as_str() {
        "none" => None,
        v => Some(v.parse().map_err(|_| CliError::Usage(format!("invalid clip_norm `{v}`")))?),
    };
    let tconfig = TrainConfig {
        batch_size: cfg.get("batch_size", args.batch_size, &defaults.batch_size.to_string())?,
        learning_rate: cfg.get("learning_rate", args.learning_rate, &defaults.learning_rate.to_string())?,
        patience: cfg.get("patience", args.patience, &defaults.patience.to_string())?,
        max_epochs: cfg.get("max_epochs", args.max_epochs, &defaults.max_epochs.to_string())?,
        seed: cfg.get("seed", args.seed, "0")?,
        init_scale: cfg.get("init_scale", args.init_scale, &defaults.init_scale.to_string())?,
        clip_norm,
        decode_mode: cfg.get("decode", args.decode, "constrained")?,
        oov: cfg.get("oov", args.oov, "unk")?,
    };
    let grid = cfg.switch("grid", args.grid)?;
    let grid_spec = if grid {
        let d = GridSpec::default();
        let join = |v: &[String]| v.join(",");
        let batches: String = cfg.get("grid_batch_sizes", args.grid_batch_sizes, &join(&d.batch_sizes.iter().map(|b| b.to_string()).collect::<Vec<_>>()))?;
        let rates: String = cfg.get("grid_learning_rates", args.grid_learning_rates, &join(&d.learning_rates.iter().map(|r| r.to_string()).collect::<Vec<_>>()))?;
        Some(GridSpec {
            batch_sizes: parse_list("grid_batch_sizes", &batches)?,
            learning_rates: parse_list("grid_learning_rates", &rates)?,
        })
    } else {
        None
    };
    tconfig.validate()?;

    let splits = load_splits(args.paths, cfg)?;
    let vocab = Vocabulary::build(&splits.train, kind);
    let mconfig = ModelConfig { kind, layers, hidden, embedding_dim, vocab_size: vocab.len() };
    mconfig.validate()?;

    let mut out = String::new();
    let (chosen, outcome) = match &grid_spec {
        Some(spec) => {
            let g = grid_search::<f32>(&splits.train, &splits.dev, &vocab, &mconfig, &tconfig, spec)?;
            for c in &g.cells {
                match &c.result {
                    Ok(m) => writeln!(out, "grid.batch_size={},learning_rate={}\t{m:.6}", c.batch_size, c.learning_rate),
                    Err(e) => writeln!(out, "grid.batch_size={},learning_rate={}\texcluded: {e}", c.batch_size, c.learning_rate),
                }
                .unwrap();
            }
            (g.config, g.outcome)
        }
        None => (tconfig.clone(), train::<f32>(&splits.train, &splits.dev, &vocab, &mconfig, &tconfig)?),
    };
    let mut meta = cfg.entries().to_vec();
    meta.push(("chosen.batch_size".into(), chosen.batch_size.to_string()));
    meta.push(("chosen.learning_rate".into(), chosen.learning_rate.to_string()));
    meta.push(("vocab_size".into(), vocab.len().to_string()));
    checkpoint::save(&out_path, &outcome.tagger, &meta)?;
    write_file(Path::new(&history_path), outcome.history.to_text(&meta))?;

    let mut report = cfg.header();
    report.push_str(&out);
    writeln!(report, "chosen.batch_size={}\nchosen.learning_rate={}", chosen.batch_size, chosen.learning_rate).unwrap();
    writeln!(report, "best_epoch={}\nepochs={}", outcome.history.best_epoch, outcome.history.records.len()).unwrap();
    let tagger = &outcome.tagger;
    let row = report_splits(
        "lstm",
        &splits,
        |c| Ok(tagger.evaluate(c, chosen.decode_mode, chosen.oov)?),
        &mut report,
    )?;
    let mut table = table_columns();
    table.push(format!("LSTM {}", kind.as_str()), row);
    writeln!(report, "\n{table}").unwrap();
    Ok(report)
}

enum Predictor {
    Neural { tagger: Box<TaggerF32>, mode: DecodeMode, oov: OovPolicy },
    Baseline(BaselinePredictor),
}

impl Predictor {
    fn load(source: ModelSource, cfg: &mut RunConfig) -> Result<Self, CliError> {
        let ckpt: Option<PathBuf> = cfg.opt("checkpoint", source.checkpoint)?;
        let table: Option<PathBuf> = cfg.opt("table", source.table)?;
        match (ckpt, table) {
            (Some(path), None) => {
                let mode = cfg.get("decode", source.decode, "constrained")?;
                let oov = cfg.get("oov", source.oov, "unk")?;
                let loaded = checkpoint::load::<f32>(&path)?;
                Ok(Predictor::Neural { tagger: Box::new(loaded.tagger), mode, oov })
            }
            (None, Some(path)) => {
                let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
                let freq = SignFrequencyTable::from_tsv(&text).map_err(|e| CliError::Data(e.to_string()))?;
                let choice: RuleChoice =
                    cfg.get::<String>("rule", source.rule, "clf-majority")?.parse().map_err(CliError::Usage)?;
                let rule = match choice {
                    RuleChoice::TopN(_) => BaselineRule::TopN(cfg.required("top_n", source.top_n)?),
                    RuleChoice::ClfOnly => BaselineRule::ClfOnly,
                    RuleChoice::ClfMajority => BaselineRule::ClfMajority,
                };
                Ok(Predictor::Baseline(BaselinePredictor::new(rule, &freq)))
            }
            _ => Err(CliError::Usage("give exactly one of `checkpoint` or `table`".into())),
        }
    }

    fn predict(&self, signs: &[SignCode]) -> Result<Vec<bool>, CliError> {
        match self {
            Predictor::Neural { tagger, mode, oov } => Ok(tagger.predict(signs, *mode, *oov)?),
            Predictor::Baseline(p) => Ok(p.predict(signs)),
        }
    }

    fn evaluate(&self, gold: &Corpus) -> Result<EvalReport, CliError> {
        match self {
            Predictor::Neural { tagger, mode, oov } => Ok(tagger.evaluate(gold, *mode, *oov)?),
            Predictor::Baseline(p) => Ok(p.evaluate(gold)),
        }
    }
}

fn cmd_eval(args: EvalArgs, cfg: &mut RunConfig) -> Result<String, CliError> {
    let predictor = Predictor::load(args.source, cfg)?;
    let gold_path: String = cfg.required("gold", args.gold)?;
    let gold = load(&gold_path)?;
    let report = predictor.evaluate(&gold)?;
    Ok(format!("{}{}", cfg.header(), report.to_kv("eval")))
}

fn cmd_predict(args: PredictArgs, cfg: &mut RunConfig) -> Result<String, CliError> {
    let predictor = Predictor::load(args.source, cfg)?;
    let format: String = cfg.get("format", args.format, "rows")?;
    let style = match format.as_str() {
        "rows" => None,
        other => Some(other.parse::<OutputStyle>().map_err(CliError::Usage)?),
    };
    let lines = read_lines(&args.text, args.input.as_deref())?;
    // provenance goes to stderr so the label stream stays machine-readable
    eprint!("{}", cfg.header());
    let mut out = String::new();
    for (idx, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let point = DataPoint::from_mdc(line.trim()).map_err(|e| CliError::Data(format!("line {}: {e}", idx + 1)))?;
        let labels = predictor.predict(&point.signs)?;
        match style {
            Some(style) => writeln!(out, "{}", format_labels(&point.signs, &labels, style)).unwrap(),
            None => {
                if !out.is_empty() {
                    out.push('\n');
                }
                for (s, l) in point.signs.iter().zip(&labels) {
                    writeln!(out, "{s} {}", u8::from(*l)).unwrap();
                }
            }
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Parse(a) => cmd_parse(a, &mut cfg),
        Command::Stats(a) => cmd_stats(a, &mut cfg),
        Command::Split(a) => cmd_split(a, &mut cfg),
        Command::Baseline(a) => cmd_baseline(a, &mut cfg),
        Command::Train(a) => cmd_train(*a, &mut cfg),
        Command::Eval(a) => cmd_eval(a, &mut cfg),
        Command::Predict(a) => cmd_predict(a, &mut cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
