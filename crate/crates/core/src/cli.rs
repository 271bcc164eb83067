//! Command-line entry point.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::assemble::{assemble_query, extract_entities, DEFAULT_LANG};
use crate::eval::{evaluate_run, read_test_file, write_report, write_report_json, EvalOptions};
use crate::kb::{execute_query, AnswerSet, TripleStore};
use crate::neural::{load_model, predict, save_model, train, write_log, Hyperparams, TrainMode};
use crate::qqt::{convert_dataset, read_pairs, read_qqt, write_qqt, DEFAULT_ENTITY_NAMESPACE};
use crate::sparql::serialize_query;
use crate::synthetic::{generate, pairs_text, SyntheticConfig};
use crate::text::{AcronymMap, EmbeddingTable, Gazetteer, Preprocessor, DEFAULT_THRESHOLD};
use crate::{Model, Real};

#[derive(Debug, Parser)]
#[command(name = "sparqa", version, about = "Question to SPARQL translation with a joint tagger/translator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert question/query pairs into QQT triples.
    Convert(Opts),
    /// Write a synthetic benchmark with an unseen-entity test split.
    GenSynthetic(Opts),
    /// Train a model on a QQT file.
    Train(Opts),
    /// Translate one question into SPARQL.
    Translate(TranslateOpts),
    /// Score a model on a test file.
    Eval(Opts),
}

#[derive(Debug, Args)]
struct TranslateOpts {
    question: String,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Debug, Clone, Default, Args)]
struct Opts {
    /// Flat `key = value` file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_acronyms: bool,
    #[arg(long)]
    no_nel: bool,
    /// Train tagger and translator as two networks.
    #[arg(long)]
    separate: bool,
    #[arg(long)]
    lang: Option<String>,
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Question/query pair file.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    qqt: Option<PathBuf>,
    /// Pair or QQT file to evaluate on.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Word vectors in `count dim` text format.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    trainable_embeddings: bool,
    /// Extra `acronym<TAB>expansion` entries.
    #[arg(long)]
    acronyms: Option<PathBuf>,
    /// `alias<TAB>canonical` entries for entity linking.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    #[arg(long)]
    link_threshold: Option<f64>,
    /// Training log destination; defaults to the model path plus `.log`.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    entity_namespace: Option<String>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_decode_len: Option<usize>,
    #[arg(long)]
    train_entities: Option<usize>,
    #[arg(long)]
    test_entities: Option<usize>,
}

/// Flag values merged over the config file.
struct Settings {
    opts: Opts,
    file: BTreeMap<String, String>,
}

fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key = value", i + 1))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    fn new(opts: Opts) -> Result<Self> {
        let file = match &opts.config {
            Some(p) => parse_config(&fs::read_to_string(p).with_context(|| format!("config {}", p.display()))?)?,
            None => BTreeMap::new(),
        };
        Ok(Self { opts, file })
    }

    fn value<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config {key} = {v:?}: {e}")),
            None => Ok(None),
        }
    }

    fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.value(None::<bool>, key)?.unwrap_or(false))
    }

    fn path(&self, flag: &Option<PathBuf>, key: &str) -> Result<Option<PathBuf>> {
        self.value(flag.clone(), key)
    }

    fn required_path(&self, flag: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        self.path(flag, key)?
            .ok_or_else(|| anyhow!("--{} is required", key.replace('_', "-")))
    }

    fn input(&self, flag: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        let p = self.required_path(flag, key)?;
        if !p.exists() {
            bail!("{} does not exist", p.display());
        }
        Ok(p)
    }

    fn seed(&self) -> Result<Option<u64>> {
        self.value(self.opts.seed, "seed")
    }

    fn lang(&self) -> Result<String> {
        Ok(self
            .value(self.opts.lang.clone(), "lang")?
            .unwrap_or_else(|| DEFAULT_LANG.to_string()))
    }

    fn namespace(&self) -> Result<String> {
        Ok(self
            .value(self.opts.entity_namespace.clone(), "entity_namespace")?
            .unwrap_or_else(|| DEFAULT_ENTITY_NAMESPACE.to_string()))
    }

    fn hyperparams(&self) -> Result<Hyperparams> {
        let o = &self.opts;
        let d = Hyperparams::default();
        let hp = Hyperparams {
            embed_dim: self.value(o.embed_dim, "embed_dim")?.unwrap_or(d.embed_dim),
            hidden: self.value(o.hidden, "hidden")?.unwrap_or(d.hidden),
            batch_size: self.value(o.batch_size, "batch_size")?.unwrap_or(d.batch_size),
            epochs: self.value(o.epochs, "epochs")?.unwrap_or(d.epochs),
            learning_rate: self.value(o.learning_rate, "learning_rate")?.unwrap_or(d.learning_rate),
            clip_norm: self.value(o.clip_norm, "clip_norm")?.unwrap_or(d.clip_norm),
            lambda: self.value(o.lambda, "lambda")?.unwrap_or(d.lambda),
            seed: self.seed()?.unwrap_or(d.seed),
            max_decode_len: self.value(o.max_decode_len, "max_decode_len")?.unwrap_or(d.max_decode_len),
        };
        hp.validate().context("neural")?;
        Ok(hp)
    }

    fn preprocessor(&self) -> Result<Preprocessor> {
        let acronyms = if self.switch(self.opts.no_acronyms, "no_acronyms")? {
            None
        } else {
            let mut map = AcronymMap::builtin();
            if let Some(p) = self.path(&self.opts.acronyms, "acronyms")? {
                map.extend(&AcronymMap::load(&p).context("text")?).context("text")?;
            }
            Some(map)
        };
        let gazetteer = match self.path(&self.opts.gazetteer, "gazetteer")? {
            Some(p) if !self.switch(self.opts.no_nel, "no_nel")? => {
                let threshold = self
                    .value(self.opts.link_threshold, "link_threshold")?
                    .unwrap_or(DEFAULT_THRESHOLD);
                Some(Gazetteer::load(&p, threshold).context("text")?)
            }
            _ => None,
        };
        Ok(Preprocessor { acronyms, gazetteer })
    }

    fn store(&self) -> Result<TripleStore> {
        let p = self.input(&self.opts.kb, "kb")?;
        TripleStore::load_ntriples(&p).with_context(|| format!("kb {}", p.display()))
    }
}

fn open(p: &Path) -> Result<BufReader<fs::File>> {
    Ok(BufReader::new(
        fs::File::open(p).with_context(|| format!("open {}", p.display()))?,
    ))
}

fn create(p: &Path) -> Result<fs::File> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("create {}", dir.display()))?;
    }
    fs::File::create(p).with_context(|| format!("create {}", p.display()))
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_convert(s: &Settings) -> Result<()> {
    let pairs_path = s.input(&s.opts.pairs, "pairs")?;
    let out = s.required_path(&s.opts.out, "out")?;
    let pairs = read_pairs(open(&pairs_path)?).context("qqt")?;
    let prep = s.preprocessor()?;
    let ns = s.namespace()?;
    let (triples, report) = match s.path(&s.opts.kb, "kb")? {
        Some(_) => convert_dataset(&pairs, &s.store()?, &prep, &ns),
        None => convert_dataset(&pairs, &crate::qqt::DerivedLabels, &prep, &ns),
    }
    .context("qqt")?;
    write_qqt(create(&out)?, &triples).context("qqt")?;
    println!("converted\t{}", report.converted);
    println!("skipped\t{}", report.skipped);
    for d in &report.diagnostics {
        println!("line {}\t{}\t{}", d.line, d.reason, d.detail);
    }
    Ok(())
}

fn cmd_gen_synthetic(s: &Settings) -> Result<()> {
    let dir = s.required_path(&s.opts.out, "out")?;
    let d = SyntheticConfig::default();
    let cfg = SyntheticConfig {
        train_entities: s.value(s.opts.train_entities, "train_entities")?.unwrap_or(d.train_entities),
        test_entities: s.value(s.opts.test_entities, "test_entities")?.unwrap_or(d.test_entities),
        seed: s.seed()?.unwrap_or(d.seed),
        ..d
    };
    let b = generate(&cfg);
    let train_names: std::collections::BTreeSet<&str> =
        b.train_entities.iter().map(|e| e.name.as_str()).collect();
    if b.test_entities.iter().any(|e| train_names.contains(e.name.as_str())) {
        bail!("synthetic: train and test entities overlap");
    }
    fs::create_dir_all(&dir).with_context(|| format!("create {}", dir.display()))?;
    fs::write(dir.join("train.tsv"), pairs_text(&b.train_pairs))?;
    fs::write(dir.join("test.tsv"), pairs_text(&b.test_pairs))?;
    fs::write(dir.join("kb.nt"), &b.kb)?;
    println!(
        "wrote {} training pairs, {} test pairs to {}",
        b.train_pairs.len(),
        b.test_pairs.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_train(s: &Settings) -> Result<()> {
    let qqt = s.input(&s.opts.qqt, "qqt")?;
    let out = match s.path(&s.opts.out, "out")? {
        Some(p) => p,
        None => s.required_path(&s.opts.model, "model")?,
    };
    let hp = s.hyperparams()?;
    let data = read_qqt(open(&qqt)?).context("qqt")?;
    let mut table: EmbeddingTable<Real> = match s.path(&s.opts.embeddings, "embeddings")? {
        Some(p) => EmbeddingTable::load_text(&p, hp.embed_dim, hp.seed).context("text")?,
        None => EmbeddingTable::new(hp.embed_dim, hp.seed).context("text")?,
    };
    table.set_trainable(s.switch(s.opts.trainable_embeddings, "trainable_embeddings")?);
    let mode = if s.switch(s.opts.separate, "separate")? {
        TrainMode::Separate
    } else {
        TrainMode::Joint
    };
    let (model, log) = train(&data, &hp, table, mode).context("neural")?;
    save_model(&out, &model).context("neural")?;
    let log_path = match s.path(&s.opts.log, "log")? {
        Some(p) => p,
        None => with_suffix(&out, ".log"),
    };
    write_log(create(&log_path)?, &log)?;
    if let Some(last) = log.last() {
        println!("epoch {}\tmean loss {:.6}", last.epoch, last.mean_loss);
    }
    Ok(())
}

fn render_answers(a: &AnswerSet) -> String {
    match a {
        AnswerSet::Boolean(b) => b.to_string(),
        AnswerSet::Count(n) => n.to_string(),
        AnswerSet::Bindings { rows, .. } => rows
            .iter()
            .map(|r| r.iter().map(ToString::to_string).collect::<Vec<_>>().join("\t"))
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

fn cmd_translate(question: &str, s: &Settings) -> Result<()> {
    let model: Model = load_model(&s.input(&s.opts.model, "model")?).context("neural")?;
    let q = s.preprocessor()?.run(question);
    let pred = predict(&q, &model).context("neural")?;
    let entities = extract_entities(&q, &pred.tags).context("assemble")?;
    let assembled = assemble_query(&pred.template, &entities, &s.lang()?).context("assemble")?;
    if let Some(w) = assembled.warning {
        eprintln!("warning: {w:?}");
    }
    if pred.truncated {
        eprintln!("warning: template truncated at {} tokens", model.hp.max_decode_len);
    }
    println!("{}", serialize_query(&assembled.query));
    if s.path(&s.opts.kb, "kb")?.is_some() {
        let answers = execute_query(&assembled.query, &s.store()?).context("kb")?;
        println!("{}", render_answers(&answers));
    }
    Ok(())
}

fn cmd_eval(s: &Settings) -> Result<()> {
    let test = s.input(&s.opts.test, "test")?;
    let model: Model = load_model(&s.input(&s.opts.model, "model")?).context("neural")?;
    let store = s.store()?;
    let lang = s.lang()?;
    let items = read_test_file(open(&test)?, &lang).context("eval")?;
    let opts = EvalOptions {
        preprocessor: s.preprocessor()?,
        lang,
    };
    let report = evaluate_run(&items, &model, &store, &opts).context("eval")?;
    if let Some(out) = s.path(&s.opts.out, "out")? {
        write_report(create(&out)?, &report)?;
        write_report_json(create(&with_suffix(&out, ".json"))?, &report).context("eval")?;
    }
    println!(
        "macro P {:.4}  R {:.4}  F1 {:.4}  F1 QALD {:.4}  ({} questions, {} answered, {} errored)",
        report.macro_precision,
        report.macro_recall,
        report.macro_f1,
        report.f1_qald,
        report.total,
        report.answered,
        report.errored
    );
    Ok(())
}

/// Runs one command line and returns the process exit code.
pub fn run_cli<I, A>(argv: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Convert(o) => Settings::new(o).and_then(|s| cmd_convert(&s)),
        Command::GenSynthetic(o) => Settings::new(o).and_then(|s| cmd_gen_synthetic(&s)),
        Command::Train(o) => Settings::new(o).and_then(|s| cmd_train(&s)),
        Command::Translate(t) => Settings::new(t.opts).and_then(|s| cmd_translate(&t.question, &s)),
        Command::Eval(o) => Settings::new(o).and_then(|s| cmd_eval(&s)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
