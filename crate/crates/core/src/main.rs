use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use discoh::coherence::{self, TransitionModel, Verdict, VideoCoherenceWeights};
use discoh::corpus::{self, CorpusRecord};
use discoh::features::{read_features, write_features, FeatureSeq};
use discoh::parser::{self, LinearMarginModel, ParagraphExample};
use discoh::seq2seq::{self, ActExample, ActsSource, EncDecModel, RelationExample, Seq2SeqConfig};
use discoh::{agreement, parseval, synth, ActKind, VideoRelation};

#[derive(Parser)]
#[command(name = "discoh", version, about = "Discourse structure of videos and their paragraph captions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every record of a corpus and report violations per line
    Validate(InputArgs),
    /// Corpus statistics
    Stats(StatsArgs),
    /// Seeded train/val/test partition into a directory
    Split(SplitArgs),
    /// Krippendorff's alpha per relation and act kind over multiply annotated videos
    Alpha(InputArgs),
    /// Train the shift-reduce paragraph parser
    TrainParser(TrainParserArgs),
    /// Replace each record's tree with the parser's prediction
    Parse(ParseArgs),
    /// Parseval span, nuclearity and relation F1
    EvalParseval(EvalArgs),
    /// Train the act sequence model
    TrainActs(TrainActsArgs),
    /// Train the video relation model
    TrainRelations(TrainRelationsArgs),
    /// Predict acts (and relations) per shot
    Predict(PredictArgs),
    /// Fit the relation transition model
    FitCoherence(FitCoherenceArgs),
    /// Paragraph, video and conditioned coherence per record
    Score(ScoreArgs),
    /// Generate a synthetic corpus
    Synth(SynthArgs),
}

#[derive(Args, Serialize)]
struct InputArgs {
    /// Corpus file (JSON lines); stdin when omitted
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Output file; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct StatsArgs {
    #[command(flatten)]
    io: InputArgs,
    /// Keep only videos with 3 to 30 shots before counting
    #[arg(long)]
    filter_shots: bool,
}

#[derive(Args, Serialize)]
struct SplitArgs {
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Directory receiving train.jsonl, val.jsonl and test.jsonl
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    train: usize,
    #[arg(long)]
    val: usize,
    #[arg(long)]
    test: usize,
    #[arg(long)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct TrainParserArgs {
    #[command(flatten)]
    io: InputArgs,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    #[arg(long)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct ParseArgs {
    #[command(flatten)]
    io: InputArgs,
    /// Parser model written by train-parser
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct NetArgs {
    /// Features file matching the corpus video ids
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = seq2seq::DEFAULT_HIDDEN)]
    hidden: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, default_value_t = 32)]
    embed_dim: usize,
    #[arg(long)]
    seed: u64,
}

impl NetArgs {
    fn config(&self) -> Seq2SeqConfig {
        Seq2SeqConfig {
            hidden_size: self.hidden,
            embed_dim: self.embed_dim,
            epochs: self.epochs,
            learning_rate: self.lr,
            dropout_p: self.dropout,
            seed: self.seed,
            ..Seq2SeqConfig::default()
        }
    }
}

#[derive(Args, Serialize)]
struct TrainActsArgs {
    #[command(flatten)]
    io: InputArgs,
    #[command(flatten)]
    net: NetArgs,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ActsFrom {
    Gold,
    Predicted,
}

#[derive(Args, Serialize)]
struct TrainRelationsArgs {
    #[command(flatten)]
    io: InputArgs,
    #[command(flatten)]
    net: NetArgs,
    /// Act inputs: annotated, or predicted by --act-model
    #[arg(long, value_enum, default_value_t = ActsFrom::Gold)]
    acts: ActsFrom,
    #[arg(long)]
    act_model: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    #[command(flatten)]
    io: InputArgs,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    act_model: PathBuf,
    #[arg(long)]
    relation_model: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct FitCoherenceArgs {
    #[command(flatten)]
    io: InputArgs,
    /// Add-k smoothing constant
    #[arg(long, default_value_t = 0.1)]
    k: f64,
}

#[derive(Args, Serialize)]
struct ScoreArgs {
    #[command(flatten)]
    io: InputArgs,
    /// Transition model written by fit-coherence
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = coherence::DEFAULT_TAU_P)]
    tau_p: f64,
    #[arg(long, default_value_t = coherence::DEFAULT_TAU_V)]
    tau_v: f64,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = corpus::DEFAULT_MIN_SHOTS)]
    min_shots: usize,
    #[arg(long, default_value_t = corpus::DEFAULT_MAX_SHOTS)]
    max_shots: usize,
    #[arg(long, default_value_t = 2)]
    min_sentences: usize,
    #[arg(long, default_value_t = 6)]
    max_sentences: usize,
    /// Corpus output; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write shot features to this file
    #[arg(long)]
    features: Option<PathBuf>,
}

/// Provenance written next to every output file as `<output>.manifest.json`.
#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    subcommand: &'a str,
    config: &'a C,
    seed: Option<u64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    tool_version: &'static str,
    wall_clock_s: f64,
}

struct Run {
    name: &'static str,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn new(name: &'static str) -> Self {
        Run {
            name,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn input(&mut self, p: &Option<PathBuf>) {
        if let Some(p) = p {
            self.inputs.push(p.clone());
        }
    }

    fn finish<C: Serialize>(self, config: &C, seed: Option<u64>) -> Result<()> {
        let Some(first) = self.outputs.first() else {
            return Ok(());
        };
        let manifest = RunManifest {
            subcommand: self.name,
            config,
            seed,
            inputs: self.inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            tool_version: env!("CARGO_PKG_VERSION"),
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        };
        let mut path = first.clone().into_os_string();
        path.push(".manifest.json");
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("writing {}", PathBuf::from(&path).display()))?;
        Ok(())
    }
}

fn open_input(path: &Option<PathBuf>) -> Result<Box<dyn BufRead>> {
    Ok(match path {
        Some(p) => Box::new(BufReader::new(
            File::open(p).with_context(|| format!("opening {}", p.display()))?,
        )),
        None => Box::new(BufReader::new(io::stdin())),
    })
}

fn read_records(path: &Option<PathBuf>) -> Result<Vec<CorpusRecord>> {
    let label = path.as_ref().map_or("<stdin>".to_string(), |p| p.display().to_string());
    corpus::read_corpus(open_input(path)?).with_context(|| format!("reading {}", label))
}

/// Writes `text` to the output file (recording it for the manifest) or stdout.
fn emit(run: &mut Run, output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(p) => {
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            run.outputs.push(p.clone());
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn json_line<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string(v)? + "\n")
}

fn load_features(path: &Path) -> Result<std::collections::HashMap<String, FeatureSeq>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let items = read_features(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
    Ok(items.into_iter().collect())
}

fn features_for<'a>(
    feats: &'a std::collections::HashMap<String, FeatureSeq>,
    r: &CorpusRecord,
) -> Result<&'a FeatureSeq> {
    let f = feats
        .get(&r.video_id)
        .with_context(|| format!("no features for video {}", r.video_id))?;
    if f.n_shots() != r.shot_count() {
        bail!(
            "video {}: features cover {} shots, corpus has {}",
            r.video_id,
            f.n_shots(),
            r.shot_count()
        );
    }
    Ok(f)
}

/// Act and relation of each shot's first edge, in shot order.
fn shot_labels(r: &CorpusRecord) -> Result<(Vec<ActKind>, Vec<VideoRelation>)> {
    let g = &r.video_graph;
    let mut acts = Vec::with_capacity(g.shots.len());
    let mut rels = Vec::with_capacity(g.shots.len());
    for s in &g.shots {
        let (act, rel) = g
            .primary_attachment(&s.id)
            .with_context(|| format!("video {}: shot {} has no act", r.video_id, s.id))?;
        acts.push(act.kind);
        rels.push(rel);
    }
    Ok((acts, rels))
}

fn load_net(path: &Path) -> Result<EncDecModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    EncDecModel::from_json(&text).with_context(|| format!("loading {}", path.display()))
}

fn validate(a: InputArgs) -> Result<bool> {
    #[derive(Serialize)]
    struct Problem {
        line: usize,
        video_id: Option<String>,
        error: String,
    }
    #[derive(Serialize)]
    struct Report {
        records: usize,
        valid: bool,
        problems: Vec<Problem>,
    }
    let mut run = Run::new("validate");
    run.input(&a.input);
    let mut records = 0;
    let mut problems = Vec::new();
    for (i, line) in open_input(&a.input)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records += 1;
        match corpus::parse_record(&line, i + 1) {
            Ok(_) => {}
            Err(e) => {
                let video_id = match &e {
                    corpus::CorpusError::Invalid { video_id, .. } => Some(video_id.clone()),
                    _ => None,
                };
                problems.push(Problem {
                    line: i + 1,
                    video_id,
                    error: e.to_string(),
                });
            }
        }
    }
    for p in &problems {
        log::error!("{}", p.error);
    }
    let report = Report {
        records,
        valid: problems.is_empty(),
        problems,
    };
    emit(&mut run, &a.output, &json_line(&report)?)?;
    run.finish(&a, None)?;
    Ok(report.valid)
}

fn stats(a: StatsArgs) -> Result<()> {
    let mut run = Run::new("stats");
    run.input(&a.io.input);
    let mut records = read_records(&a.io.input)?;
    if a.filter_shots {
        records = corpus::filter_shots(&records, corpus::DEFAULT_MIN_SHOTS, corpus::DEFAULT_MAX_SHOTS)?;
    }
    let s = corpus::corpus_stats(&records)?;
    emit(&mut run, &a.io.output, &json_line(&s)?)?;
    run.finish(&a, None)
}

fn split(a: SplitArgs) -> Result<()> {
    let mut run = Run::new("split");
    run.input(&a.input);
    let records = read_records(&a.input)?;
    let s = corpus::split(&records, a.train, a.val, a.test, a.seed)?;
    std::fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    for (name, part) in [("train", &s.train), ("val", &s.val), ("test", &s.test)] {
        let p = a.output.join(format!("{}.jsonl", name));
        std::fs::write(&p, corpus::corpus_to_string(part)).with_context(|| format!("writing {}", p.display()))?;
        run.outputs.push(p);
    }
    let counts = serde_json::json!({"train": s.train.len(), "val": s.val.len(), "test": s.test.len()});
    print!("{}", json_line(&counts)?);
    run.finish(&a, Some(a.seed))
}

fn alpha(a: InputArgs) -> Result<()> {
    let mut run = Run::new("alpha");
    run.input(&a.input);
    let records = read_records(&a.input)?;
    let report = agreement::agreement_report(&records)?;
    emit(&mut run, &a.output, &json_line(&report)?)?;
    run.finish(&a, None)
}

fn train_parser(a: TrainParserArgs) -> Result<()> {
    let mut run = Run::new("train-parser");
    run.input(&a.io.input);
    let records = read_records(&a.io.input)?;
    let examples: Vec<ParagraphExample> = records.iter().map(ParagraphExample::from).collect();
    let cfg = parser::TrainConfig {
        epochs: a.epochs,
        margin: a.margin,
        seed: a.seed,
    };
    let (model, report) = parser::train_with_report(&examples, &cfg)?;
    log::info!("updates per epoch: {:?}", report.updates_per_epoch);
    let mut buf = Vec::new();
    model.write(&mut buf)?;
    emit(&mut run, &a.io.output, std::str::from_utf8(&buf)?)?;
    run.finish(&a, Some(a.seed))
}

fn parse(a: ParseArgs) -> Result<()> {
    let mut run = Run::new("parse");
    run.input(&a.io.input);
    run.inputs.push(a.model.clone());
    let f = File::open(&a.model).with_context(|| format!("opening {}", a.model.display()))?;
    let model = LinearMarginModel::read(BufReader::new(f)).with_context(|| format!("reading {}", a.model.display()))?;
    let records = read_records(&a.io.input)?;
    let parsed: Vec<CorpusRecord> = records
        .into_par_iter()
        .map(|mut r| {
            r.paragraph_tree = parser::parse(&r.sentences, &model).with_context(|| format!("parsing {}", r.video_id))?;
            Ok(r)
        })
        .collect::<Result<_>>()?;
    emit(&mut run, &a.io.output, &corpus::corpus_to_string(&parsed))?;
    run.finish(&a, None)
}

fn eval_parseval(a: EvalArgs) -> Result<()> {
    let mut run = Run::new("eval-parseval");
    run.inputs.extend([a.pred.clone(), a.gold.clone()]);
    let pred = read_records(&Some(a.pred.clone()))?;
    let gold = read_records(&Some(a.gold.clone()))?;
    let pt: Vec<_> = pred.iter().map(|r| r.paragraph_tree.clone()).collect();
    let gt: Vec<_> = gold.iter().map(|r| r.paragraph_tree.clone()).collect();
    let scores = parseval::evaluate(&pt, &gt)?;
    emit(&mut run, &a.output, &json_line(&scores)?)?;
    run.finish(&a, None)
}

fn train_acts(a: TrainActsArgs) -> Result<()> {
    let mut run = Run::new("train-acts");
    run.input(&a.io.input);
    run.inputs.push(a.net.features.clone());
    let records = read_records(&a.io.input)?;
    let feats = load_features(&a.net.features)?;
    let examples = records
        .iter()
        .map(|r| {
            Ok(ActExample {
                features: features_for(&feats, r)?.clone(),
                acts: shot_labels(r)?.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (model, report) = seq2seq::train_acts(&examples, &a.net.config())?;
    log::info!("final epoch loss {:?}", report.epoch_losses.last());
    emit(&mut run, &a.io.output, &(model.to_json() + "\n"))?;
    run.finish(&a, Some(a.net.seed))
}

fn train_relations(a: TrainRelationsArgs) -> Result<()> {
    let mut run = Run::new("train-relations");
    run.input(&a.io.input);
    run.inputs.push(a.net.features.clone());
    let records = read_records(&a.io.input)?;
    let feats = load_features(&a.net.features)?;
    let act_model = match (a.acts, &a.act_model) {
        (ActsFrom::Gold, _) => None,
        (ActsFrom::Predicted, Some(p)) => {
            run.inputs.push(p.clone());
            Some(load_net(p)?)
        }
        (ActsFrom::Predicted, None) => bail!("--acts predicted needs --act-model"),
    };
    let examples = records
        .iter()
        .map(|r| {
            let (acts, relations) = shot_labels(r)?;
            Ok(RelationExample {
                features: features_for(&feats, r)?.clone(),
                acts,
                relations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let source = match &act_model {
        Some(m) => ActsSource::Predicted(m),
        None => ActsSource::Gold,
    };
    let (model, _) = seq2seq::train_relations(&examples, source, &a.net.config())?;
    emit(&mut run, &a.io.output, &(model.to_json() + "\n"))?;
    run.finish(&a, Some(a.net.seed))
}

fn predict(a: PredictArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Prediction {
        video_id: String,
        acts: Vec<ActKind>,
        #[serde(skip_serializing_if = "Option::is_none")]
        relations: Option<Vec<VideoRelation>>,
    }
    let mut run = Run::new("predict");
    run.input(&a.io.input);
    run.inputs.push(a.features.clone());
    run.inputs.push(a.act_model.clone());
    let records = read_records(&a.io.input)?;
    let feats = load_features(&a.features)?;
    let act_model = load_net(&a.act_model)?;
    let rel_model = match &a.relation_model {
        Some(p) => {
            run.inputs.push(p.clone());
            Some(load_net(p)?)
        }
        None => None,
    };
    let lines: Vec<String> = records
        .par_iter()
        .map(|r| {
            let f = features_for(&feats, r)?;
            let acts = seq2seq::predict_acts(&act_model, f)?;
            let relations = match &rel_model {
                Some(m) => Some(seq2seq::predict_relations(m, f, &acts)?),
                None => None,
            };
            json_line(&Prediction {
                video_id: r.video_id.clone(),
                acts,
                relations,
            })
        })
        .collect::<Result<_>>()?;
    emit(&mut run, &a.io.output, &lines.concat())?;
    run.finish(&a, None)
}

fn fit_coherence(a: FitCoherenceArgs) -> Result<()> {
    let mut run = Run::new("fit-coherence");
    run.input(&a.io.input);
    let records = read_records(&a.io.input)?;
    let trees: Vec<_> = records.iter().map(|r| r.paragraph_tree.clone()).collect();
    let model = coherence::fit_transitions(&trees, a.k)?;
    emit(&mut run, &a.io.output, &(model.to_json() + "\n"))?;
    run.finish(&a, None)
}

fn score(a: ScoreArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Scored {
        video_id: String,
        transition_score: f64,
        locality_score: f64,
        video_coherence: f64,
        combined: f64,
        verdict: Verdict,
    }
    let mut run = Run::new("score");
    run.input(&a.io.input);
    run.inputs.push(a.model.clone());
    let text = std::fs::read_to_string(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let model = TransitionModel::from_json(&text)
        .map_err(|e| anyhow::anyhow!("{}", e))
        .with_context(|| format!("loading {}", a.model.display()))?;
    let records = read_records(&a.io.input)?;
    let lines: Vec<String> = records
        .par_iter()
        .map(|r| {
            let p = coherence::paragraph_coherence(&r.paragraph_tree, &model)?;
            let v = coherence::video_coherence(&r.video_graph, VideoCoherenceWeights::default())
                .with_context(|| format!("scoring video {}", r.video_id))?;
            json_line(&Scored {
                video_id: r.video_id.clone(),
                transition_score: p.transition_score,
                locality_score: p.locality_score,
                video_coherence: v,
                combined: p.combined,
                verdict: coherence::conditioned_verdict(p.combined, v, a.tau_p, a.tau_v),
            })
        })
        .collect::<Result<_>>()?;
    emit(&mut run, &a.io.output, &lines.concat())?;
    run.finish(&a, None)
}

fn synth_cmd(a: SynthArgs) -> Result<()> {
    let mut run = Run::new("synth");
    let cfg = synth::GenConfig {
        seed: a.seed,
        n_records: a.n,
        shots_range: (a.min_shots, a.max_shots),
        sentence_range: (a.min_sentences, a.max_sentences),
        ..synth::GenConfig::default()
    };
    let generated = synth::generate(&cfg)?;
    let records: Vec<CorpusRecord> = generated.iter().map(|g| g.record.clone()).collect();
    emit(&mut run, &a.output, &corpus::corpus_to_string(&records))?;
    if let Some(p) = &a.features {
        let items: Vec<(String, FeatureSeq)> = generated
            .into_iter()
            .map(|g| (g.record.video_id, g.features))
            .collect();
        let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
        write_features(BufWriter::new(f), &items)?;
        run.outputs.push(p.clone());
    }
    run.finish(&a, Some(a.seed))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DISCOH_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(a) => validate(a).map(|ok| if ok { ExitCode::SUCCESS } else { ExitCode::from(1) }),
        Command::Stats(a) => stats(a).map(|_| ExitCode::SUCCESS),
        Command::Split(a) => split(a).map(|_| ExitCode::SUCCESS),
        Command::Alpha(a) => alpha(a).map(|_| ExitCode::SUCCESS),
        Command::TrainParser(a) => train_parser(a).map(|_| ExitCode::SUCCESS),
        Command::Parse(a) => parse(a).map(|_| ExitCode::SUCCESS),
        Command::EvalParseval(a) => eval_parseval(a).map(|_| ExitCode::SUCCESS),
        Command::TrainActs(a) => train_acts(a).map(|_| ExitCode::SUCCESS),
        Command::TrainRelations(a) => train_relations(a).map(|_| ExitCode::SUCCESS),
        Command::Predict(a) => predict(a).map(|_| ExitCode::SUCCESS),
        Command::FitCoherence(a) => fit_coherence(a).map(|_| ExitCode::SUCCESS),
        Command::Score(a) => score(a).map(|_| ExitCode::SUCCESS),
        Command::Synth(a) => synth_cmd(a).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(1)
        }
    }
}

