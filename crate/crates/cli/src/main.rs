use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand};
use log::{info, warn};

use tagmt::backtrans::{
    assemble_training_set, build_generator_corpus, generate_pseudo_sources,
    run_tag_steering_experiment, AssemblyMode, GenerationMode, SteeringConfig,
};
use tagmt::corpus::{
    load_monolingual, load_parallel, load_tagged_parallel, mix_upsampled, Corpus, Direction,
    DomainTag, Origin, Split, StatsReport, StatsRow,
};
use tagmt::decode::{DecodeConfig, Ensemble, StartToken};
use tagmt::eval::{corpus_bleu, BleuConfig, Smoothing, Tokenization};
use tagmt::kv::KvFile;
use tagmt::model::{load_checkpoint, save_checkpoint, ModelConfig, TrainConfig};
use tagmt::pipeline::{
    experiment, nbest_line, stage_seed, synthetic_data, train_system, Codec, ExperimentConfig,
    SyntheticConfig, Translator,
};
use tagmt::subword::{decode_bpe, learn_bpe, PunctNormalizer, SubwordModel};
use tagmt::Model;

#[derive(Parser)]
#[command(
    name = "tagmt",
    version,
    about = "Domain-tagged translation toolkit for noisy text"
)]
struct Cli {
    /// More log output on stderr (-v debug, -vv trace).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    /// Flat `key = value` file; each key names a flag of the subcommand.
    /// Flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a BPE merge list from tokenized text.
    BpeLearn(BpeLearnArgs),
    /// Segment tokenized text with a learned merge list, or undo segmentation.
    BpeApply(BpeApplyArgs),
    /// Put a domain tag at the start of every source or target line.
    Tag(TagArgs),
    /// Concatenate parallel corpora and shuffle them with a seed.
    Mix(MixArgs),
    /// Train a translation model.
    Train(TrainArgs),
    /// Train or load a target-tagged generator, synthesize noisy sources for
    /// monolingual text and assemble the augmented training set.
    Backtranslate(BacktransArgs),
    /// Translate a file with one model or an ensemble.
    Decode(DecodeArgs),
    /// Corpus BLEU of a hypothesis file against a reference file.
    Score(ScoreArgs),
    /// Four-system comparison: insensitive mix, sensitive mix, + noisy
    /// back-translation, + ensemble.
    Experiment(ExperimentArgs),
    /// Tag-steering check on the synthetic case-style task.
    Steer(SteerArgs),
    /// Write the synthetic toy corpora.
    GenSynthetic(SyntheticArgs),
    /// Count pairs and sentences per origin and split.
    Stats(StatsArgs),
}

#[derive(Args)]
struct LangArgs {
    #[arg(long, default_value = "fr")]
    src_lang: String,
    #[arg(long, default_value = "en")]
    tgt_lang: String,
}

impl LangArgs {
    fn direction(&self) -> Direction {
        Direction::new(self.src_lang.clone(), self.tgt_lang.clone())
    }
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 64)]
    d_model: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 256)]
    ffn: usize,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    #[arg(long, default_value_t = 0.1)]
    label_smoothing: f64,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1.0)]
    lr_factor: f64,
    #[arg(long, default_value_t = 400)]
    warmup: usize,
    /// Steps between snapshots; 0 turns them off.
    #[arg(long, default_value_t = 0)]
    checkpoint_every: usize,
    #[arg(long, default_value_t = 8000)]
    merges: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl ModelArgs {
    fn model(&self) -> ModelConfig {
        ModelConfig {
            d_model: self.d_model,
            layers: self.layers,
            heads: self.heads,
            ffn: self.ffn,
            dropout: self.dropout,
            label_smoothing: self.label_smoothing,
            seed: self.seed,
            ..ModelConfig::default()
        }
    }

    fn train(&self) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            lr_factor: self.lr_factor,
            warmup: self.warmup,
            seed: self.seed,
            checkpoint_every: self.checkpoint_every,
            ..TrainConfig::default()
        }
    }
}

#[derive(Args, Clone)]
struct SearchArgs {
    #[arg(long, default_value_t = 4)]
    beam: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    length_reward: f64,
    #[arg(long, default_value_t = 256)]
    max_len: usize,
}

impl SearchArgs {
    fn config(&self) -> DecodeConfig {
        DecodeConfig {
            beam_size: self.beam,
            length_reward: self.length_reward,
            max_len: self.max_len,
        }
    }
}

#[derive(Args)]
struct BpeLearnArgs {
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long, default_value_t = 8000)]
    merges: usize,
    #[arg(long)]
    codes: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
}

#[derive(Args)]
struct BpeApplyArgs {
    #[arg(long)]
    codes: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Join `@@` pieces back into words instead of segmenting.
    #[arg(long)]
    reverse: bool,
    /// Write vocabulary ids instead of subword strings.
    #[arg(long)]
    ids: bool,
}

#[derive(Args)]
struct TagArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// One of <clean>, <noisy>, <clean_s>, <noisy_s> (brackets optional).
    #[arg(long)]
    tag: String,
    #[arg(long)]
    out_src: PathBuf,
    #[arg(long)]
    out_tgt: PathBuf,
    #[command(flatten)]
    lang: LangArgs,
}

#[derive(Args)]
struct MixArgs {
    /// Source file of each corpus, in order.
    #[arg(long, required = true)]
    src: Vec<PathBuf>,
    #[arg(long, required = true)]
    tgt: Vec<PathBuf>,
    /// Origin label (clean, noisy, synthetic) per corpus; defaults to clean.
    #[arg(long)]
    origin: Vec<String>,
    /// Repetition factor per corpus; defaults to 1.
    #[arg(long)]
    upsample: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out_src: PathBuf,
    #[arg(long)]
    out_tgt: PathBuf,
    #[arg(long)]
    out_origins: Option<PathBuf>,
    #[command(flatten)]
    lang: LangArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// Codec directory; learned from the training data and written there
    /// when it does not exist yet.
    #[arg(long)]
    codec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    lang: LangArgs,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct BacktransArgs {
    #[arg(long)]
    clean_src: PathBuf,
    #[arg(long)]
    clean_tgt: PathBuf,
    #[arg(long)]
    noisy_src: PathBuf,
    #[arg(long)]
    noisy_tgt: PathBuf,
    /// Monolingual text in the final target language.
    #[arg(long)]
    mono: PathBuf,
    /// Generator checkpoint; trained and written here when missing.
    #[arg(long)]
    generator: PathBuf,
    /// Generator codec directory; learned when missing.
    #[arg(long)]
    generator_codec: PathBuf,
    #[arg(long, default_value = "sensitive")]
    mode: String,
    /// Sample pseudo-sources instead of beam search.
    #[arg(long)]
    sample: bool,
    #[arg(long)]
    out_src: PathBuf,
    #[arg(long)]
    out_tgt: PathBuf,
    #[arg(long)]
    out_origins: PathBuf,
    #[command(flatten)]
    lang: LangArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct DecodeArgs {
    /// Checkpoint; repeat for an ensemble.
    #[arg(long, required = true)]
    model: Vec<PathBuf>,
    #[arg(long)]
    codec: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Target-side tag to start decoding from; required for models trained
    /// with target-side tags.
    #[arg(long)]
    start_tag: Option<String>,
    /// Source-side tag prepended to every input line.
    #[arg(long)]
    source_tag: Option<String>,
    /// Also write the whole final beam as `index ||| text ||| logp ||| length`.
    #[arg(long)]
    nbest: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, default_value = "intl")]
    tok: String,
    #[arg(long)]
    lowercase: bool,
    #[arg(long, default_value = "none")]
    smooth: String,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Directory written by `gen-synthetic`; generated in memory from
    /// --data-seed when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    data_seed: u64,
    #[arg(long, default_value_t = 2)]
    ensemble_size: usize,
    /// Markdown table output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    lang: LangArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct SteerArgs {
    #[arg(long, default_value_t = 600)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 7)]
    data_seed: u64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    lexicon_size: usize,
    #[arg(long, default_value_t = 400)]
    train_sentences: usize,
    #[arg(long, default_value_t = 200)]
    mono_sentences: usize,
    #[arg(long, default_value_t = 50)]
    test_sentences: usize,
    #[arg(long, default_value_t = 200)]
    held_out_sentences: usize,
    #[command(flatten)]
    lang: LangArgs,
}

#[derive(Args)]
struct StatsArgs {
    /// `row:split:source:target` for parallel rows (clean, noisy,
    /// synthetic) or `monolingual:split:file`.
    #[arg(long, required = true)]
    entry: Vec<String>,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    lang: LangArgs,
}

/// Appends `--key value` for every config entry whose flag is not already
/// on the command line. Unknown keys are rejected by name.
fn expand_config(mut args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_owned());
        }
    }
    let Some(path) = path else { return Ok(args) };
    let cmd = Cli::command();
    let sub = args
        .iter()
        .skip(1)
        .find_map(|a| cmd.find_subcommand(a))
        .ok_or_else(|| anyhow!("--config needs a subcommand"))?;
    let kv = KvFile::read(Path::new(&path))?;
    let mut extra = Vec::new();
    for (key, value) in &kv.entries {
        let flag = key.replace('_', "-");
        let arg = sub
            .get_arguments()
            .find(|a| {
                a.get_long() == Some(flag.as_str())
                    && !matches!(a.get_long(), Some("help" | "config" | "verbose"))
            })
            .ok_or_else(|| anyhow!("unknown config key `{key}` in {path}"))?;
        let long = format!("--{flag}");
        if args
            .iter()
            .any(|a| *a == long || a.starts_with(&format!("{long}=")))
        {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "1" | "yes" => extra.push(long),
                "false" | "0" | "no" => {}
                _ => bail!("config key `{key}` expects true or false, got {value:?}"),
            },
            ArgAction::Append => {
                for v in value.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                    extra.push(long.clone());
                    extra.push(v.to_owned());
                }
            }
            _ => extra.push(format!("{long}={value}")),
        }
    }
    args.extend(extra);
    Ok(args)
}

fn parse_tag(s: &str) -> Result<DomainTag> {
    let surface = if s.starts_with('<') {
        s.to_owned()
    } else {
        format!("<{s}>")
    };
    DomainTag::from_surface(&surface).ok_or_else(|| anyhow!("unknown domain tag {s:?}"))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn tokenized(path: &Path) -> Result<Vec<Vec<String>>> {
    Ok(read_lines(path)?
        .iter()
        .map(|l| l.split_whitespace().map(str::to_owned).collect())
        .collect())
}

fn bpe_learn(a: BpeLearnArgs) -> Result<()> {
    let mut sentences = Vec::new();
    for p in &a.input {
        sentences.extend(tokenized(p)?);
    }
    let model = learn_bpe(&sentences, a.merges)?;
    info!(
        "learned {} merges, vocabulary {}",
        model.merges().len(),
        model.vocab_size()
    );
    model.save(&a.codes, &a.vocab)?;
    Ok(())
}

fn bpe_apply(a: BpeApplyArgs) -> Result<()> {
    let lines = tokenized(&a.input)?;
    if a.reverse {
        return write_lines(&a.output, lines.iter().map(|l| decode_bpe(l)));
    }
    let model = SubwordModel::load(&a.codes, &a.vocab)?;
    let out = lines.iter().map(|words| {
        // a leading domain tag passes through unchanged
        let (tag, body) = match words.first().and_then(|w| DomainTag::from_surface(w)) {
            Some(t) => (Some(t), &words[1..]),
            None => (None, &words[..]),
        };
        let mut toks: Vec<String> = tag.map(|t| t.surface().to_owned()).into_iter().collect();
        toks.extend(model.apply(body));
        if a.ids {
            toks.iter()
                .map(|t| model.token_id(t).to_string())
                .collect::<Vec<_>>()
                .join(" ")
        } else {
            toks.join(" ")
        }
    });
    write_lines(&a.output, out)
}

fn tag(a: TagArgs) -> Result<()> {
    let tag = parse_tag(&a.tag)?;
    let (corpus, report) =
        load_parallel(&a.src, &a.tgt, Origin::CleanParallel, a.lang.direction())?;
    info!("read {} lines, kept {}", report.lines, report.kept);
    corpus.tagged(tag)?.write(&a.out_src, &a.out_tgt, None)?;
    Ok(())
}

fn mix(a: MixArgs) -> Result<()> {
    if a.src.len() != a.tgt.len() {
        bail!(
            "{} --src files but {} --tgt files",
            a.src.len(),
            a.tgt.len()
        );
    }
    if !a.origin.is_empty() && a.origin.len() != a.src.len() {
        bail!("give one --origin per corpus or none");
    }
    let factors = if a.upsample.is_empty() {
        vec![1; a.src.len()]
    } else {
        a.upsample.clone()
    };
    let mut corpora = Vec::new();
    for (i, (s, t)) in a.src.iter().zip(&a.tgt).enumerate() {
        let origin = match a.origin.get(i) {
            Some(label) => {
                Origin::parse(label).ok_or_else(|| anyhow!("unknown origin {label:?}"))?
            }
            None => Origin::CleanParallel,
        };
        let (c, report) = load_tagged_parallel(s, t, origin, a.lang.direction())?;
        info!(
            "{}: {} pairs ({} empty dropped)",
            s.display(),
            report.kept,
            report.dropped_empty
        );
        corpora.push(c);
    }
    let mixed = mix_upsampled(corpora, &factors, a.seed)?;
    info!("mixed corpus has {} pairs", mixed.len());
    mixed.write(&a.out_src, &a.out_tgt, a.out_origins.as_deref())?;
    Ok(())
}

fn load_or_learn_codec(dir: &Path, corpus: &Corpus, merges: usize) -> Result<Codec> {
    if dir.join("codec.cfg").exists() {
        info!("loading codec from {}", dir.display());
        let codec = Codec::load(dir)?;
        if codec.direction != corpus.direction {
            bail!(
                "codec in {} is for {}, data is {}",
                dir.display(),
                codec.direction,
                corpus.direction
            );
        }
        Ok(codec)
    } else {
        let codec = Codec::learn(corpus, merges)?;
        codec.save(dir)?;
        info!("learned codec into {}", dir.display());
        Ok(codec)
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let (corpus, report) =
        load_tagged_parallel(&a.src, &a.tgt, Origin::CleanParallel, a.lang.direction())?;
    info!(
        "{} pairs ({} empty dropped)",
        corpus.len(),
        report.dropped_empty
    );
    let codec = load_or_learn_codec(&a.codec, &corpus, a.model.merges)?;
    let mut tc = a.model.train();
    if tc.checkpoint_every > 0 {
        tc.checkpoint_path = Some(a.out.clone());
    }
    let (_, model) = train_system(&corpus, Some(codec), a.model.merges, &a.model.model(), &tc)?;
    save_checkpoint(&model, &a.out)?;
    info!("wrote {}", a.out.display());
    Ok(())
}

fn backtranslate(a: BacktransArgs) -> Result<()> {
    let dir = a.lang.direction();
    let mode = AssemblyMode::parse(&a.mode)
        .ok_or_else(|| anyhow!("mode must be sensitive or insensitive, got {:?}", a.mode))?;
    let (clean, _) = load_parallel(
        &a.clean_src,
        &a.clean_tgt,
        Origin::CleanParallel,
        dir.clone(),
    )?;
    let (noisy, _) = load_parallel(
        &a.noisy_src,
        &a.noisy_tgt,
        Origin::NoisyParallel,
        dir.clone(),
    )?;
    let mono = load_monolingual(&a.mono, &dir.target)?;
    let seed = a.model.seed;
    let gen_corpus = build_generator_corpus(
        clean.clone(),
        noisy.clone(),
        stage_seed(seed, "generator/mix"),
    )?;
    let codec = load_or_learn_codec(&a.generator_codec, &gen_corpus, a.model.merges)?;
    let generator: Model = if a.generator.exists() {
        info!("loading generator {}", a.generator.display());
        load_checkpoint(&a.generator)?
    } else {
        info!("training generator on {} pairs", gen_corpus.len());
        let mc = ModelConfig {
            seed: stage_seed(seed, "generator/init"),
            ..a.model.model()
        };
        let tc = TrainConfig {
            seed: stage_seed(seed, "generator/train"),
            ..a.model.train()
        };
        let (_, m) = train_system(&gen_corpus, Some(codec.clone()), a.model.merges, &mc, &tc)?;
        save_checkpoint(&m, &a.generator)?;
        m
    };
    let generator = Translator::new(codec, Ensemble::single(generator))?;
    let gen_mode = if a.sample {
        GenerationMode::Sample {
            max_len: a.search.max_len,
            seed: stage_seed(seed, "generator/sample"),
        }
    } else {
        GenerationMode::Beam(a.search.config())
    };
    let (synthetic, report) =
        generate_pseudo_sources(&generator, &mono, DomainTag::NOISY_TARGET, &gen_mode)?;
    info!(
        "pseudo-sources: {} requested, {} kept, {} empty dropped",
        report.requested, report.kept, report.dropped_empty
    );
    let out = assemble_training_set(
        &clean,
        &noisy,
        &synthetic,
        mode,
        stage_seed(seed, "assemble"),
    )?;
    info!(
        "augmented corpus: {} clean + {} noisy + {} synthetic = {}",
        clean.len(),
        noisy.len(),
        synthetic.len(),
        out.len()
    );
    out.write(&a.out_src, &a.out_tgt, Some(&a.out_origins))?;
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<bool> {
    let codec = Codec::load(&a.codec)?;
    let members = a
        .model
        .iter()
        .map(|p| load_checkpoint::<f32>(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let start = match &a.start_tag {
        Some(t) => StartToken::Tag(parse_tag(t)?),
        None => StartToken::Begin,
    };
    let source_tag = a.source_tag.as_deref().map(parse_tag).transpose()?;
    let translator = Translator::new(codec, Ensemble::new(members)?)?;
    let normalizer = PunctNormalizer::new(&translator.codec.direction.source);
    let cfg = a.search.config();
    let mut hyps = Vec::new();
    let mut nbest = Vec::new();
    let mut failures = 0;
    for (i, line) in read_lines(&a.input)?.iter().enumerate() {
        let mut words: Vec<String> = Vec::new();
        if let Some(t) = source_tag {
            words.push(t.surface().to_owned());
        }
        words.extend(
            normalizer
                .normalize(line)
                .split_whitespace()
                .map(str::to_owned),
        );
        match translator.translate_nbest(&words, start, &cfg) {
            Ok(list) => {
                hyps.push(list[0].text.clone());
                nbest.extend(list.iter().map(|t| nbest_line(i, t)));
            }
            Err(e) => {
                warn!("line {}: {e}", i + 1);
                failures += 1;
                hyps.push(String::new());
            }
        }
    }
    write_lines(&a.output, hyps)?;
    if let Some(p) = &a.nbest {
        write_lines(p, nbest)?;
    }
    if failures > 0 {
        warn!("{failures} lines failed to decode");
    }
    Ok(failures == 0)
}

fn score(a: ScoreArgs) -> Result<()> {
    let config = BleuConfig {
        tokenize: Tokenization::parse(&a.tok)
            .ok_or_else(|| anyhow!("tok must be intl or none, got {:?}", a.tok))?,
        lowercase: a.lowercase,
        smoothing: Smoothing::parse(&a.smooth)
            .ok_or_else(|| anyhow!("smooth must be none or exp, got {:?}", a.smooth))?,
    };
    let report = corpus_bleu(&read_lines(&a.hyp)?, &read_lines(&a.reference)?, &config)?;
    println!("{report}");
    if let Some(p) = &a.json {
        fs::write(p, report.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn load_synthetic_dir(
    dir: &Path,
    lang: &LangArgs,
) -> Result<(Corpus, Corpus, tagmt::corpus::MonoCorpus, Corpus)> {
    let (s, t) = (&lang.src_lang, &lang.tgt_lang);
    let d = lang.direction();
    let f = |name: &str, l: &str| dir.join(format!("{name}.{l}"));
    let (clean, _) = load_parallel(
        &f("clean", s),
        &f("clean", t),
        Origin::CleanParallel,
        d.clone(),
    )?;
    let (noisy, _) = load_parallel(
        &f("noisy", s),
        &f("noisy", t),
        Origin::NoisyParallel,
        d.clone(),
    )?;
    let (test, _) = load_parallel(&f("test", s), &f("test", t), Origin::NoisyParallel, d)?;
    let mono = load_monolingual(&f("mono", t), t)?;
    Ok((clean, noisy, mono, test.with_split(Split::Test)))
}

fn run_experiment(a: ExperimentArgs) -> Result<()> {
    let (clean, noisy, mono, test) = match &a.data {
        Some(dir) => load_synthetic_dir(dir, &a.lang)?,
        None => {
            let cfg = SyntheticConfig {
                seed: a.data_seed,
                source_lang: a.lang.src_lang.clone(),
                target_lang: a.lang.tgt_lang.clone(),
                ..SyntheticConfig::default()
            };
            let d = synthetic_data(&cfg)?;
            (d.clean, d.noisy, d.mono, d.test)
        }
    };
    let cfg = ExperimentConfig {
        model: a.model.model(),
        train: a.model.train(),
        decode: a.search.config(),
        bleu: BleuConfig::default(),
        merges: a.model.merges,
        ensemble_size: a.ensemble_size,
        seed: a.model.seed,
    };
    let report = experiment(&clean, &noisy, &mono, &test, &cfg)?;
    print!("{report}");
    if let Some(p) = &a.out {
        fs::write(p, report.to_string()).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.json {
        fs::write(p, report.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn steer(a: SteerArgs) -> Result<()> {
    let mut cfg = SteeringConfig::default();
    cfg.train.steps = a.steps;
    cfg.seed = a.seed;
    cfg.synthetic.seed = a.data_seed;
    let report = run_tag_steering_experiment(&cfg)?;
    print!("{report}");
    if let Some(p) = &a.json {
        fs::write(p, report.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn gen_synthetic(a: SyntheticArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        lexicon_size: a.lexicon_size,
        train_sentences: a.train_sentences,
        mono_sentences: a.mono_sentences,
        test_sentences: a.test_sentences,
        held_out_sentences: a.held_out_sentences,
        source_lang: a.lang.src_lang.clone(),
        target_lang: a.lang.tgt_lang.clone(),
        seed: a.seed,
        ..SyntheticConfig::default()
    };
    synthetic_data(&cfg)?.write(&a.out_dir)?;
    info!("wrote synthetic corpora to {}", a.out_dir.display());
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let mut report = StatsReport::default();
    for entry in &a.entry {
        let parts: Vec<&str> = entry.split(':').collect();
        let row = StatsRow::parse(parts[0]).ok_or_else(|| anyhow!("unknown row in {entry:?}"))?;
        let split = parts
            .get(1)
            .and_then(|s| Split::parse(s))
            .ok_or_else(|| anyhow!("unknown or missing split in {entry:?}"))?;
        match (row, &parts[2..]) {
            (StatsRow::Monolingual, [path]) => {
                report.add_mono(&load_monolingual(Path::new(path), &a.lang.tgt_lang)?, split);
            }
            (StatsRow::Monolingual, _) => bail!("monolingual entries take one file: {entry:?}"),
            (_, [src, tgt]) => {
                let origin = match row {
                    StatsRow::Clean => Origin::CleanParallel,
                    StatsRow::Noisy => Origin::NoisyParallel,
                    _ => Origin::SyntheticBacktranslated,
                };
                let (c, _) = load_tagged_parallel(
                    Path::new(src),
                    Path::new(tgt),
                    origin,
                    a.lang.direction(),
                )?;
                report.add_corpus(&c.with_split(split));
            }
            _ => bail!("parallel entries take a source and a target file: {entry:?}"),
        }
    }
    if a.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_kv());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::BpeLearn(a) => bpe_learn(a)?,
        Command::BpeApply(a) => bpe_apply(a)?,
        Command::Tag(a) => tag(a)?,
        Command::Mix(a) => mix(a)?,
        Command::Train(a) => train(a)?,
        Command::Backtranslate(a) => backtranslate(a)?,
        Command::Decode(a) => return decode(a),
        Command::Score(a) => score(a)?,
        Command::Experiment(a) => run_experiment(a)?,
        Command::Steer(a) => steer(a)?,
        Command::GenSynthetic(a) => gen_synthetic(a)?,
        Command::Stats(a) => stats(a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
