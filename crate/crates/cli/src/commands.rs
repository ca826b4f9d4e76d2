use std::path::{Path, PathBuf};

use requery::ane::{train_ane, AneConfig, AneModel};
use requery::classifier::{decide, rewrite_distance};
use requery::datagen::templates::{generate_references, read_references};
use requery::datagen::{generate_corpus, read_corpus, write_corpus, GenConfig, NeighborIndex};
use requery::eval::{default_thresholds, emit_curve, evaluate, CurveFormat};
use requery::integrity::{check_all, TOLERANCE};
use requery::io::write_atomic;
use requery::lexicon::{toy_lexicon, Lexicon, Phone, Utterance, Word};
use requery::phonetics::ConfusionMatrix;
use requery::rewriter::{train_neural, NeuralKind, NeuralModel, Rewriter, TrainConfig, DEFAULT_BEAM_WIDTH};
use requery::rule::{rule_rewrite, RuleRewriter, DEFAULT_MAX_N};

use crate::settings::{read_input, Settings};
use crate::{
    AneCommand, AneNearestArgs, AneTrainArgs, Cli, CliError, Command, DefaultMatrixArgs, Engine, EvaluateArgs, Format,
    GenDataArgs, GradCheckArgs, NeuralEngine, Resources, RewriteArgs, TrainArgs,
};

type Result<T> = std::result::Result<T, CliError>;

const DEFAULT_SEED: u64 = 0;
const DEFAULT_REFERENCES: usize = 10_000;
const DEFAULT_NEAREST: usize = 5;
const DEFAULT_GRAD_INSTANCES: usize = 20;

pub fn run(cli: Cli) -> Result<()> {
    let mut s = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::GenData(a) => gen_data(&mut s, a),
        Command::AneTrain(a) | Command::Ane(AneCommand::Train(a)) => ane_train(&mut s, a),
        Command::AneNearest(a) | Command::Ane(AneCommand::Nearest(a)) => ane_nearest(&mut s, a),
        Command::Train(a) => train(&mut s, a),
        Command::Rewrite(a) => rewrite(&mut s, a),
        Command::Evaluate(a) => evaluate_cmd(&mut s, a),
        Command::DefaultMatrix(a) => default_matrix(&mut s, a),
        Command::GradCheck(a) => grad_check(&mut s, a),
    }
}

fn load_resources(s: &mut Settings, r: Resources) -> Result<(Lexicon, ConfusionMatrix)> {
    let lex = match s.input_path("lexicon", r.lexicon)? {
        Some(p) => Lexicon::parse(&read_input(&p)?)?,
        None => toy_lexicon(),
    };
    let matrix = match s.input_path("matrix", r.matrix)? {
        Some(p) => ConfusionMatrix::from_csv(&read_input(&p)?, &Phone::ALL.into_iter().collect())?,
        None => ConfusionMatrix::default_matrix(),
    };
    Ok((lex, matrix))
}

fn output(s: &mut Settings, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
    s.optional("out", flag.map(|p| p.display().to_string())).map(|o| o.map(PathBuf::from))
}

fn required_output(s: &mut Settings, flag: Option<PathBuf>) -> Result<PathBuf> {
    output(s, flag)?.ok_or_else(|| CliError::Usage("--out is required".into()))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(write_atomic(p, text.as_bytes())?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_utterance(what: &str, text: &str) -> Result<Utterance> {
    Utterance::parse(text).map_err(|e| CliError::Data(format!("{what}: {e}")))
}

fn gen_data(s: &mut Settings, a: GenDataArgs) -> Result<()> {
    let (lex, matrix) = load_resources(s, a.resources)?;
    let out = required_output(s, a.out)?;
    let seed = s.value("seed", a.seed, DEFAULT_SEED)?;
    let refs_path = s.input_path("references", a.references)?;
    let count = s.value("count", a.count, DEFAULT_REFERENCES)?;
    let base = GenConfig::default();
    let cfg = GenConfig {
        correction_proportion: s.value("correction_proportion", a.correction_proportion, base.correction_proportion)?,
        corruption_rate: s.value("corruption_rate", a.corruption_rate, base.corruption_rate)?,
        prefix_prob: s.value("prefix_prob", a.prefix_prob, base.prefix_prob)?,
        ..base
    };
    s.finish("gen-data")?;
    cfg.validate()?;
    let references = match refs_path {
        Some(p) => read_references(&read_input(&p)?)?,
        None => generate_references(count, seed),
    };
    let index = NeighborIndex::new(lex, matrix);
    let corpus = generate_corpus(&references, &index, &cfg, seed)?;
    write_atomic(&out, write_corpus(&corpus)?.as_bytes())?;
    let corrections = corpus.iter().filter(|p| p.is_correction).count();
    eprintln!("wrote {} pairs ({corrections} corrections) to {}", corpus.len(), out.display());
    Ok(())
}

fn ane_train(s: &mut Settings, a: AneTrainArgs) -> Result<()> {
    let (lex, matrix) = load_resources(s, a.resources)?;
    let out = required_output(s, a.out)?;
    let seed = s.value("seed", a.seed, DEFAULT_SEED)?;
    let base = AneConfig::default();
    let config = AneConfig {
        epochs: s.value("epochs", a.epochs, base.epochs)?,
        dim: s.value("dim", a.dim, base.dim)?,
        char_dim: s.value("char_dim", a.char_dim, base.char_dim)?,
        lr: s.value("lr", a.lr, base.lr)?,
        batch: s.value("batch", a.batch, base.batch)?,
        margin: s.value("margin", a.margin, base.margin)?,
        ..base
    };
    s.finish("ane-train")?;
    let model = train_ane(&lex, &matrix, &config, seed)?;
    model.save(&out)?;
    eprintln!("wrote embedding to {}", out.display());
    Ok(())
}

/// Reads an embedding checkpoint, or the embedding bundled in a rewriter
/// checkpoint.
fn load_ane(path: &Path) -> Result<AneModel> {
    match AneModel::load(path) {
        Ok(m) => Ok(m),
        Err(first) => NeuralModel::load(path).map(|m| m.vectors().ane().clone()).map_err(|_| first.into()),
    }
}

fn ane_nearest(s: &mut Settings, a: AneNearestArgs) -> Result<()> {
    let (lex, _) = load_resources(s, a.resources)?;
    let checkpoint = s.required_input("checkpoint", a.checkpoint)?;
    let k = s.value("k", a.k, DEFAULT_NEAREST)?;
    s.finish("ane-nearest")?;
    let word = Word::new(&a.word).map_err(|e| CliError::Data(e.to_string()))?;
    let model = load_ane(&checkpoint)?;
    for (w, sim) in model.nearest(&word, &lex.words(), k)? {
        println!("{w}\t{sim:.6}");
    }
    Ok(())
}

fn neural_kind(e: NeuralEngine) -> NeuralKind {
    match e {
        NeuralEngine::TwoStep => NeuralKind::TwoStep,
        NeuralEngine::Ptr => NeuralKind::Pointer,
    }
}

fn train(s: &mut Settings, a: TrainArgs) -> Result<()> {
    let kind = neural_kind(a.engine);
    let corpus_path = s.required_input("corpus", a.corpus)?;
    let ane_path = s.required_input("ane", a.ane)?;
    let out = required_output(s, a.out)?;
    let seed = s.value("seed", a.seed, DEFAULT_SEED)?;
    let base = TrainConfig::for_kind(kind);
    let config = TrainConfig {
        hidden: s.value("hidden", a.hidden, base.hidden)?,
        lr: s.value("lr", a.lr, base.lr)?,
        batch: s.value("batch", a.batch, base.batch)?,
        epochs: s.value("epochs", a.epochs, base.epochs)?,
    };
    s.finish("train")?;
    let corpus = read_corpus(&read_input(&corpus_path)?)?;
    let ane = load_ane(&ane_path)?;
    let model = train_neural(kind, &corpus, &ane, &config, seed, &mut |st, _| {
        eprintln!("epoch {} mean loss {:.6} ({} examples, {} skipped)", st.epoch, st.mean_loss, st.examples, st.skipped);
    })?;
    model.save(&out)?;
    eprintln!("wrote {} checkpoint to {}", kind.tag(), out.display());
    Ok(())
}

fn load_neural(s: &mut Settings, flag: Option<PathBuf>, kind: NeuralKind, beam: Option<usize>) -> Result<NeuralModel> {
    let path = s.required_input("checkpoint", flag)?;
    let beam = s.value("beam", beam, DEFAULT_BEAM_WIDTH)?;
    let mut model = NeuralModel::load(&path)?;
    if model.kind() != kind {
        return Err(CliError::Data(format!("{} holds a {} model, not {}", path.display(), model.kind().tag(), kind.tag())));
    }
    if beam == 0 {
        return Err(CliError::Data("beam must be at least 1".into()));
    }
    model.beam_width = beam;
    Ok(model)
}

fn rewrite(s: &mut Settings, a: RewriteArgs) -> Result<()> {
    let (lex, matrix) = load_resources(s, a.resources)?;
    let threshold = s.optional("threshold", a.threshold)?;
    let first = parse_utterance("first turn", &a.first)?;
    let followup = parse_utterance("follow-up turn", &a.followup)?;
    let (utterance, trace) = match a.engine {
        Engine::Rule => {
            let max_n = s.value("max_n", a.max_n, DEFAULT_MAX_N)?;
            s.finish("rewrite")?;
            let (utt, best) = rule_rewrite(&first, &followup, &lex, &matrix, max_n)?;
            let span = |u: &Utterance, (st, n): (usize, usize)| u.words()[st..st + n].iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" ");
            let trace = format!(
                "replace: \"{}\" -> \"{}\" (span distance {:.6})",
                span(&first, best.span1),
                span(&followup, best.span2),
                best.norm_dist
            );
            (utt, trace)
        }
        Engine::TwoStep | Engine::Ptr => {
            let kind = if a.engine == Engine::TwoStep { NeuralKind::TwoStep } else { NeuralKind::Pointer };
            let model = load_neural(s, a.checkpoint, kind, a.beam)?;
            s.finish("rewrite")?;
            let r = model.rewrite(&first, &followup)?;
            let mut trace = match &r.pointers {
                Some(p) => format!("pointers: {p}"),
                None => "pointers: (none)".to_string(),
            };
            if let Some(lp) = r.log_prob {
                trace.push_str(&format!(" (log prob {lp:.6})"));
            }
            if r.truncated {
                trace.push_str(" [truncated]");
            }
            if r.empty {
                trace.push_str(" [empty output, first turn kept]");
            }
            (r.utterance, trace)
        }
    };
    let distance = rewrite_distance(&first, &utterance, &lex, &matrix)?;
    println!("{utterance}");
    println!("{trace}");
    println!("distance: {distance:.6}");
    if let Some(t) = threshold {
        let d = decide(distance, t);
        println!("fire: {} (threshold {t})", d.fire);
    }
    Ok(())
}

fn parse_thresholds(text: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| CliError::Data(format!("threshold {v:?}: {e}"))))
        .collect::<Result<_>>()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Data("thresholds must be finite".into()));
    }
    Ok(values)
}

fn evaluate_cmd(s: &mut Settings, a: EvaluateArgs) -> Result<()> {
    let (lex, matrix) = load_resources(s, a.resources)?;
    let corpus_path = s.required_input("corpus", a.corpus)?;
    let thresholds = match s.optional("thresholds", a.thresholds)? {
        Some(t) => parse_thresholds(&t)?,
        None => default_thresholds(),
    };
    let out = output(s, a.out)?;
    let format = match s.value("format", a.format.map(format_name).map(String::from), "csv".to_string())?.as_str() {
        "csv" => CurveFormat::Csv,
        "json" => CurveFormat::Json,
        other => return Err(CliError::Data(format!("unknown format {other:?}"))),
    };
    let rewriter: Box<dyn Rewriter> = match a.engine {
        Engine::Rule => {
            let max_n = s.value("max_n", a.max_n, DEFAULT_MAX_N)?;
            Box::new(RuleRewriter { lexicon: lex.clone(), matrix: matrix.clone(), max_n })
        }
        Engine::TwoStep => Box::new(load_neural(s, a.checkpoint, NeuralKind::TwoStep, a.beam)?),
        Engine::Ptr => Box::new(load_neural(s, a.checkpoint, NeuralKind::Pointer, a.beam)?),
    };
    s.finish("evaluate")?;
    let corpus = read_corpus(&read_input(&corpus_path)?)?;
    let report = evaluate(&corpus, rewriter.as_ref(), &lex, &matrix, &thresholds)?;
    write_or_print(out.as_deref(), &emit_curve(&report, format)?)?;
    eprintln!("{}: max WERR {:.6} at FAR {:.6}", report.engine, report.max_werr, report.far_at_max_werr);
    Ok(())
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn default_matrix(s: &mut Settings, a: DefaultMatrixArgs) -> Result<()> {
    let out = output(s, a.out)?;
    s.finish("default-matrix")?;
    write_or_print(out.as_deref(), &ConfusionMatrix::default_matrix().to_csv())
}

fn grad_check(s: &mut Settings, a: GradCheckArgs) -> Result<()> {
    let instances = s.value("instances", a.instances, DEFAULT_GRAD_INSTANCES)?;
    let seed = s.value("seed", a.seed, DEFAULT_SEED)?;
    s.finish("grad-check")?;
    let checks = check_all(instances, seed);
    println!("component\tinstances\tchecked\tmax_rel_error\tstatus");
    for c in &checks {
        let status = if c.passed() { "ok" } else { "FAIL" };
        println!("{}\t{}\t{}\t{:.3e}\t{status}", c.component, c.instances, c.checked, c.max_rel_error);
    }
    if checks.iter().all(|c| c.passed()) {
        Ok(())
    } else {
        Err(CliError::Data(format!("gradient check exceeded tolerance {TOLERANCE:e}")))
    }
}
