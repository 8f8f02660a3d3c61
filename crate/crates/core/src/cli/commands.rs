use std::fs::{self, File};
use std::io::{BufReader, BufWriter, ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde_json::{json, Value};

use super::{CliError, RunConfig};
use crate::corpus::{corpus_stats, parse_conllu_deps, read_conll, ConllMode, Corpus, TagSet};
use crate::embedio::{load_glove, read_ctxe, validate_ctxe_against_corpus, ContextualFile, WordVectors};
use crate::fusion::{
    ablation_run, evaluate, format_ablation, predict as predict_one, prepare_inputs, read_fuse, token_accuracy,
    train_joint, write_fuse, AblationInputs, JointModel, Mode,
};
use crate::metrics::{format_report, report_record};

fn open(path: &Path, what: &str) -> Result<File, CliError> {
    File::open(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => CliError::Config(format!("{what} not found: {}", path.display())),
        _ => CliError::Data(format!("cannot read {what} {}: {e}", path.display())),
    })
}

fn read_text(path: &Path, what: &str) -> Result<String, CliError> {
    let mut text = String::new();
    std::io::Read::read_to_string(&mut open(path, what)?, &mut text)
        .map_err(|e| CliError::Data(format!("{what} {}: {e}", path.display())))?;
    Ok(text)
}

fn require<'a>(path: &'a Option<PathBuf>, key: &str, why: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("{why} needs `{key}` to be set")))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn base_report(command: &str, cfg: &RunConfig) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    m
}

/// One corpus file plus the side inputs `mode` needs for it.
struct Split {
    corpus: Corpus,
    ctx: Option<ContextualFile>,
}

struct SplitPaths<'a> {
    name: &'a str,
    conll: &'a Option<PathBuf>,
    deps: &'a Option<PathBuf>,
    ctxe: &'a Option<PathBuf>,
}

fn train_paths(cfg: &RunConfig) -> SplitPaths<'_> {
    SplitPaths {
        name: "train",
        conll: &cfg.train,
        deps: &cfg.train_deps,
        ctxe: &cfg.train_ctxe,
    }
}

fn test_paths(cfg: &RunConfig) -> SplitPaths<'_> {
    SplitPaths {
        name: "test",
        conll: &cfg.test,
        deps: &cfg.test_deps,
        ctxe: &cfg.test_ctxe,
    }
}

fn input_paths(cfg: &RunConfig) -> SplitPaths<'_> {
    SplitPaths {
        name: "input",
        conll: &cfg.input,
        deps: &cfg.input_deps,
        ctxe: &cfg.input_ctxe,
    }
}

fn load_split(cfg: &RunConfig, p: &SplitPaths<'_>, mode: Mode, conll_mode: ConllMode) -> Result<Split, CliError> {
    let why = format!("mode {mode}");
    let conll = require(p.conll, p.name, &why)?;
    // Check every path the mode needs before parsing anything.
    let deps = mode
        .uses_global()
        .then(|| require(p.deps, &format!("{}_deps", p.name), &why))
        .transpose()?;
    let ctxe = mode
        .uses_contextual()
        .then(|| require(p.ctxe, &format!("{}_ctxe", p.name), &why))
        .transpose()?;
    let tagset = TagSet::conll2003(cfg.scheme);
    let mut corpus = read_conll(open(conll, p.name)?, &tagset, conll_mode)
        .map_err(|e| CliError::Data(format!("{}: {e}", conll.display())))?;
    if let Some(path) = deps {
        let arcs = parse_conllu_deps(&read_text(path, "dependency file")?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        corpus = corpus
            .with_deps(arcs)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    let ctx = match ctxe {
        Some(path) => Some(
            read_ctxe(&mut BufReader::new(open(path, "contextual file")?))
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    Ok(Split { corpus, ctx })
}

fn load_vectors(cfg: &RunConfig, mode: Mode) -> Result<Option<WordVectors>, CliError> {
    if !mode.uses_global() {
        return Ok(None);
    }
    let path = require(&cfg.glove, "glove", &format!("mode {mode}"))?;
    let wv = load_glove(BufReader::new(open(path, "GloVe file")?), None)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(Some(wv))
}

fn load_model(cfg: &RunConfig) -> Result<JointModel, CliError> {
    let path = cfg.model_path();
    let model = read_fuse(&mut BufReader::new(open(&path, "model file")?))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(model)
}

/// Input widths must match the ones the model was trained with.
fn check_dims(model: &JointModel, wv: Option<&WordVectors>, ctx: Option<&ContextualFile>) -> Result<(), CliError> {
    if let (Some(gcn), Some(wv)) = (model.gcn(), wv) {
        if gcn.input_dim() != wv.dim() {
            return Err(CliError::Data(format!(
                "model expects {}-d word vectors, GloVe file has {}",
                gcn.input_dim(),
                wv.dim()
            )));
        }
    }
    if let (true, Some(ctx)) = (model.mode().uses_contextual(), ctx) {
        if model.ctx_dim() != ctx.ctx_dim {
            return Err(CliError::Data(format!(
                "model expects {}-d contextual vectors, file has {}",
                model.ctx_dim(),
                ctx.ctx_dim
            )));
        }
    }
    Ok(())
}

pub fn train(cfg: RunConfig) -> Result<(), CliError> {
    cfg.check()?;
    let start = Instant::now();
    let split = load_split(&cfg, &train_paths(&cfg), cfg.mode, ConllMode::Tagged)?;
    let wv = load_vectors(&cfg, cfg.mode)?;
    if split.corpus.is_empty() {
        return Err(CliError::Data("training corpus has no sentences".into()));
    }
    let outcome = train_joint(
        &split.corpus,
        wv.as_ref(),
        split.ctx.as_ref(),
        &cfg.gcn_config(),
        &cfg.train_config(),
    )?;
    let inputs = prepare_inputs(&split.corpus, wv.as_ref(), split.ctx.as_ref(), cfg.mode)?;
    let accuracy = token_accuracy(&outcome.model, &inputs, split.corpus.tagset())?;

    let model_path = cfg.model_path();
    let mut bytes = Vec::new();
    write_fuse(&outcome.model, &mut bytes)?;
    write_file(&model_path, &bytes)?;

    let mut report = base_report("train", &cfg);
    report.insert("mode".into(), json!(cfg.mode));
    report.insert("seed".into(), json!(cfg.seed));
    report.insert("model".into(), json!(model_path));
    report.insert("losses".into(), json!(outcome.losses));
    report.insert("train_token_accuracy".into(), json!(accuracy));
    write_json(&cfg.out.join("report.json"), &Value::Object(report))?;
    // Kept apart from report.json so reruns produce identical reports.
    let wall = start.elapsed().as_secs_f64();
    write_json(&cfg.out.join("timing.json"), &json!({ "wall_seconds": wall }))?;

    println!("mode      {}", cfg.mode);
    println!("epochs    {}", outcome.losses.len());
    if let Some(loss) = outcome.losses.last() {
        println!("loss      {loss:.6}");
    }
    println!("accuracy  {:.4}", accuracy);
    println!("model     {}", model_path.display());
    info!("training took {wall:.2}s");
    Ok(())
}

pub fn eval(mut cfg: RunConfig) -> Result<(), CliError> {
    let model = load_model(&cfg)?;
    cfg.mode = model.mode();
    let split = load_split(&cfg, &test_paths(&cfg), cfg.mode, ConllMode::Tagged)?;
    if split.corpus.is_empty() {
        return Err(CliError::Data("test corpus has no sentences".into()));
    }
    let wv = load_vectors(&cfg, cfg.mode)?;
    check_dims(&model, wv.as_ref(), split.ctx.as_ref())?;
    let inputs = prepare_inputs(&split.corpus, wv.as_ref(), split.ctx.as_ref(), cfg.mode)?;
    let report = evaluate(&model, &inputs, split.corpus.tagset())?;

    let text = format_report(&report);
    let mut record = base_report("eval", &cfg);
    record.insert("mode".into(), json!(cfg.mode));
    if let Value::Object(scores) = report_record(&report) {
        record.extend(scores);
    }
    write_json(&cfg.out.join("report.json"), &Value::Object(record))?;
    write_file(&cfg.out.join("report.txt"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

/// Append one column to each token line of `text`, leaving blank and
/// `-DOCSTART-` lines, and line endings, untouched.
fn append_column(text: &str, tags: &[String]) -> Result<String, CliError> {
    let mut out = String::with_capacity(text.len() + tags.len() * 8);
    let mut next = tags.iter();
    for (i, raw) in text.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let (line, cr) = match raw.strip_suffix('\r') {
            Some(l) => (l, "\r"),
            None => (raw, ""),
        };
        let is_token = !line.trim().is_empty() && line.split_whitespace().next() != Some("-DOCSTART-");
        out.push_str(line);
        if is_token {
            let tag = next
                .next()
                .ok_or_else(|| CliError::Data("more token lines than predictions".into()))?;
            out.push(' ');
            out.push_str(tag);
        }
        out.push_str(cr);
    }
    if next.next().is_some() {
        return Err(CliError::Data("fewer token lines than predictions".into()));
    }
    Ok(out)
}

pub fn predict(mut cfg: RunConfig) -> Result<(), CliError> {
    let model = load_model(&cfg)?;
    cfg.mode = model.mode();
    let input = require(&cfg.input, "input", "predict")?.to_path_buf();
    let text = read_text(&input, "input")?;
    let split = load_split(&cfg, &input_paths(&cfg), cfg.mode, ConllMode::Untagged)?;
    let wv = load_vectors(&cfg, cfg.mode)?;
    check_dims(&model, wv.as_ref(), split.ctx.as_ref())?;
    let inputs = prepare_inputs(&split.corpus, wv.as_ref(), split.ctx.as_ref(), cfg.mode)?;
    let tagset = split.corpus.tagset();
    let mut tags = Vec::new();
    for inp in &inputs {
        tags.extend(predict_one(&model, inp, tagset)?.tags.iter().map(ToString::to_string));
    }
    let tagged = append_column(&text, &tags)?;
    let out_path = cfg.out.join("predictions.conll");
    write_file(&out_path, tagged.as_bytes())?;

    let mut report = base_report("predict", &cfg);
    report.insert("mode".into(), json!(cfg.mode));
    report.insert("sentences".into(), json!(inputs.len()));
    report.insert("tokens".into(), json!(tags.len()));
    report.insert("predictions".into(), json!(out_path));
    write_json(&cfg.out.join("report.json"), &Value::Object(report))?;
    println!("{}", out_path.display());
    Ok(())
}

pub fn validate(cfg: RunConfig) -> Result<(), CliError> {
    let mut problems: Vec<String> = Vec::new();
    let mut checked = Vec::new();
    let mut splits = vec![train_paths(&cfg)];
    if cfg.test.is_some() {
        splits.push(test_paths(&cfg));
    }
    for paths in &splits {
        match load_split(&cfg, paths, cfg.mode, ConllMode::Tagged) {
            Ok(split) => {
                if let Some(ctx) = &split.ctx {
                    let report = validate_ctxe_against_corpus(ctx, &split.corpus);
                    if !report.is_ok() {
                        problems.push(format!("{}: {report}", paths.name).trim_end().to_string());
                    }
                }
                checked.push(json!({ "split": paths.name, "sentences": split.corpus.len() }));
            }
            Err(CliError::Data(msg)) => problems.push(msg),
            Err(e) => return Err(e),
        }
    }
    if let Err(e) = load_vectors(&cfg, cfg.mode) {
        match e {
            CliError::Data(msg) => problems.push(msg),
            other => return Err(other),
        }
    }
    let mut report = base_report("validate", &cfg);
    report.insert("ok".into(), json!(problems.is_empty()));
    report.insert("checked".into(), json!(checked));
    report.insert("violations".into(), json!(problems));
    write_json(&cfg.out.join("report.json"), &Value::Object(report))?;
    if problems.is_empty() {
        println!("ok");
        Ok(())
    } else {
        Err(CliError::Data(problems.join("\n")))
    }
}

pub fn stats(cfg: RunConfig) -> Result<(), CliError> {
    let conll = require(&cfg.train, "train", "stats")?;
    let tagset = TagSet::conll2003(cfg.scheme);
    let mut corpus = read_conll(open(conll, "train")?, &tagset, ConllMode::Tagged)
        .map_err(|e| CliError::Data(format!("{}: {e}", conll.display())))?;
    if let Some(path) = &cfg.train_deps {
        let arcs = parse_conllu_deps(&read_text(path, "dependency file")?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        corpus = corpus
            .with_deps(arcs)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    let stats = serde_json::to_value(corpus_stats(&corpus)).expect("stats serialize");
    let mut report = base_report("stats", &cfg);
    report.insert("stats".into(), stats.clone());
    write_json(&cfg.out.join("report.json"), &Value::Object(report))?;
    let mut stdout = BufWriter::new(std::io::stdout());
    let _ = writeln!(
        stdout,
        "{}",
        serde_json::to_string_pretty(&stats).expect("stats serialize")
    );
    Ok(())
}

pub fn ablate(cfg: RunConfig) -> Result<(), CliError> {
    cfg.check()?;
    let train = load_split(&cfg, &train_paths(&cfg), Mode::Joint, ConllMode::Tagged)?;
    let test = load_split(&cfg, &test_paths(&cfg), Mode::Joint, ConllMode::Tagged)?;
    if test.corpus.is_empty() {
        return Err(CliError::Data("test corpus has no sentences".into()));
    }
    let wv = load_vectors(&cfg, Mode::Joint)?.expect("joint mode loads vectors");
    let (ctx_train, ctx_test) = (
        train.ctx.as_ref().expect("joint mode loads contextual vectors"),
        test.ctx.as_ref().expect("joint mode loads contextual vectors"),
    );
    let inputs = AblationInputs {
        train: &train.corpus,
        test: &test.corpus,
        wv: &wv,
        ctx_train,
        ctx_test,
    };
    let result = ablation_run(&inputs, &cfg.gcn_config(), &cfg.train_config())?;
    let table = format_ablation(result.f1());

    let mut report = base_report("ablate", &cfg);
    let mut runs = serde_json::Map::new();
    for mode in Mode::ALL {
        runs.insert(mode.as_str().into(), report_record(result.get(mode)));
    }
    report.insert("runs".into(), Value::Object(runs));
    write_json(&cfg.out.join("report.json"), &Value::Object(report))?;
    write_file(&cfg.out.join("report.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}
