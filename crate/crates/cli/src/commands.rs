use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use warnpath::corpus::{read_jsonl, write_jsonl, JsonlError};
use warnpath::encoder::{self, load_model, save_model, EncoderError, Model, TrainingLog};
use warnpath::extract::{extract_dir, ExtractOptions};
use warnpath::frontend::WarningReport;
use warnpath::generate::{generate, GenSpec, Template};
use warnpath::paths::PathBudget;
use warnpath::retrieval::{build_training_set, Bm25Params, RetrievalError, SelectionConfig};
use warnpath::stats::{compare, confusion, cross_validate, scott_knott_esd, CvConfig, MetricReport};
use warnpath::tokens::Vocabulary;
use warnpath::{Exec, Instance, Label};

use crate::{
    CrossvalArgs, EvaluateArgs, ExtractArgs, Failure, GenCorpusArgs, IdentifyArgs, SelectArgs, StatsArgs, TrainArgs,
};

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    let file = File::open(path).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    read_jsonl(BufReader::new(file)).map_err(|e| match e {
        JsonlError::Json { .. } => Failure::parse(format!("{}: {e}", path.display())),
        JsonlError::Io(_) => Failure::data(format!("{}: {e}", path.display())),
    })
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), Failure> {
    let io_err = |e: std::io::Error| Failure::data(format!("cannot write {}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    write(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Failure> {
    write_file(path, |w| write_jsonl(w, rows))
}

/// `path` with `suffix` appended to its file name.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

pub fn gen_corpus(a: GenCorpusArgs) -> Result<(), Failure> {
    let templates = if a.templates.is_empty() { Template::ALL.to_vec() } else { a.templates };
    let spec = GenSpec {
        pair_count: a.pairs,
        seed: a.seed,
        templates,
    };
    let corpus = generate(&spec).map_err(|e| Failure::usage(e.to_string()))?;
    corpus
        .write_to(&a.out)
        .map_err(|e| Failure::data(format!("cannot write {}: {e}", a.out.display())))?;
    eprintln!("wrote {} files and {} warnings to {}", corpus.files.len(), corpus.warnings.len(), a.out.display());
    Ok(())
}

pub fn extract(a: ExtractArgs, exec: Exec) -> Result<(), Failure> {
    if a.max_paths == 0 {
        return Err(Failure::usage("--max-paths must be at least 1"));
    }
    let reports: Vec<WarningReport> = read_rows(&a.warnings)?;
    let opts = ExtractOptions {
        budget: PathBudget {
            max_back_edge_uses: a.max_back_edges,
            max_paths: a.max_paths,
            ..PathBudget::default()
        },
        project: a.project,
        emit_cfg: a.emit_cfg.is_some(),
    };
    let out = extract_dir(&a.sources, &reports, &opts, exec);
    write_rows(&a.out, &out.instances)?;
    write_rows(&sidecar(&a.out, ".errors.jsonl"), &out.failures)?;
    if let Some(dir) = &a.emit_cfg {
        fs::create_dir_all(dir).map_err(|e| Failure::data(format!("cannot create {}: {e}", dir.display())))?;
        for d in &out.cfg_dumps {
            let name = format!("{}.{}.dot", d.file.replace(['/', '\\'], "_"), d.function);
            write_file(&dir.join(name), |w| w.write_all(d.dot.as_bytes()))?;
        }
    }
    eprintln!(
        "{} instances from {} warnings, {} failed",
        out.instances.len(),
        reports.len(),
        out.failures.len()
    );
    if out.total_parse_failure() {
        return Err(Failure::parse("no source file could be parsed"));
    }
    if out.instances.is_empty() {
        return Err(Failure::data("no instances produced"));
    }
    Ok(())
}

pub fn select(a: SelectArgs, exec: Exec) -> Result<(), Failure> {
    let params = Bm25Params { k1: a.k1, b: a.b };
    params.validate().map_err(|e| Failure::usage(e.to_string()))?;
    if a.n == 0 {
        return Err(Failure::usage("-n must be at least 1"));
    }
    let source: Vec<Instance> = read_rows(&a.source)?;
    let target: Vec<Instance> = read_rows(&a.target)?;
    let config = SelectionConfig {
        params,
        n: a.n,
        tie_label: a.tie,
    };
    let mut selected = build_training_set(&target, &source, &config, exec).map_err(|e| match e {
        RetrievalError::InvalidParams(_) => Failure::usage(e.to_string()),
        _ => Failure::data(e.to_string()),
    })?;
    selected.sort_by(|x, y| x.id.cmp(&y.id));
    write_rows(&a.out, &selected)?;
    eprintln!("selected {} of {} source instances for {} targets", selected.len(), source.len(), target.len());
    Ok(())
}

fn encoder_failure(e: EncoderError) -> Failure {
    match e {
        EncoderError::InvalidHyperparams(_) => Failure::usage(e.to_string()),
        _ => Failure::data(e.to_string()),
    }
}

fn log_json(log: &TrainingLog) -> serde_json::Value {
    serde_json::json!({
        "best_epoch": log.best_epoch,
        "best_val_accuracy": log.best_val_accuracy,
        "train_size": log.train_size,
        "val_size": log.val_size,
        "stopped_early": log.stopped_early,
        "epochs": log.epochs.iter().map(|e| serde_json::json!({
            "epoch": e.epoch,
            "train_loss": e.train_loss,
            "val_accuracy": e.val_accuracy,
        })).collect::<Vec<_>>(),
    })
}

pub fn train(a: TrainArgs, exec: Exec) -> Result<(), Failure> {
    let hp = a.model.hyperparams();
    hp.validate().map_err(encoder_failure)?;
    let corpus: Vec<Instance> = read_rows(&a.train)?;
    let vocab = Vocabulary::builtin();
    let (params, log) = encoder::train(&corpus, &vocab, &hp, exec).map_err(encoder_failure)?;
    let model = Model {
        hyperparams: hp,
        vocab_hash: vocab.hash(),
        params,
    };
    save_model(&a.out, &model).map_err(|e| Failure::data(format!("cannot write {}: {e}", a.out.display())))?;
    let log_text = serde_json::to_string_pretty(&log_json(&log)).expect("log serializes");
    write_file(&sidecar(&a.out, ".log.json"), |w| writeln!(w, "{log_text}"))?;
    eprintln!(
        "trained {} epochs{}, best epoch {} with validation accuracy {:.4}",
        log.epochs.len(),
        if log.stopped_early { " (stopped early)" } else { "" },
        log.best_epoch,
        log.best_val_accuracy
    );
    Ok(())
}

/// One row of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PredictionRow {
    id: String,
    p_clean: f64,
    p_buggy: f64,
    label: Label,
}

pub fn identify(a: IdentifyArgs, exec: Exec) -> Result<(), Failure> {
    let model = load_model(&a.model).map_err(|e| Failure::data(format!("{}: {e}", a.model.display())))?;
    let vocab = Vocabulary::builtin();
    model.check_vocab(&vocab).map_err(|e| Failure::data(e.to_string()))?;
    let mut targets: Vec<Instance> = read_rows(&a.target)?;
    targets.sort_by(|x, y| x.id.cmp(&y.id));
    let preds = encoder::predict_batch(&targets, &vocab, &model.params, &model.hyperparams, exec).map_err(encoder_failure)?;
    let rows: Vec<PredictionRow> = preds
        .into_iter()
        .map(|p| PredictionRow {
            id: p.instance_id,
            p_clean: p.probs.0,
            p_buggy: p.probs.1,
            label: p.label,
        })
        .collect();
    write_rows(&a.out, &rows)?;
    let buggy = rows.iter().filter(|r| r.label == Label::Buggy).count();
    eprintln!("{} predictions, {buggy} buggy", rows.len());
    Ok(())
}

fn unique_by_id<T>(rows: Vec<T>, id: impl Fn(&T) -> &str, what: &str) -> Result<BTreeMap<String, T>, Failure> {
    let mut out = BTreeMap::new();
    for r in rows {
        let key = id(&r).to_string();
        if out.contains_key(&key) {
            return Err(Failure::data(format!("duplicate id `{key}` in {what}")));
        }
        out.insert(key, r);
    }
    Ok(out)
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    let preds = unique_by_id(read_rows::<PredictionRow>(&a.predictions)?, |r| &r.id, "predictions")?;
    let labeled = unique_by_id(read_rows::<Instance>(&a.labeled)?, |r| &r.id, "labeled instances")?;
    if let Some(id) = preds.keys().find(|k| !labeled.contains_key(*k)) {
        return Err(Failure::data(format!("prediction `{id}` has no labeled instance")));
    }
    if let Some(id) = labeled.keys().find(|k| !preds.contains_key(*k)) {
        return Err(Failure::data(format!("instance `{id}` has no prediction")));
    }
    let mut predicted = Vec::with_capacity(labeled.len());
    let mut actual = Vec::with_capacity(labeled.len());
    for (id, inst) in &labeled {
        actual.push(inst.label.ok_or_else(|| Failure::data(format!("instance `{id}` is unlabeled")))?);
        predicted.push(preds[id].label);
    }
    let cm = confusion(&predicted, &actual).map_err(|e| Failure::data(e.to_string()))?;
    let text = serde_json::to_string_pretty(&MetricReport::new(cm)).expect("report serializes");
    match &a.out {
        Some(path) => write_file(path, |w| writeln!(w, "{text}")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ResultRow {
    method: String,
    target_project: String,
    repeat: usize,
    precision: f64,
    recall: f64,
}

struct Table {
    method: String,
    rows: BTreeMap<(String, usize), ResultRow>,
}

fn read_table(path: &Path) -> Result<Table, Failure> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = BTreeMap::new();
    let mut methods = BTreeSet::new();
    for r in reader.deserialize::<ResultRow>() {
        let r = r.map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
        methods.insert(r.method.clone());
        let key = (r.target_project.clone(), r.repeat);
        if rows.insert(key.clone(), r).is_some() {
            return Err(Failure::data(format!(
                "{}: duplicate row for project `{}` repeat {}",
                path.display(),
                key.0,
                key.1
            )));
        }
    }
    if methods.len() != 1 {
        return Err(Failure::data(format!(
            "{}: expected rows of exactly one method, found {}",
            path.display(),
            methods.len()
        )));
    }
    Ok(Table {
        method: methods.into_iter().next().expect("one method"),
        rows,
    })
}

pub fn stats(a: StatsArgs) -> Result<(), Failure> {
    let ta = read_table(&a.table_a)?;
    let tb = read_table(&a.table_b)?;
    if let Some((p, r)) = ta.rows.keys().find(|k| !tb.rows.contains_key(*k)) {
        return Err(Failure::data(format!("table B lacks project `{p}` repeat {r}")));
    }
    if let Some((p, r)) = tb.rows.keys().find(|k| !ta.rows.contains_key(*k)) {
        return Err(Failure::data(format!("table A lacks project `{p}` repeat {r}")));
    }
    let name_a = format!("{} (A)", ta.method);
    let name_b = format!("{} (B)", tb.method);
    let mut text = format!("A = {}, B = {}, {} paired rows\n\n", ta.method, tb.method, ta.rows.len());
    text.push_str(&format!("{:<10} {:>10} {:>10} {:>8}\n", "metric", "p_value", "d", "category"));
    let metrics: [(&str, fn(&ResultRow) -> f64); 2] = [("precision", |r| r.precision), ("recall", |r| r.recall)];
    let mut groupings = String::new();
    for (name, get) in metrics {
        let xa: Vec<f64> = ta.rows.values().map(get).collect();
        let xb: Vec<f64> = tb.rows.values().map(get).collect();
        let t = compare(&xa, &xb).map_err(|e| Failure::data(format!("{name}: {e}")))?;
        text.push_str(&format!("{name:<10} {:>10.6} {:>10.6} {:>8}\n", t.p_value, t.d, t.category.letter()));
        let sk = scott_knott_esd(&[(name_a.clone(), xa), (name_b.clone(), xb)]);
        let groups: Vec<String> = sk
            .groups
            .iter()
            .enumerate()
            .map(|(i, g)| format!("[{}] {}", i + 1, g.join(", ")))
            .collect();
        groupings.push_str(&format!("scott-knott {name}: {}\n", groups.join(" ")));
    }
    text.push('\n');
    text.push_str(&groupings);
    match &a.out {
        Some(path) => write_file(path, |w| w.write_all(text.as_bytes())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn crossval(a: CrossvalArgs, exec: Exec) -> Result<(), Failure> {
    let hp = a.model.hyperparams();
    hp.validate().map_err(encoder_failure)?;
    if a.folds < 2 || a.repeats == 0 {
        return Err(Failure::usage("need --folds ≥ 2 and --repeats ≥ 1"));
    }
    let mut corpus: Vec<Instance> = read_rows(&a.corpus)?;
    corpus.sort_by(|x, y| x.id.cmp(&y.id));
    let projects: BTreeSet<&str> = corpus.iter().map(|i| i.project.as_str()).collect();
    let target_project = projects.into_iter().collect::<Vec<_>>().join("+");
    let vocab = Vocabulary::builtin();
    let config = CvConfig {
        folds: a.folds,
        repeats: a.repeats,
        seed: a.model.seed,
    };
    let reports = cross_validate(&corpus, &config, exec, |train, test, seed| {
        let hp = encoder::Hyperparams { seed, ..hp.clone() };
        let (params, _) = encoder::train(train, &vocab, &hp, exec).map_err(|e| e.to_string())?;
        let preds = encoder::predict_batch(test, &vocab, &params, &hp, exec).map_err(|e| e.to_string())?;
        Ok(preds.into_iter().map(|p| p.label).collect())
    })
    .map_err(|e| Failure::data(e.to_string()))?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in &reports {
        writer
            .serialize(ResultRow {
                method: a.method.clone(),
                target_project: target_project.clone(),
                repeat: r.repeat * a.folds + r.fold,
                precision: r.report.precision,
                recall: r.report.recall,
            })
            .map_err(|e| Failure::data(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Failure::data(e.to_string()))?;
    write_file(&a.out, |w| w.write_all(&bytes))?;
    let mean = |f: fn(&MetricReport) -> f64| reports.iter().map(|r| f(&r.report)).sum::<f64>() / reports.len() as f64;
    eprintln!(
        "{} folds: mean precision {:.4}, mean recall {:.4}",
        reports.len(),
        mean(|m| m.precision),
        mean(|m| m.recall)
    );
    Ok(())
}
