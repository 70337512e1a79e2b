//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use warnpath::cfg::build_cfg;
use warnpath::corpus::read_jsonl;
use warnpath::encoder::matrix::Matrix;
use warnpath::encoder::{attention_weights, forward, gradient_check, layer_norm, predict_batch, train, EncoderParameters, Hyperparams};
use warnpath::extract::{extract_source, ExtractOptions};
use warnpath::fixtures::{FIG1_FILE, FIG1_SOURCE, FIG1_WARNINGS};
use warnpath::frontend::{parse_source, WarningReport};
use warnpath::generate::{generate, GenSpec, GeneratedCorpus};
use warnpath::paths::{generate_path, PathBudget};
use warnpath::retrieval::{bm25_score, corpus_stats, Bm25Index, Bm25Params};
use warnpath::stats::{
    cohens_d, confusion, precision, recall, scott_knott_esd, wilcoxon_signed_rank, ConfusionMatrix, EffectCategory,
};
use warnpath::tokens::{to_model_input, InputSequence, Truncate, Vocabulary, CLS_ID, SEP_ID};
use warnpath::{Exec, Instance, Label};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const FIG5: [&str; 13] = [
    "VariableDeclarator",
    "StructType",
    "Pointer",
    "VariableIP",
    "Null",
    "IfSelection",
    "VariableIP",
    "NotEqual",
    "Null",
    "InclusiveAnd",
    "VariableIP",
    "Equal",
    "Constant",
];

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn fig1_instances() -> Vec<Instance> {
    let reports: Vec<WarningReport> = read_jsonl(FIG1_WARNINGS.as_bytes()).expect("fixture reports");
    let refs: Vec<&WarningReport> = reports.iter().collect();
    extract_source(FIG1_FILE, FIG1_SOURCE, &refs, &ExtractOptions::default()).instances
}

fn golden_tokenization() -> Check {
    let inst = fig1_instances();
    ensure!(inst.len() == 2, "{} instances", inst.len());
    let (bad, good) = (&inst[0], &inst[1]);
    ensure!(bad.tokens == FIG5, "bad tokens {:?}", bad.tokens);
    let mut expected_good = FIG5.map(str::to_string);
    expected_good[9] = "LogicalAnd".into();
    ensure!(good.tokens == expected_good, "good tokens {:?}", good.tokens);
    let vocab = Vocabulary::builtin();
    for i in [bad, good] {
        let input = to_model_input(&i.tokens, &vocab, 512, Truncate::Tail);
        ensure!(input.len() == 15 && input.real_len() == 15, "input length {}", input.len());
        ensure!(input.ids[0] == CLS_ID && input.ids[14] == SEP_ID, "ids {:?}", input.ids);
        for (k, t) in i.tokens.iter().enumerate() {
            ensure!(vocab.spelling(input.ids[k + 1]) == Some(t.as_str()), "position {} is not {t}", k + 1);
        }
    }
    Ok("13 content tokens, 15 positions, single diff at index 9".into())
}

fn path_golden() -> Check {
    let tree = parse_source(FIG1_FILE, FIG1_SOURCE).map_err(|e| e.to_string())?;
    let cfg = build_cfg(tree.function("bad").ok_or("no `bad`")?).map_err(|e| e.to_string())?;
    let call = cfg.nodes.iter().find(|n| n.line == 5).ok_or("no node on line 5")?;
    let path = generate_path(&cfg, call.id, &PathBudget::default()).map_err(|e| e.to_string())?;
    let lines: Vec<u32> = path.node_ids.iter().map(|&n| cfg.node(n).line).collect();
    ensure!(lines == [3, 4, 5], "path lines {lines:?}");
    Ok(format!("lines {lines:?}"))
}

/// Direct transcription of the scoring formula.
fn bm25_oracle(query: &[String], doc: &[String], corpus: &[Vec<String>], k1: f64, b: f64) -> f64 {
    let n = corpus.len() as f64;
    let avgdl = corpus.iter().map(|d| d.len() as f64).sum::<f64>() / n;
    let mut score = 0.0;
    for q in query {
        let df = corpus.iter().filter(|d| d.contains(q)).count() as f64;
        let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
        let f = doc.iter().filter(|t| *t == q).count() as f64;
        score += idf * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * doc.len() as f64 / avgdl));
    }
    score
}

fn random_doc(rng: &mut ChaCha8Rng, vocab: usize, max_len: usize) -> Vec<String> {
    let len = rng.gen_range(1..=max_len);
    (0..len).map(|_| format!("t{}", rng.gen_range(0..vocab))).collect()
}

fn bm25_equivalence() -> Check {
    let s = corpus_stats(&[toks("A B"), toks("A C")]).map_err(|e| e.to_string())?;
    let hand = bm25_score(&toks("B"), &toks("A B"), &s, &Bm25Params::default());
    ensure!((hand - 2f64.ln()).abs() <= 1e-12, "score([B],[A,B]) = {hand}");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0f64;
    for _ in 0..1000 {
        let vocab = rng.gen_range(1..=10);
        let corpus: Vec<Vec<String>> = (0..rng.gen_range(1..=20)).map(|_| random_doc(&mut rng, vocab, 8)).collect();
        let query = random_doc(&mut rng, vocab + 2, 8);
        let params = Bm25Params {
            k1: rng.gen_range(0.0..3.0),
            b: rng.gen_range(0.0..=1.0),
        };
        let stats = corpus_stats(&corpus).map_err(|e| e.to_string())?;
        for doc in &corpus {
            let got = bm25_score(&query, doc, &stats, &params);
            let want = bm25_oracle(&query, doc, &corpus, params.k1, params.b);
            worst = worst.max((got - want).abs());
        }
    }
    ensure!(worst <= 1e-9, "max deviation {worst:e}");
    Ok(format!("1000 cases, max deviation {worst:.1e}; hand case = ln 2"))
}

fn selection_property() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..500 {
        let vocab = rng.gen_range(1..=6);
        let corpus: Vec<Instance> = (0..rng.gen_range(1..=25))
            .map(|i| Instance {
                id: format!("s{i:02}"),
                project: "p".into(),
                label: Some(if rng.gen_bool(0.5) { Label::Buggy } else { Label::Clean }),
                tokens: random_doc(&mut rng, vocab, 6),
            })
            .collect();
        let query = random_doc(&mut rng, vocab, 6);
        let n = rng.gen_range(1..=5);
        let tie = if rng.gen_bool(0.5) { Label::Buggy } else { Label::Clean };
        let index = Bm25Index::new(&corpus, Bm25Params::default()).map_err(|e| e.to_string())?;
        let sel = index.select("t", &query, n, tie).map_err(|e| e.to_string())?;

        // Brute force: full sort, vote over the first 2n+1, keep the best n of the winner.
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        let scores: Vec<f64> = order.iter().map(|&i| index.score(&query, i)).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(corpus[a].id.cmp(&corpus[b].id)));
        let window = &order[..order.len().min(2 * n + 1)];
        let buggy = window.iter().filter(|&&i| corpus[i].label == Some(Label::Buggy)).count();
        let clean = window.len() - buggy;
        let majority = if buggy > clean {
            Label::Buggy
        } else if clean > buggy {
            Label::Clean
        } else {
            tie
        };
        let expected: Vec<&str> = order
            .iter()
            .filter(|&&i| corpus[i].label == Some(majority))
            .take(n)
            .map(|&i| corpus[i].id.as_str())
            .collect();
        ensure!(sel.majority_label == majority, "case {case}: majority {:?}, expected {majority:?}", sel.majority_label);
        ensure!(sel.chosen_ids() == expected, "case {case}: chose {:?}, expected {expected:?}", sel.chosen_ids());
        ensure!(sel.chosen.len() <= n, "case {case}: {} chosen for n = {n}", sel.chosen.len());
        ensure!(sel.chosen.iter().all(|c| c.label == majority), "case {case}: mixed labels");
    }
    Ok("500 corpora homogeneous and equal to brute force".into())
}

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect())
}

fn attention_layer_norm_numerics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_sum = 0f64;
    for _ in 0..200 {
        let (len, dk) = (rng.gen_range(1..=12), rng.gen_range(1..=16));
        let q = rand_matrix(&mut rng, len, dk, 3.0);
        let k = rand_matrix(&mut rng, len, dk, 3.0);
        let mut mask: Vec<u8> = (0..len).map(|_| rng.gen_range(0..=1)).collect();
        mask[rng.gen_range(0..len)] = 1;
        let w = attention_weights(&q, &k, &mask).map_err(|e| e.to_string())?;
        for r in 0..len {
            worst_sum = worst_sum.max((w.row(r).iter().sum::<f64>() - 1.0).abs());
            for (c, &m) in mask.iter().enumerate() {
                ensure!(m == 1 || w[(r, c)] == 0.0, "masked key {c} has weight {}", w[(r, c)]);
            }
        }
    }
    ensure!(worst_sum <= 1e-6, "row sum off by {worst_sum:e}");

    let (mut worst_mean, mut worst_var) = (0f64, 0f64);
    for _ in 0..200 {
        let d = rng.gen_range(8..=64);
        let x = rand_matrix(&mut rng, 6, d, 20.0);
        let (_, normed, _) = layer_norm(&x, &vec![1.0; d], &vec![0.0; d], 1e-5);
        for r in 0..6 {
            let row = normed.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            worst_mean = worst_mean.max(mean.abs());
            worst_var = worst_var.max((var - 1.0).abs());
        }
    }
    ensure!(worst_mean < 1e-9, "|mean| {worst_mean:e}");
    ensure!(worst_var <= 1e-6, "variance off by {worst_var:e}");

    let mut worst_pad = 0f64;
    for seed in 0..20 {
        let hp = Hyperparams {
            num_layers: 2,
            d_model: 16,
            num_heads: 4,
            d_ff: 32,
            max_len: 32,
            ..Hyperparams::default()
        };
        let params = EncoderParameters::init(20, &hp, &mut ChaCha8Rng::seed_from_u64(seed), 0.5);
        let ids: Vec<u32> = (0..rng.gen_range(2..=16)).map(|_| rng.gen_range(0..20)).collect();
        let mut input = InputSequence {
            mask: vec![1; ids.len()],
            segment: vec![0; ids.len()],
            ids,
        };
        let a = forward(&input, &params, &hp).map_err(|e| e.to_string())?;
        input.pad_to(rng.gen_range(input.len() + 1..=32));
        let b = forward(&input, &params, &hp).map_err(|e| e.to_string())?;
        worst_pad = worst_pad.max((a.0 - b.0).abs()).max((a.1 - b.1).abs());
    }
    ensure!(worst_pad <= 1e-9, "padding changed output by {worst_pad:e}");
    Ok(format!(
        "row sums {worst_sum:.1e}, LN mean {worst_mean:.1e}, LN var {worst_var:.1e}, padding {worst_pad:.1e}"
    ))
}

fn gradient_check_tiny_models() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0f64;
    for m in 0..20 {
        let heads = *[1, 2, 4].choose(&mut rng).expect("heads");
        let d_model = heads * rng.gen_range(1..=16 / heads);
        let hp = Hyperparams {
            num_layers: rng.gen_range(1..=2),
            d_model,
            num_heads: heads,
            d_ff: rng.gen_range(2..=16),
            max_len: 8,
            ..Hyperparams::default()
        };
        let vocab = 12;
        let params = EncoderParameters::init(vocab, &hp, &mut ChaCha8Rng::seed_from_u64(100 + m), 0.5);
        let batch: Vec<(InputSequence, Label)> = (0..rng.gen_range(1..=3))
            .map(|_| {
                let real = rng.gen_range(2..=8);
                let mut ids = vec![CLS_ID];
                ids.extend((2..real).map(|_| rng.gen_range(4..vocab as u32)));
                ids.push(SEP_ID);
                let mut input = InputSequence {
                    mask: vec![1; ids.len()],
                    segment: vec![0; ids.len()],
                    ids,
                };
                input.pad_to(8);
                (input, if rng.gen_bool(0.5) { Label::Buggy } else { Label::Clean })
            })
            .collect();
        worst = worst.max(gradient_check(&params, &batch, &hp));
    }
    ensure!(worst < 1e-4, "max relative error {worst:e}");
    Ok(format!("20 models, max relative error {worst:.2e}"))
}

fn extract_corpus(corpus: &GeneratedCorpus, project: &str) -> Result<Vec<Instance>, String> {
    let opts = ExtractOptions {
        project: project.into(),
        ..ExtractOptions::default()
    };
    let mut out = Vec::new();
    for f in &corpus.files {
        let reports: Vec<&WarningReport> = corpus.warnings.iter().filter(|w| w.file == f.name).collect();
        let x = extract_source(&f.name, &f.source, &reports, &opts);
        ensure!(x.failures.is_empty(), "extraction failed: {:?}", x.failures);
        out.extend(x.instances);
    }
    Ok(out)
}

fn end_to_end_learning() -> Check {
    let train_set = extract_corpus(&generate(&GenSpec::new(200, 7)).map_err(|e| e.to_string())?, "train")?;
    let held_out = extract_corpus(&generate(&GenSpec::new(200, 1007)).map_err(|e| e.to_string())?, "held-out")?;
    ensure!(train_set.len() == 400 && held_out.len() == 400, "corpus sizes {} / {}", train_set.len(), held_out.len());
    let vocab = Vocabulary::builtin();
    let hp = Hyperparams::default();
    ensure!(
        hp.num_layers == 2 && hp.d_model == 64 && hp.batch_size == 16 && hp.max_epochs == 15 && hp.patience == 5,
        "unexpected default hyperparameters"
    );
    let (params, log) = train(&train_set, &vocab, &hp, Exec::default()).map_err(|e| e.to_string())?;
    let preds = predict_batch(&held_out, &vocab, &params, &hp, Exec::default()).map_err(|e| e.to_string())?;
    let predicted: Vec<Label> = preds.iter().map(|p| p.label).collect();
    let actual: Vec<Label> = held_out.iter().map(|i| i.label.expect("labeled")).collect();
    let cm = confusion(&predicted, &actual).map_err(|e| e.to_string())?;
    let accuracy = (cm.n_bb + cm.n_cc) as f64 / cm.total() as f64;
    let (p, r) = (precision(&cm), recall(&cm));
    ensure!(accuracy >= 0.95, "held-out accuracy {accuracy:.4}");
    ensure!(p >= 0.90 && r >= 0.90, "precision {p:.4}, recall {r:.4}");
    Ok(format!(
        "{} epochs (best {}), held-out accuracy {accuracy:.4}, precision {p:.4}, recall {r:.4}",
        log.epochs.len(),
        log.best_epoch
    ))
}

fn metrics_exactness() -> Check {
    let mut checked = 0;
    for n_bb in 0..=4 {
        for n_bc in 0..=4 {
            for n_cb in 0..=4 {
                for n_cc in 0..=4 {
                    let mut predicted = Vec::new();
                    let mut actual = Vec::new();
                    for (count, a, p) in [
                        (n_bb, Label::Buggy, Label::Buggy),
                        (n_bc, Label::Buggy, Label::Clean),
                        (n_cb, Label::Clean, Label::Buggy),
                        (n_cc, Label::Clean, Label::Clean),
                    ] {
                        actual.extend(std::iter::repeat(a).take(count));
                        predicted.extend(std::iter::repeat(p).take(count));
                    }
                    let cm = confusion(&predicted, &actual).map_err(|e| e.to_string())?;
                    ensure!(cm == ConfusionMatrix { n_bb, n_bc, n_cb, n_cc }, "confusion {cm:?}");
                    let want_p = if n_cc + n_bc == 0 { 0.0 } else { n_cc as f64 / (n_cc + n_bc) as f64 };
                    let want_r = if n_cc + n_cb == 0 { 0.0 } else { n_cc as f64 / (n_cc + n_cb) as f64 };
                    ensure!(precision(&cm) == want_p && recall(&cm) == want_r, "metrics for {cm:?}");
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} matrices"))
}

/// Two-sided p by listing every sign assignment of the ranks.
fn wilcoxon_enumeration(a: &[f64], b: &[f64]) -> f64 {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return 1.0;
    }
    let n = diffs.len();
    // Average ranks of |d|, doubled so they stay integral.
    let ranks2: Vec<u64> = diffs
        .iter()
        .map(|d| {
            let less = diffs.iter().filter(|e| e.abs() < d.abs()).count() as u64;
            let equal = diffs.iter().filter(|e| e.abs() == d.abs()).count() as u64;
            2 * less + equal + 1
        })
        .collect();
    let observed: u64 = diffs.iter().zip(&ranks2).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..1 << n {
        let w: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks2[i]).sum();
        le += (w <= observed) as u64;
        ge += (w >= observed) as u64;
    }
    (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
}

fn wilcoxon_exactness() -> Check {
    let p5 = wilcoxon_signed_rank(&[2.0, 3.0, 4.0, 5.0, 6.0], &[1.0; 5]).map_err(|e| e.to_string())?;
    ensure!(p5 == 0.0625, "all-positive n=5 gives {p5}");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..300 {
        let n = rng.gen_range(1..=10);
        // Small integer grid so ties and zero differences occur.
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
        let p = wilcoxon_signed_rank(&a, &b).map_err(|e| e.to_string())?;
        let want = wilcoxon_enumeration(&a, &b);
        ensure!(p == want, "case {case}: p {p}, enumeration {want}");
        let swapped = wilcoxon_signed_rank(&b, &a).map_err(|e| e.to_string())?;
        ensure!(p == swapped, "case {case}: swap gives {swapped}, expected {p}");
    }
    Ok("p(n=5) = 0.0625; 300 cases equal to enumeration and swap-symmetric".into())
}

fn effect_categories() -> Check {
    for (d, want) in [(0.555, EffectCategory::Medium), (1.072, EffectCategory::Large)] {
        ensure!(EffectCategory::from_d(d) == want && EffectCategory::from_d(-d) == want, "|d| = {d}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..200 {
        let a: Vec<f64> = (0..rng.gen_range(2..20)).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..rng.gen_range(2..20)).map(|_| rng.gen_range(0.0..1.0)).collect();
        let ab = cohens_d(&a, &b).map_err(|e| e.to_string())?;
        let ba = cohens_d(&b, &a).map_err(|e| e.to_string())?;
        ensure!((ab + ba).abs() <= 1e-12, "d(a,b) = {ab}, d(b,a) = {ba}");
    }
    Ok("0.555 → M, 1.072 → L, d antisymmetric".into())
}

fn scott_knott() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let same: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..1.0)).collect();
    let methods: Vec<(String, Vec<f64>)> = ["x", "y", "z"].iter().map(|m| (m.to_string(), same.clone())).collect();
    let sk = scott_knott_esd(&methods);
    ensure!(sk.groups.len() == 1, "identical methods in {} groups", sk.groups.len());

    let high = Normal::new(1.0, 0.01).expect("normal");
    let low = Normal::new(0.0, 0.01).expect("normal");
    let methods = vec![
        ("low".to_string(), (0..100).map(|_| low.sample(&mut rng)).collect::<Vec<f64>>()),
        ("high".to_string(), (0..100).map(|_| high.sample(&mut rng)).collect()),
    ];
    let sk = scott_knott_esd(&methods);
    ensure!(sk.groups == [vec!["high".to_string()], vec!["low".to_string()]], "groups {:?}", sk.groups);
    Ok("identical → 1 group; separated → [high] [low]".into())
}

fn run_cli<S: AsRef<std::ffi::OsStr> + AsRef<str>>(args: &[S], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_warnpath"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "`{}` failed: {}", args.iter().map(|a| AsRef::<str>::as_ref(a)).collect::<Vec<_>>().join(" "), String::from_utf8_lossy(&out.stderr));
    Ok(())
}

fn read(dir: &Path, name: &str) -> Result<Vec<u8>, String> {
    fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    run_cli(&["gen-corpus", "--pairs", "30", "--seed", "5", "-o", "src"], dir)?;
    run_cli(&["gen-corpus", "--pairs", "10", "--seed", "6", "-o", "tgt"], dir)?;
    let model = ["--d-model", "16", "--heads", "2", "--d-ff", "32", "--layers", "1", "--epochs", "3"];
    let mut outputs: Vec<HashMap<&str, Vec<u8>>> = Vec::new();
    for (run, mode) in [(0, None), (1, None), (2, Some("--sequential"))] {
        let extra: Vec<&str> = mode.into_iter().collect();
        let name = |s: &str| format!("{s}{run}");
        let with = |base: &[&str]| -> Vec<String> { base.iter().chain(&extra).map(|s| s.to_string()).collect() };
        run_cli(&with(&["extract", "--sources", "src", "--warnings", "src/warnings.jsonl", "-o", &name("src.jsonl")]), dir)?;
        run_cli(&with(&["extract", "--sources", "tgt", "--warnings", "tgt/warnings.jsonl", "-o", &name("tgt.jsonl")]), dir)?;
        run_cli(&with(&["select", "--source", &name("src.jsonl"), "--target", &name("tgt.jsonl"), "-n", "3", "-o", &name("sel.jsonl")]), dir)?;
        run_cli(&with(&[&["train", "--train", &name("src.jsonl"), "-o", &name("model.bin")][..], &model[..]].concat()), dir)?;
        run_cli(&with(&[&["crossval", "--corpus", &name("src.jsonl"), "--repeats", "2", "-o", &name("cv.csv")][..], &model[..]].concat()), dir)?;
        let mut files = HashMap::new();
        for (key, file) in [
            ("extract", name("src.jsonl")),
            ("select", name("sel.jsonl")),
            ("train", name("model.bin")),
            ("train log", name("model.bin") + ".log.json"),
            ("crossval", name("cv.csv")),
        ] {
            files.insert(key, read(dir, &file)?);
        }
        outputs.push(files);
    }
    for key in ["extract", "select", "train", "train log", "crossval"] {
        ensure!(outputs[0][key] == outputs[1][key], "{key} differs between identical runs");
        ensure!(outputs[0][key] == outputs[2][key], "{key} differs between parallel and sequential runs");
    }
    Ok("extract, select, train, crossval byte-identical across runs and execution modes".into())
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Check); 12] = [
        ("golden tokenization", Duration::from_secs(1), golden_tokenization),
        ("path golden", Duration::from_secs(1), path_golden),
        ("BM25 oracle equivalence", Duration::from_secs(10), bm25_equivalence),
        ("instance-selection property", Duration::from_secs(10), selection_property),
        ("attention/LayerNorm numerics", Duration::from_secs(10), attention_layer_norm_numerics),
        ("gradient check", Duration::from_secs(120), gradient_check_tiny_models),
        ("end-to-end learning", Duration::from_secs(300), end_to_end_learning),
        ("metrics exactness", Duration::from_secs(10), metrics_exactness),
        ("Wilcoxon exactness", Duration::from_secs(10), wilcoxon_exactness),
        ("effect-size categories", Duration::from_secs(10), effect_categories),
        ("Scott-Knott ESD", Duration::from_secs(10), scott_knott),
        ("determinism", Duration::from_secs(300), determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}")),
            r => r,
        };
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({elapsed:.2?}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({elapsed:.2?}): {detail}", i + 1);
            }
        }
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
