//! BM25 relevance between token sequences and top-(2n+1) majority-vote
//! selection of source-project training instances.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::corpus::{Instance, Label};
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrievalError {
    #[error("source corpus is empty")]
    EmptyCorpus,
    #[error("source instance `{0}` has no label")]
    Unlabeled(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Corpus-level quantities BM25 needs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub doc_count: usize,
    /// Number of documents containing each token at least once.
    pub doc_freq: HashMap<String, usize>,
    pub avg_len: f64,
}

impl CorpusStats {
    pub fn df(&self, token: &str) -> usize {
        self.doc_freq.get(token).copied().unwrap_or(0)
    }

    /// `ln((N − df + 0.5) / (df + 0.5) + 1)`, which is never negative.
    pub fn idf(&self, token: &str) -> f64 {
        let n = self.doc_count as f64;
        let df = self.df(token) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }
}

pub fn corpus_stats<D: AsRef<[String]>>(docs: &[D]) -> Result<CorpusStats, RetrievalError> {
    if docs.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    let mut doc_freq: HashMap<String, usize> = HashMap::new();
    let mut total_len = 0usize;
    for d in docs {
        let d = d.as_ref();
        total_len += d.len();
        let unique: HashSet<&String> = d.iter().collect();
        for t in unique {
            *doc_freq.entry(t.clone()).or_insert(0) += 1;
        }
    }
    Ok(CorpusStats {
        doc_count: docs.len(),
        doc_freq,
        avg_len: total_len as f64 / docs.len() as f64,
    })
}

/// Statistics over the token lists of labeled instances.
pub fn instance_stats(corpus: &[Instance]) -> Result<CorpusStats, RetrievalError> {
    if let Some(i) = corpus.iter().find(|i| i.label.is_none()) {
        return Err(RetrievalError::Unlabeled(i.id.clone()));
    }
    let docs: Vec<&[String]> = corpus.iter().map(|i| i.tokens.as_slice()).collect();
    corpus_stats(&docs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(RetrievalError::InvalidParams(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(RetrievalError::InvalidParams(format!("b must lie in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

fn term(idf: f64, f: usize, doc_len: usize, stats: &CorpusStats, p: &Bm25Params) -> f64 {
    if f == 0 {
        return 0.0;
    }
    let f = f as f64;
    let norm = p.k1 * (1.0 - p.b + p.b * doc_len as f64 / stats.avg_len);
    idf * f * (p.k1 + 1.0) / (f + norm)
}

/// BM25 score of `doc` for `query`. Every occurrence of a query token adds
/// one term.
pub fn bm25_score<S: AsRef<str>>(query: &[S], doc: &[S], stats: &CorpusStats, params: &Bm25Params) -> f64 {
    query
        .iter()
        .map(|q| {
            let q = q.as_ref();
            let f = doc.iter().filter(|t| t.as_ref() == q).count();
            term(stats.idf(q), f, doc.len(), stats, params)
        })
        .sum()
}

/// Source documents with precomputed term frequencies, for repeated scoring.
#[derive(Debug, Clone)]
pub struct Bm25Index<'a> {
    corpus: &'a [Instance],
    tf: Vec<HashMap<&'a str, usize>>,
    stats: CorpusStats,
    params: Bm25Params,
}

impl<'a> Bm25Index<'a> {
    pub fn new(corpus: &'a [Instance], params: Bm25Params) -> Result<Self, RetrievalError> {
        params.validate()?;
        let stats = instance_stats(corpus)?;
        let tf = corpus
            .iter()
            .map(|inst| {
                let mut m: HashMap<&str, usize> = HashMap::new();
                for t in &inst.tokens {
                    *m.entry(t.as_str()).or_insert(0) += 1;
                }
                m
            })
            .collect();
        Ok(Self {
            corpus,
            tf,
            stats,
            params,
        })
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    /// Same value as [`bm25_score`] against document `i`.
    pub fn score(&self, query: &[String], i: usize) -> f64 {
        let doc_len = self.corpus[i].tokens.len();
        query
            .iter()
            .map(|q| {
                let f = self.tf[i].get(q.as_str()).copied().unwrap_or(0);
                term(self.stats.idf(q), f, doc_len, &self.stats, &self.params)
            })
            .sum()
    }

    /// All source instances, best first; equal scores by ascending id.
    pub fn rank(&self, query: &[String]) -> Vec<ScoredCandidate> {
        let mut ranked: Vec<ScoredCandidate> = self
            .corpus
            .iter()
            .enumerate()
            .map(|(i, inst)| ScoredCandidate {
                source_instance_id: inst.id.clone(),
                score: self.score(query, i),
                label: inst.label.expect("index holds labeled instances"),
                index: i,
            })
            .collect();
        ranked.sort_by(|a, b| match b.score.total_cmp(&a.score) {
            Ordering::Equal => a.source_instance_id.cmp(&b.source_instance_id),
            o => o,
        });
        ranked
    }

    /// Majority label of the top `2n + 1` and the best `n` instances with it.
    pub fn select(&self, target_id: &str, query: &[String], n: usize, tie: Label) -> Result<SelectionResult, RetrievalError> {
        if n == 0 {
            return Err(RetrievalError::InvalidParams("n must be at least 1".into()));
        }
        let ranked = self.rank(query);
        let window_size = ranked.len().min(2 * n + 1);
        let buggy = ranked[..window_size].iter().filter(|c| c.label == Label::Buggy).count();
        let clean = window_size - buggy;
        let majority_label = match buggy.cmp(&clean) {
            Ordering::Greater => Label::Buggy,
            Ordering::Less => Label::Clean,
            Ordering::Equal => tie,
        };
        let chosen = ranked
            .into_iter()
            .filter(|c| c.label == majority_label)
            .take(n)
            .collect();
        Ok(SelectionResult {
            target_id: target_id.to_string(),
            majority_label,
            window_size,
            chosen,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub source_instance_id: String,
    pub score: f64,
    pub label: Label,
    /// Position in the source corpus.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub target_id: String,
    pub majority_label: Label,
    /// Number of instances that voted, `min(2n + 1, |corpus|)`.
    pub window_size: usize,
    /// At most `n`, best first.
    pub chosen: Vec<ScoredCandidate>,
}

impl SelectionResult {
    pub fn chosen_ids(&self) -> Vec<&str> {
        self.chosen.iter().map(|c| c.source_instance_id.as_str()).collect()
    }
}

/// Options shared by [`select_instances`] and [`build_training_set`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub params: Bm25Params,
    pub n: usize,
    /// Label taken when the vote is split evenly.
    pub tie_label: Label,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            params: Bm25Params::default(),
            n: 10,
            tie_label: Label::Clean,
        }
    }
}

pub fn select_instances(target: &Instance, source: &[Instance], config: &SelectionConfig) -> Result<SelectionResult, RetrievalError> {
    let index = Bm25Index::new(source, config.params)?;
    index.select(&target.id, &target.tokens, config.n, config.tie_label)
}

/// Union of the selections for every target, deduplicated by source id.
/// Targets are processed in ascending id order and each selection keeps its
/// rank order, so the output does not depend on input order or `exec`.
pub fn build_training_set(
    targets: &[Instance],
    source: &[Instance],
    config: &SelectionConfig,
    exec: Exec,
) -> Result<Vec<Instance>, RetrievalError> {
    let index = Bm25Index::new(source, config.params)?;
    let mut order: Vec<&Instance> = targets.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let selections = exec.map(&order, |t| index.select(&t.id, &t.tokens, config.n, config.tie_label));

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for sel in selections {
        for c in sel?.chosen {
            if seen.insert(c.source_instance_id.clone()) {
                out.push(source[c.index].clone());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn inst(id: &str, label: u8, tokens: &str) -> Instance {
        Instance {
            id: id.into(),
            project: "src".into(),
            label: Some(Label::try_from(label).unwrap()),
            tokens: toks(tokens),
        }
    }

    #[test]
    fn stats_count_documents() {
        let s = corpus_stats(&[toks("A B"), toks("A C")]).unwrap();
        assert_eq!((s.doc_count, s.df("A"), s.df("B"), s.avg_len), (2, 2, 1, 2.0));
        let s = corpus_stats(&[toks("A")]).unwrap();
        assert_eq!((s.doc_count, s.df("A"), s.avg_len), (1, 1, 1.0));
        let s = corpus_stats(&[toks("A A B"), toks("B")]).unwrap();
        assert_eq!((s.df("A"), s.avg_len), (1, 2.0));
        assert_eq!(corpus_stats::<Vec<String>>(&[]), Err(RetrievalError::EmptyCorpus));
    }

    #[test]
    fn hand_evaluated_scores() {
        let s = corpus_stats(&[toks("A B"), toks("A C")]).unwrap();
        let p = Bm25Params::default();
        assert!((bm25_score(&toks("B"), &toks("A B"), &s, &p) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(bm25_score(&toks("B"), &toks("A C"), &s, &p), 0.0);
        assert_eq!(bm25_score(&toks(""), &toks("A C"), &s, &p), 0.0);
        // Repeated query tokens count once per occurrence.
        let twice = bm25_score(&toks("B B"), &toks("A B"), &s, &p);
        assert!((twice - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_documents_score_zero() {
        let source = vec![inst("a", 0, ""), inst("b", 1, "")];
        let index = Bm25Index::new(&source, Bm25Params::default()).unwrap();
        assert_eq!(index.score(&toks("X"), 0), 0.0);
    }

    #[test]
    fn majority_of_three() {
        // Scores for query "Q": a, b have Q twice, c once, d none.
        let source = vec![
            inst("a", 1, "Q Q X"),
            inst("b", 1, "Q Q Y"),
            inst("c", 0, "Q Z W"),
            inst("d", 0, "Z W V"),
        ];
        let target = inst("t", 0, "Q");
        let config = SelectionConfig {
            n: 1,
            ..Default::default()
        };
        let r = select_instances(&target, &source, &config).unwrap();
        assert_eq!(r.majority_label, Label::Buggy);
        assert_eq!(r.chosen_ids(), vec!["a"]);
    }

    #[test]
    fn unanimous_and_truncated_windows() {
        let source = vec![inst("a", 0, "A"), inst("b", 0, "A B"), inst("c", 0, "C")];
        let config = SelectionConfig {
            n: 2,
            ..Default::default()
        };
        let r = select_instances(&inst("t", 0, "A"), &source, &config).unwrap();
        assert_eq!((r.majority_label, r.chosen.len()), (Label::Clean, 2));
        assert_eq!(r.chosen_ids(), vec!["a", "b"]);

        let pair = vec![inst("x", 1, "A"), inst("y", 0, "B")];
        let one = SelectionConfig {
            n: 1,
            ..Default::default()
        };
        let r = select_instances(&inst("t", 0, "A"), &pair, &one).unwrap();
        assert_eq!((r.window_size, r.majority_label), (2, Label::Clean));
        assert_eq!(r.chosen_ids(), vec!["y"]);
        let buggy_tie = SelectionConfig {
            tie_label: Label::Buggy,
            ..one
        };
        assert_eq!(select_instances(&inst("t", 0, "A"), &pair, &buggy_tie).unwrap().chosen_ids(), vec!["x"]);
    }

    #[test]
    fn training_set_union() {
        let source = vec![inst("a", 1, "A"), inst("b", 1, "B"), inst("c", 1, "C")];
        let config = SelectionConfig {
            n: 1,
            ..Default::default()
        };
        let targets = vec![inst("t2", 0, "A"), inst("t1", 0, "A")];
        let set = build_training_set(&targets, &source, &config, Exec::Sequential).unwrap();
        assert_eq!(set.iter().map(|i| i.id.as_str()).collect::<Vec<_>>(), vec!["a"]);

        let targets = vec![inst("t2", 0, "C"), inst("t1", 0, "B")];
        let set = build_training_set(&targets, &source, &config, Exec::Parallel).unwrap();
        assert_eq!(set.iter().map(|i| i.id.as_str()).collect::<Vec<_>>(), vec!["b", "c"]);
    }

    #[test]
    fn guards() {
        let unlabeled = vec![Instance {
            label: None,
            ..inst("a", 0, "A")
        }];
        assert_eq!(Bm25Index::new(&unlabeled, Bm25Params::default()).unwrap_err(), RetrievalError::Unlabeled("a".into()));
        assert_eq!(Bm25Index::new(&[], Bm25Params::default()).unwrap_err(), RetrievalError::EmptyCorpus);
        assert!(Bm25Params { k1: 0.0, b: 0.5 }.validate().is_err());
        assert!(Bm25Params { k1: 1.0, b: 1.5 }.validate().is_err());
    }
}
