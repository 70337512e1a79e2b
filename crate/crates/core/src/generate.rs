//! Seeded synthetic corpora of labeled warning pairs.
//!
//! Every pair is a `bad_NNNN`/`good_NNNN` function pair in its own file.
//! Both members guard a null check on the IP variable; the buggy one combines
//! the two operands with `&` (both evaluated, so the dereference happens even
//! when the pointer is null), the clean one with `&&`. Names, literal values
//! and the order of unrelated declarations vary with the seed; the abstract
//! token sequence of a template does not.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{write_jsonl, Label};
use crate::frontend::WarningReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Template {
    /// Declaration, guarded dereference, library call.
    NullGuard,
    /// [`NullGuard`](Template::NullGuard) among shuffled unrelated
    /// declarations.
    DeclShuffle,
    /// The IP variable is copied from another pointer, with unrelated
    /// statements interleaved.
    Distractor,
}

impl Template {
    pub const ALL: [Template; 3] = [Template::NullGuard, Template::DeclShuffle, Template::Distractor];

    pub fn name(self) -> &'static str {
        match self {
            Template::NullGuard => "null-guard",
            Template::DeclShuffle => "decl-shuffle",
            Template::Distractor => "distractor",
        }
    }
}

impl FromStr for Template {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Template::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown template `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    pub pair_count: usize,
    pub seed: u64,
    /// Pair `i` uses `templates[i % templates.len()]`.
    pub templates: Vec<Template>,
}

impl GenSpec {
    pub fn new(pair_count: usize, seed: u64) -> Self {
        Self {
            pair_count,
            seed,
            templates: Template::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("pair_count must be at least 1")]
    NoPairs,
    #[error("at least one template is required")]
    NoTemplates,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedFile {
    pub name: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedCorpus {
    pub files: Vec<GeneratedFile>,
    /// Two rows per pair, buggy first.
    pub warnings: Vec<WarningReport>,
}

pub const WARNINGS_FILE: &str = "warnings.jsonl";

impl GeneratedCorpus {
    /// Writes each source file and [`WARNINGS_FILE`] into `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for f in &self.files {
            fs::write(dir.join(&f.name), &f.source)?;
        }
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &self.warnings)?;
        fs::write(dir.join(WARNINGS_FILE), buf)
    }
}

const VAR_STEMS: &[&str] = &[
    "node", "ptr", "buf", "item", "entry", "ctx", "conf", "handle", "rec", "elem", "head", "cur", "data", "info", "obj",
];
const TYPE_STEMS: &[&str] = &["pairStruct", "nodeRec", "itemInfo", "bufDesc", "entryData", "twoInts", "listCell"];
const MEMBERS: &[&str] = &["count", "size", "flags", "intOne", "value", "len", "kind"];
const LIB_CALLS: &[&str] = &["println", "printf", "puts", "log_msg", "fprintf_out"];

struct Names<'a> {
    rng: &'a mut ChaCha8Rng,
    used: HashSet<String>,
}

impl Names<'_> {
    fn fresh(&mut self, stems: &[&str]) -> String {
        loop {
            let name = format!("{}{}", stems.choose(self.rng).expect("stems"), self.rng.gen_range(0..100));
            if self.used.insert(name.clone()) {
                return name;
            }
        }
    }
}

/// One function body: lines with the IP line marked.
struct Body {
    lines: Vec<String>,
    ip: usize,
}

fn body(template: Template, op: &str, rng: &mut ChaCha8Rng) -> (Body, String) {
    let mut names = Names {
        rng,
        used: HashSet::new(),
    };
    let v = names.fresh(VAR_STEMS);
    let ty = {
        let stem = names.fresh(TYPE_STEMS);
        // Both spellings abstract to StructType.
        if names.rng.gen_bool(0.5) {
            stem
        } else {
            format!("struct {stem}")
        }
    };
    let member = MEMBERS.choose(names.rng).expect("members").to_string();
    let value = names.rng.gen_range(0..64);
    let call = LIB_CALLS.choose(names.rng).expect("calls").to_string();
    let guard = format!("if (({v} != NULL) {op} ({v}->{member} == {value}))");
    let tail = format!("{call}(\"{member} == {value}\");");

    let mut lines = Vec::new();
    match template {
        Template::NullGuard => {
            lines.push(format!("{ty} *{v} = NULL;"));
        }
        Template::DeclShuffle => {
            let (a, s, f) = (names.fresh(VAR_STEMS), names.fresh(VAR_STEMS), names.fresh(VAR_STEMS));
            let mut decls = vec![
                format!("{ty} *{v} = NULL;"),
                format!("int {a} = {};", names.rng.gen_range(0..1000)),
                format!("char *{s} = \"{}\";", names.fresh(VAR_STEMS)),
                format!("float {f} = {}.5;", names.rng.gen_range(0..10)),
            ];
            decls.shuffle(names.rng);
            lines.extend(decls);
        }
        Template::Distractor => {
            let (k, w) = (names.fresh(VAR_STEMS), names.fresh(VAR_STEMS));
            let log = LIB_CALLS.choose(names.rng).expect("calls").to_string();
            lines.push(format!("int {k} = {};", names.rng.gen_range(0..100)));
            lines.push(format!("{ty} *{w} = NULL;"));
            lines.push(format!("{k} = {k} + {};", names.rng.gen_range(1..10)));
            lines.push(format!("{ty} *{v} = {w};"));
            lines.push(format!("{log}({k});"));
        }
    }
    let ip = lines.len();
    lines.push(guard);
    lines.push(tail);
    (Body { lines, ip }, v)
}

/// Builds the corpus for `spec`. Pair `i` depends only on the seed and `i`.
pub fn generate(spec: &GenSpec) -> Result<GeneratedCorpus, GenError> {
    if spec.pair_count == 0 {
        return Err(GenError::NoPairs);
    }
    if spec.templates.is_empty() {
        return Err(GenError::NoTemplates);
    }
    let mut files = Vec::with_capacity(spec.pair_count);
    let mut warnings = Vec::with_capacity(2 * spec.pair_count);
    for i in 0..spec.pair_count {
        let template = spec.templates[i % spec.templates.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let name = format!("pair_{i:04}.c");
        let mut source = String::new();
        let mut line = 1u32;
        for (role, op, label) in [("bad", "&", Label::Buggy), ("good", "&&", Label::Clean)] {
            // Same stream position for both members: identical names.
            let (b, ip_var) = body(template, op, &mut rng.clone());
            let function = format!("{role}_{i:04}");
            writeln!(source, "void {function}()\n{{").expect("string write");
            line += 2;
            for (k, l) in b.lines.iter().enumerate() {
                if k == b.ip {
                    warnings.push(WarningReport {
                        file: name.clone(),
                        function: function.clone(),
                        line,
                        variable: ip_var.clone(),
                        label: Some(label),
                        id: format!("pair{i:04}-{role}"),
                    });
                }
                // The statement after the guard is its then-branch.
                let indent = if k == b.ip + 1 { "    " } else { "" };
                writeln!(source, "    {indent}{l}").expect("string write");
                line += 1;
            }
            writeln!(source, "}}").expect("string write");
            line += 1;
        }
        files.push(GeneratedFile { name, source });
    }
    Ok(GeneratedCorpus { files, warnings })
}
