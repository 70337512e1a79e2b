//! Warning → token-sequence pipeline: locate the IP, build the CFG, generate
//! paths to the IP node, keep the influencing nodes and abstract them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfg::{build_cfg, def_use_influences, CfgError};
use crate::corpus::Instance;
use crate::exec::Exec;
use crate::frontend::ast::SyntaxTree;
use crate::frontend::{locate_ip, parse_source, FrontendError, WarningReport};
use crate::paths::{enumerate_paths, PathBudget, PathError};
use crate::tokens::{abstract_tokens, select_nodes, TokenError, TokenSequence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Cfg(#[from] CfgError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Tokens(#[from] TokenError),
}

impl ExtractError {
    pub fn stage(&self) -> Stage {
        match self {
            ExtractError::Frontend(FrontendError::Lex { .. } | FrontendError::Parse { .. }) => Stage::Parse,
            ExtractError::Frontend(_) => Stage::Anchor,
            ExtractError::Cfg(_) => Stage::Cfg,
            ExtractError::Path(_) => Stage::Path,
            ExtractError::Tokens(_) => Stage::Tokens,
        }
    }
}

/// Where in the pipeline a warning was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Read,
    Parse,
    Anchor,
    Cfg,
    Path,
    Tokens,
}

/// One token sequence per generated path, in path order.
pub fn extract_warning(tree: &SyntaxTree, report: &WarningReport, budget: &PathBudget) -> Result<Vec<TokenSequence>, ExtractError> {
    let anchor = locate_ip(tree, report)?;
    let func = tree.function(&report.function).ok_or_else(|| FrontendError::AnchorNotFound {
        function: report.function.clone(),
        line: report.line,
    })?;
    let cfg = build_cfg(func)?;
    let target = cfg.node_for_stmt(anchor.stmt).ok_or(CfgError::PathAnchorMismatch)?;
    let paths = enumerate_paths(&cfg, target, budget)?;
    paths
        .iter()
        .enumerate()
        .map(|(k, path)| {
            let influences = def_use_influences(&cfg, &path.node_ids, &anchor)?;
            let nodes = select_nodes(&cfg, &path.node_ids, &influences);
            let tokens = abstract_tokens(&cfg, &nodes, func, tree, &anchor)?;
            Ok(TokenSequence {
                instance_id: path_instance_id(&report.id, k),
                tokens,
                label: report.label,
            })
        })
        .collect()
}

/// The first path keeps the warning id; later ones get a `#p<k>` suffix.
pub fn path_instance_id(id: &str, k: usize) -> String {
    if k == 0 {
        id.to_string()
    } else {
        format!("{id}#p{k}")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractOptions {
    pub budget: PathBudget,
    /// Stored in every produced instance.
    pub project: String,
    /// Also render the CFG of every function a warning points into.
    pub emit_cfg: bool,
}

/// A warning that produced no instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractFailure {
    pub id: String,
    pub file: String,
    pub function: String,
    pub line: u32,
    pub stage: Stage,
    pub message: String,
}

impl ExtractFailure {
    fn new(report: &WarningReport, stage: Stage, message: String) -> Self {
        Self {
            id: report.id.clone(),
            file: report.file.clone(),
            function: report.function.clone(),
            line: report.line,
            stage,
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfgDump {
    pub file: String,
    pub function: String,
    pub dot: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractOutput {
    /// Sorted by id.
    pub instances: Vec<Instance>,
    /// Sorted by id.
    pub failures: Vec<ExtractFailure>,
    pub files_total: usize,
    /// Files that could not be read or parsed.
    pub files_failed: usize,
    /// Sorted by (file, function).
    pub cfg_dumps: Vec<CfgDump>,
}

impl ExtractOutput {
    /// True when there were files and none of them parsed.
    pub fn total_parse_failure(&self) -> bool {
        self.files_total > 0 && self.files_failed == self.files_total
    }

    fn merge(&mut self, other: ExtractOutput) {
        self.instances.extend(other.instances);
        self.failures.extend(other.failures);
        self.files_total += other.files_total;
        self.files_failed += other.files_failed;
        self.cfg_dumps.extend(other.cfg_dumps);
    }
}

fn to_instance(seq: TokenSequence, project: &str) -> Instance {
    Instance {
        tokens: seq.spellings(),
        id: seq.instance_id,
        project: project.to_string(),
        label: seq.label,
    }
}

/// Extracts every warning of one source file.
pub fn extract_source(file: &str, source: &str, reports: &[&WarningReport], opts: &ExtractOptions) -> ExtractOutput {
    let mut out = ExtractOutput {
        files_total: 1,
        ..Default::default()
    };
    let tree = match parse_source(file, source) {
        Ok(t) => t,
        Err(e) => {
            out.files_failed = 1;
            out.failures = reports.iter().map(|r| ExtractFailure::new(r, Stage::Parse, e.to_string())).collect();
            return out;
        }
    };
    for r in reports {
        match extract_warning(&tree, r, &opts.budget) {
            Ok(seqs) => out.instances.extend(seqs.into_iter().map(|s| to_instance(s, &opts.project))),
            Err(e) => out.failures.push(ExtractFailure::new(r, e.stage(), e.to_string())),
        }
    }
    if opts.emit_cfg {
        let mut functions: Vec<&str> = reports.iter().map(|r| r.function.as_str()).collect();
        functions.sort();
        functions.dedup();
        for name in functions {
            if let Some(cfg) = tree.function(name).and_then(|f| build_cfg(f).ok()) {
                out.cfg_dumps.push(CfgDump {
                    file: file.to_string(),
                    function: name.to_string(),
                    dot: cfg.to_dot(),
                });
            }
        }
    }
    out
}

/// Extracts every warning in `reports`, reading sources relative to `dir`.
/// Files are processed independently; a failing warning or file is recorded
/// in [`ExtractOutput::failures`] and the rest of the batch goes on.
pub fn extract_dir(dir: &Path, reports: &[WarningReport], opts: &ExtractOptions, exec: Exec) -> ExtractOutput {
    let mut by_file: BTreeMap<&str, Vec<&WarningReport>> = BTreeMap::new();
    for r in reports {
        by_file.entry(r.file.as_str()).or_default().push(r);
    }
    let groups: Vec<(&str, Vec<&WarningReport>)> = by_file.into_iter().collect();
    let parts = exec.map(&groups, |(file, reports)| match fs::read_to_string(dir.join(file)) {
        Ok(source) => extract_source(file, &source, reports, opts),
        Err(e) => ExtractOutput {
            failures: reports.iter().map(|r| ExtractFailure::new(r, Stage::Read, e.to_string())).collect(),
            files_total: 1,
            files_failed: 1,
            ..Default::default()
        },
    });
    let mut out = ExtractOutput::default();
    for p in parts {
        out.merge(p);
    }
    out.instances.sort_by(|a, b| a.id.cmp(&b.id));
    out.failures.sort_by(|a, b| a.id.cmp(&b.id));
    out
}
