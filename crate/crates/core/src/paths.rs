//! Goal-oriented generation of intraprocedural paths from the CFG entry to a
//! target node.
//!
//! Search is a depth-first walk with a canonical successor order (True, then
//! False, then Fallthrough; ties by ascending node id), so the same CFG and
//! target always give the same paths. Each back edge may be taken at most
//! `max_back_edge_uses` times per path.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::cfg::{ControlFlowGraph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathBudget {
    pub max_back_edge_uses: u32,
    pub max_paths: usize,
    /// Maximum number of nodes on a path.
    pub max_length: usize,
}

impl Default for PathBudget {
    fn default() -> Self {
        Self {
            max_back_edge_uses: 1,
            max_paths: 1,
            max_length: 10_000,
        }
    }
}

/// CFG node ids from the entry's successor up to and including the target.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExecutionPath {
    pub node_ids: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("node {0} is not reachable from the entry within the path budget")]
    TargetUnreachable(NodeId),
    #[error("invalid path budget: {0}")]
    InvalidBudget(&'static str),
}

/// The first path in canonical DFS order.
pub fn generate_path(
    cfg: &ControlFlowGraph,
    target: NodeId,
    budget: &PathBudget,
) -> Result<ExecutionPath, PathError> {
    let budget = PathBudget {
        max_paths: 1,
        ..*budget
    };
    let mut paths = enumerate_paths(cfg, target, &budget)?;
    Ok(paths.swap_remove(0))
}

/// Up to `budget.max_paths` distinct paths in canonical DFS order.
pub fn enumerate_paths(
    cfg: &ControlFlowGraph,
    target: NodeId,
    budget: &PathBudget,
) -> Result<Vec<ExecutionPath>, PathError> {
    if budget.max_paths == 0 {
        return Err(PathError::InvalidBudget("max_paths must be at least 1"));
    }
    if budget.max_length == 0 {
        return Err(PathError::InvalidBudget("max_length must be at least 1"));
    }
    if target >= cfg.nodes.len() || target == cfg.entry {
        return Err(PathError::TargetUnreachable(target));
    }

    let can_reach = reaches(cfg, target);
    if !can_reach[cfg.entry] {
        return Err(PathError::TargetUnreachable(target));
    }

    struct Frame {
        succs: Vec<(usize, NodeId)>,
        next: usize,
        via: Option<usize>,
    }
    let successors = |node: NodeId| -> Vec<(usize, NodeId)> {
        let mut out: Vec<(usize, NodeId)> = Vec::new();
        for e in cfg.out_edges(node) {
            let to = cfg.edges[e].to;
            if can_reach[to] && !out.iter().any(|&(_, t)| t == to) {
                out.push((e, to));
            }
        }
        out
    };

    let mut results = Vec::new();
    let mut back_uses: HashMap<usize, u32> = HashMap::new();
    let mut path: Vec<NodeId> = Vec::new();
    let mut stack = vec![Frame {
        succs: successors(cfg.entry),
        next: 0,
        via: None,
    }];

    while let Some(top) = stack.last_mut() {
        if top.next < top.succs.len() {
            let (edge, to) = top.succs[top.next];
            top.next += 1;
            let back = cfg.edges[edge].back;
            if back && back_uses.get(&edge).copied().unwrap_or(0) >= budget.max_back_edge_uses {
                continue;
            }
            if path.len() >= budget.max_length {
                continue;
            }
            if back {
                *back_uses.entry(edge).or_insert(0) += 1;
            }
            path.push(to);
            stack.push(Frame {
                succs: successors(to),
                next: 0,
                via: Some(edge),
            });
            if to == target {
                results.push(ExecutionPath {
                    node_ids: path.clone(),
                });
                if results.len() == budget.max_paths {
                    break;
                }
            }
        } else {
            let frame = stack.pop().expect("non-empty");
            if let Some(edge) = frame.via {
                path.pop();
                if cfg.edges[edge].back {
                    *back_uses.get_mut(&edge).expect("counted on entry") -= 1;
                }
            }
        }
    }

    if results.is_empty() {
        Err(PathError::TargetUnreachable(target))
    } else {
        Ok(results)
    }
}

/// `out[n]` is true iff `target` is reachable from `n` (ignoring budgets).
fn reaches(cfg: &ControlFlowGraph, target: NodeId) -> Vec<bool> {
    let mut preds: Vec<Vec<NodeId>> = vec![Vec::new(); cfg.nodes.len()];
    for e in &cfg.edges {
        preds[e.to].push(e.from);
    }
    let mut seen = vec![false; cfg.nodes.len()];
    seen[target] = true;
    let mut queue = VecDeque::from([target]);
    while let Some(n) = queue.pop_front() {
        for &p in &preds[n] {
            if !seen[p] {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    seen
}
