//! Per-function control flow graphs with one node per statement, plus the
//! path-restricted def-use influence analysis.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::frontend::ast::{Expr, ExprKind, ForClause, FunctionDef, Stmt, StmtKind};
use crate::frontend::{IpAnchor, NodeKind, StmtId};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CfgNodeKind {
    Entry,
    Exit,
    Stmt(NodeKind),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfgNode {
    pub id: NodeId,
    /// Line of the statement's first token; 0 for Entry/Exit.
    pub line: u32,
    pub ast_ref: Option<StmtId>,
    pub kind: CfgNodeKind,
    pub defs: BTreeSet<String>,
    pub uses: BTreeSet<String>,
}

impl CfgNode {
    pub fn mentions_any(&self, vars: &BTreeSet<String>) -> bool {
        self.defs.iter().chain(&self.uses).any(|v| vars.contains(v))
    }
}

/// Branch tag of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    True,
    False,
    Fallthrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeTag {
    Fallthrough,
    True,
    False,
    Back,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub branch: Branch,
    /// Loop back edge: the target is the loop header, which dominates the source.
    pub back: bool,
}

impl Edge {
    pub fn tag(&self) -> EdgeTag {
        match (self.back, self.branch) {
            (true, _) => EdgeTag::Back,
            (false, Branch::True) => EdgeTag::True,
            (false, Branch::False) => EdgeTag::False,
            (false, Branch::Fallthrough) => EdgeTag::Fallthrough,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlFlowGraph {
    pub function: String,
    /// Statement nodes in source order, then Entry, then Exit.
    pub nodes: Vec<CfgNode>,
    pub edges: Vec<Edge>,
    pub entry: NodeId,
    pub exit: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CfgError {
    #[error("`{0}` at line {1} has no control-flow rule here")]
    UnsupportedConstruct(&'static str, u32),
    #[error("path does not end at the anchored statement")]
    PathAnchorMismatch,
    #[error("path is empty")]
    EmptyPath,
}

impl ControlFlowGraph {
    pub fn node(&self, id: NodeId) -> &CfgNode {
        &self.nodes[id]
    }

    pub fn node_for_stmt(&self, stmt: StmtId) -> Option<NodeId> {
        self.nodes
            .iter()
            .find(|n| n.ast_ref == Some(stmt))
            .map(|n| n.id)
    }

    pub fn statement_count(&self) -> usize {
        self.nodes.len() - 2
    }

    /// Indices into `edges` of the out-edges of `id`, in canonical order:
    /// True before False before Fallthrough, ties by ascending target id.
    pub fn out_edges(&self, id: NodeId) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.edges.len())
            .filter(|&i| self.edges[i].from == id)
            .collect();
        out.sort_by_key(|&i| (self.edges[i].branch, self.edges[i].to));
        out
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }

    /// Graphviz rendering for debugging.
    pub fn to_dot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph \"{}\" {{", self.function);
        for n in &self.nodes {
            let label = match n.kind {
                CfgNodeKind::Entry => "Entry".to_string(),
                CfgNodeKind::Exit => "Exit".to_string(),
                CfgNodeKind::Stmt(k) => format!("n{} L{} {}", n.id, n.line, k),
            };
            let _ = writeln!(s, "  {} [label=\"{}\"];", n.id, label);
        }
        for e in &self.edges {
            let _ = writeln!(s, "  {} -> {} [label=\"{:?}\"];", e.from, e.to, e.tag());
        }
        s.push_str("}\n");
        s
    }
}

struct LoopCtx {
    header: NodeId,
    breaks: Vec<(NodeId, Branch)>,
}

struct Builder {
    node_of: HashMap<StmtId, NodeId>,
    edges: Vec<Edge>,
    loops: Vec<LoopCtx>,
    exit: NodeId,
}

type Dangling = Vec<(NodeId, Branch)>;

impl Builder {
    fn connect(&mut self, from: Dangling, to: NodeId, back: bool) {
        for (f, branch) in from {
            self.edges.push(Edge {
                from: f,
                to,
                branch,
                back,
            });
        }
    }

    fn seq(&mut self, stmts: &[Stmt], mut incoming: Dangling) -> Result<Dangling, CfgError> {
        for s in stmts {
            incoming = self.stmt(s, incoming)?;
        }
        Ok(incoming)
    }

    fn stmt(&mut self, s: &Stmt, incoming: Dangling) -> Result<Dangling, CfgError> {
        if let StmtKind::Block(b) = &s.kind {
            return self.seq(&b.stmts, incoming);
        }
        let n = self.node_of[&s.id];
        self.connect(incoming, n, false);
        Ok(match &s.kind {
            StmtKind::Decl(_)
            | StmtKind::Assign { .. }
            | StmtKind::Call(_)
            | StmtKind::Assert(_)
            | StmtKind::Expr(_) => vec![(n, Branch::Fallthrough)],
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                let mut out = self.stmt(then_branch, vec![(n, Branch::True)])?;
                match else_branch {
                    Some(e) => out.extend(self.stmt(e, vec![(n, Branch::False)])?),
                    None => out.push((n, Branch::False)),
                }
                out
            }
            StmtKind::While { body, .. } => self.looping(n, body, true)?,
            StmtKind::For { cond, body, .. } => self.looping(n, body, cond.is_some())?,
            StmtKind::Break => {
                let ctx = self
                    .loops
                    .last_mut()
                    .ok_or(CfgError::UnsupportedConstruct("break", s.loc.line))?;
                ctx.breaks.push((n, Branch::Fallthrough));
                Vec::new()
            }
            StmtKind::Continue => {
                let header = self
                    .loops
                    .last()
                    .ok_or(CfgError::UnsupportedConstruct("continue", s.loc.line))?
                    .header;
                self.connect(vec![(n, Branch::Fallthrough)], header, true);
                Vec::new()
            }
            StmtKind::Return(_) => {
                self.connect(vec![(n, Branch::Fallthrough)], self.exit, false);
                Vec::new()
            }
            StmtKind::Block(_) => unreachable!("handled above"),
        })
    }

    fn looping(&mut self, header: NodeId, body: &Stmt, has_exit: bool) -> Result<Dangling, CfgError> {
        self.loops.push(LoopCtx {
            header,
            breaks: Vec::new(),
        });
        let body_out = self.stmt(body, vec![(header, Branch::True)])?;
        self.connect(body_out, header, true);
        let ctx = self.loops.pop().expect("pushed above");
        let mut out = ctx.breaks;
        if has_exit {
            out.push((header, Branch::False));
        }
        Ok(out)
    }
}

fn clause_def_use(c: &ForClause, defs: &mut BTreeSet<String>, uses: &mut BTreeSet<String>) {
    match c {
        ForClause::Assign { target, value } => {
            assign_def_use(target, defs, uses);
            collect_idents(value, uses);
        }
        ForClause::Expr(e) => collect_idents(e, uses),
    }
}

fn assign_def_use(target: &Expr, defs: &mut BTreeSet<String>, uses: &mut BTreeSet<String>) {
    match &target.kind {
        ExprKind::Ident(v) => {
            defs.insert(v.clone());
        }
        _ => {
            // Writing through `v->m` or `*v` reads v and counts as defining it.
            if let Some(v) = target.base_variable() {
                defs.insert(v.to_string());
            }
            collect_idents(target, uses);
        }
    }
}

fn collect_idents(e: &Expr, out: &mut BTreeSet<String>) {
    e.for_each_ident(&mut |v| {
        out.insert(v.to_string());
    });
}

/// Syntactic definitions and uses of one statement's own part.
pub fn def_use(s: &Stmt) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut defs = BTreeSet::new();
    let mut uses = BTreeSet::new();
    match &s.kind {
        StmtKind::Decl(d) => {
            defs.insert(d.name.clone());
            if let Some(init) = &d.init {
                collect_idents(init, &mut uses);
            }
        }
        StmtKind::Assign { target, value } => {
            assign_def_use(target, &mut defs, &mut uses);
            collect_idents(value, &mut uses);
        }
        StmtKind::For {
            init, cond, step, ..
        } => {
            if let Some(c) = init {
                clause_def_use(c, &mut defs, &mut uses);
            }
            if let Some(c) = cond {
                collect_idents(c, &mut uses);
            }
            if let Some(c) = step {
                clause_def_use(c, &mut defs, &mut uses);
            }
        }
        _ => {
            for e in s.own_exprs() {
                collect_idents(e, &mut uses);
            }
        }
    }
    (defs, uses)
}

/// Builds the CFG of one function.
pub fn build_cfg(func: &FunctionDef) -> Result<ControlFlowGraph, CfgError> {
    let mut nodes = Vec::new();
    let mut node_of = HashMap::new();
    func.walk(&mut |s| {
        if let StmtKind::Block(_) = s.kind {
            return;
        }
        let id = nodes.len();
        let (defs, uses) = def_use(s);
        node_of.insert(s.id, id);
        nodes.push(CfgNode {
            id,
            line: s.loc.line,
            ast_ref: Some(s.id),
            kind: CfgNodeKind::Stmt(s.node_kind()),
            defs,
            uses,
        });
    });
    let entry = nodes.len();
    let exit = entry + 1;
    for (id, kind) in [(entry, CfgNodeKind::Entry), (exit, CfgNodeKind::Exit)] {
        nodes.push(CfgNode {
            id,
            line: 0,
            ast_ref: None,
            kind,
            defs: BTreeSet::new(),
            uses: BTreeSet::new(),
        });
    }

    let mut b = Builder {
        node_of,
        edges: Vec::new(),
        loops: Vec::new(),
        exit,
    };
    let out = b.seq(&func.body.stmts, vec![(entry, Branch::Fallthrough)])?;
    b.connect(out, exit, false);

    Ok(ControlFlowGraph {
        function: func.name().to_string(),
        nodes,
        edges: b.edges,
        entry,
        exit,
    })
}

/// Variables that transitively reach the IP variable through def-use
/// relations among the nodes of `path`.
///
/// The result is the smallest set containing the IP variable and closed
/// under: if a path node defines a member of the set, all of that node's
/// uses are members too.
pub fn def_use_influences(
    cfg: &ControlFlowGraph,
    path: &[NodeId],
    anchor: &IpAnchor,
) -> Result<BTreeSet<String>, CfgError> {
    let last = *path.last().ok_or(CfgError::EmptyPath)?;
    if cfg.node(last).ast_ref != Some(anchor.stmt) {
        return Err(CfgError::PathAnchorMismatch);
    }
    let mut set = BTreeSet::from([anchor.ip_variable.clone()]);
    loop {
        let before = set.len();
        for &id in path.iter().rev() {
            let node = cfg.node(id);
            if node.defs.iter().any(|d| set.contains(d)) {
                set.extend(node.uses.iter().cloned());
            }
        }
        if set.len() == before {
            return Ok(set);
        }
    }
}
