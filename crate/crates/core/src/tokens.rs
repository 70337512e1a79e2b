//! Abstraction of selected path nodes into a closed token vocabulary, and
//! packaging of token sequences into model inputs.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cfg::{CfgNodeKind, ControlFlowGraph, NodeId};
use crate::corpus::Label;
use crate::frontend::ast::{BinaryOp, Expr, ExprKind, FunctionDef, Stmt, StmtKind, TypeDescriptor, UnaryOp};
use crate::frontend::{IpAnchor, NodeKind, SyntaxTree};

/// Highest numbered variable placeholder; later variables share it.
pub const MAX_VARIABLE_INDEX: u32 = 100;

/// Maximum model input length including `[CLS]` and `[SEP]`.
pub const MAX_INPUT_LEN: usize = 512;

macro_rules! plain_tokens {
    ($($variant:ident => $spelling:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum AbstractToken {
            $($variant,)*
            VariableIp,
            /// `Variable1` ... `Variable100`.
            Variable(u32),
        }

        const PLAIN: &[(AbstractToken, &str)] = &[$((AbstractToken::$variant, $spelling)),*];
    };
}

plain_tokens! {
    Pad => "[PAD]",
    Unk => "[UNK]",
    Cls => "[CLS]",
    Sep => "[SEP]",
    VariableDeclarator => "VariableDeclarator",
    AssignmentStatement => "AssignmentStatement",
    MethodInvocation => "MethodInvocation",
    IfSelection => "IfSelection",
    ForLoop => "ForLoop",
    WhileLoop => "WhileLoop",
    BreakStatement => "BreakStatement",
    ContinueStatement => "ContinueStatement",
    ReturnStatement => "ReturnStatement",
    AssertStatement => "AssertStatement",
    StructType => "StructType",
    IntType => "IntType",
    CharType => "CharType",
    FloatType => "FloatType",
    VoidType => "VoidType",
    Pointer => "Pointer",
    Constant => "Constant",
    Null => "Null",
    LibraryCall => "LibraryCall",
    UserDefinedCall => "UserDefinedCall",
    Equal => "Equal",
    NotEqual => "NotEqual",
    Less => "Less",
    Greater => "Greater",
    LessEqual => "LessEqual",
    GreaterEqual => "GreaterEqual",
    LogicalAnd => "LogicalAnd",
    LogicalOr => "LogicalOr",
    LogicalNot => "LogicalNot",
    InclusiveAnd => "InclusiveAnd",
    InclusiveOr => "InclusiveOr",
    Assign => "Assign",
    Plus => "Plus",
    Minus => "Minus",
    Times => "Times",
    Divide => "Divide",
    Mod => "Mod",
    Dereference => "Dereference",
    AddressOf => "AddressOf",
}

impl AbstractToken {
    /// The full closed vocabulary, in vocabulary-id order.
    pub fn all() -> Vec<AbstractToken> {
        let mut v: Vec<AbstractToken> = PLAIN.iter().map(|&(t, _)| t).collect();
        v.push(AbstractToken::VariableIp);
        v.extend((1..=MAX_VARIABLE_INDEX).map(AbstractToken::Variable));
        v
    }

    fn statement(kind: NodeKind) -> Option<AbstractToken> {
        Some(match kind {
            NodeKind::VariableDeclarator => AbstractToken::VariableDeclarator,
            NodeKind::AssignmentStatement => AbstractToken::AssignmentStatement,
            NodeKind::MethodInvocation => AbstractToken::MethodInvocation,
            NodeKind::IfSelection => AbstractToken::IfSelection,
            NodeKind::ForLoop => AbstractToken::ForLoop,
            NodeKind::WhileLoop => AbstractToken::WhileLoop,
            NodeKind::BreakStatement => AbstractToken::BreakStatement,
            NodeKind::ContinueStatement => AbstractToken::ContinueStatement,
            NodeKind::ReturnStatement => AbstractToken::ReturnStatement,
            NodeKind::AssertStatement => AbstractToken::AssertStatement,
            _ => return None,
        })
    }

    fn binary(op: BinaryOp) -> AbstractToken {
        match op {
            BinaryOp::Eq => AbstractToken::Equal,
            BinaryOp::Ne => AbstractToken::NotEqual,
            BinaryOp::Lt => AbstractToken::Less,
            BinaryOp::Gt => AbstractToken::Greater,
            BinaryOp::Le => AbstractToken::LessEqual,
            BinaryOp::Ge => AbstractToken::GreaterEqual,
            BinaryOp::LogicalAnd => AbstractToken::LogicalAnd,
            BinaryOp::LogicalOr => AbstractToken::LogicalOr,
            BinaryOp::BitAnd => AbstractToken::InclusiveAnd,
            BinaryOp::BitOr => AbstractToken::InclusiveOr,
            BinaryOp::Add => AbstractToken::Plus,
            BinaryOp::Sub => AbstractToken::Minus,
            BinaryOp::Mul => AbstractToken::Times,
            BinaryOp::Div => AbstractToken::Divide,
            BinaryOp::Mod => AbstractToken::Mod,
        }
    }

    fn unary(op: UnaryOp) -> AbstractToken {
        match op {
            UnaryOp::Not => AbstractToken::LogicalNot,
            UnaryOp::Neg => AbstractToken::Minus,
            UnaryOp::Deref => AbstractToken::Dereference,
            UnaryOp::AddressOf => AbstractToken::AddressOf,
        }
    }

    /// Base-type atom of a declaration. Typedef names are taken to name
    /// structures.
    fn type_atom(ty: &TypeDescriptor) -> AbstractToken {
        if ty.is_struct {
            return AbstractToken::StructType;
        }
        let has = |k: &str| ty.specifiers.iter().any(|s| s == k);
        if has("char") {
            AbstractToken::CharType
        } else if has("float") || has("double") {
            AbstractToken::FloatType
        } else if has("void") {
            AbstractToken::VoidType
        } else if ["int", "long", "short", "unsigned", "signed"].iter().any(|k| has(k)) {
            AbstractToken::IntType
        } else {
            AbstractToken::StructType
        }
    }
}

impl fmt::Display for AbstractToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbstractToken::VariableIp => f.write_str("VariableIP"),
            AbstractToken::Variable(k) => write!(f, "Variable{k}"),
            plain => {
                let s = PLAIN
                    .iter()
                    .find(|(t, _)| t == plain)
                    .map(|(_, s)| *s)
                    .expect("every plain token has a spelling");
                f.write_str(s)
            }
        }
    }
}

impl FromStr for AbstractToken {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "VariableIP" {
            return Ok(AbstractToken::VariableIp);
        }
        if let Some(&(t, _)) = PLAIN.iter().find(|(_, sp)| *sp == s) {
            return Ok(t);
        }
        if let Some(k) = s.strip_prefix("Variable").and_then(|d| d.parse::<u32>().ok()) {
            if (1..=MAX_VARIABLE_INDEX).contains(&k) && s == format!("Variable{k}") {
                return Ok(AbstractToken::Variable(k));
            }
        }
        Err(format!("`{s}` is not in the token vocabulary"))
    }
}

/// Abstract token sequence of one warning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub instance_id: String,
    pub tokens: Vec<AbstractToken>,
    pub label: Option<Label>,
}

impl TokenSequence {
    pub fn spellings(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("statement kind {0} has no abstraction")]
    UnknownNodeKind(String),
    #[error("CFG node {0} has no statement in this function")]
    MissingStatement(NodeId),
}

/// Path nodes that mention the IP variable or a variable influencing it.
/// The final path node (the IP node) is always kept.
pub fn select_nodes(
    cfg: &ControlFlowGraph,
    path: &[NodeId],
    influences: &BTreeSet<String>,
) -> Vec<NodeId> {
    let last = path.len().saturating_sub(1);
    path.iter()
        .enumerate()
        .filter(|&(i, &n)| i == last || cfg.node(n).mentions_any(influences))
        .map(|(_, &n)| n)
        .collect()
}

struct Emitter<'a> {
    tree: &'a SyntaxTree,
    ip: &'a str,
    vars: HashMap<String, u32>,
    out: Vec<AbstractToken>,
}

impl Emitter<'_> {
    fn variable(&mut self, name: &str) {
        let tok = if name == self.ip {
            AbstractToken::VariableIp
        } else {
            let next = (self.vars.len() as u32 + 1).min(MAX_VARIABLE_INDEX);
            AbstractToken::Variable(*self.vars.entry(name.to_string()).or_insert(next))
        };
        self.out.push(tok);
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Ident(name) => self.variable(name),
            ExprKind::Constant(_) => self.out.push(AbstractToken::Constant),
            ExprKind::Null => self.out.push(AbstractToken::Null),
            ExprKind::Binary { op, lhs, rhs } => {
                self.expr(lhs);
                self.out.push(AbstractToken::binary(*op));
                self.expr(rhs);
            }
            ExprKind::Unary { op, operand } => {
                self.out.push(AbstractToken::unary(*op));
                self.expr(operand);
            }
            // Members are not tracked separately from their base.
            ExprKind::Member { base, .. } => self.expr(base),
            ExprKind::Call { callee, args } => {
                self.out.push(if self.tree.defines(callee) {
                    AbstractToken::UserDefinedCall
                } else {
                    AbstractToken::LibraryCall
                });
                for a in args {
                    self.expr(a);
                }
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), TokenError> {
        let kind = AbstractToken::statement(s.node_kind())
            .ok_or_else(|| TokenError::UnknownNodeKind(s.node_kind().to_string()))?;
        self.out.push(kind);
        match &s.kind {
            StmtKind::Decl(d) => {
                self.out.push(AbstractToken::type_atom(&d.ty));
                for _ in 0..d.ty.pointer_depth {
                    self.out.push(AbstractToken::Pointer);
                }
                self.variable(&d.name);
                if let Some(init) = &d.init {
                    self.expr(init);
                }
            }
            StmtKind::Assign { target, value } => {
                self.expr(target);
                self.out.push(AbstractToken::Assign);
                self.expr(value);
            }
            StmtKind::Call(e) | StmtKind::Assert(e) => self.expr(e),
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => self.expr(cond),
            StmtKind::For { cond, .. } => {
                if let Some(c) = cond {
                    self.expr(c);
                }
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e);
                }
            }
            StmtKind::Break | StmtKind::Continue => {}
            StmtKind::Expr(_) | StmtKind::Block(_) => unreachable!("rejected above"),
        }
        Ok(())
    }
}

/// Emits, for each node in order, its statement-kind token followed by the
/// in-order abstraction of the statement's own expressions.
pub fn abstract_tokens(
    cfg: &ControlFlowGraph,
    nodes: &[NodeId],
    func: &FunctionDef,
    tree: &SyntaxTree,
    anchor: &IpAnchor,
) -> Result<Vec<AbstractToken>, TokenError> {
    let mut stmts: HashMap<usize, &Stmt> = HashMap::new();
    func.walk(&mut |s| {
        stmts.insert(s.id, s);
    });
    let mut em = Emitter {
        tree,
        ip: &anchor.ip_variable,
        vars: HashMap::new(),
        out: Vec::new(),
    };
    for &n in nodes {
        let node = cfg.node(n);
        let stmt = match (node.kind, node.ast_ref) {
            (CfgNodeKind::Stmt(_), Some(id)) => *stmts.get(&id).ok_or(TokenError::MissingStatement(n))?,
            _ => return Err(TokenError::MissingStatement(n)),
        };
        em.stmt(stmt)?;
    }
    Ok(em.out)
}

/// Which end of an over-long sequence is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncate {
    /// Keep the head, drop the tail.
    #[default]
    Tail,
    /// Keep the tail, drop the head.
    Head,
}

impl FromStr for Truncate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tail" => Ok(Truncate::Tail),
            "head" => Ok(Truncate::Head),
            _ => Err(format!("expected `tail` or `head`, got `{s}`")),
        }
    }
}

impl fmt::Display for Truncate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Truncate::Tail => "tail",
            Truncate::Head => "head",
        })
    }
}

/// Token-id table. Ids are line numbers of the vocabulary file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    spellings: Vec<String>,
    ids: HashMap<String, u32>,
}

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const SEP_ID: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabularyError {
    #[error("vocabulary must start with [PAD], [UNK], [CLS], [SEP]")]
    MissingSpecials,
    #[error("duplicate spelling `{0}`")]
    Duplicate(String),
}

impl Vocabulary {
    /// The vocabulary of every token this crate can emit.
    pub fn builtin() -> Self {
        Self::from_spellings(AbstractToken::all().iter().map(|t| t.to_string()).collect())
            .expect("builtin vocabulary is well-formed")
    }

    pub fn from_spellings(spellings: Vec<String>) -> Result<Self, VocabularyError> {
        if spellings.len() < 4 || spellings[..4] != ["[PAD]", "[UNK]", "[CLS]", "[SEP]"] {
            return Err(VocabularyError::MissingSpecials);
        }
        let mut ids = HashMap::new();
        for (i, s) in spellings.iter().enumerate() {
            if ids.insert(s.clone(), i as u32).is_some() {
                return Err(VocabularyError::Duplicate(s.clone()));
            }
        }
        Ok(Self { spellings, ids })
    }

    /// Parses a newline-separated vocabulary file.
    pub fn from_text(text: &str) -> Result<Self, VocabularyError> {
        Self::from_spellings(text.lines().map(str::to_string).collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = self.spellings.join("\n");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of [`to_text`](Self::to_text).
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.spellings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spellings.is_empty()
    }

    /// Id of `spelling`, or the `[UNK]` id.
    pub fn id(&self, spelling: &str) -> u32 {
        self.ids.get(spelling).copied().unwrap_or(UNK_ID)
    }

    pub fn spelling(&self, id: u32) -> Option<&str> {
        self.spellings.get(id as usize).map(String::as_str)
    }
}

/// Model-ready sequence. Unpadded until [`pad_to`](Self::pad_to) is called.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSequence {
    pub ids: Vec<u32>,
    /// 1 for real tokens (including `[CLS]`/`[SEP]`), 0 for `[PAD]`.
    pub mask: Vec<u8>,
    /// Segment id per position; a single segment is used.
    pub segment: Vec<u8>,
}

impl InputSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of non-pad positions.
    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m == 1).count()
    }

    /// Extends with `[PAD]` up to `len` positions.
    pub fn pad_to(&mut self, len: usize) {
        while self.ids.len() < len {
            self.ids.push(PAD_ID);
            self.mask.push(0);
            self.segment.push(0);
        }
    }
}

/// `[CLS] content [SEP]`, with content truncated to `max_len - 2` tokens.
pub fn to_model_input<S: AsRef<str>>(
    content: &[S],
    vocab: &Vocabulary,
    max_len: usize,
    truncate: Truncate,
) -> InputSequence {
    assert!(max_len >= 2, "max_len must leave room for [CLS] and [SEP]");
    let keep = content.len().min(max_len - 2);
    let kept = match truncate {
        Truncate::Tail => &content[..keep],
        Truncate::Head => &content[content.len() - keep..],
    };
    let mut ids = Vec::with_capacity(keep + 2);
    ids.push(CLS_ID);
    ids.extend(kept.iter().map(|s| vocab.id(s.as_ref())));
    ids.push(SEP_ID);
    let n = ids.len();
    InputSequence {
        ids,
        mask: vec![1; n],
        segment: vec![0; n],
    }
}
