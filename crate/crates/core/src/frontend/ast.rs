//! Syntax tree for the C subset.
//!
//! Statements carry a [`StmtId`] that is unique within a translation unit and
//! assigned in pre-order, so CFG nodes can refer back to the statement they
//! were built from.

use std::fmt;

use super::SourceLocation;

pub type StmtId = usize;

/// Every node kind the frontend can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    TranslationUnit,
    FunctionDef,
    VariableDeclarator,
    AssignmentStatement,
    MethodInvocation,
    IfSelection,
    ForLoop,
    WhileLoop,
    BreakStatement,
    ContinueStatement,
    ReturnStatement,
    AssertStatement,
    ExpressionStatement,
    Block,
    Identifier,
    Constant,
    NullLiteral,
    BinaryOp,
    UnaryOp,
    MemberAccess,
    Call,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::TranslationUnit => "TranslationUnit",
            NodeKind::FunctionDef => "FunctionDef",
            NodeKind::VariableDeclarator => "VariableDeclarator",
            NodeKind::AssignmentStatement => "AssignmentStatement",
            NodeKind::MethodInvocation => "MethodInvocation",
            NodeKind::IfSelection => "IfSelection",
            NodeKind::ForLoop => "ForLoop",
            NodeKind::WhileLoop => "WhileLoop",
            NodeKind::BreakStatement => "BreakStatement",
            NodeKind::ContinueStatement => "ContinueStatement",
            NodeKind::ReturnStatement => "ReturnStatement",
            NodeKind::AssertStatement => "AssertStatement",
            NodeKind::ExpressionStatement => "ExpressionStatement",
            NodeKind::Block => "Block",
            NodeKind::Identifier => "Identifier",
            NodeKind::Constant => "Constant",
            NodeKind::NullLiteral => "NullLiteral",
            NodeKind::BinaryOp => "BinaryOp",
            NodeKind::UnaryOp => "UnaryOp",
            NodeKind::MemberAccess => "MemberAccess",
            NodeKind::Call => "Call",
        }
    }

    /// Statement kinds that have an entry in the abstraction vocabulary.
    pub fn is_abstractable_statement(self) -> bool {
        matches!(
            self,
            NodeKind::VariableDeclarator
                | NodeKind::AssignmentStatement
                | NodeKind::MethodInvocation
                | NodeKind::IfSelection
                | NodeKind::ForLoop
                | NodeKind::WhileLoop
                | NodeKind::BreakStatement
                | NodeKind::ContinueStatement
                | NodeKind::ReturnStatement
                | NodeKind::AssertStatement
        )
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Type of a declaration: the specifier tokens as written, plus the pointer
/// depth of the particular declarator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDescriptor {
    pub specifiers: Vec<String>,
    /// Core type name: `int`, `char`, the struct tag, or a typedef name.
    pub base: String,
    pub is_struct: bool,
    pub pointer_depth: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    LogicalAnd,
    LogicalOr,
    BitAnd,
    BitOr,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinaryOp {
    pub fn spelling(self) -> &'static str {
        match self {
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Gt => ">",
            BinaryOp::Le => "<=",
            BinaryOp::Ge => ">=",
            BinaryOp::LogicalAnd => "&&",
            BinaryOp::LogicalOr => "||",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitOr => "|",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "%",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
    Deref,
    AddressOf,
}

impl UnaryOp {
    pub fn spelling(self) -> &'static str {
        match self {
            UnaryOp::Not => "!",
            UnaryOp::Neg => "-",
            UnaryOp::Deref => "*",
            UnaryOp::AddressOf => "&",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub loc: SourceLocation,
    /// Number of redundant parenthesis pairs written around this expression.
    pub parens: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Ident(String),
    /// Integer, floating, character or string literal.
    Constant(String),
    Null,
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Member {
        base: Box<Expr>,
        member: String,
        arrow: bool,
    },
    Call {
        callee: String,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn node_kind(&self) -> NodeKind {
        match self.kind {
            ExprKind::Ident(_) => NodeKind::Identifier,
            ExprKind::Constant(_) => NodeKind::Constant,
            ExprKind::Null => NodeKind::NullLiteral,
            ExprKind::Binary { .. } => NodeKind::BinaryOp,
            ExprKind::Unary { .. } => NodeKind::UnaryOp,
            ExprKind::Member { .. } => NodeKind::MemberAccess,
            ExprKind::Call { .. } => NodeKind::Call,
        }
    }

    /// The variable a member access or dereference ultimately reads through.
    pub fn base_variable(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Ident(name) => Some(name),
            ExprKind::Member { base, .. } => base.base_variable(),
            ExprKind::Unary {
                op: UnaryOp::Deref | UnaryOp::AddressOf,
                operand,
            } => operand.base_variable(),
            _ => None,
        }
    }

    /// Visits identifier names in evaluation (in-order) position. Callee
    /// names and member names are not identifiers.
    pub fn for_each_ident<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match &self.kind {
            ExprKind::Ident(name) => f(name),
            ExprKind::Constant(_) | ExprKind::Null => {}
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.for_each_ident(f);
                rhs.for_each_ident(f);
            }
            ExprKind::Unary { operand, .. } => operand.for_each_ident(f),
            ExprKind::Member { base, .. } => base.for_each_ident(f),
            ExprKind::Call { args, .. } => args.iter().for_each(|a| a.for_each_ident(f)),
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        let mut found = false;
        self.for_each_ident(&mut |id| found |= id == name);
        found
    }

    pub fn for_each_callee<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match &self.kind {
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.for_each_callee(f);
                rhs.for_each_callee(f);
            }
            ExprKind::Unary { operand, .. } => operand.for_each_callee(f),
            ExprKind::Member { base, .. } => base.for_each_callee(f),
            ExprKind::Call { callee, args } => {
                f(callee);
                args.iter().for_each(|a| a.for_each_callee(f));
            }
            _ => {}
        }
    }
}

/// One declarator of a (possibly multi-declarator) declaration.
#[derive(Debug, Clone, PartialEq)]
pub struct Declarator {
    pub ty: TypeDescriptor,
    pub name: String,
    pub init: Option<Expr>,
    /// False for the second and later declarators of one declaration.
    pub first_in_group: bool,
    /// True for the declarator followed by the declaration's `;`.
    pub last_in_group: bool,
}

/// Init or step clause of a `for` header.
#[derive(Debug, Clone, PartialEq)]
pub enum ForClause {
    Assign { target: Expr, value: Expr },
    Expr(Expr),
}

impl ForClause {
    fn exprs(&self) -> Vec<&Expr> {
        match self {
            ForClause::Assign { target, value } => vec![target, value],
            ForClause::Expr(e) => vec![e],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub loc: SourceLocation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub id: StmtId,
    /// Location of the statement's first token.
    pub loc: SourceLocation,
    /// Last line of the statement's own span: the terminating `;` for simple
    /// statements, the closing `)` of the header for control statements.
    pub end_line: u32,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Decl(Declarator),
    Assign {
        target: Expr,
        value: Expr,
    },
    /// A call statement; always holds an unparenthesized `Call` expression.
    Call(Expr),
    Assert(Expr),
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    For {
        init: Option<ForClause>,
        cond: Option<Expr>,
        step: Option<ForClause>,
        body: Box<Stmt>,
    },
    Break,
    Continue,
    Return(Option<Expr>),
    Expr(Expr),
    Block(Block),
}

impl Stmt {
    pub fn node_kind(&self) -> NodeKind {
        match &self.kind {
            StmtKind::Decl(_) => NodeKind::VariableDeclarator,
            StmtKind::Assign { .. } => NodeKind::AssignmentStatement,
            StmtKind::Call(_) => NodeKind::MethodInvocation,
            StmtKind::Assert(_) => NodeKind::AssertStatement,
            StmtKind::If { .. } => NodeKind::IfSelection,
            StmtKind::While { .. } => NodeKind::WhileLoop,
            StmtKind::For { .. } => NodeKind::ForLoop,
            StmtKind::Break => NodeKind::BreakStatement,
            StmtKind::Continue => NodeKind::ContinueStatement,
            StmtKind::Return(_) => NodeKind::ReturnStatement,
            StmtKind::Expr(_) => NodeKind::ExpressionStatement,
            StmtKind::Block(_) => NodeKind::Block,
        }
    }

    /// Expressions that belong to this statement itself, excluding nested
    /// statements (branch and loop bodies).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Decl(d) => d.init.iter().collect(),
            StmtKind::Assign { target, value } => vec![target, value],
            StmtKind::Call(e) | StmtKind::Assert(e) | StmtKind::Expr(e) => vec![e],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::For {
                init, cond, step, ..
            } => {
                let mut v: Vec<&Expr> = Vec::new();
                if let Some(c) = init {
                    v.extend(c.exprs());
                }
                v.extend(cond.iter());
                if let Some(c) = step {
                    v.extend(c.exprs());
                }
                v
            }
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Break | StmtKind::Continue | StmtKind::Block(_) => Vec::new(),
        }
    }

    /// True if `name` occurs as an identifier in this statement's own part.
    pub fn mentions(&self, name: &str) -> bool {
        if let StmtKind::Decl(d) = &self.kind {
            if d.name == name {
                return true;
            }
        }
        self.own_exprs().iter().any(|e| e.mentions(name))
    }

    /// Direct child statements.
    pub fn children(&self) -> Vec<&Stmt> {
        match &self.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                let mut v = vec![then_branch.as_ref()];
                v.extend(else_branch.as_deref());
                v
            }
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => vec![body.as_ref()],
            StmtKind::Block(b) => b.stmts.iter().collect(),
            _ => Vec::new(),
        }
    }

    /// Pre-order walk over this statement and all nested statements.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub ty: TypeDescriptor,
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    pub ret: TypeDescriptor,
    pub name: String,
    pub params: Vec<Param>,
    /// Parameter list written as `(void)`.
    pub void_params: bool,
    pub loc: SourceLocation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub sig: Signature,
    pub body: Block,
}

impl FunctionDef {
    pub fn name(&self) -> &str {
        &self.sig.name
    }

    /// Pre-order walk over every statement in the body.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        for s in &self.body.stmts {
            s.walk(f);
        }
    }

    pub fn find_stmt(&self, id: StmtId) -> Option<&Stmt> {
        let mut found = None;
        self.walk(&mut |s| {
            if s.id == id {
                found = Some(s);
            }
        });
        found
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Function(FunctionDef),
    Prototype(Signature),
    /// A file-scope declarator.
    Global(Stmt),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntaxTree {
    pub file: String,
    pub items: Vec<Item>,
}

impl SyntaxTree {
    pub fn functions(&self) -> impl Iterator<Item = &FunctionDef> {
        self.items.iter().filter_map(|i| match i {
            Item::Function(f) => Some(f),
            _ => None,
        })
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions().find(|f| f.name() == name)
    }

    /// True if a function with this name has a body in this unit.
    pub fn defines(&self, name: &str) -> bool {
        self.function(name).is_some()
    }

    /// Token spellings of the whole unit, in source order.
    pub fn spellings(&self) -> Vec<String> {
        let mut out = Spellings(Vec::new());
        for item in &self.items {
            match item {
                Item::Function(f) => {
                    out.signature(&f.sig);
                    out.block(&f.body);
                }
                Item::Prototype(sig) => {
                    out.signature(sig);
                    out.push(";");
                }
                Item::Global(s) => out.stmt(s),
            }
        }
        out.0
    }
}

struct Spellings(Vec<String>);

impl Spellings {
    fn push(&mut self, s: &str) {
        self.0.push(s.to_string());
    }

    fn ty(&mut self, ty: &TypeDescriptor) {
        for s in &ty.specifiers {
            self.push(s);
        }
    }

    fn stars(&mut self, n: u32) {
        for _ in 0..n {
            self.push("*");
        }
    }

    fn signature(&mut self, sig: &Signature) {
        self.ty(&sig.ret);
        self.stars(sig.ret.pointer_depth);
        self.push(&sig.name);
        self.push("(");
        if sig.void_params {
            self.push("void");
        }
        for (i, p) in sig.params.iter().enumerate() {
            if i > 0 {
                self.push(",");
            }
            self.ty(&p.ty);
            self.stars(p.ty.pointer_depth);
            if let Some(n) = &p.name {
                self.push(n);
            }
        }
        self.push(")");
    }

    fn block(&mut self, b: &Block) {
        self.push("{");
        for s in &b.stmts {
            self.stmt(s);
        }
        self.push("}");
    }

    fn clause(&mut self, c: &ForClause) {
        match c {
            ForClause::Assign { target, value } => {
                self.expr(target);
                self.push("=");
                self.expr(value);
            }
            ForClause::Expr(e) => self.expr(e),
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl(d) => {
                if d.first_in_group {
                    self.ty(&d.ty);
                }
                self.stars(d.ty.pointer_depth);
                self.push(&d.name);
                if let Some(init) = &d.init {
                    self.push("=");
                    self.expr(init);
                }
                self.push(if d.last_in_group { ";" } else { "," });
            }
            StmtKind::Assign { target, value } => {
                self.expr(target);
                self.push("=");
                self.expr(value);
                self.push(";");
            }
            StmtKind::Call(e) | StmtKind::Expr(e) => {
                self.expr(e);
                self.push(";");
            }
            StmtKind::Assert(e) => {
                self.push("assert");
                self.push("(");
                self.expr(e);
                self.push(")");
                self.push(";");
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.push("if");
                self.push("(");
                self.expr(cond);
                self.push(")");
                self.stmt(then_branch);
                if let Some(e) = else_branch {
                    self.push("else");
                    self.stmt(e);
                }
            }
            StmtKind::While { cond, body } => {
                self.push("while");
                self.push("(");
                self.expr(cond);
                self.push(")");
                self.stmt(body);
            }
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => {
                self.push("for");
                self.push("(");
                if let Some(c) = init {
                    self.clause(c);
                }
                self.push(";");
                if let Some(c) = cond {
                    self.expr(c);
                }
                self.push(";");
                if let Some(c) = step {
                    self.clause(c);
                }
                self.push(")");
                self.stmt(body);
            }
            StmtKind::Break => {
                self.push("break");
                self.push(";");
            }
            StmtKind::Continue => {
                self.push("continue");
                self.push(";");
            }
            StmtKind::Return(e) => {
                self.push("return");
                if let Some(e) = e {
                    self.expr(e);
                }
                self.push(";");
            }
            StmtKind::Block(b) => self.block(b),
        }
    }

    fn expr(&mut self, e: &Expr) {
        for _ in 0..e.parens {
            self.push("(");
        }
        match &e.kind {
            ExprKind::Ident(n) | ExprKind::Constant(n) => self.push(n),
            ExprKind::Null => self.push("NULL"),
            ExprKind::Binary { op, lhs, rhs } => {
                self.expr(lhs);
                self.push(op.spelling());
                self.expr(rhs);
            }
            ExprKind::Unary { op, operand } => {
                self.push(op.spelling());
                self.expr(operand);
            }
            ExprKind::Member {
                base,
                member,
                arrow,
            } => {
                self.expr(base);
                self.push(if *arrow { "->" } else { "." });
                self.push(member);
            }
            ExprKind::Call { callee, args } => {
                self.push(callee);
                self.push("(");
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        self.push(",");
                    }
                    self.expr(a);
                }
                self.push(")");
            }
        }
        for _ in 0..e.parens {
            self.push(")");
        }
    }
}
