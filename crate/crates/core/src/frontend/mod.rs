//! C-subset frontend: lexing, parsing and resolving a warning report to the
//! statement it points at.
//!
//! The subset covers function definitions and prototypes, file-scope and
//! local declarations (including `struct X *` and typedef-style names),
//! assignments, call statements, `assert`, `if`/`else`, `for`, `while`,
//! `break`, `continue` and `return`. There is no preprocessor.

pub mod ast;
mod lexer;
mod parser;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{NodeKind, StmtId, SyntaxTree};
pub use lexer::{Keyword, Punct, Token, TokenKind};
pub use parser::parse_translation_unit;

use crate::corpus::Label;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceLocation {
    pub file: Arc<str>,
    /// 1-based.
    pub line: u32,
    /// 1-based, counted in characters.
    pub column: u32,
}

impl SourceLocation {
    pub fn new(file: &str, line: u32, column: u32) -> Self {
        Self {
            file: Arc::from(file),
            line,
            column,
        }
    }
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrontendError {
    #[error("{loc}: lex error: {message}")]
    Lex { loc: SourceLocation, message: String },
    #[error("{loc}: parse error: found `{found}`, expected one of {expected:?}")]
    Parse {
        loc: SourceLocation,
        found: String,
        expected: Vec<String>,
    },
    #[error("no statement of function `{function}` at line {line}")]
    AnchorNotFound { function: String, line: u32 },
    #[error("variable `{variable}` does not occur in the statement at line {line}")]
    VariableNotAtIp { variable: String, line: u32 },
}

pub fn lex(file: &str, source: &str) -> Result<Vec<Token>, FrontendError> {
    lexer::lex(file, source)
}

/// Lexes and parses one source file.
pub fn parse_source(file: &str, source: &str) -> Result<SyntaxTree, FrontendError> {
    let tokens = lex(file, source)?;
    parse_translation_unit(file, &tokens)
}

/// One row of a warning report file (JSON Lines).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarningReport {
    pub file: String,
    pub function: String,
    pub line: u32,
    pub variable: String,
    #[serde(default)]
    pub label: Option<Label>,
    pub id: String,
}

/// The statement a warning points at, together with its IP variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpAnchor {
    pub function: String,
    pub stmt: StmtId,
    pub ip_variable: String,
    pub location: SourceLocation,
}

/// Resolves `report` to the first statement (in source order) of the named
/// function whose own span covers `report.line` and mentions the variable.
///
/// Control statements span only their header, so a warning on an `if` line
/// anchors at the `if` rather than at a statement of its body.
pub fn locate_ip(tree: &SyntaxTree, report: &WarningReport) -> Result<IpAnchor, FrontendError> {
    let not_found = || FrontendError::AnchorNotFound {
        function: report.function.clone(),
        line: report.line,
    };
    let func = tree.function(&report.function).ok_or_else(not_found)?;
    let mut on_line = Vec::new();
    func.walk(&mut |s| {
        if s.node_kind() != NodeKind::Block && s.loc.line <= report.line && report.line <= s.end_line
        {
            on_line.push(s);
        }
    });
    if on_line.is_empty() {
        return Err(not_found());
    }
    let stmt = on_line
        .into_iter()
        .find(|s| s.mentions(&report.variable))
        .ok_or_else(|| FrontendError::VariableNotAtIp {
            variable: report.variable.clone(),
            line: report.line,
        })?;
    Ok(IpAnchor {
        function: report.function.clone(),
        stmt: stmt.id,
        ip_variable: report.variable.clone(),
        location: stmt.loc.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::ast::*;
    use super::*;
    use crate::fixtures::FIG1_SOURCE;

    fn parse(src: &str) -> SyntaxTree {
        parse_source("t.c", src).unwrap()
    }

    fn report(function: &str, line: u32, variable: &str) -> WarningReport {
        WarningReport {
            file: "fig1.c".into(),
            function: function.into(),
            line,
            variable: variable.into(),
            label: None,
            id: "w".into(),
        }
    }

    #[test]
    fn fig1_bad_structure() {
        let tree = parse(FIG1_SOURCE);
        let bad = tree.function("bad").unwrap();
        let kinds: Vec<NodeKind> = bad.body.stmts.iter().map(|s| s.node_kind()).collect();
        assert_eq!(kinds, vec![NodeKind::VariableDeclarator, NodeKind::IfSelection]);
        let StmtKind::Decl(d) = &bad.body.stmts[0].kind else {
            panic!()
        };
        assert_eq!(d.ty.base, "twoIntsStruct");
        assert_eq!(d.ty.pointer_depth, 1);
        assert_eq!(d.init.as_ref().unwrap().kind, ExprKind::Null);
        let StmtKind::If {
            then_branch,
            else_branch,
            ..
        } = &bad.body.stmts[1].kind
        else {
            panic!()
        };
        assert_eq!(then_branch.node_kind(), NodeKind::MethodInvocation);
        assert!(else_branch.is_none());
    }

    #[test]
    fn empty_body() {
        let tree = parse("void f(){}");
        assert!(tree.function("f").unwrap().body.stmts.is_empty());
    }

    #[test]
    fn if_without_else() {
        let tree = parse("void f(){ if(x) return; }");
        let f = tree.function("f").unwrap();
        let StmtKind::If {
            then_branch,
            else_branch,
            ..
        } = &f.body.stmts[0].kind
        else {
            panic!()
        };
        assert_eq!(then_branch.node_kind(), NodeKind::ReturnStatement);
        assert!(else_branch.is_none());
    }

    #[test]
    fn multi_declarator_split() {
        let tree = parse("void f(){\n int a = 1, *b, c;\n}");
        let f = tree.function("f").unwrap();
        assert_eq!(f.body.stmts.len(), 3);
        assert!(f.body.stmts.iter().all(|s| s.loc.line == 2));
        let StmtKind::Decl(b) = &f.body.stmts[1].kind else {
            panic!()
        };
        assert_eq!((b.name.as_str(), b.ty.pointer_depth), ("b", 1));
    }

    #[test]
    fn assert_and_struct_types() {
        let tree = parse("struct node *g; int h(struct node *n); void f(struct node *n){ assert(n != NULL); n->v = h(n); }");
        let f = tree.function("f").unwrap();
        assert_eq!(f.body.stmts[0].node_kind(), NodeKind::AssertStatement);
        assert_eq!(f.body.stmts[1].node_kind(), NodeKind::AssignmentStatement);
        assert!(!tree.defines("h"));
    }

    #[test]
    fn expression_precedence() {
        let tree = parse("void f(){ x = a + b * c == d & e || !g; }");
        let StmtKind::Assign { value, .. } = &tree.function("f").unwrap().body.stmts[0].kind else {
            panic!()
        };
        let ExprKind::Binary { op, .. } = &value.kind else {
            panic!()
        };
        assert_eq!(*op, BinaryOp::LogicalOr);
    }

    #[test]
    fn rejects_outside_subset() {
        for src in [
            "void f(){ switch(x){} }",
            "void f(){ x++; }",
            "void f(){ goto l; }",
            "void f(){ 1 = x; }",
            "void f(){ x = 1 }",
            "void f(){",
        ] {
            assert!(
                matches!(parse_source("t.c", src), Err(FrontendError::Parse { .. } | FrontendError::Lex { .. })),
                "{src}"
            );
        }
    }

    #[test]
    fn locate_fig1() {
        let tree = parse_source("fig1.c", FIG1_SOURCE).unwrap();
        let anchor = locate_ip(&tree, &report("bad", 4, "twoInts")).unwrap();
        let bad = tree.function("bad").unwrap();
        assert_eq!(bad.find_stmt(anchor.stmt).unwrap().node_kind(), NodeKind::IfSelection);
        assert_eq!(anchor.location.line, 4);

        assert!(matches!(
            locate_ip(&tree, &report("bad", 4, "noSuchVar")),
            Err(FrontendError::VariableNotAtIp { .. })
        ));
        assert!(matches!(
            locate_ip(&tree, &report("bad", 99, "twoInts")),
            Err(FrontendError::AnchorNotFound { .. })
        ));
        assert!(matches!(
            locate_ip(&tree, &report("nope", 4, "twoInts")),
            Err(FrontendError::AnchorNotFound { .. })
        ));
    }

    #[test]
    fn statement_line_is_first_token_line() {
        let src = "void f(int a)\n{\n  if (a\n  > 1)\n    a = 2;\n  while (a)\n  {\n    a = a - 1;\n  }\n}\n";
        let tokens = lex("t.c", src).unwrap();
        let tree = parse_translation_unit("t.c", &tokens).unwrap();
        tree.function("f").unwrap().walk(&mut |s| {
            let first = tokens
                .iter()
                .find(|t| t.loc.line == s.loc.line && t.loc.column == s.loc.column);
            assert!(first.is_some());
        });
        let rep = report("f", 4, "a");
        let anchor = locate_ip(&tree, &rep).unwrap();
        assert_eq!(anchor.location.line, 3);
    }
}
