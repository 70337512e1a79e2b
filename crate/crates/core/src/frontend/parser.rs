//! Recursive-descent parser for the C subset.

use super::ast::*;
use super::lexer::{Keyword, Punct, Token, TokenKind};
use super::{FrontendError, SourceLocation};

pub struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    next_id: StmtId,
    file: &'a str,
}

type PResult<T> = Result<T, FrontendError>;

/// Parses a whole translation unit from a token stream produced by
/// [`lex`](super::lex).
pub fn parse_translation_unit(file: &str, tokens: &[Token]) -> PResult<SyntaxTree> {
    let mut p = Parser {
        tokens,
        pos: 0,
        next_id: 0,
        file,
    };
    let mut items = Vec::new();
    while !p.at_end() {
        p.item(&mut items)?;
    }
    Ok(SyntaxTree {
        file: file.to_string(),
        items,
    })
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self, ahead: usize) -> Option<&'a Token> {
        self.tokens.get(self.pos + ahead)
    }

    fn peek_punct(&self, ahead: usize, p: Punct) -> bool {
        self.peek(ahead).is_some_and(|t| t.is_punct(p))
    }

    fn peek_keyword(&self, k: Keyword) -> bool {
        self.peek(0).is_some_and(|t| t.is_keyword(k))
    }

    fn loc(&self) -> SourceLocation {
        match self.peek(0).or_else(|| self.tokens.last()) {
            Some(t) => t.loc.clone(),
            None => SourceLocation::new(self.file, 1, 1),
        }
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(FrontendError::Parse {
            loc: self.loc(),
            found: self
                .peek(0)
                .map(|t| t.spelling.clone())
                .unwrap_or_else(|| "end of input".into()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn bump(&mut self) -> &'a Token {
        let t = &self.tokens[self.pos];
        self.pos += 1;
        t
    }

    fn eat_punct(&mut self, p: Punct) -> bool {
        if self.peek_punct(0, p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: Punct) -> PResult<&'a Token> {
        if self.peek_punct(0, p) {
            Ok(self.bump())
        } else {
            self.error(&[p.spelling()])
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, SourceLocation)> {
        match self.peek(0) {
            Some(Token {
                kind: TokenKind::Ident(name),
                loc,
                ..
            }) => {
                self.pos += 1;
                Ok((name.clone(), loc.clone()))
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn fresh_id(&mut self) -> StmtId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn stars(&mut self) -> u32 {
        let mut n = 0;
        while self.eat_punct(Punct::Star) {
            n += 1;
        }
        n
    }

    fn type_specifiers(&mut self) -> PResult<TypeDescriptor> {
        let mut specifiers = Vec::new();
        let mut base: Option<String> = None;
        let mut is_struct = false;
        while let Some(tok) = self.peek(0) {
            match &tok.kind {
                TokenKind::Keyword(Keyword::Const) => {
                    specifiers.push(self.bump().spelling.clone());
                }
                TokenKind::Keyword(Keyword::Struct) if base.is_none() => {
                    specifiers.push(self.bump().spelling.clone());
                    let (tag, _) = self.expect_ident()?;
                    specifiers.push(tag.clone());
                    base = Some(tag);
                    is_struct = true;
                }
                TokenKind::Keyword(k) if k.is_type_specifier() && !is_struct => {
                    let s = self.bump().spelling.clone();
                    specifiers.push(s.clone());
                    base = Some(s);
                }
                TokenKind::Ident(name) if base.is_none() => {
                    specifiers.push(name.clone());
                    base = Some(name.clone());
                    self.pos += 1;
                }
                _ => break,
            }
        }
        match base {
            Some(base) => Ok(TypeDescriptor {
                specifiers,
                base,
                is_struct,
                pointer_depth: 0,
            }),
            None => self.error(&["type specifier"]),
        }
    }

    /// Decides whether the statement at the cursor is a declaration.
    fn at_declaration(&self) -> bool {
        match self.peek(0).map(|t| &t.kind) {
            Some(TokenKind::Keyword(k)) => k.is_type_specifier(),
            Some(TokenKind::Ident(_)) => {
                if matches!(self.peek(1).map(|t| &t.kind), Some(TokenKind::Ident(_))) {
                    return true;
                }
                let mut i = 1;
                while self.peek_punct(i, Punct::Star) {
                    i += 1;
                }
                i > 1
                    && matches!(self.peek(i).map(|t| &t.kind), Some(TokenKind::Ident(_)))
                    && (self.peek_punct(i + 1, Punct::Assign)
                        || self.peek_punct(i + 1, Punct::Semicolon)
                        || self.peek_punct(i + 1, Punct::Comma))
            }
            _ => false,
        }
    }

    fn item(&mut self, items: &mut Vec<Item>) -> PResult<()> {
        let start = self.loc();
        let save = self.pos;
        let mut ret = self.type_specifiers()?;
        ret.pointer_depth = self.stars();
        let (name, _) = self.expect_ident()?;
        if self.peek_punct(0, Punct::LParen) {
            let sig = self.signature(ret, name, start)?;
            if self.eat_punct(Punct::Semicolon) {
                items.push(Item::Prototype(sig));
            } else {
                let body = self.block()?;
                items.push(Item::Function(FunctionDef { sig, body }));
            }
            return Ok(());
        }
        self.pos = save;
        for stmt in self.declaration()? {
            items.push(Item::Global(stmt));
        }
        Ok(())
    }

    fn signature(
        &mut self,
        ret: TypeDescriptor,
        name: String,
        loc: SourceLocation,
    ) -> PResult<Signature> {
        self.expect_punct(Punct::LParen)?;
        let mut params = Vec::new();
        let mut void_params = false;
        if self.peek_keyword(Keyword::Void) && self.peek_punct(1, Punct::RParen) {
            self.pos += 1;
            void_params = true;
        } else if !self.peek_punct(0, Punct::RParen) {
            loop {
                let mut ty = self.type_specifiers()?;
                ty.pointer_depth = self.stars();
                let name = match self.peek(0).map(|t| &t.kind) {
                    Some(TokenKind::Ident(_)) => Some(self.expect_ident()?.0),
                    _ => None,
                };
                params.push(Param { ty, name });
                if !self.eat_punct(Punct::Comma) {
                    break;
                }
            }
        }
        self.expect_punct(Punct::RParen)?;
        Ok(Signature {
            ret,
            name,
            params,
            void_params,
            loc,
        })
    }

    fn block(&mut self) -> PResult<Block> {
        let loc = self.expect_punct(Punct::LBrace)?.loc.clone();
        let mut stmts = Vec::new();
        while !self.peek_punct(0, Punct::RBrace) {
            if self.at_end() {
                return self.error(&["}"]);
            }
            self.statement_into(&mut stmts)?;
        }
        self.bump();
        Ok(Block { stmts, loc })
    }

    /// Parses one declaration; multi-declarator lines yield one statement per
    /// declarator.
    fn declaration(&mut self) -> PResult<Vec<Stmt>> {
        let loc = self.loc();
        let ty = self.type_specifiers()?;
        let mut stmts = Vec::new();
        loop {
            let id = self.fresh_id();
            let mut dty = ty.clone();
            dty.pointer_depth = self.stars();
            let (name, _) = self.expect_ident()?;
            let init = if self.eat_punct(Punct::Assign) {
                Some(self.expr()?)
            } else {
                None
            };
            let first_in_group = stmts.is_empty();
            stmts.push(Stmt {
                id,
                loc: loc.clone(),
                end_line: 0,
                kind: StmtKind::Decl(Declarator {
                    ty: dty,
                    name,
                    init,
                    first_in_group,
                    last_in_group: false,
                }),
            });
            if self.eat_punct(Punct::Comma) {
                continue;
            }
            if !self.peek_punct(0, Punct::Semicolon) {
                return self.error(&[",", ";", "="]);
            }
            let end_line = self.bump().loc.line;
            for s in &mut stmts {
                s.end_line = end_line;
            }
            if let Some(Stmt {
                kind: StmtKind::Decl(d),
                ..
            }) = stmts.last_mut()
            {
                d.last_in_group = true;
            }
            return Ok(stmts);
        }
    }

    fn statement_into(&mut self, out: &mut Vec<Stmt>) -> PResult<()> {
        if self.at_declaration() {
            out.extend(self.declaration()?);
        } else {
            out.push(self.statement()?);
        }
        Ok(())
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        let Some(tok) = self.peek(0) else {
            return self.error(&["statement"]);
        };
        if self.at_declaration() {
            // A declaration used directly as a branch or loop body.
            let mut stmts = self.declaration()?;
            if stmts.len() == 1 {
                return Ok(stmts.pop().expect("one declarator"));
            }
            let id = self.fresh_id();
            return Ok(Stmt {
                id,
                loc: loc.clone(),
                end_line: loc.line,
                kind: StmtKind::Block(Block { stmts, loc }),
            });
        }
        match &tok.kind {
            TokenKind::Punct(Punct::LBrace) => {
                let id = self.fresh_id();
                let block = self.block()?;
                Ok(Stmt {
                    id,
                    loc: loc.clone(),
                    end_line: loc.line,
                    kind: StmtKind::Block(block),
                })
            }
            TokenKind::Keyword(Keyword::If) => {
                let id = self.fresh_id();
                self.bump();
                let (cond, end_line) = self.paren_condition()?;
                let then_branch = Box::new(self.statement()?);
                let else_branch = if self.peek_keyword(Keyword::Else) {
                    self.bump();
                    Some(Box::new(self.statement()?))
                } else {
                    None
                };
                Ok(Stmt {
                    id,
                    loc,
                    end_line,
                    kind: StmtKind::If {
                        cond,
                        then_branch,
                        else_branch,
                    },
                })
            }
            TokenKind::Keyword(Keyword::While) => {
                let id = self.fresh_id();
                self.bump();
                let (cond, end_line) = self.paren_condition()?;
                let body = Box::new(self.statement()?);
                Ok(Stmt {
                    id,
                    loc,
                    end_line,
                    kind: StmtKind::While { cond, body },
                })
            }
            TokenKind::Keyword(Keyword::For) => {
                let id = self.fresh_id();
                self.bump();
                self.expect_punct(Punct::LParen)?;
                let init = if self.peek_punct(0, Punct::Semicolon) {
                    None
                } else {
                    Some(self.for_clause()?)
                };
                self.expect_punct(Punct::Semicolon)?;
                let cond = if self.peek_punct(0, Punct::Semicolon) {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(Punct::Semicolon)?;
                let step = if self.peek_punct(0, Punct::RParen) {
                    None
                } else {
                    Some(self.for_clause()?)
                };
                let end_line = self.expect_punct(Punct::RParen)?.loc.line;
                let body = Box::new(self.statement()?);
                Ok(Stmt {
                    id,
                    loc,
                    end_line,
                    kind: StmtKind::For {
                        init,
                        cond,
                        step,
                        body,
                    },
                })
            }
            TokenKind::Keyword(k @ (Keyword::Break | Keyword::Continue)) => {
                let id = self.fresh_id();
                let kind = if *k == Keyword::Break {
                    StmtKind::Break
                } else {
                    StmtKind::Continue
                };
                self.bump();
                let end_line = self.expect_punct(Punct::Semicolon)?.loc.line;
                Ok(Stmt {
                    id,
                    loc,
                    end_line,
                    kind,
                })
            }
            TokenKind::Keyword(Keyword::Return) => {
                let id = self.fresh_id();
                self.bump();
                let value = if self.peek_punct(0, Punct::Semicolon) {
                    None
                } else {
                    Some(self.expr()?)
                };
                let end_line = self.expect_punct(Punct::Semicolon)?.loc.line;
                Ok(Stmt {
                    id,
                    loc,
                    end_line,
                    kind: StmtKind::Return(value),
                })
            }
            TokenKind::Ident(name) if name == "assert" && self.peek_punct(1, Punct::LParen) => {
                let id = self.fresh_id();
                self.pos += 2;
                let arg = self.expr()?;
                self.expect_punct(Punct::RParen)?;
                let end_line = self.expect_punct(Punct::Semicolon)?.loc.line;
                Ok(Stmt {
                    id,
                    loc,
                    end_line,
                    kind: StmtKind::Assert(arg),
                })
            }
            TokenKind::Ident(_)
            | TokenKind::Number(_)
            | TokenKind::CharLit(_)
            | TokenKind::StringLit(_)
            | TokenKind::Punct(
                Punct::LParen | Punct::Star | Punct::Amp | Punct::Bang | Punct::Minus,
            ) => {
                let id = self.fresh_id();
                let e = self.expr()?;
                let kind = if self.eat_punct(Punct::Assign) {
                    check_lvalue(&e)?;
                    let value = self.expr()?;
                    StmtKind::Assign { target: e, value }
                } else if matches!(e.kind, ExprKind::Call { .. }) && e.parens == 0 {
                    StmtKind::Call(e)
                } else {
                    StmtKind::Expr(e)
                };
                let end_line = match self.peek(0) {
                    Some(t) if t.is_punct(Punct::Semicolon) => self.bump().loc.line,
                    _ if matches!(kind, StmtKind::Assign { .. }) => return self.error(&[";"]),
                    _ => return self.error(&[";", "="]),
                };
                Ok(Stmt {
                    id,
                    loc,
                    end_line,
                    kind,
                })
            }
            _ => self.error(&["statement"]),
        }
    }

    fn paren_condition(&mut self) -> PResult<(Expr, u32)> {
        self.expect_punct(Punct::LParen)?;
        let cond = self.expr()?;
        let end = self.expect_punct(Punct::RParen)?.loc.line;
        Ok((cond, end))
    }

    fn for_clause(&mut self) -> PResult<ForClause> {
        let e = self.expr()?;
        if self.eat_punct(Punct::Assign) {
            check_lvalue(&e)?;
            let value = self.expr()?;
            Ok(ForClause::Assign { target: e, value })
        } else {
            Ok(ForClause::Expr(e))
        }
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: &[&[(Punct, BinaryOp)]] = &[
            &[(Punct::OrOr, BinaryOp::LogicalOr)],
            &[(Punct::AndAnd, BinaryOp::LogicalAnd)],
            &[(Punct::Pipe, BinaryOp::BitOr)],
            &[(Punct::Amp, BinaryOp::BitAnd)],
            &[(Punct::EqualEqual, BinaryOp::Eq), (Punct::NotEqual, BinaryOp::Ne)],
            &[
                (Punct::Less, BinaryOp::Lt),
                (Punct::Greater, BinaryOp::Gt),
                (Punct::LessEqual, BinaryOp::Le),
                (Punct::GreaterEqual, BinaryOp::Ge),
            ],
            &[(Punct::Plus, BinaryOp::Add), (Punct::Minus, BinaryOp::Sub)],
            &[
                (Punct::Star, BinaryOp::Mul),
                (Punct::Slash, BinaryOp::Div),
                (Punct::Percent, BinaryOp::Mod),
            ],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        'outer: loop {
            for &(p, op) in LEVELS[level] {
                if self.peek_punct(0, p) {
                    self.bump();
                    let rhs = self.binary(level + 1)?;
                    let loc = lhs.loc.clone();
                    lhs = Expr {
                        kind: ExprKind::Binary {
                            op,
                            lhs: Box::new(lhs),
                            rhs: Box::new(rhs),
                        },
                        loc,
                        parens: 0,
                    };
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = match self.peek(0).map(|t| &t.kind) {
            Some(TokenKind::Punct(Punct::Bang)) => Some(UnaryOp::Not),
            Some(TokenKind::Punct(Punct::Minus)) => Some(UnaryOp::Neg),
            Some(TokenKind::Punct(Punct::Star)) => Some(UnaryOp::Deref),
            Some(TokenKind::Punct(Punct::Amp)) => Some(UnaryOp::AddressOf),
            _ => None,
        };
        match op {
            Some(op) => {
                let loc = self.bump().loc.clone();
                let operand = self.unary()?;
                Ok(Expr {
                    kind: ExprKind::Unary {
                        op,
                        operand: Box::new(operand),
                    },
                    loc,
                    parens: 0,
                })
            }
            None => self.postfix(),
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            let arrow = if self.peek_punct(0, Punct::Arrow) {
                true
            } else if self.peek_punct(0, Punct::Dot) {
                false
            } else {
                return Ok(e);
            };
            self.bump();
            let (member, _) = self.expect_ident()?;
            let loc = e.loc.clone();
            e = Expr {
                kind: ExprKind::Member {
                    base: Box::new(e),
                    member,
                    arrow,
                },
                loc,
                parens: 0,
            };
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek(0) else {
            return self.error(&["expression"]);
        };
        let loc = tok.loc.clone();
        let kind = match &tok.kind {
            TokenKind::Ident(name) => {
                self.bump();
                if self.peek_punct(0, Punct::LParen) {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.peek_punct(0, Punct::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(Punct::Comma) {
                                break;
                            }
                        }
                    }
                    self.expect_punct(Punct::RParen)?;
                    ExprKind::Call {
                        callee: name.clone(),
                        args,
                    }
                } else if name == "NULL" {
                    ExprKind::Null
                } else {
                    ExprKind::Ident(name.clone())
                }
            }
            TokenKind::Number(s) | TokenKind::CharLit(s) | TokenKind::StringLit(s) => {
                self.bump();
                ExprKind::Constant(s.clone())
            }
            TokenKind::Punct(Punct::LParen) => {
                self.bump();
                let mut inner = self.expr()?;
                self.expect_punct(Punct::RParen)?;
                inner.parens += 1;
                inner.loc = loc;
                return Ok(inner);
            }
            _ => return self.error(&["expression"]),
        };
        Ok(Expr {
            kind,
            loc,
            parens: 0,
        })
    }
}

fn check_lvalue(e: &Expr) -> PResult<()> {
    match &e.kind {
        ExprKind::Ident(_)
        | ExprKind::Member { .. }
        | ExprKind::Unary {
            op: UnaryOp::Deref, ..
        } => Ok(()),
        _ => Err(FrontendError::Parse {
            loc: e.loc.clone(),
            found: e.node_kind().name().to_string(),
            expected: vec!["assignable expression".into()],
        }),
    }
}
