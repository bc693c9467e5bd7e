//! Recursive-descent parser producing unresolved syntax.
//!
//! Every bare identifier is read as [`Node::Const`]; a binding pass then turns
//! identifiers captured by a quantifier or comprehension into [`Node::Var`].
//! Sort names in binders are kept as written (`Ty::Sort`) until elaboration.

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::DslError;

#[derive(Debug, Clone)]
pub enum RawElems {
    Items(Vec<(String, Span)>),
    Range(i64, i64),
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Enum {
        name: String,
        members: Vec<String>,
        span: Span,
    },
    IntSort {
        name: String,
        span: Span,
    },
    Sort {
        name: String,
        span: Span,
    },
    Const {
        names: Vec<String>,
        sort: String,
        span: Span,
    },
    Fn {
        name: String,
        args: Vec<String>,
        result: String,
        span: Span,
    },
    List {
        name: String,
        annot: Option<String>,
        elems: RawElems,
        span: Span,
    },
    Assert(Expr),
    Check(Expr),
}

const STMT_KEYWORDS: &[&str] = &["enum", "int", "sort", "const", "fn", "list", "assert", "check"];

/// Built-ins whose arguments may contain spliced lists.
const LIST_BUILTINS: &[&str] = &["And", "Or", "Sum", "Distinct", "AtMost", "AtLeast"];

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub fn new(src: &str, first_line: u32) -> Result<Self, DslError> {
        Ok(Parser {
            toks: lex(src, first_line)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, DslError> {
        Err(DslError::Syntax {
            span: self.span(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<Span, DslError> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            self.error(format!(
                "expected {}, found {}",
                tok.describe(),
                self.peek().describe()
            ))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<(String, Span), DslError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.bump().span;
                Ok((s, span))
            }
            other => self.error(format!("expected identifier, found {}", other.describe())),
        }
    }

    fn is_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn signed_int(&mut self) -> Result<i64, DslError> {
        let neg = self.eat(&Tok::Minus);
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            other => self.error(format!("expected integer, found {}", other.describe())),
        }
    }

    pub fn statements(&mut self) -> Result<Vec<Stmt>, DslError> {
        let mut out = Vec::new();
        while !self.at_eof() {
            out.push(self.statement()?);
        }
        Ok(out)
    }

    fn statement(&mut self) -> Result<Stmt, DslError> {
        let span = self.span();
        let (kw, _) = self.ident()?;
        match kw.as_str() {
            "enum" => {
                let (name, _) = self.ident()?;
                self.expect(Tok::LBrace)?;
                let mut members = Vec::new();
                while !matches!(self.peek(), Tok::RBrace) {
                    members.push(self.ident()?.0);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::RBrace)?;
                Ok(Stmt::Enum {
                    name,
                    members,
                    span,
                })
            }
            "int" => Ok(Stmt::IntSort {
                name: self.ident()?.0,
                span,
            }),
            "sort" => Ok(Stmt::Sort {
                name: self.ident()?.0,
                span,
            }),
            "const" => {
                let mut names = vec![self.ident()?.0];
                while self.eat(&Tok::Comma) {
                    names.push(self.ident()?.0);
                }
                self.expect(Tok::Colon)?;
                let sort = self.ident()?.0;
                Ok(Stmt::Const { names, sort, span })
            }
            "fn" => {
                let (name, _) = self.ident()?;
                self.expect(Tok::LParen)?;
                let mut args = Vec::new();
                while !matches!(self.peek(), Tok::RParen) {
                    args.push(self.ident()?.0);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::RParen)?;
                self.expect(Tok::Arrow)?;
                let result = self.ident()?.0;
                Ok(Stmt::Fn {
                    name,
                    args,
                    result,
                    span,
                })
            }
            "list" => {
                let (name, _) = self.ident()?;
                let annot = if self.eat(&Tok::Colon) {
                    Some(self.ident()?.0)
                } else {
                    None
                };
                self.expect(Tok::Assign)?;
                let elems = if self.is_ident("range") {
                    let (lo, hi) = self.range()?;
                    RawElems::Range(lo, hi)
                } else {
                    self.expect(Tok::LBrack)?;
                    let mut items = Vec::new();
                    while !matches!(self.peek(), Tok::RBrack) {
                        items.push(self.ident()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(Tok::RBrack)?;
                    RawElems::Items(items)
                };
                Ok(Stmt::List {
                    name,
                    annot,
                    elems,
                    span,
                })
            }
            "assert" => Ok(Stmt::Assert(self.expr_complete()?)),
            "check" => Ok(Stmt::Check(self.expr_complete()?)),
            other => Err(DslError::Syntax {
                span,
                msg: format!("expected a statement keyword, found `{other}`"),
            }),
        }
    }

    /// An expression followed by either end of input or the next statement.
    fn expr_complete(&mut self) -> Result<Expr, DslError> {
        let e = self.expr()?;
        match self.peek() {
            Tok::Eof => Ok(e),
            Tok::Ident(s) if STMT_KEYWORDS.contains(&s.as_str()) => Ok(e),
            other => self.error(format!("unexpected {} after expression", other.describe())),
        }
    }

    fn range(&mut self) -> Result<(i64, i64), DslError> {
        self.ident()?;
        self.expect(Tok::LParen)?;
        let lo = self.signed_int()?;
        self.expect(Tok::Comma)?;
        let hi = self.signed_int()?;
        self.expect(Tok::RParen)?;
        Ok((lo, hi))
    }

    pub fn expr(&mut self) -> Result<Expr, DslError> {
        if (self.is_ident("ForAll") || self.is_ident("Exists"))
            && !matches!(self.peek_at(1), Tok::LParen)
        {
            return self.dot_quantifier();
        }
        self.comparison()
    }

    fn quantifier_kind(word: &str) -> Quantifier {
        if word == "ForAll" {
            Quantifier::ForAll
        } else {
            Quantifier::Exists
        }
    }

    fn binder(&mut self) -> Result<Binder, DslError> {
        let (name, _) = self.ident()?;
        self.expect(Tok::Colon)?;
        let (sort, _) = self.ident()?;
        Ok(Binder {
            name,
            ty: raw_ty(&sort),
        })
    }

    /// `ForAll x: S, y: T. body`
    fn dot_quantifier(&mut self) -> Result<Expr, DslError> {
        let (word, span) = self.ident()?;
        let mut binders = vec![self.binder()?];
        while self.eat(&Tok::Comma) {
            binders.push(self.binder()?);
        }
        self.expect(Tok::Dot)?;
        let body = self.expr()?;
        Ok(Expr::new(
            Node::Quant(Self::quantifier_kind(&word), binders, Box::new(body)),
            span,
        ))
    }

    /// `ForAll([x: S, y: T], body)`
    fn call_quantifier(&mut self, word: &str, span: Span) -> Result<Expr, DslError> {
        self.expect(Tok::LParen)?;
        let bracketed = self.eat(&Tok::LBrack);
        let mut binders = vec![self.binder()?];
        loop {
            let more = matches!(self.peek(), Tok::Comma)
                && matches!(self.peek_at(1), Tok::Ident(_))
                && matches!(self.peek_at(2), Tok::Colon);
            if !more {
                break;
            }
            self.bump();
            binders.push(self.binder()?);
        }
        if bracketed {
            self.expect(Tok::RBrack)?;
        }
        self.expect(Tok::Comma)?;
        let body = self.expr()?;
        self.expect(Tok::RParen)?;
        Ok(Expr::new(
            Node::Quant(Self::quantifier_kind(word), binders, Box::new(body)),
            span,
        ))
    }

    fn comparison(&mut self) -> Result<Expr, DslError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::EqEq => CmpOp::Eq,
            Tok::Neq => CmpOp::Neq,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return Ok(lhs),
        };
        let span = self.bump().span;
        let rhs = self.additive()?;
        if matches!(
            self.peek(),
            Tok::EqEq | Tok::Neq | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge
        ) {
            return self.error("chained comparisons are not supported; use And(...)");
        }
        Ok(Expr::new(Node::Cmp(op, Box::new(lhs), Box::new(rhs)), span))
    }

    fn additive(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let add = match self.peek() {
                Tok::Plus => true,
                Tok::Minus => false,
                _ => return Ok(lhs),
            };
            let span = self.bump().span;
            let rhs = self.unary()?;
            let node = if add {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
            lhs = Expr::new(node, span);
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if matches!(self.peek(), Tok::Minus) {
            let span = self.bump().span;
            let inner = self.unary()?;
            return Ok(match inner.node {
                Node::Int(v) => Expr::new(Node::Int(-v), span),
                _ => Expr::new(Node::Sub(Box::new(Expr::int(0)), Box::new(inner)), span),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::new(Node::Int(v), span))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "True" => return Ok(Expr::new(Node::Bool(true), span)),
                    "False" => return Ok(Expr::new(Node::Bool(false), span)),
                    _ => {}
                }
                if !matches!(self.peek(), Tok::LParen) {
                    return Ok(Expr::new(Node::Const(name), span));
                }
                self.call(name, span)
            }
            other => self.error(format!("expected an expression, found {}", other.describe())),
        }
    }

    fn call(&mut self, name: String, span: Span) -> Result<Expr, DslError> {
        if name == "ForAll" || name == "Exists" {
            return self.call_quantifier(&name, span);
        }
        if LIST_BUILTINS.contains(&name.as_str()) {
            return self.list_call(name, span);
        }
        let args = self.plain_args()?;
        let arity = |n: usize| -> Result<(), DslError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(DslError::ArityMismatch {
                    name: name.clone(),
                    expected: n,
                    found: args.len(),
                    span,
                })
            }
        };
        let mut it = args.clone().into_iter().map(Box::new);
        let node = match name.as_str() {
            "Not" => {
                arity(1)?;
                Node::Not(it.next().unwrap())
            }
            "Implies" => {
                arity(2)?;
                Node::Implies(it.next().unwrap(), it.next().unwrap())
            }
            "Xor" => {
                arity(2)?;
                Node::Xor(it.next().unwrap(), it.next().unwrap())
            }
            "If" | "Ite" => {
                arity(3)?;
                Node::Ite(it.next().unwrap(), it.next().unwrap(), it.next().unwrap())
            }
            _ => Node::Apply(name.clone(), args),
        };
        Ok(Expr::new(node, span))
    }

    fn plain_args(&mut self) -> Result<Vec<Expr>, DslError> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        while !matches!(self.peek(), Tok::RParen) {
            args.push(self.expr()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    /// Arguments where `[...]` list literals and comprehensions splice into the item list.
    fn list_items(&mut self) -> Result<Vec<(Expr, bool)>, DslError> {
        self.expect(Tok::LParen)?;
        let mut items = Vec::new();
        while !matches!(self.peek(), Tok::RParen) {
            if matches!(self.peek(), Tok::LBrack) {
                for e in self.bracket_list()? {
                    items.push((e, true));
                }
            } else {
                items.push((self.expr()?, false));
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RParen)?;
        Ok(items)
    }

    fn list_call(&mut self, name: String, span: Span) -> Result<Expr, DslError> {
        let mut items = self.list_items()?;
        let node = match name.as_str() {
            "And" => Node::And(items.into_iter().map(|(e, _)| e).collect()),
            "Or" => Node::Or(items.into_iter().map(|(e, _)| e).collect()),
            "Sum" => Node::Sum(items.into_iter().map(|(e, _)| e).collect()),
            "Distinct" => Node::Distinct(items.into_iter().map(|(e, _)| e).collect()),
            _ => {
                // AtMost(items..., k) / AtLeast(items..., k)
                let bound = match items.pop() {
                    Some((k, false)) => k,
                    _ => {
                        return Err(DslError::Syntax {
                            span,
                            msg: format!("{name} expects a bound as its last argument"),
                        })
                    }
                };
                let sum = Expr::new(Node::Sum(items.into_iter().map(|(e, _)| e).collect()), span);
                let op = if name == "AtMost" { CmpOp::Le } else { CmpOp::Ge };
                Node::Cmp(op, Box::new(sum), Box::new(bound))
            }
        };
        Ok(Expr::new(node, span))
    }

    /// `[a, b, c]` or `[template for x in dom (for y in dom)*]`.
    fn bracket_list(&mut self) -> Result<Vec<Expr>, DslError> {
        let span = self.expect(Tok::LBrack)?;
        if self.eat(&Tok::RBrack) {
            return Ok(vec![]);
        }
        let first = self.expr()?;
        if self.is_ident("for") {
            let mut generators = Vec::new();
            while self.is_ident("for") {
                self.bump();
                let (var, _) = self.ident()?;
                if !self.is_ident("in") {
                    return self.error("expected `in` in comprehension");
                }
                self.bump();
                let domain = if self.is_ident("range") && matches!(self.peek_at(1), Tok::LParen) {
                    let (lo, hi) = self.range()?;
                    Domain::Range(lo, hi)
                } else {
                    Domain::Named(self.ident()?.0)
                };
                generators.push(Generator { var, domain });
            }
            self.expect(Tok::RBrack)?;
            return Ok(vec![Expr::new(
                Node::Comprehension {
                    template: Box::new(first),
                    generators,
                },
                span,
            )]);
        }
        let mut items = vec![first];
        while self.eat(&Tok::Comma) {
            if matches!(self.peek(), Tok::RBrack) {
                break;
            }
            items.push(self.expr()?);
        }
        self.expect(Tok::RBrack)?;
        Ok(items)
    }
}

pub fn raw_ty(sort: &str) -> Ty {
    match sort {
        "bool" | "Bool" => Ty::Bool,
        "int" | "Int" => Ty::Int,
        other => Ty::Sort(other.to_string()),
    }
}

/// Rewrites identifiers captured by enclosing binders into [`Node::Var`].
pub fn bind_vars(e: Expr) -> Expr {
    fn go(e: Expr, bound: &mut Vec<String>) -> Expr {
        let span = e.span;
        let node = match e.node {
            Node::Const(name) if bound.contains(&name) => Node::Var(name),
            Node::Quant(q, binders, body) => {
                let n = binders.len();
                bound.extend(binders.iter().map(|b| b.name.clone()));
                let body = go(*body, bound);
                bound.truncate(bound.len() - n);
                Node::Quant(q, binders, Box::new(body))
            }
            Node::Comprehension {
                template,
                generators,
            } => {
                let n = generators.len();
                bound.extend(generators.iter().map(|g| g.var.clone()));
                let template = go(*template, bound);
                bound.truncate(bound.len() - n);
                Node::Comprehension {
                    template: Box::new(template),
                    generators,
                }
            }
            other => map_children(other, |c| go(c, bound)),
        };
        Expr::new(node, span)
    }
    go(e, &mut Vec::new())
}

/// Applies `f` to every direct child of a non-binding node.
pub fn map_children(node: Node, mut f: impl FnMut(Expr) -> Expr) -> Node {
    let mut bx = |b: Box<Expr>| Box::new(f(*b));
    match node {
        Node::Bool(_) | Node::Int(_) | Node::Const(_) | Node::Var(_) => node,
        Node::Apply(name, args) => Node::Apply(name, args.into_iter().map(|a| *bx(Box::new(a))).collect()),
        Node::Cmp(op, a, b) => Node::Cmp(op, bx(a), bx(b)),
        Node::Add(a, b) => Node::Add(bx(a), bx(b)),
        Node::Sub(a, b) => Node::Sub(bx(a), bx(b)),
        Node::And(xs) => Node::And(xs.into_iter().map(|a| *bx(Box::new(a))).collect()),
        Node::Or(xs) => Node::Or(xs.into_iter().map(|a| *bx(Box::new(a))).collect()),
        Node::Not(a) => Node::Not(bx(a)),
        Node::Implies(a, b) => Node::Implies(bx(a), bx(b)),
        Node::Xor(a, b) => Node::Xor(bx(a), bx(b)),
        Node::Ite(c, a, b) => Node::Ite(bx(c), bx(a), bx(b)),
        Node::Distinct(xs) => Node::Distinct(xs.into_iter().map(|a| *bx(Box::new(a))).collect()),
        Node::Sum(xs) => Node::Sum(xs.into_iter().map(|a| *bx(Box::new(a))).collect()),
        Node::Quant(q, bs, body) => Node::Quant(q, bs, bx(body)),
        Node::Comprehension {
            template,
            generators,
        } => Node::Comprehension {
            template: bx(template),
            generators,
        },
    }
}

/// Parses a single expression without resolving names against any scope.
pub fn parse_expr_unresolved(src: &str) -> Result<Expr, DslError> {
    let mut p = Parser::new(src, 1)?;
    let e = p.expr()?;
    if !p.at_eof() {
        return p.error(format!("unexpected {} after expression", p.peek().describe()));
    }
    Ok(bind_vars(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comprehension_in_sum() {
        let e = parse_expr_unresolved(
            "Sum([And(t != Xena, repairs(t, radios)) for t in technicians]) == 3",
        )
        .unwrap();
        let Node::Cmp(CmpOp::Eq, lhs, rhs) = &e.node else {
            panic!("{e:?}")
        };
        assert_eq!(rhs.node, Node::Int(3));
        let Node::Sum(items) = &lhs.node else { panic!() };
        assert_eq!(items.len(), 1);
        let Node::Comprehension { template, generators } = &items[0].node else {
            panic!()
        };
        assert_eq!(generators[0].var, "t");
        assert!(format!("{template:?}").contains("Var(\"t\")"));
    }

    #[test]
    fn quantifier_forms_agree() {
        let a = parse_expr_unresolved("ForAll m: machines. p(m)").unwrap();
        let b = parse_expr_unresolved("ForAll([m: machines], p(m))").unwrap();
        let c = parse_expr_unresolved("ForAll(m: machines, p(m))").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn at_most_desugars() {
        let e = parse_expr_unresolved("AtMost(a, b, c, 1)").unwrap();
        assert_eq!(
            e,
            Expr::cmp(
                CmpOp::Le,
                Expr::sum(vec![Expr::constant("a"), Expr::constant("b"), Expr::constant("c")]),
                Expr::int(1)
            )
        );
    }

    #[test]
    fn negative_literals_fold() {
        assert_eq!(parse_expr_unresolved("-3").unwrap(), Expr::int(-3));
        assert_eq!(
            parse_expr_unresolved("position(T) == position(F) - 3").unwrap(),
            Expr::eq(
                Expr::apply("position", vec![Expr::constant("T")]),
                Node::Sub(
                    Box::new(Expr::apply("position", vec![Expr::constant("F")])),
                    Box::new(Expr::int(3))
                )
                .into()
            )
        );
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_expr_unresolved("And(a,\n  b").unwrap_err();
        match err {
            DslError::Syntax { span, .. } => assert_eq!(span.line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn statements_split_on_keywords() {
        let mut p = Parser::new("assert a\nassert ForAll x: s. p(x)\ncheck b", 1).unwrap();
        let stmts = p.statements().unwrap();
        assert_eq!(stmts.len(), 3);
    }
}
