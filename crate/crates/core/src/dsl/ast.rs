//! Abstract syntax for the constraint language.

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::task::OptionLabel;

/// Byte-free source position (1-based line and column).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A value type after sort resolution. Integer-alias sorts collapse to `Int`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ty {
    Bool,
    Int,
    /// An enum or uninterpreted sort, by name.
    Sort(String),
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Bool => f.write_str("bool"),
            Ty::Int => f.write_str("int"),
            Ty::Sort(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SortKind {
    Enum(Vec<String>),
    Integer,
    Uninterpreted,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SortDecl {
    pub name: String,
    pub kind: SortKind,
}

/// The element source of a finite collection.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CollectionElems {
    /// Constant or enum-member references, in order.
    Items(Vec<String>),
    /// `range(lo, hi)`: the integers `lo..hi`, upper bound excluded.
    Range(i64, i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DeclKind {
    Constant(Ty),
    Function { args: Vec<Ty>, result: Ty },
    Collection { elem: Ty, elems: CollectionElems },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Decl {
    pub name: String,
    pub kind: DeclKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Neq => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    ForAll,
    Exists,
}

/// A sorted quantifier binder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Binder {
    pub name: String,
    pub ty: Ty,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Domain {
    /// A declared collection, or an enum sort used as its member list.
    Named(String),
    Range(i64, i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Generator {
    pub var: String,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Bool(bool),
    Int(i64),
    /// A declared constant or enum member.
    Const(String),
    /// A quantifier- or comprehension-bound variable.
    Var(String),
    Apply(String, Vec<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Not(Box<Expr>),
    Implies(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Distinct(Vec<Expr>),
    Sum(Vec<Expr>),
    Quant(Quantifier, Vec<Binder>, Box<Expr>),
    /// List-valued; only legal as an item of `And`/`Or`/`Sum`/`Distinct`,
    /// where its instances are spliced in place.
    Comprehension {
        template: Box<Expr>,
        generators: Vec<Generator>,
    },
}

/// An expression node with its source position. Equality and hashing ignore the span.
#[derive(Debug, Clone)]
pub struct Expr {
    pub node: Node,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.node.hash(state)
    }
}

impl From<Node> for Expr {
    fn from(node: Node) -> Self {
        Expr {
            node,
            span: Span::default(),
        }
    }
}

impl Expr {
    pub fn new(node: Node, span: Span) -> Self {
        Expr { node, span }
    }

    pub fn bool(b: bool) -> Self {
        Node::Bool(b).into()
    }

    pub fn int(v: i64) -> Self {
        Node::Int(v).into()
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Node::Const(name.into()).into()
    }

    pub fn var(name: impl Into<String>) -> Self {
        Node::Var(name.into()).into()
    }

    pub fn apply(f: impl Into<String>, args: Vec<Expr>) -> Self {
        Node::Apply(f.into(), args).into()
    }

    pub fn cmp(op: CmpOp, l: Expr, r: Expr) -> Self {
        Node::Cmp(op, Box::new(l), Box::new(r)).into()
    }

    pub fn eq(l: Expr, r: Expr) -> Self {
        Self::cmp(CmpOp::Eq, l, r)
    }

    pub fn and(items: Vec<Expr>) -> Self {
        Node::And(items).into()
    }

    pub fn or(items: Vec<Expr>) -> Self {
        Node::Or(items).into()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Self {
        Node::Not(Box::new(e)).into()
    }

    pub fn implies(a: Expr, b: Expr) -> Self {
        Node::Implies(Box::new(a), Box::new(b)).into()
    }

    pub fn ite(c: Expr, a: Expr, b: Expr) -> Self {
        Node::Ite(Box::new(c), Box::new(a), Box::new(b)).into()
    }

    pub fn sum(items: Vec<Expr>) -> Self {
        Node::Sum(items).into()
    }

    pub fn forall(binders: Vec<Binder>, body: Expr) -> Self {
        Node::Quant(Quantifier::ForAll, binders, Box::new(body)).into()
    }

    pub fn exists(binders: Vec<Binder>, body: Expr) -> Self {
        Node::Quant(Quantifier::Exists, binders, Box::new(body)).into()
    }

    /// Conjunction that avoids wrapping a single item.
    pub fn conjoin(mut items: Vec<Expr>) -> Self {
        if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Self::and(items)
        }
    }

    /// Immediate children, in order.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.node {
            Node::Bool(_) | Node::Int(_) | Node::Const(_) | Node::Var(_) => vec![],
            Node::Apply(_, args)
            | Node::And(args)
            | Node::Or(args)
            | Node::Distinct(args)
            | Node::Sum(args) => args.iter().collect(),
            Node::Cmp(_, a, b)
            | Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Implies(a, b)
            | Node::Xor(a, b) => vec![a, b],
            Node::Not(a) => vec![a],
            Node::Ite(c, a, b) => vec![c, a, b],
            Node::Quant(_, _, body) => vec![body],
            Node::Comprehension { template, .. } => vec![template],
        }
    }

    pub fn contains_comprehension(&self) -> bool {
        matches!(self.node, Node::Comprehension { .. })
            || self.children().into_iter().any(Expr::contains_comprehension)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckType {
    Sat,
    Unsat,
    Valid,
}

impl CheckType {
    pub fn keyword(&self) -> &'static str {
        match self {
            CheckType::Sat => "sat",
            CheckType::Unsat => "unsat",
            CheckType::Valid => "valid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sat" => Some(CheckType::Sat),
            "unsat" => Some(CheckType::Unsat),
            "valid" => Some(CheckType::Valid),
            _ => None,
        }
    }
}

/// `P_init`: declarations, base preconditions, and the natural-language context.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct InitSegment {
    pub nl_context: String,
    pub sorts: Vec<SortDecl>,
    pub decls: Vec<Decl>,
    pub preconditions: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConstraintSegment {
    pub nl_text: String,
    pub local_decls: Vec<Decl>,
    pub exprs: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OptionSegment {
    pub label: OptionLabel,
    pub nl_check: String,
    pub check_type: CheckType,
    pub check: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SegmentedProgram {
    pub init: InitSegment,
    pub constraints: Vec<ConstraintSegment>,
    pub options: Vec<OptionSegment>,
}

impl SegmentedProgram {
    /// All constraint expressions, in segment order.
    pub fn constraint_exprs(&self) -> Vec<Expr> {
        self.constraints
            .iter()
            .flat_map(|c| c.exprs.iter().cloned())
            .collect()
    }

    /// Local declarations of every constraint segment.
    pub fn local_decls(&self) -> Vec<Decl> {
        self.constraints
            .iter()
            .flat_map(|c| c.local_decls.iter().cloned())
            .collect()
    }
}
