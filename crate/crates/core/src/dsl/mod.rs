//! The constraint language: syntax, elaboration, expansion and printing.

pub mod ast;
mod elab;
mod expand;
mod free;
pub mod lexer;
pub mod parser;
mod print;
mod program;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::task::OptionLabel;
pub use ast::*;
pub use elab::elaborate;
pub use expand::{alpha_normalize, expand_comprehensions, expand_program, substitute};
pub use free::free_symbols;
pub use print::{print_binder_ty, print_sort, print_constraint_segment, print_decl, print_expr, print_init, print_option_segment, print_program};
pub use program::{parse_constraint_body, parse_expr, parse_init, parse_program, split_segments, RawSegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Init,
    Constraint,
    Option,
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentKind::Init => "init",
            SegmentKind::Constraint => "constraint",
            SegmentKind::Option => "option",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("syntax error at {span}: {msg}")]
    Syntax { span: Span, msg: String },
    #[error("unknown symbol `{name}` at {span}")]
    UnknownSymbol { name: String, span: Span },
    #[error("sort mismatch at {span}: {msg}")]
    SortMismatch { span: Span, msg: String },
    #[error("`{name}` expects {expected} argument(s) but got {found} at {span}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
        span: Span,
    },
    #[error("missing {0} segment")]
    MissingSegment(SegmentKind),
    #[error("option label {0} is used more than once")]
    DuplicateOptionLabel(OptionLabel),
    #[error("`{0}` is declared more than once")]
    DuplicateName(String),
    #[error("comprehension binder `{binder}` does not range over a finite collection")]
    UnboundedComprehension { binder: String },
}

/// Names visible to an expression. All kinds share one namespace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scope {
    pub sorts: BTreeMap<String, SortKind>,
    /// Enum member name to its sort.
    pub members: BTreeMap<String, String>,
    pub consts: BTreeMap<String, Ty>,
    pub fns: BTreeMap<String, (Vec<Ty>, Ty)>,
    pub lists: BTreeMap<String, (Ty, CollectionElems)>,
    /// Sort names in declaration order.
    pub sort_order: Vec<String>,
}

impl Scope {
    pub fn is_declared(&self, name: &str) -> bool {
        self.sorts.contains_key(name)
            || self.members.contains_key(name)
            || self.consts.contains_key(name)
            || self.fns.contains_key(name)
            || self.lists.contains_key(name)
    }

    pub fn add_sort(&mut self, sort: &SortDecl) -> Result<(), DslError> {
        self.claim(&sort.name)?;
        if let SortKind::Enum(members) = &sort.kind {
            for m in members {
                self.claim(m)?;
                self.members.insert(m.clone(), sort.name.clone());
            }
        }
        self.sorts.insert(sort.name.clone(), sort.kind.clone());
        self.sort_order.push(sort.name.clone());
        Ok(())
    }

    pub fn add_decl(&mut self, decl: &Decl) -> Result<(), DslError> {
        self.claim(&decl.name)?;
        match &decl.kind {
            DeclKind::Constant(ty) => {
                self.consts.insert(decl.name.clone(), ty.clone());
            }
            DeclKind::Function { args, result } => {
                self.fns
                    .insert(decl.name.clone(), (args.clone(), result.clone()));
            }
            DeclKind::Collection { elem, elems } => {
                self.lists
                    .insert(decl.name.clone(), (elem.clone(), elems.clone()));
            }
        }
        Ok(())
    }

    fn claim(&self, name: &str) -> Result<(), DslError> {
        if self.is_declared(name) || matches!(name, "True" | "False") {
            Err(DslError::DuplicateName(name.to_string()))
        } else {
            Ok(())
        }
    }

    pub fn from_init(init: &InitSegment) -> Result<Self, DslError> {
        let mut scope = Scope::default();
        for s in &init.sorts {
            scope.add_sort(s)?;
        }
        for d in &init.decls {
            scope.add_decl(d)?;
        }
        Ok(scope)
    }

    /// Init declarations plus the local declarations of every constraint.
    pub fn for_program(program: &SegmentedProgram) -> Result<Self, DslError> {
        let mut scope = Scope::from_init(&program.init)?;
        for d in program.local_decls() {
            scope.add_decl(&d)?;
        }
        Ok(scope)
    }

    /// Resolves a sort name as written in a declaration or binder.
    pub fn resolve_ty(&self, name: &str, span: Span) -> Result<Ty, DslError> {
        match name {
            "bool" | "Bool" => Ok(Ty::Bool),
            "int" | "Int" => Ok(Ty::Int),
            _ => match self.sorts.get(name) {
                Some(SortKind::Integer) => Ok(Ty::Int),
                Some(_) => Ok(Ty::Sort(name.to_string())),
                None => Err(DslError::UnknownSymbol {
                    name: name.to_string(),
                    span,
                }),
            },
        }
    }

    pub fn enum_members(&self, sort: &str) -> Option<&[String]> {
        match self.sorts.get(sort) {
            Some(SortKind::Enum(m)) => Some(m),
            _ => None,
        }
    }

    /// Type of a constant or enum member.
    pub fn value_ty(&self, name: &str) -> Option<Ty> {
        if let Some(t) = self.consts.get(name) {
            return Some(t.clone());
        }
        self.members.get(name).map(|s| Ty::Sort(s.clone()))
    }

    /// Element values of a finite comprehension domain, if it is one.
    pub fn domain_values(&self, domain: &Domain) -> Option<(Ty, Vec<Expr>)> {
        match domain {
            Domain::Range(lo, hi) => Some((Ty::Int, (*lo..*hi).map(Expr::int).collect())),
            Domain::Named(name) => {
                if let Some((elem, elems)) = self.lists.get(name) {
                    let values = match elems {
                        CollectionElems::Items(items) => {
                            items.iter().map(|i| Expr::constant(i.clone())).collect()
                        }
                        CollectionElems::Range(lo, hi) => (*lo..*hi).map(Expr::int).collect(),
                    };
                    return Some((elem.clone(), values));
                }
                self.enum_members(name).map(|members| {
                    (
                        Ty::Sort(name.clone()),
                        members.iter().map(|m| Expr::constant(m.clone())).collect(),
                    )
                })
            }
        }
    }
}
