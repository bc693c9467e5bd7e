//! Random enum-only programs for solver/oracle comparisons.
//!
//! Programs are emitted as DSL source so every property also exercises the parser.

#![allow(dead_code)]

use std::fmt::Write;
use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssv_core::dsl::{Expr, Scope, SegmentedProgram};
use ssv_core::smt::{ProcessSolver, Smt};

pub const MAX_SORTS: usize = 3;
pub const MAX_MEMBERS: usize = 6;
pub const MAX_FUNCTIONS: usize = 3;
pub const MAX_CONSTRAINTS: usize = 8;
/// Keeps brute-force enumeration cheap; larger universes are redrawn.
pub const MAX_STATE_BITS: f64 = 16.0;

pub fn smt() -> Smt {
    Smt::new(Arc::new(ProcessSolver::new("z3 -in").unwrap()))
}

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// A deliberately unparseable input to the refinement step.
const BROKEN: [&str; 1] = ["lamps_broken.ssv"];

/// Every well-formed `.ssv` file shipped as a fixture.
pub fn corpus() -> Vec<(String, String)> {
    let mut out = Vec::new();
    for dir in [fixtures(), fixtures().join("dataset/programs")] {
        let mut paths: Vec<_> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "ssv"))
            .filter(|p| !BROKEN.iter().any(|b| p.ends_with(b)))
            .collect();
        paths.sort();
        for p in paths {
            out.push((p.display().to_string(), std::fs::read_to_string(&p).unwrap()));
        }
    }
    out
}

#[derive(Clone)]
struct Func {
    name: String,
    args: Vec<usize>,
    /// `None` is bool.
    result: Option<usize>,
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    sorts: Vec<Vec<String>>,
    consts: Vec<(String, usize)>,
    funcs: Vec<Func>,
    lists: Vec<(String, usize)>,
    bound: Vec<(String, usize)>,
    fresh: usize,
}

impl Gen<'_> {
    fn sort_name(i: usize) -> String {
        format!("s{i}")
    }

    fn fresh_var(&mut self) -> String {
        self.fresh += 1;
        format!("v{}", self.fresh)
    }

    fn term(&mut self, sort: usize, depth: u32) -> String {
        let mut choices: Vec<u8> = vec![0];
        let vars: Vec<String> = self.bound.iter().filter(|b| b.1 == sort).map(|b| b.0.clone()).collect();
        let consts: Vec<String> = self.consts.iter().filter(|c| c.1 == sort).map(|c| c.0.clone()).collect();
        let funcs: Vec<Func> = self.funcs.iter().filter(|f| f.result == Some(sort)).cloned().collect();
        if !vars.is_empty() {
            choices.extend([1, 1]);
        }
        if !consts.is_empty() {
            choices.push(2);
        }
        if !funcs.is_empty() && depth > 0 {
            choices.push(3);
        }
        match *choices.choose(self.rng).unwrap() {
            1 => vars.choose(self.rng).unwrap().clone(),
            2 => consts.choose(self.rng).unwrap().clone(),
            3 => {
                let f = funcs.choose(self.rng).unwrap().clone();
                self.app(&f, depth - 1)
            }
            _ => self.sorts[sort].choose(self.rng).unwrap().clone(),
        }
    }

    fn app(&mut self, f: &Func, depth: u32) -> String {
        let args: Vec<String> = f.args.iter().map(|&s| self.term(s, depth)).collect();
        format!("{}({})", f.name, args.join(", "))
    }

    fn atom(&mut self, depth: u32) -> String {
        let bools: Vec<Func> = self.funcs.iter().filter(|f| f.result.is_none()).cloned().collect();
        if !bools.is_empty() && self.rng.gen_bool(0.6) {
            let f = bools.choose(self.rng).unwrap().clone();
            return self.app(&f, depth);
        }
        if self.rng.gen_bool(0.05) {
            return if self.rng.gen() { "True" } else { "False" }.into();
        }
        let s = self.rng.gen_range(0..self.sorts.len());
        let op = if self.rng.gen_bool(0.7) { "==" } else { "!=" };
        format!("{} {op} {}", self.term(s, depth), self.term(s, depth))
    }

    fn list(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.boolean(0)).collect()
    }

    fn int_term(&mut self, depth: u32) -> (String, i64) {
        let s = self.rng.gen_range(0..self.sorts.len());
        let v = self.fresh_var();
        self.bound.push((v.clone(), s));
        let body = self.boolean(depth);
        self.bound.pop();
        let domain = self.domain(s);
        let size = self.domain_size(&domain, s);
        (format!("Sum([{body} for {v} in {domain}])"), size as i64)
    }

    fn domain(&mut self, sort: usize) -> String {
        let lists: Vec<String> = self.lists.iter().filter(|l| l.1 == sort).map(|l| l.0.clone()).collect();
        if !lists.is_empty() && self.rng.gen_bool(0.4) {
            lists.choose(self.rng).unwrap().clone()
        } else {
            Self::sort_name(sort)
        }
    }

    fn domain_size(&self, domain: &str, sort: usize) -> usize {
        if domain.starts_with('s') {
            self.sorts[sort].len()
        } else {
            // Lists are named L<sort>_<len>.
            domain.rsplit('_').next().unwrap().parse().unwrap()
        }
    }

    fn boolean(&mut self, depth: u32) -> String {
        if depth == 0 {
            return self.atom(0);
        }
        let d = depth - 1;
        match self.rng.gen_range(0..14) {
            0 => format!("Not({})", self.boolean(d)),
            1 => {
                let n = self.rng.gen_range(2..=3);
                format!("And({})", self.list_at(n, d).join(", "))
            }
            2 => {
                let n = self.rng.gen_range(2..=3);
                format!("Or({})", self.list_at(n, d).join(", "))
            }
            3 => format!("Implies({}, {})", self.boolean(d), self.boolean(d)),
            4 => format!("Xor({}, {})", self.boolean(d), self.boolean(d)),
            5 => format!("If({}, {}, {})", self.boolean(d), self.boolean(d), self.boolean(d)),
            6 => {
                let s = self.rng.gen_range(0..self.sorts.len());
                let n = self.rng.gen_range(2..=3);
                let ts: Vec<String> = (0..n).map(|_| self.term(s, d)).collect();
                format!("Distinct({})", ts.join(", "))
            }
            7 | 8 => {
                let q = if self.rng.gen() { "ForAll" } else { "Exists" };
                let s = self.rng.gen_range(0..self.sorts.len());
                let v = self.fresh_var();
                self.bound.push((v.clone(), s));
                let body = self.boolean(d);
                self.bound.pop();
                format!("{q} {v}: {}. {body}", Self::sort_name(s))
            }
            9 => {
                let op = if self.rng.gen() { "And" } else { "Or" };
                let s = self.rng.gen_range(0..self.sorts.len());
                let v = self.fresh_var();
                self.bound.push((v.clone(), s));
                let body = self.boolean(d);
                self.bound.pop();
                let domain = self.domain(s);
                format!("{op}([{body} for {v} in {domain}])")
            }
            10 | 11 => {
                let (sum, size) = self.int_term(d);
                let op = ["==", "!=", "<", "<=", ">", ">="].choose(self.rng).unwrap();
                if self.rng.gen_bool(0.25) {
                    let (other, _) = self.int_term(d);
                    let arith = if self.rng.gen() { "+" } else { "-" };
                    let k = self.rng.gen_range(-1..=size + 1);
                    format!("{sum} {arith} {other} {op} {k}")
                } else {
                    let k = self.rng.gen_range(0..=size);
                    format!("{sum} {op} {k}")
                }
            }
            12 => {
                let kind = if self.rng.gen() { "AtMost" } else { "AtLeast" };
                let n = self.rng.gen_range(2..=4);
                let k = self.rng.gen_range(0..=n);
                format!("{kind}({}, {k})", self.list(n).join(", "))
            }
            _ => self.atom(d),
        }
    }

    fn list_at(&mut self, n: usize, depth: u32) -> Vec<String> {
        (0..n).map(|_| self.boolean(depth)).collect()
    }
}

/// A random program with its source. Universes above `MAX_STATE_BITS` are redrawn.
pub fn random_program_source(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(src) = attempt(&mut rng) {
            return src;
        }
    }
}

fn attempt(rng: &mut ChaCha8Rng) -> Option<String> {
    let nsorts = rng.gen_range(1..=MAX_SORTS);
    let sorts: Vec<Vec<String>> = (0..nsorts)
        .map(|i| (0..rng.gen_range(2..=MAX_MEMBERS)).map(|j| format!("m{i}_{j}")).collect())
        .collect();
    let mut bits = 0.0f64;
    let consts: Vec<(String, usize)> = (0..rng.gen_range(0..=2))
        .map(|i| (format!("k{i}"), rng.gen_range(0..nsorts)))
        .collect();
    for (_, s) in &consts {
        bits += (sorts[*s].len() as f64).log2();
    }
    let funcs: Vec<Func> = (0..rng.gen_range(1..=MAX_FUNCTIONS))
        .map(|i| {
            let arity = rng.gen_range(1..=2);
            Func {
                name: format!("f{i}"),
                args: (0..arity).map(|_| rng.gen_range(0..nsorts)).collect(),
                result: if rng.gen_bool(0.7) { None } else { Some(rng.gen_range(0..nsorts)) },
            }
        })
        .collect();
    for f in &funcs {
        let cells: usize = f.args.iter().map(|&s| sorts[s].len()).product();
        let width = f.result.map_or(1.0, |s| (sorts[s].len() as f64).log2());
        bits += cells as f64 * width;
    }
    if bits > MAX_STATE_BITS {
        return None;
    }
    let mut lists = Vec::new();
    let mut src = String::from("#INIT: random universe\n");
    for (i, members) in sorts.iter().enumerate() {
        writeln!(src, "enum s{i} {{ {} }}", members.join(", ")).unwrap();
    }
    for (name, s) in &consts {
        writeln!(src, "const {name}: s{s}").unwrap();
    }
    for f in &funcs {
        let args: Vec<String> = f.args.iter().map(|s| format!("s{s}")).collect();
        let result = f.result.map_or("bool".to_string(), |s| format!("s{s}"));
        writeln!(src, "fn {}({}) -> {result}", f.name, args.join(", ")).unwrap();
    }
    for (i, members) in sorts.iter().enumerate() {
        if rng.gen_bool(0.5) {
            let n = rng.gen_range(1..=members.len());
            let picked: Vec<String> = members.choose_multiple(rng, n).cloned().collect();
            let name = format!("L{i}_{n}");
            writeln!(src, "list {name} = [{}]", picked.join(", ")).unwrap();
            lists.push((name, i));
        }
    }
    let mut g = Gen {
        rng,
        sorts,
        consts,
        funcs,
        lists,
        bound: Vec::new(),
        fresh: 0,
    };
    if g.rng.gen_bool(0.3) {
        let e = g.boolean(1);
        writeln!(src, "assert {e}").unwrap();
    }
    for i in 0..g.rng.gen_range(1..=MAX_CONSTRAINTS) {
        let depth = g.rng.gen_range(0..=3);
        let e = g.boolean(depth);
        writeln!(src, "#CONSTRAINT: rule {}\nassert {e}", i + 1).unwrap();
    }
    for label in ["A", "B", "C"].iter().take(g.rng.gen_range(1..=3)) {
        let check = ["sat", "unsat", "valid"].choose(g.rng).unwrap();
        let depth = g.rng.gen_range(0..=2);
        let e = g.boolean(depth);
        writeln!(src, "#OPTION {label} {check}: choice {label}\ncheck {e}").unwrap();
    }
    Some(src)
}

pub fn random_program(seed: u64) -> (SegmentedProgram, Scope, String) {
    let src = random_program_source(seed);
    let p = ssv_core::dsl::parse_program(&src).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
    let scope = Scope::for_program(&p).unwrap();
    (p, scope, src)
}

/// The solver queries compared against the oracle for one program: each constraint
/// alone with init, all constraints, and each option check and its negation on top.
pub fn agreement_queries(p: &SegmentedProgram) -> Vec<Vec<Expr>> {
    let init = p.init.preconditions.clone();
    let mut out = vec![init.clone()];
    for c in &p.constraints {
        out.push(init.iter().chain(&c.exprs).cloned().collect());
    }
    let mut all = init;
    all.extend(p.constraint_exprs());
    out.push(all.clone());
    for o in &p.options {
        let mut with = all.clone();
        with.push(o.check.clone());
        out.push(with);
        let mut without = all.clone();
        without.push(Expr::not(o.check.clone()));
        out.push(without);
    }
    out
}

pub fn dataset_dir() -> PathBuf {
    fixtures().join("dataset")
}

pub fn dataset() -> Vec<ssv_core::task::ReasoningTask> {
    ssv_core::task::load_dataset(&dataset_dir().join("tasks.jsonl"), None).unwrap()
}

/// An evaluator answering every request from the bundled transcripts.
pub fn replay_evaluator(smt: Smt) -> ssv_core::harness::Evaluator {
    use ssv_core::llm::{Gateway, PromptSet, TranscriptStore};
    let store = TranscriptStore::load(&dataset_dir().join("transcripts.json")).unwrap();
    ssv_core::harness::Evaluator {
        llm: Arc::new(Gateway::replay(Arc::new(store))),
        smt,
        prompts: PromptSet::builtin(),
    }
}
