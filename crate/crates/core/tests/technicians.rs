use ssv_core::dsl::{self, Expr, Scope};
use ssv_core::oracle::{count_models, oracle_check, FiniteUniverse, DEFAULT_CAP};
use ssv_core::smt::SatStatus;

fn load() -> (dsl::SegmentedProgram, Scope) {
    let src = include_str!("../fixtures/technicians.ssv");
    let p = dsl::parse_program(src).expect("fixture parses");
    let scope = Scope::for_program(&p).unwrap();
    (p, scope)
}

fn with(base: &[Expr], extra: &[Expr]) -> Vec<Expr> {
    base.iter().chain(extra).cloned().collect()
}

#[test]
fn fixture_shape() {
    let (p, _) = load();
    assert_eq!(p.constraints.len(), 6);
    assert_eq!(p.options.len(), 5);
    assert_eq!(p.init.sorts.len(), 2);
    let fns = p
        .init
        .decls
        .iter()
        .filter(|d| matches!(d.kind, dsl::DeclKind::Function { .. }))
        .count();
    assert_eq!(fns, 1);
}

#[test]
fn model_counts_match_enumeration() {
    let (p, scope) = load();
    let u = FiniteUniverse::new(&scope, DEFAULT_CAP).unwrap();
    assert_eq!(u.states(), 1 << 18);
    let init = p.init.preconditions.clone();
    assert_eq!(count_models(&scope, &init).unwrap(), 117_649);
    let all = with(&init, &p.constraint_exprs());
    assert_eq!(count_models(&scope, &all).unwrap(), 24);
    let per_option: Vec<u64> = p
        .options
        .iter()
        .map(|o| count_models(&scope, &with(&all, std::slice::from_ref(&o.check))).unwrap())
        .collect();
    assert_eq!(per_option, vec![0, 0, 6, 0, 0]);
    let per_constraint: Vec<u64> = p
        .constraints
        .iter()
        .map(|c| count_models(&scope, &with(&init, &c.exprs)).unwrap())
        .collect();
    assert_eq!(per_constraint, vec![23_040, 33_614, 28_812, 36_015, 28_812, 50_421]);
}

#[test]
fn instantiations_against_forall_variant() {
    let (p, scope) = load();
    let mut base = p.init.preconditions.clone();
    base.extend(p.constraints[2].exprs.clone());
    let neg = dsl::parse_expr("And(repairs(Stacy, televisions), repairs(Yolanda, televisions))", &scope).unwrap();
    let pos = dsl::parse_expr("And(repairs(Stacy, radios), repairs(Yolanda, televisions))", &scope).unwrap();
    assert_eq!(oracle_check(&scope, &with(&base, &[neg])).unwrap(), SatStatus::Unsat);
    assert_eq!(count_models(&scope, &with(&base, &[pos])).unwrap(), 7_203);
}

#[test]
fn witness_assignment_satisfies_everything() {
    let (p, scope) = load();
    let u = FiniteUniverse::new(&scope, DEFAULT_CAP).unwrap();
    let mut st = u.empty_state();
    let owns: &[(&str, &[&str])] = &[
        ("Stacy", &["radios"]),
        ("Urma", &["radios", "televisions"]),
        ("Wim", &["televisions"]),
        ("Xena", &["radios", "televisions"]),
        ("Yolanda", &["televisions", "VCRs"]),
        ("Zane", &["radios", "televisions", "VCRs"]),
    ];
    for (t, ms) in owns {
        for m in ["radios", "televisions", "VCRs"] {
            let v = if ms.contains(&m) { "True" } else { "False" };
            u.set(&mut st, "repairs", &[t, m], v).unwrap();
        }
    }
    let all = with(&p.init.preconditions, &p.constraint_exprs());
    let cs: Vec<_> = all.iter().map(|e| u.compile(e, &scope).unwrap()).collect();
    assert!(u.holds(&cs, &st));
}

#[test]
fn print_round_trip() {
    let (p, _) = load();
    let text = dsl::print_program(&p).unwrap();
    let again = dsl::parse_program(&text).unwrap();
    assert_eq!(again, p);
    assert_eq!(dsl::print_program(&again).unwrap(), text);
}

mod solver {
    use super::*;
    use ssv_core::smt::{ProcessSolver, Smt};
    use std::sync::Arc;

    fn smt() -> Smt {
        Smt::new(Arc::new(ProcessSolver::new("z3 -in").unwrap()))
    }

    #[test]
    fn executes_to_option_c() {
        let (p, _) = load();
        let out = smt().execute_program(&p).unwrap();
        assert_eq!(out.answer.map(|l| l.as_char()), Some('C'));
        assert_eq!(out.passing.len(), 1);
    }

    #[test]
    fn second_run_hits_cache() {
        let (p, scope) = load();
        let s = smt();
        let base = with(&p.init.preconditions, &p.constraint_exprs());
        let a = s.check_sat(&scope, &base, &[]).unwrap();
        let b = s.check_sat(&scope, &base, &[]).unwrap();
        assert_eq!(a.status, SatStatus::Sat);
        assert!(!a.from_cache && b.from_cache);
        assert_eq!(a.status, b.status);
    }
}
