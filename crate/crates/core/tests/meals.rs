use std::sync::Arc;

use ssv_core::dsl::{self, CheckType, Expr, Scope};
use ssv_core::oracle::{count_models, FiniteUniverse, DEFAULT_CAP};
use ssv_core::smt::{ProcessSolver, Smt};

fn load() -> (dsl::SegmentedProgram, Scope) {
    let p = dsl::parse_program(include_str!("../fixtures/meals.ssv")).unwrap();
    let scope = Scope::for_program(&p).unwrap();
    (p, scope)
}

#[test]
fn counts() {
    let (p, scope) = load();
    assert_eq!(FiniteUniverse::new(&scope, DEFAULT_CAP).unwrap().states(), 390_625);
    let mut all = p.init.preconditions.clone();
    all.extend(p.constraint_exprs());
    assert_eq!(count_models(&scope, &all).unwrap(), 7);
    let first_two: Vec<Expr> = p.constraints[..2].iter().flat_map(|c| c.exprs.clone()).collect();
    assert_eq!(count_models(&scope, &first_two).unwrap(), 6_360);
}

#[test]
fn no_cannot_eat_option_is_valid() {
    let (p, scope) = load();
    assert!(p.options.iter().all(|o| o.check_type == CheckType::Valid));
    let mut all = p.init.preconditions.clone();
    all.extend(p.constraint_exprs());
    let smt = Smt::new(Arc::new(ProcessSolver::new("z3 -in").unwrap()));
    for o in &p.options {
        // Oracle: valid iff the base has models and none violate the check.
        let mut neg = all.clone();
        neg.push(Expr::not(o.check.clone()));
        let oracle_valid = count_models(&scope, &all).unwrap() > 0 && count_models(&scope, &neg).unwrap() == 0;
        assert!(!oracle_valid);
        assert_eq!(smt.is_valid(&scope, &all, &o.check).unwrap(), oracle_valid, "option {}", o.label);
    }
    assert_eq!(smt.execute_program(&p).unwrap().answer, None);
}
