use std::path::Path;
use std::sync::Arc;

use ssv_core::dsl::{self, Scope};
use ssv_core::smt::{ProcessSolver, Smt};
use ssv_core::verify::{
    degeneracy_check, is_well_formed, load_instantiations, verify_instantiations, DegeneracyFlag, FailReason,
    Instantiation, Polarity, VerifyStatus,
};

fn smt() -> Smt {
    Smt::new(Arc::new(ProcessSolver::new("z3 -in").unwrap()))
}

fn fixture(name: &str) -> dsl::SegmentedProgram {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    dsl::parse_program(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn insts() -> Vec<Instantiation> {
    load_instantiations(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/technicians_c3_instantiations.json"))
        .unwrap()
}

#[test]
fn exists_variant_fails_on_negative_example() {
    let out = verify_instantiations(&smt(), &fixture("technicians_exists.ssv"), &insts()).unwrap();
    assert_eq!(out.status, VerifyStatus::Fail);
    assert_eq!(out.reason, Some(FailReason::NegSat));
    let failing = out.failing.unwrap();
    assert_eq!((failing.constraint, failing.polarity), (2, Polarity::Negative));
}

#[test]
fn forall_variant_passes() {
    let out = verify_instantiations(&smt(), &fixture("technicians.ssv"), &insts()).unwrap();
    assert_eq!(out.status, VerifyStatus::Pass);
}

#[test]
fn all_none_passes_vacuously() {
    let p = fixture("technicians.ssv");
    let none: Vec<_> = (0..p.constraints.len())
        .flat_map(|i| [Instantiation::new(i, Polarity::Positive, None), Instantiation::new(i, Polarity::Negative, Some("NONE"))])
        .collect();
    assert!(verify_instantiations(&smt(), &p, &none).unwrap().passed());
}

#[test]
fn free_symbols_are_ill_formed() {
    let p = fixture("technicians.ssv");
    let bad = vec![Instantiation::new(0, Polarity::Positive, Some("repairs(b1, radios)"))];
    let out = verify_instantiations(&smt(), &p, &bad).unwrap();
    assert_eq!(out.reason, Some(FailReason::IllFormedExample));
    assert!(out.detail.unwrap().contains("b1"));
}

#[test]
fn first_failure_is_order_independent() {
    let p = fixture("technicians.ssv");
    let mut list = vec![
        Instantiation::new(3, Polarity::Positive, Some("Not(repairs(Zane, radios))")),
        Instantiation::new(1, Polarity::Negative, Some("repairs(Yolanda, VCRs)")),
        Instantiation::new(1, Polarity::Positive, Some("repairs(Yolanda, radios)")),
    ];
    let a = verify_instantiations(&smt(), &p, &list).unwrap();
    list.reverse();
    let b = verify_instantiations(&smt(), &p, &list).unwrap();
    assert_eq!(a, b);
    let f = a.failing.unwrap();
    assert_eq!((f.constraint, f.polarity), (1, Polarity::Negative));
}

#[test]
fn technicians_program_is_well_formed() {
    let s = smt();
    let p = fixture("technicians.ssv");
    let outcome = s.execute_program(&p).unwrap();
    let report = is_well_formed(&s, &p, &outcome).unwrap();
    assert!(report.ok, "{report:?}");
}

#[test]
fn degeneracy_flags() {
    let s = smt();
    let src = "enum tech { a, b }\nconst x: tech\nfn p(tech) -> bool\nfn q(tech) -> bool\n\
               #CONSTRAINT: taut\nassert Or(q(a), Not(q(a)))\n\
               #CONSTRAINT: contra\nassert x != x\n\
               #CONSTRAINT: vacuous\nassert ForAll t: tech. Implies(And(p(t), Not(p(t))), q(t))\n\
               #CONSTRAINT: fine\nassert p(x)\n\
               #OPTION A: a\ncheck p(a)";
    let p = dsl::parse_program(src).unwrap();
    let scope = Scope::for_program(&p).unwrap();
    let flags: Vec<_> = p
        .constraints
        .iter()
        .map(|c| degeneracy_check(&s, &scope, &p.init.preconditions, c).unwrap())
        .collect();
    assert!(flags[0].contains(&DegeneracyFlag::Tautology));
    assert!(flags[1].contains(&DegeneracyFlag::Contradiction));
    assert!(flags[2].contains(&DegeneracyFlag::VacuousImplication));
    assert!(flags[3].is_empty());
}
