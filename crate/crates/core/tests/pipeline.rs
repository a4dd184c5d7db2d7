use std::sync::Arc;

use brace_forge::brace::verify_brace;
use brace_forge::corpus::{self, Structure};
use brace_forge::flows::{self, flows_circ, verify_flows, FlowsContext};
use brace_forge::prelie::{extract_prelie, verify_prelie};
use brace_forge::props::{check_property1, check_property3, implication_lattice};
use brace_forge::{Budget, Mode, PullbackChoice};

#[test]
fn roundtrip_radical_13_5() {
    let b = corpus::brace_from_spec("radical:p=13,n=5").unwrap();
    let r = flows::verify_roundtrip(&b, 1, PullbackChoice::Canonical, &Budget::default()).unwrap();
    assert!(r.equal, "{:?}", r.witness);
    assert_eq!(r.quotient.order(), 13);
    assert_eq!(r.mode, Mode::Exhaustive);
}

#[test]
fn odot_of_brace_matches_odot_of_flows() {
    let b = corpus::brace_from_spec("radical:p=13,n=5").unwrap();
    for choice in [PullbackChoice::Canonical, PullbackChoice::offset(4)] {
        let r = flows::verify_odot_equality(&b, 1, choice, &Budget::default()).unwrap();
        assert!(r.equal, "{choice}: {:?}", r.witness);
    }
}

#[test]
fn extract_then_flows() {
    let budget = Budget::default();
    let b = corpus::brace_from_spec("radical:p=13,n=5").unwrap();
    let pl = extract_prelie(&b, 1, PullbackChoice::Canonical, &budget).unwrap();
    assert_eq!(pl.order(), 13u128.pow(3));
    assert!(verify_prelie(&pl, &budget).passed);
    assert!(check_property3(&pl, &budget).holds);
    let fb = flows_circ(Arc::new(FlowsContext::new(&pl, PullbackChoice::Canonical).unwrap())).unwrap();
    let r = verify_flows(&fb, &budget);
    assert!(r.passed(), "{:?}", r.critical());
}

#[test]
fn structure_files_roundtrip() {
    let dir = std::env::temp_dir();
    for spec in ["radical:p=7,n=3", "ramified:p=5,e=2", "scalar-prelie:p=7,n=3,mu=7"] {
        let s = match corpus::from_spec(spec).unwrap() {
            corpus::Built::Brace(b) => Structure::Brace(b),
            corpus::Built::PreLie(p) => Structure::PreLie(p),
        };
        let path = dir.join(format!("brace-forge-pipeline-{}-{}.json", std::process::id(), spec.replace([':', ',', '='], "_")));
        corpus::save(&s, &path).unwrap();
        let back = corpus::load(&path).unwrap();
        match (&s, &back) {
            (Structure::Brace(a), Structure::Brace(b)) => {
                assert!(a.structurally_eq(b), "{spec}");
                assert!(verify_brace(b, &Budget::default()).passed);
            }
            (Structure::PreLie(a), Structure::PreLie(b)) => assert!(a.structurally_eq(b), "{spec}"),
            _ => panic!("{spec}: kind changed"),
        }
        let _ = std::fs::remove_file(&path);
    }
}

#[test]
fn negative_control_is_caught() {
    let budget = Budget::default();
    let b = corpus::brace_from_spec("control-p1:p=7").unwrap();
    let p1 = check_property1(&b, &budget);
    assert!(!p1.holds);
    assert!(p1.witness.is_some());
    assert!(implication_lattice(&b, 1, &budget).violations.is_empty());
    let e = flows::verify_roundtrip(&b, 1, PullbackChoice::Canonical, &budget).unwrap_err();
    assert!(matches!(e, brace_forge::Error::Precondition { .. }), "{e}");
}
