//! The bundled models parse, flatten and explore.

use std::path::PathBuf;

use ttm_core::elaborator::{dump, flatten, FlatModel};
use ttm_core::lts::{explore, Limits, Lts};
use ttm_core::syntax::{parse, printer};

fn model_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(format!("{name}.ttm"))
}

fn load(name: &str) -> FlatModel {
    let text = std::fs::read_to_string(model_path(name)).unwrap();
    let src = parse(&text).unwrap_or_else(|d| panic!("{name}: {d:?}"));
    flatten(&src).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const ALL: [&str; 6] = [
    "train_abstract",
    "train_abstract_demonic",
    "train_refined",
    "nop_sync",
    "nop_refined",
    "philosophers",
];

#[test]
fn every_model_flattens() {
    for name in ALL {
        let m = load(name);
        assert!(!m.events.is_empty(), "{name}");
    }
}

#[test]
fn every_model_round_trips_through_the_printer() {
    for name in ALL {
        let text = std::fs::read_to_string(model_path(name)).unwrap();
        let a = parse(&text).unwrap();
        let printed = printer::print_model(&a);
        let b = parse(&printed).unwrap_or_else(|d| panic!("{name}: {d:?}\n{printed}"));
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn nop_sync_has_one_compound_event() {
    let m = load("nop_sync");
    let ids: Vec<&str> = m.events.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(ids, vec!["controller.act"]);
    let e = &m.events[0];
    assert_eq!(e.members, vec!["nop.respond", "env.generate", "sensor_0.respond", "sensor_1.respond"]);
    let set = &m.graphs.sync_sets[0];
    assert_eq!(
        set.projection_order,
        vec!["init_response", "calibrated_nop_signal", "f_NOPsp", "f_NOPsentrip", "c_NOPparmtrip"]
    );
    for v in ["calibrated_nop_signal", "f_NOPsp", "f_NOPsentrip", "c_NOPparmtrip"] {
        assert!(m.var_index(v).is_some(), "{v}");
    }
}

#[test]
fn nop_refined_interleaves_plant_and_controller() {
    let m = load("nop_refined");
    let ids: Vec<&str> = m.events.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(ids, vec!["env.generate", "controller.act"]);
    let act = &m.events[1];
    assert_eq!((act.l, act.u), (1, Some(1)));
    assert_eq!((m.events[0].l, m.events[0].u), (2, None));
}

#[test]
fn dumps_are_deterministic() {
    for name in ALL {
        let a = serde_json::to_string_pretty(&dump(&load(name))).unwrap();
        let b = serde_json::to_string_pretty(&dump(&load(name))).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn train_abstract_state_count_is_stable() {
    let lts = Lts::new(load("train_abstract"));
    let a = explore(&lts, Limits::default()).unwrap();
    let b = explore(&lts, Limits { workers: 2, ..Limits::default() }).unwrap();
    assert_eq!(a.stats, b.stats);
    assert!(a.deadlocks().is_empty());
}
