#![allow(dead_code)]

use std::path::{Path, PathBuf};

use softtime::constraint::SoftConstraint;
use softtime::engine::{Run, Tick};
use softtime::lang::{expand_program, parse_program, Dialect, Program};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus_files() -> Vec<PathBuf> {
    let mut out = Vec::new();
    for sub in ["desk", "auction"] {
        let dir = corpus_dir().join(sub);
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "tsccp" || e == "tscci") {
                out.push(path);
            }
        }
    }
    out.sort();
    assert!(out.len() >= 12, "corpus unexpectedly small: {}", out.len());
    out
}

pub fn read_source(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

pub fn load_parsed(path: &Path) -> Program {
    parse_program(&read_source(path)).unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

pub fn load_expanded(path: &Path) -> Program {
    let p = load_parsed(path);
    expand_program(&p).unwrap_or_else(|e| panic!("expand {}: {e}", path.display()))
}

pub fn run_priority(program: &Program, max_steps: u32) -> Run {
    match program.dialect {
        Dialect::Mp => softtime::engine::mp::run_mp(
            program,
            softtime::engine::Scheduler::Priority,
            max_steps,
            None,
        )
        .unwrap(),
        Dialect::Il => softtime::engine::il::run_il(
            program,
            softtime::engine::Scheduler::Priority,
            max_steps,
            false,
            None,
        )
        .unwrap(),
    }
}

pub fn run_seeded(program: &Program, seed: u64, max_steps: u32) -> Run {
    match program.dialect {
        Dialect::Mp => softtime::engine::mp::run_mp(
            program,
            softtime::engine::Scheduler::Seeded(seed),
            max_steps,
            None,
        )
        .unwrap(),
        Dialect::Il => softtime::engine::il::run_il(
            program,
            softtime::engine::Scheduler::Seeded(seed),
            max_steps,
            false,
            None,
        )
        .unwrap(),
    }
}

/// Resolves the told constraint of each event to its table when every
/// label is a plain reference; renamed local tells make the product
/// unrecoverable from labels alone.
pub fn tick_event_product(program: &Program, tick: &Tick) -> Option<SoftConstraint> {
    let mut acc = SoftConstraint::top(program.kind);
    for ev in &tick.events {
        let Some(label) = &ev.delta else { continue };
        let table = match label {
            softtime::lang::CLabel::Top => SoftConstraint::top(program.kind),
            softtime::lang::CLabel::Bot => SoftConstraint::bot(program.kind),
            softtime::lang::CLabel::Named(n) => program.constraint(n)?.table.clone(),
            _ => return None,
        };
        acc = acc.combine(&table);
    }
    Some(acc)
}

/// Asserts the per-tick store laws every run must satisfy.
pub fn assert_run_invariants(program: &Program, run: &Run, what: &str) {
    let mut prev: Option<&SoftConstraint> = None;
    for tick in &run.ticks {
        assert_eq!(
            tick.store_after,
            tick.store_before.combine(&tick.delta),
            "{what}: tick {} after != before * delta",
            tick.index
        );
        assert!(
            tick.store_after.entails(&tick.store_before),
            "{what}: tick {} store shrank",
            tick.index
        );
        if let Some(p) = prev {
            assert_eq!(
                &tick.store_before, p,
                "{what}: tick {} assumption breaks the chain",
                tick.index
            );
        }
        if let Some(prod) = tick_event_product(program, tick) {
            assert_eq!(
                prod, tick.delta,
                "{what}: tick {} event product != delta",
                tick.index
            );
        }
        if program.dialect == Dialect::Il {
            let telling = tick.events.iter().filter(|e| e.delta.is_some()).count();
            assert!(
                telling <= 1,
                "{what}: tick {} has {telling} store actions in one interleaving step",
                tick.index
            );
        }
        prev = Some(&tick.store_after);
    }
    if let Some(last) = run.ticks.last() {
        assert_eq!(
            run.final_store, last.store_after,
            "{what}: final store detached from last tick"
        );
    }
}
