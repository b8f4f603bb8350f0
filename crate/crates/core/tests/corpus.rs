mod common;

use common::*;

use softtime::engine::RunStatus;
use softtime::lang::{parse_program, pretty_program};

#[test]
fn every_corpus_file_parses_expands_and_fits_its_dialect() {
    for path in corpus_files() {
        let parsed = load_parsed(&path);
        parsed
            .check_dialect()
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let expanded = load_expanded(&path);
        expanded
            .check_dialect()
            .unwrap_or_else(|e| panic!("{} (expanded): {e}", path.display()));
        assert_eq!(parsed.dialect, expanded.dialect, "{}", path.display());
        assert_eq!(parsed.kind, expanded.kind, "{}", path.display());
    }
}

#[test]
fn pretty_printing_round_trips_every_corpus_file() {
    for path in corpus_files() {
        let p0 = load_parsed(&path);
        let s1 = pretty_program(&p0);
        let p1 = parse_program(&s1)
            .unwrap_or_else(|e| panic!("{}: reparse failed: {e}\n{s1}", path.display()));
        assert_eq!(p0, p1, "{}: AST changed across print/parse", path.display());
        assert_eq!(
            s1,
            pretty_program(&p1),
            "{}: printing is not idempotent",
            path.display()
        );
    }
}

#[test]
fn every_corpus_run_succeeds_under_the_priority_scheduler() {
    for path in corpus_files() {
        let program = load_expanded(&path);
        let run = run_priority(&program, 64);
        assert_eq!(
            run.status,
            RunStatus::Success,
            "{}: expected success, got {:?} at clock {}",
            path.display(),
            run.status,
            run.clock
        );
        assert!(run.observable.is_some(), "{}", path.display());
    }
}

#[test]
fn corpus_runs_satisfy_the_store_laws_under_several_schedulers() {
    for path in corpus_files() {
        let program = load_expanded(&path);
        for (name, run) in [
            ("priority", run_priority(&program, 64)),
            ("seed 1", run_seeded(&program, 1, 64)),
            ("seed 42", run_seeded(&program, 42, 64)),
        ] {
            let what = format!("{} under {name}", path.display());
            assert_run_invariants(&program, &run, &what);
        }
    }
}
