mod common;

use common::*;

use softtime::engine::{decision_log, Run};
use softtime::lang::{Dialect, Program};
use softtime::trace_doc::{
    decisions_of_document, document_of_run, render_timeline, SchedulerMeta, TraceDocument,
};

fn document(program: &Program, path: &std::path::Path, run: &Run) -> TraceDocument {
    let meta = SchedulerMeta {
        kind: "priority".to_string(),
        seed: None,
    };
    document_of_run(program, &path.display().to_string(), meta, true, run)
}

#[test]
fn documents_survive_json_and_reproduce_the_decision_log() {
    for path in corpus_files() {
        let program = load_expanded(&path);
        let run = run_priority(&program, 64);
        let doc = document(&program, &path, &run);
        let json = serde_json::to_string_pretty(&doc).unwrap();
        let back: TraceDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(doc, back, "{}", path.display());
        assert_eq!(
            decisions_of_document(&back),
            decision_log(&run),
            "{}",
            path.display()
        );
    }
}

#[test]
fn replaying_a_seeded_run_reproduces_it_exactly() {
    for path in corpus_files() {
        let program = load_expanded(&path);
        let run = run_seeded(&program, 7, 64);
        let log = decision_log(&run);
        let replayed = match program.dialect {
            Dialect::Mp => softtime::engine::mp::run_mp(
                &program,
                softtime::engine::Scheduler::Replay(log),
                64,
                None,
            )
            .unwrap(),
            Dialect::Il => softtime::engine::il::run_il(
                &program,
                softtime::engine::Scheduler::Replay(log),
                64,
                false,
                None,
            )
            .unwrap(),
        };
        assert_eq!(run.status, replayed.status, "{}", path.display());
        assert_eq!(run.clock, replayed.clock, "{}", path.display());
        assert_eq!(run.final_store, replayed.final_store, "{}", path.display());
        let deltas = |r: &Run| r.ticks.iter().map(|t| t.delta.clone()).collect::<Vec<_>>();
        assert_eq!(deltas(&run), deltas(&replayed), "{}", path.display());
    }
}

#[test]
fn timelines_and_documents_agree_on_the_event_multiset() {
    for path in corpus_files() {
        let program = load_expanded(&path);
        let run = run_priority(&program, 64);
        let doc = document(&program, &path, &run);
        let timeline = render_timeline(&program, &run, true);
        let mut rows = Vec::new();
        for line in timeline.lines() {
            let Some((idx, rest)) = line.split_once(" | ") else {
                continue;
            };
            let Ok(t) = idx.trim().parse::<usize>() else {
                continue;
            };
            let cells: Vec<&str> = rest.split(" | ").collect();
            assert!(cells.len() >= 2, "{}: short row {line:?}", path.display());
            let mut rules: Vec<String> = Vec::new();
            for cell in &cells[..cells.len() - 1] {
                let cell = cell.trim();
                if cell == "-" || cell.is_empty() {
                    continue;
                }
                for token in cell.split("; ") {
                    rules.push(token.split_whitespace().next().unwrap().to_string());
                }
            }
            rules.sort();
            rows.push((t, rules));
        }
        assert_eq!(rows.len(), doc.ticks.len(), "{}", path.display());
        for (t, rules) in rows {
            let mut expect: Vec<String> =
                doc.ticks[t].events.iter().map(|e| e.rule.clone()).collect();
            expect.sort();
            assert_eq!(rules, expect, "{}: tick {t}", path.display());
        }
    }
}
