//! The versioned JSON trace document emitted by `run --format json`,
//! and the timeline rendering of the same run.

use serde::{Deserialize, Serialize};

use crate::constraint::{SoftConstraint, Universe, VarId};
use crate::engine::{ChoiceRec, DecisionLog, Run, RunStatus, Tick, TickDecision};
use crate::lang::ast::{Agent, Program};

pub const SCHEMA: &str = "softtime-trace/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub schema: String,
    pub program: ProgramMeta,
    pub scheduler: SchedulerMeta,
    pub standard_initial_store: bool,
    pub ticks: Vec<TickRecord>,
    pub outcome: Outcome,
    pub clock: u32,
    pub final_store: StoreRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<StoreRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramMeta {
    pub source: String,
    pub dialect: String,
    pub semiring: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerMeta {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Suspended,
    Budget,
}

impl From<RunStatus> for Outcome {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::Success => Outcome::Success,
            RunStatus::Suspended => Outcome::Suspended,
            RunStatus::BudgetExceeded => Outcome::Budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub blevel: String,
    pub table: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u32,
    pub events: Vec<EventRecord>,
    pub delta: StoreRecord,
    pub store: StoreRecord,
    pub decision: DecisionRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub rule: String,
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DecisionRecord {
    Mp { choices: Vec<ChoiceRecord> },
    Il { transition: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub path: String,
    pub chosen: usize,
    pub enabled: Vec<usize>,
}

fn store_record(store: &SoftConstraint, u: &Universe) -> StoreRecord {
    let resolve = |v: VarId| u.var_name(v).to_string();
    StoreRecord {
        blevel: store.blevel().to_string(),
        table: crate::engine::canonical_store_string(store, u, &resolve),
    }
}

fn decision_record(d: &TickDecision) -> DecisionRecord {
    match d {
        TickDecision::Mp(recs) => DecisionRecord::Mp {
            choices: recs
                .iter()
                .map(|r| ChoiceRecord {
                    path: r.path.clone(),
                    chosen: r.chosen,
                    enabled: r.enabled.clone(),
                })
                .collect(),
        },
        TickDecision::Il(ix) => DecisionRecord::Il { transition: *ix },
    }
}

fn tick_record(t: &Tick, u: &Universe) -> TickRecord {
    TickRecord {
        tick: t.index,
        events: t
            .events
            .iter()
            .map(|e| EventRecord {
                rule: e.rule.to_string(),
                path: e.path.clone(),
                constraint: e.delta.as_ref().map(|l| l.to_string()),
            })
            .collect(),
        delta: store_record(&t.delta, u),
        store: store_record(&t.store_after, u),
        decision: decision_record(&t.decision),
    }
}

/// Serializes a finished run, including enough decision detail to
/// replay it exactly.
pub fn document_of_run(
    program: &Program,
    source: &str,
    scheduler: SchedulerMeta,
    standard_initial_store: bool,
    run: &Run,
) -> TraceDocument {
    let u = &run.universe;
    TraceDocument {
        schema: SCHEMA.to_string(),
        program: ProgramMeta {
            source: source.to_string(),
            dialect: program.dialect.to_string(),
            semiring: program.kind.to_string(),
        },
        scheduler,
        standard_initial_store,
        ticks: run.ticks.iter().map(|t| tick_record(t, u)).collect(),
        outcome: run.status.into(),
        clock: run.clock,
        final_store: store_record(&run.final_store, u),
        observable: run.observable.as_ref().map(|o| store_record(o, u)),
    }
}

/// Recovers the decision log from a document, for replay.
pub fn decisions_of_document(doc: &TraceDocument) -> DecisionLog {
    doc.ticks
        .iter()
        .map(|t| match &t.decision {
            DecisionRecord::Mp { choices } => TickDecision::Mp(
                choices
                    .iter()
                    .map(|c| ChoiceRec {
                        path: c.path.clone(),
                        chosen: c.chosen,
                        enabled: c.enabled.clone(),
                    })
                    .collect(),
            ),
            DecisionRecord::Il { transition } => TickDecision::Il(*transition),
        })
        .collect()
}

fn flatten_components<'a>(agent: &'a Agent, prefix: String, out: &mut Vec<(String, &'a Agent)>) {
    if let Agent::Parallel(l, r) = agent {
        let lp = if prefix.is_empty() {
            "0".to_string()
        } else {
            format!("{prefix}.0")
        };
        let rp = if prefix.is_empty() {
            "1".to_string()
        } else {
            format!("{prefix}.1")
        };
        flatten_components(l, lp, out);
        flatten_components(r, rp, out);
    } else {
        out.push((prefix, agent));
    }
}

fn event_cell(events: &[(String, Option<String>)]) -> String {
    if events.is_empty() {
        return "-".to_string();
    }
    events
        .iter()
        .map(|(rule, label)| match label {
            Some(l) => format!("{rule} {l}"),
            None => rule.clone(),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn pad(s: &str, w: usize) -> String {
    format!("{s:<w$}")
}

/// Renders the run as one row per tick with one column per top-level
/// parallel component, a column for the synchronisation glue, and the
/// store level reached.
pub fn render_timeline(program: &Program, run: &Run, standard_initial_store: bool) -> String {
    let mut comps: Vec<(String, &Agent)> = Vec::new();
    flatten_components(&program.main, String::new(), &mut comps);
    let n = comps.len();
    let mut headers: Vec<String> = vec!["t".to_string()];
    for i in 0..n {
        headers.push(format!("A{}", i + 1));
    }
    headers.push("sync".to_string());
    headers.push("blevel".to_string());
    let mut rows: Vec<Vec<String>> = Vec::new();
    for t in &run.ticks {
        let mut cells: Vec<Vec<(String, Option<String>)>> = vec![Vec::new(); n + 1];
        for e in &t.events {
            let mut placed = false;
            for (i, (prefix, _)) in comps.iter().enumerate() {
                let within = prefix.is_empty()
                    || e.path == *prefix
                    || e.path.starts_with(&format!("{prefix}."));
                if within {
                    cells[i].push((
                        e.rule.to_string(),
                        e.delta.as_ref().map(|l| l.to_string()),
                    ));
                    placed = true;
                    break;
                }
            }
            if !placed {
                cells[n].push((e.rule.to_string(), None));
            }
        }
        let mut row = vec![t.index.to_string()];
        for c in &cells {
            row.push(event_cell(c));
        }
        row.push(t.store_after.blevel().to_string());
        rows.push(row);
    }
    let mut widths: Vec<usize> = headers.iter().map(String::len).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    if !standard_initial_store {
        out.push_str("note: non-standard initial store\n");
    }
    let fmt_row = |row: &[String], widths: &[usize]| -> String {
        row.iter()
            .enumerate()
            .map(|(i, c)| pad(c, widths[i]))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    out.push_str(&fmt_row(&headers, &widths));
    out.push('\n');
    let total: usize = widths.iter().sum::<usize>() + 3 * widths.len().saturating_sub(1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for row in &rows {
        out.push_str(&fmt_row(row, &widths));
        out.push('\n');
    }
    let outcome = match run.status {
        RunStatus::Success => "success",
        RunStatus::Suspended => "suspended",
        RunStatus::BudgetExceeded => "budget",
    };
    out.push_str(&format!(
        "outcome: {} at clock {}, final blevel {}\n",
        outcome,
        run.clock,
        run.final_store.blevel()
    ));
    if let Some(o) = &run.observable {
        let resolve = |v: VarId| run.universe.var_name(v).to_string();
        out.push_str(&format!(
            "observable: {}\n",
            crate::engine::canonical_store_string(o, &run.universe, &resolve)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::mp::run_mp;
    use crate::engine::Scheduler;
    use crate::lang::expand::expand_program;
    use crate::lang::parser::parse_program;

    const SLICE: &str = "\
dialect tsccp
semiring weighted
var x in {0, 1, 2, 3}
constraint c1 on (x) { (0) -> 3 (1) -> 4 (2) -> 5 (3) -> 6 }
constraint c2 on (x) { (0) -> 5 (1) -> 6 (2) -> 7 (3) -> 8 }
";

    fn prog(main: &str) -> Program {
        let src = format!("{SLICE}{main}");
        expand_program(&parse_program(&src).unwrap()).unwrap()
    }

    #[test]
    fn documents_round_trip_through_json() {
        let p = prog("main: (tell(c1) ->[inf] success) || (ask(c1) ->[inf] tell(c2) ->[inf] success)");
        let run = run_mp(&p, Scheduler::Priority, 16, None).unwrap();
        let doc = document_of_run(
            &p,
            "inline",
            SchedulerMeta {
                kind: "priority".to_string(),
                seed: None,
            },
            true,
            &run,
        );
        let text = serde_json::to_string_pretty(&doc).unwrap();
        let back: TraceDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(doc, back);
        assert_eq!(back.schema, SCHEMA);
        assert_eq!(back.outcome, Outcome::Success);
        let log = decisions_of_document(&back);
        assert_eq!(log, crate::engine::decision_log(&run));
    }

    #[test]
    fn timeline_and_json_share_the_event_multiset() {
        let p = prog("main: (tell(c1) ->[inf] success) || (tell(c2) ->[inf] success)");
        let run = run_mp(&p, Scheduler::Priority, 16, None).unwrap();
        let doc = document_of_run(
            &p,
            "inline",
            SchedulerMeta {
                kind: "priority".to_string(),
                seed: None,
            },
            true,
            &run,
        );
        let timeline = render_timeline(&p, &run, true);
        let mut from_json: Vec<(u32, String)> = doc
            .ticks
            .iter()
            .flat_map(|t| t.events.iter().map(move |e| (t.tick, e.rule.clone())))
            .collect();
        from_json.sort();
        let mut from_timeline: Vec<(u32, String)> = Vec::new();
        for line in timeline.lines().skip(2) {
            let cells: Vec<&str> = line.split(" | ").collect();
            if cells.len() < 4 {
                continue;
            }
            let Ok(tick) = cells[0].trim().parse::<u32>() else {
                continue;
            };
            for cell in &cells[1..cells.len() - 1] {
                for ev in cell.trim().split("; ") {
                    let rule = ev.split_whitespace().next().unwrap_or("");
                    if rule != "-" && !rule.is_empty() {
                        from_timeline.push((tick, rule.to_string()));
                    }
                }
            }
        }
        from_timeline.sort();
        assert_eq!(from_json, from_timeline);
    }

    #[test]
    fn timelines_have_one_column_per_component() {
        let p = prog("main: (tell(c1) ->[inf] success) || (tell(c2) ->[inf] success) || success");
        let run = run_mp(&p, Scheduler::Priority, 16, None).unwrap();
        let timeline = render_timeline(&p, &run, true);
        let header = timeline.lines().next().unwrap();
        assert!(header.contains("A1"));
        assert!(header.contains("A2"));
        assert!(header.contains("A3"));
        assert!(header.contains("sync"));
        let marked = render_timeline(&p, &run, false);
        assert!(marked.starts_with("note: non-standard initial store"));
    }
}
