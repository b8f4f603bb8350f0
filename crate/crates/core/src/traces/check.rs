//! Bounded checks relating the engines, the enumerated sequences, and
//! the denotational construction. Every check returns a verdict; cuts
//! anywhere in the construction downgrade mismatches to inconclusive.

use std::collections::BTreeSet;

use crate::constraint::{SoftConstraint, Universe};
use crate::engine::il::explore_il;
use crate::engine::mp::explore_mp;
use crate::engine::{project_observable, RunStatus};
use crate::lang::ast::{Agent, Dialect, Program};

use super::denote::{denote_il, denote_mp, sem_parallel};
use super::enumerate::enumerate_r_mp;
use super::universe::build_universe;
use super::{canonical_form, is_connected, is_connected_il, quotient_trailing, store_key, RSeq};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail(String),
    Inconclusive(String),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn describe(&self) -> String {
        match self {
            Verdict::Pass => "pass".to_string(),
            Verdict::Fail(msg) => format!("fail: {msg}"),
            Verdict::Inconclusive(msg) => format!("inconclusive: {msg}"),
        }
    }
}

fn set_message(label_a: &str, a: &BTreeSet<String>, label_b: &str, b: &BTreeSet<String>) -> String {
    let only_a: Vec<&String> = a.difference(b).take(3).collect();
    let only_b: Vec<&String> = b.difference(a).take(3).collect();
    format!(
        "{label_a} has {} results, {label_b} has {}; only in {label_a}: {:?}; only in {label_b}: {:?}",
        a.len(),
        b.len(),
        only_a,
        only_b
    )
}

fn verdict_from(
    label_a: &str,
    a: &BTreeSet<String>,
    label_b: &str,
    b: &BTreeSet<String>,
    truncated: bool,
) -> Verdict {
    if a == b {
        Verdict::Pass
    } else {
        let msg = set_message(label_a, a, label_b, b);
        if truncated {
            Verdict::Inconclusive(format!("{msg} (bounds were hit)"))
        } else {
            Verdict::Fail(msg)
        }
    }
}

fn observable_key(store: &SoftConstraint, u: &Universe) -> String {
    store_key(store, u)
}

/// Compares connected complete denotational results with the success
/// observables of the engine at the matching horizon.
pub fn check_correctness(
    program: &Program,
    pool: &[SoftConstraint],
    maxlen: usize,
    state_budget: usize,
) -> Verdict {
    let maxlen = maxlen.max(2);
    let fv = program.main.free_vars();
    let horizon = (maxlen - 1) as u32;
    match program.dialect {
        Dialect::Mp => {
            let uni = build_universe(program, &[&program.main], pool, maxlen);
            let den = denote_mp(program, &program.main, &uni, maxlen);
            let den_results: BTreeSet<String> = den
                .seqs
                .iter()
                .filter(|s| s.complete && is_connected(s))
                .map(|s| observable_key(&project_observable(s.last_store(), &fv), &den.universe))
                .collect();
            let exp = explore_mp(program, horizon, state_budget);
            let eng_results: BTreeSet<String> = exp
                .terminals
                .iter()
                .filter(|t| t.status == RunStatus::Success)
                .filter_map(|t| t.observable.as_ref())
                .map(|o| observable_key(o, &program.universe))
                .collect();
            let truncated = den.truncated || exp.truncated || uni.truncated;
            verdict_from(
                "denotational",
                &den_results,
                "operational",
                &eng_results,
                truncated,
            )
        }
        Dialect::Il => {
            let uni = build_universe(program, &[&program.main], pool, maxlen);
            let den = denote_il(program, &program.main, &uni, maxlen);
            let den_results: BTreeSet<String> = den
                .seqs
                .iter()
                .filter(|s| s.complete && is_connected_il(s))
                .map(|s| {
                    let last = &s.steps.last().unwrap().after;
                    observable_key(&project_observable(last, &fv), &den.universe)
                })
                .collect();
            let exp = explore_il(program, horizon, state_budget, false);
            let eng_results: BTreeSet<String> = exp
                .terminals
                .iter()
                .filter(|t| t.status == RunStatus::Success)
                .filter_map(|t| t.observable.as_ref())
                .map(|o| observable_key(o, &program.universe))
                .collect();
            let truncated = den.truncated || exp.truncated || uni.truncated;
            verdict_from(
                "denotational",
                &den_results,
                "operational",
                &eng_results,
                truncated,
            )
        }
    }
}

fn sequence_forms(
    seqs: impl IntoIterator<Item = RSeq>,
    u: &Universe,
) -> BTreeSet<String> {
    seqs.into_iter()
        .filter(|s| s.complete)
        .map(|s| {
            let q = quotient_trailing(&s);
            let form = canonical_form(&q, u);
            form.iter()
                .map(|(b, a)| format!("{b}=>{a}"))
                .collect::<Vec<_>>()
                .join(" ; ")
        })
        .collect()
}

/// Compares the enumerated sequences of an agent with its denotation,
/// and for a parallel main also with the merge of the components'
/// enumerations, over one shared universe.
pub fn check_compositionality(
    program: &Program,
    pool: &[SoftConstraint],
    maxlen: usize,
) -> Verdict {
    assert_eq!(program.dialect, Dialect::Mp);
    let maxlen = maxlen.max(2);
    let mut roots: Vec<&Agent> = vec![&program.main];
    if let Agent::Parallel(l, r) = &program.main {
        roots.push(l);
        roots.push(r);
    }
    let uni = build_universe(program, &roots, pool, maxlen);
    let whole = enumerate_r_mp(program, &program.main, &uni, maxlen);
    let den = denote_mp(program, &program.main, &uni, maxlen);
    let mut truncated = uni.truncated || whole.truncated || den.truncated;
    let whole_forms = sequence_forms(whole.seqs.iter().cloned(), &whole.universe);
    let den_forms = sequence_forms(den.seqs.iter().cloned(), &den.universe);
    let mut diffs = Vec::new();
    if whole_forms != den_forms {
        diffs.push(format!(
            "operational vs denotational: {}",
            set_message("operational", &whole_forms, "denotational", &den_forms)
        ));
    }
    if let Agent::Parallel(l, r) = &program.main {
        let el = enumerate_r_mp(program, l, &uni, maxlen);
        let er = enumerate_r_mp(program, r, &uni, maxlen);
        truncated |= el.truncated || er.truncated;
        let la = super::Bounded {
            seqs: el.seqs,
            truncated: el.truncated,
        };
        let ra = super::Bounded {
            seqs: er.seqs,
            truncated: er.truncated,
        };
        let merged = sem_parallel(&la, &ra);
        truncated |= merged.truncated;
        let merged_forms = sequence_forms(merged.seqs.iter().cloned(), &program.universe);
        if merged_forms != whole_forms {
            diffs.push(format!(
                "componentwise merge vs whole: {}",
                set_message("merge", &merged_forms, "whole", &whole_forms)
            ));
        }
    }
    if diffs.is_empty() {
        Verdict::Pass
    } else if truncated {
        Verdict::Inconclusive(format!("{} (bounds were hit)", diffs.join(" | ")))
    } else {
        Verdict::Fail(diffs.join(" | "))
    }
}

/// Compares interleaving success observables with and without the
/// primed tick discipline.
pub fn check_t_prime(program: &Program, max_steps: u32, state_budget: usize) -> Verdict {
    assert_eq!(program.dialect, Dialect::Il);
    let base = explore_il(program, max_steps, state_budget, false);
    let prime = explore_il(program, max_steps, state_budget, true);
    let a: BTreeSet<String> = base.success_keys();
    let b: BTreeSet<String> = prime.success_keys();
    verdict_from(
        "unprimed",
        &a,
        "primed",
        &b,
        base.truncated || prime.truncated,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn prog_il(main: &str) -> Program {
        let src = format!("dialect tsccp-i\n{}{main}", &SLICE[14..]);
        expand_program(&parse_program(&src).unwrap()).unwrap()
    }

    #[test]
    fn correctness_holds_for_a_tell_chain() {
        let p = prog("main: tell(c1) ->[inf] tell(c2) ->[inf] success");
        let v = check_correctness(&p, &[], 4, 10_000);
        assert_eq!(v, Verdict::Pass, "{}", v.describe());
    }

    #[test]
    fn correctness_holds_when_an_ask_is_served_in_parallel() {
        let p = prog("main: (ask(c1) ->[inf] success) || (tell(c1) ->[inf] success)");
        let v = check_correctness(&p, &[], 4, 10_000);
        assert_eq!(v, Verdict::Pass, "{}", v.describe());
    }

    #[test]
    fn correctness_holds_under_interleaving() {
        let p = prog_il("main: tell(c1) ->[inf] success");
        let v = check_correctness(&p, &[], 4, 10_000);
        assert_eq!(v, Verdict::Pass, "{}", v.describe());
    }

    #[test]
    fn compositionality_holds_for_parallel_tells() {
        let p = prog("main: (tell(c1) ->[inf] success) || (tell(c2) ->[inf] success)");
        let v = check_compositionality(&p, &[], 4);
        assert_eq!(v, Verdict::Pass, "{}", v.describe());
    }

    #[test]
    fn compositionality_holds_for_a_single_tell() {
        let p = prog("main: tell(c1) ->[inf] success");
        let v = check_compositionality(&p, &[], 4);
        assert_eq!(v, Verdict::Pass, "{}", v.describe());
    }

    #[test]
    fn t_prime_preserves_success_observables() {
        let p = prog_il("main: (tell(c1) ->[inf] success) || (ask(c1) ->[inf] success)");
        let v = check_t_prime(&p, 8, 10_000);
        assert_eq!(v, Verdict::Pass, "{}", v.describe());
    }
}

