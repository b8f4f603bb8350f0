mod common;

use std::collections::BTreeSet;

use common::*;

use softtime::constraint::Universe;
use softtime::lang::{Agent, Dialect, Program};
use softtime::traces::enumerate::enumerate_r_mp;
use softtime::traces::universe::build_universe;
use softtime::traces::{canonical_form, quotient_trailing, RSeq};

fn has_exists(agent: &Agent) -> bool {
    match agent {
        Agent::Exists { .. } => true,
        Agent::Success | Agent::Call { .. } => false,
        Agent::Tell { cont, .. } => has_exists(cont),
        Agent::Sum(branches) => branches.iter().any(|b| has_exists(&b.cont)),
        Agent::Parallel(l, r) => has_exists(l) || has_exists(r),
        Agent::Now { then, els, .. } | Agent::Askp { then, els, .. } => {
            has_exists(then) || has_exists(els)
        }
        Agent::Timeout { branches, els, .. } => {
            branches.iter().any(|b| has_exists(&b.cont)) || has_exists(els)
        }
        Agent::Watchdog { body, els, .. } => {
            has_exists(body) || els.as_deref().is_some_and(has_exists)
        }
    }
}

fn exists_free(program: &Program) -> bool {
    !has_exists(&program.main) && program.decls.iter().all(|d| !has_exists(&d.body))
}

fn forms<'a>(seqs: impl IntoIterator<Item = &'a RSeq>, u: &Universe) -> BTreeSet<String> {
    seqs.into_iter()
        .filter(|s| s.complete)
        .map(|s| {
            let q = quotient_trailing(s);
            canonical_form(&q, u)
                .iter()
                .map(|(b, a)| format!("{b}=>{a}"))
                .collect::<Vec<_>>()
                .join(" ; ")
        })
        .collect()
}

fn mp_exists_free_corpus() -> Vec<(std::path::PathBuf, Program)> {
    corpus_files()
        .into_iter()
        .filter(|p| p.starts_with(corpus_dir().join("desk")))
        .map(|p| {
            let prog = load_expanded(&p);
            (p, prog)
        })
        .filter(|(_, prog)| prog.dialect == Dialect::Mp && exists_free(prog))
        .collect()
}

#[test]
fn denotation_matches_enumeration_on_the_desk_corpus() {
    for (path, program) in mp_exists_free_corpus() {
        let verdict = softtime::traces::check::check_compositionality(&program, &[], 6);
        assert!(
            verdict.is_pass(),
            "{}: {}",
            path.display(),
            verdict.describe()
        );
    }
}

#[test]
fn a_nonempty_pool_preserves_the_compositional_verdict() {
    for file in ["par_ask_tell.tsccp", "sum_race.tsccp"] {
        let path = corpus_dir().join("desk").join(file);
        let program = load_expanded(&path);
        let pool = vec![program.constraint("c1").unwrap().table.clone()];
        let verdict = softtime::traces::check::check_compositionality(&program, &pool, 4);
        assert!(verdict.is_pass(), "{file}: {}", verdict.describe());
    }
}

#[test]
fn enumeration_is_monotone_in_the_horizon() {
    for (path, program) in mp_exists_free_corpus() {
        let uni = build_universe(&program, &[&program.main], &[], 5);
        let mut prev: Option<BTreeSet<String>> = None;
        for maxlen in 2..=5 {
            let ops = enumerate_r_mp(&program, &program.main, &uni, maxlen);
            let cur = forms(ops.seqs.iter(), &ops.universe);
            if let Some(p) = &prev {
                assert!(
                    p.is_subset(&cur),
                    "{}: horizon {maxlen} lost sequences: {:?}",
                    path.display(),
                    p.difference(&cur).take(3).collect::<Vec<_>>()
                );
            }
            prev = Some(cur);
        }
    }
}

#[test]
fn connected_denotation_observables_match_the_engine_everywhere() {
    for path in corpus_files() {
        let program = load_expanded(&path);
        let verdict = softtime::traces::check::check_correctness(&program, &[], 6, 50_000);
        assert!(
            verdict.is_pass(),
            "{}: {}",
            path.display(),
            verdict.describe()
        );
    }
}

#[test]
fn compositional_splits_agree_at_several_horizons() {
    for (path, program) in mp_exists_free_corpus() {
        if !matches!(program.main, Agent::Parallel(..)) {
            continue;
        }
        for maxlen in [3, 5] {
            let verdict = softtime::traces::check::check_compositionality(&program, &[], maxlen);
            assert!(
                verdict.is_pass(),
                "{} at maxlen {maxlen}: {}",
                path.display(),
                verdict.describe()
            );
        }
    }
}

#[test]
fn a_nonempty_pool_still_gives_a_passing_correctness_verdict() {
    for file in ["example3.tsccp", "sum_race.tsccp", "par_ask_tell.tsccp"] {
        let path = corpus_dir().join("desk").join(file);
        let program = load_expanded(&path);
        let pool = vec![program.constraint("c1").unwrap().table.clone()];
        let verdict = softtime::traces::check::check_correctness(&program, &pool, 4, 50_000);
        assert!(verdict.is_pass(), "{file}: {}", verdict.describe());
    }
}
