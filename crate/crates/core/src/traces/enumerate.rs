//! Direct enumeration of bounded reactive sequences from the
//! operational relation, used as the comparison point for the
//! denotational construction.

use std::collections::BTreeSet;

use crate::constraint::{SoftConstraint, Universe};
use crate::engine::mp::step_all;
use crate::engine::Env;
use crate::lang::ast::{Agent, Dialect, Program};

use super::universe::StoreUniverse;
use super::{Bounded, RSeq, Step};

const NODE_CAP: usize = 500_000;

#[derive(Debug, Clone)]
pub struct Enumeration {
    pub seqs: BTreeSet<RSeq>,
    pub truncated: bool,
    pub universe: Universe,
}

struct Walk<'a> {
    ctx: Env<'a>,
    uni: &'a StoreUniverse,
    maxlen: usize,
    nodes: usize,
}

fn insert_seq(out: &mut Bounded<RSeq>, steps: Vec<Step>, complete: bool) {
    if out.seqs.len() >= super::denote::SEQ_CAP {
        out.truncated = true;
        return;
    }
    out.seqs.insert(RSeq { steps, complete });
}

/// Closes a terminated position under stuttering with universe jumps,
/// recording a complete member at every length.
fn stutter_close(w: &Walk, out: &mut Bounded<RSeq>, store: &SoftConstraint, chain: &mut Vec<Step>) {
    chain.push(Step::stutter(store));
    insert_seq(out, chain.clone(), true);
    if chain.len() < w.maxlen {
        let nexts: Vec<SoftConstraint> = w
            .uni
            .reps
            .iter()
            .filter(|s| s.entails(store))
            .cloned()
            .collect();
        for next in nexts {
            stutter_close(w, out, &next, chain);
        }
    }
    chain.pop();
}

fn dfs(
    w: &mut Walk,
    u: &mut Universe,
    out: &mut Bounded<RSeq>,
    agent: &Agent,
    store: &SoftConstraint,
    chain: &mut Vec<Step>,
) {
    w.nodes += 1;
    if w.nodes > NODE_CAP {
        out.truncated = true;
        return;
    }
    if agent.is_success_shape() {
        if chain.len() < w.maxlen {
            stutter_close(w, out, store, chain);
        } else {
            insert_seq(out, chain.clone(), false);
            out.truncated = true;
        }
        return;
    }
    if chain.len() >= w.maxlen {
        if !chain.is_empty() {
            insert_seq(out, chain.clone(), false);
        }
        out.truncated = true;
        return;
    }
    let variants = step_all(&w.ctx, u, agent, "", store);
    if variants.is_empty() {
        chain.push(Step::stutter(store));
        let nexts: Vec<SoftConstraint> = w
            .uni
            .reps
            .iter()
            .filter(|s| s.entails(store))
            .cloned()
            .collect();
        for next in nexts {
            dfs(w, u, out, agent, &next, chain);
        }
        chain.pop();
        return;
    }
    for v in variants {
        let after = store.combine(&v.delta);
        chain.push(Step::new(store.clone(), after.clone(), v.delta.clone()));
        let nexts: Vec<SoftConstraint> = w
            .uni
            .reps
            .iter()
            .filter(|s| s.entails(&after))
            .cloned()
            .collect();
        for next in nexts {
            dfs(w, u, out, &v.agent, &next, chain);
        }
        chain.pop();
    }
}

/// Enumerates every assumption-closed sequence of the agent up to
/// `maxlen` steps, over the given universe of assumption stores.
pub fn enumerate_r_mp(
    program: &Program,
    agent: &Agent,
    uni: &StoreUniverse,
    maxlen: usize,
) -> Enumeration {
    assert_eq!(program.dialect, Dialect::Mp);
    let maxlen = maxlen.max(1);
    let mut u = program.universe.clone();
    let mut out = Bounded::empty();
    out.truncated = uni.truncated;
    let mut w = Walk {
        ctx: Env {
            decls: &program.decls,
            kind: program.kind,
        },
        uni,
        maxlen,
        nodes: 0,
    };
    let starts: Vec<SoftConstraint> = uni.reps.clone();
    for s in &starts {
        dfs(&mut w, &mut u, &mut out, agent, s, &mut Vec::new());
    }
    Enumeration {
        seqs: out.seqs,
        truncated: out.truncated,
        universe: u,
    }
}
