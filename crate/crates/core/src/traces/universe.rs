//! The finite assumption universe shared by bounded enumeration and
//! the denotational sets: every store a bounded sequence may assume.

use std::collections::{BTreeSet, HashSet, VecDeque};

use crate::constraint::{SoftConstraint, Universe};
use crate::engine::il::moves;
use crate::engine::mp::step_all;
use crate::engine::{canonical_key, Env};
use crate::lang::ast::{Agent, Dialect, Program};
use crate::semiring::SemiringKind;

use super::store_key;

pub(crate) const UNIVERSE_STATE_CAP: usize = 20_000;

/// The assumption stores, deduplicated up to renaming of
/// run-generated variables.
#[derive(Debug, Clone)]
pub struct StoreUniverse {
    pub reps: Vec<SoftConstraint>,
    keys: BTreeSet<String>,
    pub truncated: bool,
}

impl StoreUniverse {
    pub fn contains(&self, store: &SoftConstraint, u: &Universe) -> bool {
        self.keys.contains(&store_key(store, u))
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    fn insert(&mut self, store: &SoftConstraint, u: &Universe) {
        if self.keys.insert(store_key(store, u)) {
            self.reps.push(store.clone());
        }
    }
}

/// Ensures the identity element is always an interference option.
pub(crate) fn padded_pool(kind: SemiringKind, pool: &[SoftConstraint]) -> Vec<SoftConstraint> {
    let top = SoftConstraint::top(kind);
    let mut out = vec![top];
    for e in pool {
        if !out.contains(e) {
            out.push(e.clone());
        }
    }
    out
}

/// Collects every store the given root agents can assume within
/// `maxlen` ticks when the environment may add one pool element per
/// tick.
pub fn build_universe(
    program: &Program,
    roots: &[&Agent],
    pool: &[SoftConstraint],
    maxlen: usize,
) -> StoreUniverse {
    let ctx = Env {
        decls: &program.decls,
        kind: program.kind,
    };
    let pool = padded_pool(program.kind, pool);
    let mut u = program.universe.clone();
    let top = SoftConstraint::top(program.kind);
    let mut out = StoreUniverse {
        reps: Vec::new(),
        keys: BTreeSet::new(),
        truncated: false,
    };
    let mut visited: HashSet<String> = HashSet::new();
    let mut queue: VecDeque<(Agent, SoftConstraint, usize)> = VecDeque::new();
    for root in roots {
        for e in &pool {
            let start = top.combine(e);
            out.insert(&start, &u);
            let key = canonical_key(root, &start, &u);
            if visited.insert(key) {
                queue.push_back(((*root).clone(), start, 0));
            }
        }
    }
    while let Some((agent, store, depth)) = queue.pop_front() {
        if depth >= maxlen {
            continue;
        }
        let mut nexts: Vec<(Agent, SoftConstraint)> = Vec::new();
        if agent.is_success_shape() {
            for e in &pool {
                nexts.push((agent.clone(), store.combine(e)));
            }
        } else {
            let contributions: Vec<(Agent, SoftConstraint)> = match program.dialect {
                Dialect::Mp => step_all(&ctx, &mut u, &agent, "", &store)
                    .into_iter()
                    .map(|v| (v.agent, v.delta))
                    .collect(),
                Dialect::Il => moves(&ctx, &mut u, &agent, "", &store, true)
                    .into_iter()
                    .map(|m| (m.agent, m.delta))
                    .collect(),
            };
            if contributions.is_empty() {
                for e in &pool {
                    nexts.push((agent.clone(), store.combine(e)));
                }
            } else {
                for (next_agent, delta) in contributions {
                    let after = store.combine(&delta);
                    for e in &pool {
                        nexts.push((next_agent.clone(), after.combine(e)));
                    }
                }
            }
        }
        for (next_agent, next_store) in nexts {
            out.insert(&next_store, &u);
            if visited.len() >= UNIVERSE_STATE_CAP {
                out.truncated = true;
                continue;
            }
            let key = canonical_key(&next_agent, &next_store, &u);
            if visited.insert(key) {
                queue.push_back((next_agent, next_store, depth + 1));
            }
        }
    }
    out
}
