//! Reactive sequences: extraction from runs, bounded enumeration,
//! denotational sets and the bounded checkers built on them.

pub mod check;
pub mod denote;
pub mod enumerate;
pub mod universe;

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::constraint::{SoftConstraint, Universe, VarId};
use crate::engine::il::Label;
use crate::engine::{canonical_store_string, Run, RunStatus};

/// One assumption/contribution pair; the carried delta explains the
/// contribution but is ignored by comparisons.
#[derive(Debug, Clone)]
pub struct Step {
    pub before: SoftConstraint,
    pub after: SoftConstraint,
    pub delta: SoftConstraint,
}

impl Step {
    pub fn new(before: SoftConstraint, after: SoftConstraint, delta: SoftConstraint) -> Self {
        Step {
            before,
            after,
            delta,
        }
    }

    pub fn stutter(store: &SoftConstraint) -> Self {
        let top = SoftConstraint::top(store.kind());
        Step {
            before: store.clone(),
            after: store.clone(),
            delta: top,
        }
    }

    pub fn is_stutter(&self) -> bool {
        self.before == self.after
    }
}

impl PartialEq for Step {
    fn eq(&self, other: &Self) -> bool {
        self.before == other.before && self.after == other.after
    }
}

impl Eq for Step {}

impl PartialOrd for Step {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Step {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.before, &self.after).cmp(&(&other.before, &other.after))
    }
}

/// A reactive sequence; `complete` marks success-grounded sequences as
/// opposed to horizon-cut prefixes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RSeq {
    pub steps: Vec<Step>,
    pub complete: bool,
}

impl RSeq {
    pub fn last_store(&self) -> &SoftConstraint {
        &self.steps.last().expect("sequences are nonempty").after
    }
}

/// A labeled step of the interleaving semantics.
#[derive(Debug, Clone)]
pub struct LStep {
    pub before: SoftConstraint,
    pub after: SoftConstraint,
    pub delta: SoftConstraint,
    pub label: Label,
}

impl LStep {
    pub fn stutter(store: &SoftConstraint, label: Label) -> Self {
        let top = SoftConstraint::top(store.kind());
        LStep {
            before: store.clone(),
            after: store.clone(),
            delta: top,
            label,
        }
    }
}

impl PartialEq for LStep {
    fn eq(&self, other: &Self) -> bool {
        self.before == other.before && self.after == other.after && self.label == other.label
    }
}

impl Eq for LStep {}

impl PartialOrd for LStep {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn label_rank(l: Label) -> u8 {
    match l {
        Label::Omega => 0,
        Label::Tau => 1,
    }
}

impl Ord for LStep {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.before, &self.after, label_rank(self.label)).cmp(&(
            &other.before,
            &other.after,
            label_rank(other.label),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LSeq {
    pub steps: Vec<LStep>,
    pub complete: bool,
}

impl LSeq {
    pub fn last_store(&self) -> &SoftConstraint {
        &self.steps.last().expect("sequences are nonempty").after
    }
}

/// A bounded sequence set; `truncated` reports that the horizon or a
/// budget cut material away.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bounded<T: Ord> {
    pub seqs: BTreeSet<T>,
    pub truncated: bool,
}

impl<T: Ord> Bounded<T> {
    pub fn empty() -> Self {
        Bounded {
            seqs: BTreeSet::new(),
            truncated: false,
        }
    }
}

/// The reactive sequence of a finished run: its ticks followed by the
/// final stutter when the run succeeded.
pub fn sequence_of_run(run: &Run) -> RSeq {
    let mut steps: Vec<Step> = run
        .ticks
        .iter()
        .map(|t| Step::new(t.store_before.clone(), t.store_after.clone(), t.delta.clone()))
        .collect();
    if run.status == RunStatus::Success {
        steps.push(Step::stutter(&run.final_store));
    }
    RSeq {
        steps,
        complete: run.status == RunStatus::Success,
    }
}

/// The labeled sequence of an interleaving run; every root transition
/// is visible and success appends the terminal visible stutter.
pub fn sequence_of_run_il(run: &Run) -> LSeq {
    let mut steps: Vec<LStep> = run
        .ticks
        .iter()
        .map(|t| LStep {
            before: t.store_before.clone(),
            after: t.store_after.clone(),
            delta: t.delta.clone(),
            label: Label::Omega,
        })
        .collect();
    if run.status == RunStatus::Success {
        steps.push(LStep::stutter(&run.final_store, Label::Omega));
    }
    LSeq {
        steps,
        complete: run.status == RunStatus::Success,
    }
}

/// Connectedness: the sequence starts from the empty store and each
/// assumption is exactly the previous contribution.
pub fn is_connected(seq: &RSeq) -> bool {
    let Some(first) = seq.steps.first() else {
        return false;
    };
    first.before.is_top()
        && seq
            .steps
            .windows(2)
            .all(|w| w[1].before == w[0].after)
}

/// Interleaving connectedness additionally requires every step to be
/// visible.
pub fn is_connected_il(seq: &LSeq) -> bool {
    let Some(first) = seq.steps.first() else {
        return false;
    };
    first.before.is_top()
        && seq.steps.iter().all(|s| s.label == Label::Omega)
        && seq
            .steps
            .windows(2)
            .all(|w| w[1].before == w[0].after)
}

/// Normalizes the trailing stutter run of a complete sequence to a
/// single stutter, absorbing arbitrary success padding.
pub fn quotient_trailing(seq: &RSeq) -> RSeq {
    let mut steps = seq.steps.clone();
    while steps.len() >= 2
        && steps[steps.len() - 1].is_stutter()
        && steps[steps.len() - 2].is_stutter()
    {
        steps.pop();
    }
    RSeq {
        steps,
        complete: seq.complete,
    }
}

/// A store identity up to renaming of run-generated variables.
pub(crate) fn store_key(store: &SoftConstraint, u: &Universe) -> String {
    let mut order: Vec<VarId> = Vec::new();
    for &v in store.support() {
        if u.is_fresh(v) && !order.contains(&v) {
            order.push(v);
        }
    }
    let resolve = |v: VarId| -> String {
        match order.iter().position(|&o| o == v) {
            Some(i) => format!("~{i}"),
            None => u.var_name(v).to_string(),
        }
    };
    canonical_store_string(store, u, &resolve)
}

/// A comparison form that renumbers run-generated variables by first
/// occurrence, so alpha-equivalent sequences coincide.
pub fn canonical_form(seq: &RSeq, u: &Universe) -> Vec<(String, String)> {
    let mut order: Vec<VarId> = Vec::new();
    for s in &seq.steps {
        for store in [&s.before, &s.after] {
            for &v in store.support() {
                if u.is_fresh(v) && !order.contains(&v) {
                    order.push(v);
                }
            }
        }
    }
    let resolve = |v: VarId| -> String {
        match order.iter().position(|&o| o == v) {
            Some(i) => format!("~{i}"),
            None => u.var_name(v).to_string(),
        }
    };
    seq.steps
        .iter()
        .map(|s| {
            (
                canonical_store_string(&s.before, u, &resolve),
                canonical_store_string(&s.after, u, &resolve),
            )
        })
        .collect()
}
