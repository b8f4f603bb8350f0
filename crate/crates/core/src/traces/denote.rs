//! Bounded denotational sequence sets for both semantics, computed by
//! structural recursion with Kleene iteration for procedure bodies.
//!
//! Assumptions range over a finite store universe; between two steps
//! the next assumption must be a universe store entailing the previous
//! contribution. Sequences are cut at `maxlen` steps and cut material
//! is flagged.

use std::collections::{BTreeMap, BTreeSet};

use crate::constraint::{SoftConstraint, Universe};
use crate::engine::il::Label;
use crate::engine::{instantiate_call, threshold_ok};
use crate::lang::ast::{Agent, Dialect, Program, Threshold};
use crate::semiring::SemiringKind;

use super::universe::StoreUniverse;
use super::{canonical_form, Bounded, LSeq, LStep, RSeq, Step};

pub(crate) const SEQ_CAP: usize = 200_000;

#[derive(Debug, Clone)]
pub struct MpDenotation {
    pub seqs: BTreeSet<RSeq>,
    pub truncated: bool,
    pub universe: Universe,
}

#[derive(Debug, Clone)]
pub struct IlDenotation {
    pub seqs: BTreeSet<LSeq>,
    pub truncated: bool,
    pub universe: Universe,
}

struct Ctx<'a> {
    program: &'a Program,
    uni: &'a StoreUniverse,
    maxlen: usize,
    success: Bounded<RSeq>,
}

impl Ctx<'_> {
    fn kind(&self) -> SemiringKind {
        self.program.kind
    }

    fn jumps<'b>(&'b self, after: &'b SoftConstraint) -> impl Iterator<Item = &'b SoftConstraint> {
        self.uni.reps.iter().filter(move |s| s.entails(after))
    }
}

fn insert_seq(out: &mut Bounded<RSeq>, steps: Vec<Step>, complete: bool) {
    if out.seqs.len() >= SEQ_CAP {
        out.truncated = true;
        return;
    }
    out.seqs.insert(RSeq { steps, complete });
}

fn insert_lseq(out: &mut Bounded<LSeq>, steps: Vec<LStep>, complete: bool) {
    if out.seqs.len() >= SEQ_CAP {
        out.truncated = true;
        return;
    }
    out.seqs.insert(LSeq { steps, complete });
}

/// Appends every continuation member that can follow `after`, cutting
/// at the horizon.
fn append_cont(
    ctx: &Ctx,
    out: &mut Bounded<RSeq>,
    prefix: &[Step],
    after: &SoftConstraint,
    cont: &Bounded<RSeq>,
) {
    out.truncated |= cont.truncated;
    for s in &cont.seqs {
        if !s.steps[0].before.entails(after) {
            continue;
        }
        if prefix.len() + s.steps.len() <= ctx.maxlen {
            let mut steps = prefix.to_vec();
            steps.extend(s.steps.iter().cloned());
            insert_seq(out, steps, s.complete);
        } else {
            let room = ctx.maxlen - prefix.len();
            let mut steps = prefix.to_vec();
            steps.extend(s.steps.iter().take(room).cloned());
            insert_seq(out, steps, false);
            out.truncated = true;
        }
    }
}

/// Success: stutter chains of any length, complete at every prefix.
fn sem_success(uni: &StoreUniverse, maxlen: usize) -> Bounded<RSeq> {
    let mut out = Bounded::empty();
    fn rec(
        uni: &StoreUniverse,
        maxlen: usize,
        out: &mut Bounded<RSeq>,
        store: &SoftConstraint,
        chain: &mut Vec<Step>,
    ) {
        chain.push(Step::stutter(store));
        insert_seq(out, chain.clone(), true);
        if chain.len() < maxlen {
            let nexts: Vec<SoftConstraint> = uni
                .reps
                .iter()
                .filter(|s| s.entails(store))
                .cloned()
                .collect();
            for next in nexts {
                rec(uni, maxlen, out, &next, chain);
            }
        }
        chain.pop();
    }
    let starts: Vec<SoftConstraint> = uni.reps.clone();
    for s in &starts {
        rec(uni, maxlen, &mut out, s, &mut Vec::new());
    }
    out
}

/// Tell: fires wherever the grown store passes the threshold; no
/// waiting clause, blocked tells contribute nothing.
fn sem_tell(
    ctx: &Ctx,
    table: &SoftConstraint,
    thr: &Threshold,
    cont: &Bounded<RSeq>,
) -> Bounded<RSeq> {
    let mut out = Bounded::empty();
    for s in &ctx.uni.reps {
        let grown = s.combine(table);
        if !threshold_ok(ctx.kind(), thr, &grown) {
            continue;
        }
        let step = Step::new(s.clone(), grown.clone(), table.clone());
        append_cont(ctx, &mut out, &[step], &grown, cont);
    }
    out
}

/// Guarded choice: waits while no branch is enabled, must fire as soon
/// as one is; the firing step is the last stutter.
fn sem_sum(ctx: &Ctx, branches: &[(SoftConstraint, Threshold, Bounded<RSeq>)]) -> Bounded<RSeq> {
    let mut out = Bounded::empty();
    fn rec(
        ctx: &Ctx,
        branches: &[(SoftConstraint, Threshold, Bounded<RSeq>)],
        out: &mut Bounded<RSeq>,
        store: &SoftConstraint,
        chain: &mut Vec<Step>,
    ) {
        let enabled: Vec<usize> = branches
            .iter()
            .enumerate()
            .filter(|(_, (c, thr, _))| store.entails(c) && threshold_ok(ctx.kind(), thr, store))
            .map(|(i, _)| i)
            .collect();
        if !enabled.is_empty() {
            let mut prefix = chain.clone();
            prefix.push(Step::stutter(store));
            for h in enabled {
                append_cont(ctx, out, &prefix, store, &branches[h].2);
            }
            return;
        }
        chain.push(Step::stutter(store));
        if chain.len() == ctx.maxlen {
            insert_seq(out, chain.clone(), false);
            out.truncated = true;
        } else {
            let nexts: Vec<SoftConstraint> = ctx.jumps(store).cloned().collect();
            for next in nexts {
                rec(ctx, branches, out, &next, chain);
            }
        }
        chain.pop();
    }
    let starts: Vec<SoftConstraint> = ctx.uni.reps.clone();
    for s in &starts {
        rec(ctx, branches, &mut out, s, &mut Vec::new());
    }
    out
}

/// Parallel: pointwise merge of equal-length, same-assumption complete
/// sequences that both end stuttering.
pub fn sem_parallel(a: &Bounded<RSeq>, b: &Bounded<RSeq>) -> Bounded<RSeq> {
    let mut out = Bounded::empty();
    out.truncated = a.truncated || b.truncated;
    for s in a.seqs.iter().filter(|s| s.complete) {
        for t in b.seqs.iter().filter(|t| t.complete) {
            if s.steps.len() != t.steps.len() {
                continue;
            }
            if !s.steps.last().unwrap().is_stutter() || !t.steps.last().unwrap().is_stutter() {
                continue;
            }
            if s.steps
                .iter()
                .zip(&t.steps)
                .any(|(x, y)| x.before != y.before)
            {
                continue;
            }
            let merged: Vec<Step> = s
                .steps
                .iter()
                .zip(&t.steps)
                .map(|(x, y)| {
                    let delta = x.delta.combine(&y.delta);
                    let after = x.before.combine(&delta);
                    Step::new(x.before.clone(), after, delta)
                })
                .collect();
            if merged.windows(2).any(|w| !w[1].before.entails(&w[0].after)) {
                continue;
            }
            insert_seq(&mut out, merged, true);
        }
    }
    out
}

/// Conditional: keeps continuation members whose first assumption
/// settles the test the corresponding way.
fn sem_now(
    ctx: &Ctx,
    table: &SoftConstraint,
    thr: &Threshold,
    then_set: &Bounded<RSeq>,
    els_set: &Bounded<RSeq>,
) -> Bounded<RSeq> {
    let mut out = Bounded::empty();
    out.truncated = then_set.truncated || els_set.truncated;
    for s in &then_set.seqs {
        let first = &s.steps[0].before;
        if threshold_ok(ctx.kind(), thr, first) && first.entails(table) {
            insert_seq(&mut out, s.steps.clone(), s.complete);
        }
    }
    for s in &els_set.seqs {
        let first = &s.steps[0].before;
        if threshold_ok(ctx.kind(), thr, first) && !first.entails(table) {
            insert_seq(&mut out, s.steps.clone(), s.complete);
        }
    }
    out
}

/// The procedure-call prefix: one forced stutter, then the body.
fn with_forced_stutter(ctx: &Ctx, body: &Bounded<RSeq>) -> Bounded<RSeq> {
    let always = SoftConstraint::top(ctx.kind());
    sem_sum(
        ctx,
        &[(always, Threshold::plain(ctx.kind()), body.clone())],
    )
}

type MpEnv = BTreeMap<String, Bounded<RSeq>>;

fn mp_agent(ctx: &Ctx, u: &mut Universe, env: &MpEnv, agent: &Agent, fuel: usize) -> Bounded<RSeq> {
    match agent {
        Agent::Success => ctx.success.clone(),
        Agent::Tell { c, thr, cont, .. } => {
            let cont_set = mp_agent(ctx, u, env, cont, fuel);
            sem_tell(ctx, &c.table, thr, &cont_set)
        }
        Agent::Sum(branches) => {
            let sets: Vec<(SoftConstraint, Threshold, Bounded<RSeq>)> = branches
                .iter()
                .map(|b| {
                    (
                        b.c.table.clone(),
                        b.thr.clone(),
                        mp_agent(ctx, u, env, &b.cont, fuel),
                    )
                })
                .collect();
            sem_sum(ctx, &sets)
        }
        Agent::Parallel(l, r) => {
            let ls = mp_agent(ctx, u, env, l, fuel);
            let rs = mp_agent(ctx, u, env, r, fuel);
            sem_parallel(&ls, &rs)
        }
        Agent::Exists { var, body } => {
            let fresh = u.fresh_like(*var);
            let renamed = body.rename_var(u, *var, fresh);
            mp_agent(ctx, u, env, &renamed, fuel)
        }
        Agent::Call { name, actuals } => {
            let decl = ctx
                .program
                .decl(name)
                .expect("calls are validated at parse")
                .clone();
            if *actuals == decl.formals {
                env.get(name).cloned().unwrap_or_else(Bounded::empty)
            } else if fuel == 0 {
                Bounded {
                    seqs: BTreeSet::new(),
                    truncated: true,
                }
            } else {
                let inst = instantiate_call(u, &decl, actuals);
                let body = mp_agent(ctx, u, env, &inst, fuel - 1);
                with_forced_stutter(ctx, &body)
            }
        }
        Agent::Now { c, thr, then, els } => {
            let then_set = mp_agent(ctx, u, env, then, fuel);
            let els_set = mp_agent(ctx, u, env, els, fuel);
            sem_now(ctx, &c.table, thr, &then_set, &els_set)
        }
        Agent::Askp { .. } | Agent::Timeout { .. } | Agent::Watchdog { .. } => {
            unreachable!("dialect checks and expansion precede denotation")
        }
    }
}

type Snapshot = BTreeMap<String, (BTreeSet<Vec<(String, String)>>, bool)>;

fn mp_snapshot(env: &MpEnv, u: &Universe) -> Snapshot {
    env.iter()
        .map(|(name, set)| {
            let forms: BTreeSet<Vec<(String, String)>> = set
                .seqs
                .iter()
                .map(|s| canonical_form(s, u))
                .collect();
            (name.clone(), (forms, set.truncated))
        })
        .collect()
}

/// Iterates procedure denotations to a fixpoint, or flags instability
/// at the round cap.
fn mp_env(ctx: &Ctx) -> (MpEnv, Universe, bool) {
    let mut env: MpEnv = ctx
        .program
        .decls
        .iter()
        .map(|d| (d.name.clone(), Bounded::empty()))
        .collect();
    let mut u = ctx.program.universe.clone();
    if ctx.program.decls.is_empty() {
        return (env, u, false);
    }
    let mut prev: Option<Snapshot> = None;
    for _ in 0..=ctx.maxlen + 1 {
        let mut round_u = ctx.program.universe.clone();
        let next: MpEnv = ctx
            .program
            .decls
            .iter()
            .map(|d| {
                let body = mp_agent(ctx, &mut round_u, &env, &d.body, ctx.maxlen);
                (d.name.clone(), with_forced_stutter(ctx, &body))
            })
            .collect();
        let snap = mp_snapshot(&next, &round_u);
        let stable = prev.as_ref() == Some(&snap);
        env = next;
        u = round_u;
        if stable {
            return (env, u, false);
        }
        prev = Some(snap);
    }
    (env, u, true)
}

/// The bounded maximal-parallelism sequence set of an agent.
pub fn denote_mp(
    program: &Program,
    agent: &Agent,
    uni: &StoreUniverse,
    maxlen: usize,
) -> MpDenotation {
    assert_eq!(program.dialect, Dialect::Mp);
    let maxlen = maxlen.max(1);
    let ctx = Ctx {
        program,
        uni,
        maxlen,
        success: sem_success(uni, maxlen),
    };
    let (env, mut u, unstable) = mp_env(&ctx);
    let mut out = mp_agent(&ctx, &mut u, &env, agent, maxlen);
    out.truncated |= unstable || uni.truncated;
    MpDenotation {
        seqs: out.seqs,
        truncated: out.truncated,
        universe: u,
    }
}

fn append_cont_il(
    ctx: &Ctx,
    out: &mut Bounded<LSeq>,
    prefix: &[LStep],
    after: &SoftConstraint,
    cont: &Bounded<LSeq>,
) {
    out.truncated |= cont.truncated;
    for s in &cont.seqs {
        if !s.steps[0].before.entails(after) {
            continue;
        }
        if prefix.len() + s.steps.len() <= ctx.maxlen {
            let mut steps = prefix.to_vec();
            steps.extend(s.steps.iter().cloned());
            insert_lseq(out, steps, s.complete);
        } else {
            let room = ctx.maxlen - prefix.len();
            let mut steps = prefix.to_vec();
            steps.extend(s.steps.iter().take(room).cloned());
            insert_lseq(out, steps, false);
            out.truncated = true;
        }
    }
}

/// Success under interleaving: silent stutters closed by one visible
/// stutter.
fn sem_success_il(ctx: &Ctx) -> Bounded<LSeq> {
    let mut out = Bounded::empty();
    fn rec(ctx: &Ctx, out: &mut Bounded<LSeq>, store: &SoftConstraint, chain: &mut Vec<LStep>) {
        chain.push(LStep::stutter(store, Label::Omega));
        insert_lseq(out, chain.clone(), true);
        chain.pop();
        chain.push(LStep::stutter(store, Label::Tau));
        if chain.len() == ctx.maxlen {
            insert_lseq(out, chain.clone(), false);
        } else {
            let nexts: Vec<SoftConstraint> = ctx.jumps(store).cloned().collect();
            for next in nexts {
                rec(ctx, out, &next, chain);
            }
        }
        chain.pop();
    }
    let starts: Vec<SoftConstraint> = ctx.uni.reps.clone();
    for s in &starts {
        rec(ctx, &mut out, s, &mut Vec::new());
    }
    out
}

/// Tell under interleaving: unconditional silent padding, then the
/// visible tell once the threshold admits it.
fn sem_tell_il(
    ctx: &Ctx,
    table: &SoftConstraint,
    thr: &Threshold,
    cont: &Bounded<LSeq>,
) -> Bounded<LSeq> {
    let mut out = Bounded::empty();
    fn rec(
        ctx: &Ctx,
        table: &SoftConstraint,
        thr: &Threshold,
        cont: &Bounded<LSeq>,
        out: &mut Bounded<LSeq>,
        store: &SoftConstraint,
        chain: &mut Vec<LStep>,
    ) {
        let grown = store.combine(table);
        if threshold_ok(ctx.kind(), thr, &grown) {
            let mut prefix = chain.clone();
            prefix.push(LStep {
                before: store.clone(),
                after: grown.clone(),
                delta: table.clone(),
                label: Label::Omega,
            });
            append_cont_il(ctx, out, &prefix, &grown, cont);
        }
        chain.push(LStep::stutter(store, Label::Tau));
        if chain.len() == ctx.maxlen {
            insert_lseq(out, chain.clone(), false);
            out.truncated = true;
        } else {
            let nexts: Vec<SoftConstraint> = ctx.jumps(store).cloned().collect();
            for next in nexts {
                rec(ctx, table, thr, cont, out, &next, chain);
            }
        }
        chain.pop();
    }
    let starts: Vec<SoftConstraint> = ctx.uni.reps.clone();
    for s in &starts {
        rec(ctx, table, thr, cont, &mut out, s, &mut Vec::new());
    }
    out
}

/// Guarded choice under interleaving: silent waiting is always
/// allowed, firing is a visible stutter.
fn sem_sum_il(ctx: &Ctx, branches: &[(SoftConstraint, Threshold, Bounded<LSeq>)]) -> Bounded<LSeq> {
    let mut out = Bounded::empty();
    fn rec(
        ctx: &Ctx,
        branches: &[(SoftConstraint, Threshold, Bounded<LSeq>)],
        out: &mut Bounded<LSeq>,
        store: &SoftConstraint,
        chain: &mut Vec<LStep>,
    ) {
        for (c, thr, cont) in branches {
            if store.entails(c) && threshold_ok(ctx.kind(), thr, store) {
                let mut prefix = chain.clone();
                prefix.push(LStep::stutter(store, Label::Omega));
                append_cont_il(ctx, out, &prefix, store, cont);
            }
        }
        chain.push(LStep::stutter(store, Label::Tau));
        if chain.len() == ctx.maxlen {
            insert_lseq(out, chain.clone(), false);
            out.truncated = true;
        } else {
            let nexts: Vec<SoftConstraint> = ctx.jumps(store).cloned().collect();
            for next in nexts {
                rec(ctx, branches, out, &next, chain);
            }
        }
        chain.pop();
    }
    let starts: Vec<SoftConstraint> = ctx.uni.reps.clone();
    for s in &starts {
        rec(ctx, branches, &mut out, s, &mut Vec::new());
    }
    out
}

/// Timed guard: fires or falls back visibly, waits visibly while the
/// timer runs, and may always decrement silently.
fn sem_askp_il(
    ctx: &Ctx,
    t0: u32,
    table: &SoftConstraint,
    thr: &Threshold,
    then_set: &Bounded<LSeq>,
    els_set: &Bounded<LSeq>,
) -> Bounded<LSeq> {
    let mut out = Bounded::empty();
    #[allow(clippy::too_many_arguments)]
    fn rec(
        ctx: &Ctx,
        table: &SoftConstraint,
        thr: &Threshold,
        then_set: &Bounded<LSeq>,
        els_set: &Bounded<LSeq>,
        out: &mut Bounded<LSeq>,
        store: &SoftConstraint,
        t: u32,
        chain: &mut Vec<LStep>,
    ) {
        let descend = |out: &mut Bounded<LSeq>,
                       chain: &mut Vec<LStep>,
                       label: Label,
                       next_t: u32,
                       ctx: &Ctx,
                       table: &SoftConstraint,
                       thr: &Threshold,
                       then_set: &Bounded<LSeq>,
                       els_set: &Bounded<LSeq>,
                       store: &SoftConstraint| {
            chain.push(LStep::stutter(store, label));
            if chain.len() == ctx.maxlen {
                insert_lseq(out, chain.clone(), false);
                out.truncated = true;
            } else {
                let nexts: Vec<SoftConstraint> = ctx.jumps(store).cloned().collect();
                for next in nexts {
                    rec(ctx, table, thr, then_set, els_set, out, &next, next_t, chain);
                }
            }
            chain.pop();
        };
        if t == 0 {
            let mut prefix = chain.clone();
            prefix.push(LStep::stutter(store, Label::Omega));
            append_cont_il(ctx, out, &prefix, store, els_set);
            descend(
                out, chain, Label::Tau, 0, ctx, table, thr, then_set, els_set, store,
            );
            return;
        }
        let ok = threshold_ok(ctx.kind(), thr, store);
        let ent = store.entails(table);
        if ok && ent {
            let mut prefix = chain.clone();
            prefix.push(LStep::stutter(store, Label::Omega));
            append_cont_il(ctx, out, &prefix, store, then_set);
        } else if !ok {
            let mut prefix = chain.clone();
            prefix.push(LStep::stutter(store, Label::Omega));
            append_cont_il(ctx, out, &prefix, store, els_set);
        } else {
            descend(
                out,
                chain,
                Label::Omega,
                t - 1,
                ctx,
                table,
                thr,
                then_set,
                els_set,
                store,
            );
        }
        descend(
            out,
            chain,
            Label::Tau,
            t - 1,
            ctx,
            table,
            thr,
            then_set,
            els_set,
            store,
        );
    }
    let starts: Vec<SoftConstraint> = ctx.uni.reps.clone();
    for s in &starts {
        rec(
            ctx,
            table,
            thr,
            then_set,
            els_set,
            &mut out,
            s,
            t0,
            &mut Vec::new(),
        );
    }
    out
}

fn merge_lsteps(
    a: &[LStep],
    b: &[LStep],
    acc: &mut Vec<LStep>,
    out: &mut BTreeSet<Vec<LStep>>,
) {
    if a.len() == 1 && b.len() == 1 {
        let (x, y) = (&a[0], &b[0]);
        if x.label == Label::Omega
            && y.label == Label::Omega
            && x.before == x.after
            && y.before == y.after
            && x.before == y.before
        {
            acc.push(x.clone());
            out.insert(acc.clone());
            acc.pop();
        }
        return;
    }
    if a.is_empty() || b.is_empty() || a.len() != b.len() {
        return;
    }
    let (x, y) = (&a[0], &b[0]);
    if x.before != y.before {
        return;
    }
    if y.label == Label::Tau {
        acc.push(x.clone());
        merge_lsteps(&a[1..], &b[1..], acc, out);
        acc.pop();
    }
    if x.label == Label::Tau && y.label != Label::Tau {
        acc.push(y.clone());
        merge_lsteps(&a[1..], &b[1..], acc, out);
        acc.pop();
    }
}

/// Parallel under interleaving: one side acts while the other
/// stutters silently; the terminal visible stutter is shared.
pub fn sem_parallel_il(a: &Bounded<LSeq>, b: &Bounded<LSeq>) -> Bounded<LSeq> {
    let mut out = Bounded::empty();
    out.truncated = a.truncated || b.truncated;
    for s in a.seqs.iter().filter(|s| s.complete) {
        for t in b.seqs.iter().filter(|t| t.complete) {
            if s.steps.len() != t.steps.len() {
                continue;
            }
            let mut merged = BTreeSet::new();
            merge_lsteps(&s.steps, &t.steps, &mut Vec::new(), &mut merged);
            for steps in merged {
                if steps.windows(2).any(|w| !w[1].before.entails(&w[0].after)) {
                    continue;
                }
                insert_lseq(&mut out, steps, true);
            }
        }
    }
    out
}

fn with_forced_stutter_il(ctx: &Ctx, body: &Bounded<LSeq>) -> Bounded<LSeq> {
    let always = SoftConstraint::top(ctx.kind());
    sem_sum_il(
        ctx,
        &[(always, Threshold::plain(ctx.kind()), body.clone())],
    )
}

type IlEnv = BTreeMap<String, Bounded<LSeq>>;

fn il_agent(ctx: &Ctx, u: &mut Universe, env: &IlEnv, agent: &Agent, fuel: usize) -> Bounded<LSeq> {
    match agent {
        Agent::Success => sem_success_il(ctx),
        Agent::Tell { c, thr, cont, .. } => {
            let cont_set = il_agent(ctx, u, env, cont, fuel);
            sem_tell_il(ctx, &c.table, thr, &cont_set)
        }
        Agent::Sum(branches) => {
            let sets: Vec<(SoftConstraint, Threshold, Bounded<LSeq>)> = branches
                .iter()
                .map(|b| {
                    (
                        b.c.table.clone(),
                        b.thr.clone(),
                        il_agent(ctx, u, env, &b.cont, fuel),
                    )
                })
                .collect();
            sem_sum_il(ctx, &sets)
        }
        Agent::Parallel(l, r) => {
            let ls = il_agent(ctx, u, env, l, fuel);
            let rs = il_agent(ctx, u, env, r, fuel);
            sem_parallel_il(&ls, &rs)
        }
        Agent::Exists { var, body } => {
            let fresh = u.fresh_like(*var);
            let renamed = body.rename_var(u, *var, fresh);
            il_agent(ctx, u, env, &renamed, fuel)
        }
        Agent::Call { name, actuals } => {
            let decl = ctx
                .program
                .decl(name)
                .expect("calls are validated at parse")
                .clone();
            if *actuals == decl.formals {
                env.get(name).cloned().unwrap_or_else(Bounded::empty)
            } else if fuel == 0 {
                Bounded {
                    seqs: BTreeSet::new(),
                    truncated: true,
                }
            } else {
                let inst = instantiate_call(u, &decl, actuals);
                let body = il_agent(ctx, u, env, &inst, fuel - 1);
                with_forced_stutter_il(ctx, &body)
            }
        }
        Agent::Askp {
            t,
            c,
            thr,
            then,
            els,
        } => {
            let then_set = il_agent(ctx, u, env, then, fuel);
            let els_set = il_agent(ctx, u, env, els, fuel);
            sem_askp_il(ctx, *t, &c.table, thr, &then_set, &els_set)
        }
        Agent::Now { .. } | Agent::Timeout { .. } | Agent::Watchdog { .. } => {
            unreachable!("dialect checks and expansion precede denotation")
        }
    }
}

fn il_snapshot(env: &IlEnv, u: &Universe) -> Snapshot {
    env.iter()
        .map(|(name, set)| {
            let forms: BTreeSet<Vec<(String, String)>> = set
                .seqs
                .iter()
                .map(|s| {
                    let plain = RSeq {
                        steps: s
                            .steps
                            .iter()
                            .map(|st| Step::new(st.before.clone(), st.after.clone(), st.delta.clone()))
                            .collect(),
                        complete: s.complete,
                    };
                    let mut form = canonical_form(&plain, u);
                    for (i, st) in s.steps.iter().enumerate() {
                        if st.label == Label::Tau {
                            form[i].1.push('*');
                        }
                    }
                    form
                })
                .collect();
            (name.clone(), (forms, set.truncated))
        })
        .collect()
}

fn il_env(ctx: &Ctx) -> (IlEnv, Universe, bool) {
    let mut env: IlEnv = ctx
        .program
        .decls
        .iter()
        .map(|d| (d.name.clone(), Bounded::empty()))
        .collect();
    let mut u = ctx.program.universe.clone();
    if ctx.program.decls.is_empty() {
        return (env, u, false);
    }
    let mut prev: Option<Snapshot> = None;
    for _ in 0..=ctx.maxlen + 1 {
        let mut round_u = ctx.program.universe.clone();
        let next: IlEnv = ctx
            .program
            .decls
            .iter()
            .map(|d| {
                let body = il_agent(ctx, &mut round_u, &env, &d.body, ctx.maxlen);
                (d.name.clone(), with_forced_stutter_il(ctx, &body))
            })
            .collect();
        let snap = il_snapshot(&next, &round_u);
        let stable = prev.as_ref() == Some(&snap);
        env = next;
        u = round_u;
        if stable {
            return (env, u, false);
        }
        prev = Some(snap);
    }
    (env, u, true)
}

/// The bounded interleaving sequence set of an agent.
pub fn denote_il(
    program: &Program,
    agent: &Agent,
    uni: &StoreUniverse,
    maxlen: usize,
) -> IlDenotation {
    assert_eq!(program.dialect, Dialect::Il);
    let maxlen = maxlen.max(1);
    let ctx = Ctx {
        program,
        uni,
        maxlen,
        success: Bounded::empty(),
    };
    let (env, mut u, unstable) = il_env(&ctx);
    let mut out = il_agent(&ctx, &mut u, &env, agent, maxlen);
    out.truncated |= unstable || uni.truncated;
    IlDenotation {
        seqs: out.seqs,
        truncated: out.truncated,
        universe: u,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::expand::expand_program;
    use crate::lang::parser::parse_program;
    use crate::traces::universe::build_universe;
    use crate::traces::{is_connected, is_connected_il};

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
    fn success_denotes_to_complete_stutter_chains() {
        let p = prog("main: success");
        let uni = build_universe(&p, &[&p.main], &[], 2);
        let den = denote_mp(&p, &p.main, &uni, 2);
        assert!(!den.truncated);
        assert_eq!(den.seqs.len(), 2);
        for s in &den.seqs {
            assert!(s.complete);
            assert!(s.steps.iter().all(Step::is_stutter));
            assert!(s.steps.iter().all(|st| st.before.is_top()));
        }
        let lens: Vec<usize> = den.seqs.iter().map(|s| s.steps.len()).collect();
        assert_eq!(lens, vec![1, 2]);
    }

    #[test]
    fn an_unserved_ask_yields_only_incomplete_waiting() {
        let p = prog("main: ask(c1) ->[inf] success");
        let uni = build_universe(&p, &[&p.main], &[], 2);
        let den = denote_mp(&p, &p.main, &uni, 2);
        assert!(den.truncated);
        assert!(!den.seqs.is_empty());
        for s in &den.seqs {
            assert!(!s.complete);
            assert!(s.steps.iter().all(Step::is_stutter));
        }
    }

    #[test]
    fn a_tell_prefixes_its_continuation() {
        let p = prog("main: tell(c1) ->[inf] success");
        let uni = build_universe(&p, &[&p.main], &[], 3);
        let den = denote_mp(&p, &p.main, &uni, 3);
        let c1 = &p.constraint("c1").unwrap().table;
        let connected: Vec<&RSeq> = den
            .seqs
            .iter()
            .filter(|s| s.complete && is_connected(s))
            .collect();
        assert!(!connected.is_empty());
        for s in &connected {
            assert_eq!(&s.steps[0].delta, c1);
            assert_eq!(&s.steps[0].after, c1);
            assert!(s.steps.last().unwrap().is_stutter());
        }
    }

    #[test]
    fn blocked_tells_denote_nothing_anywhere() {
        let p = prog("main: tell(c2) ->[4] success");
        let uni = build_universe(&p, &[&p.main], &[], 3);
        let den = denote_mp(&p, &p.main, &uni, 3);
        assert!(den.seqs.is_empty());
    }

    #[test]
    fn parallel_merges_pointwise_products() {
        let p = prog("main: (tell(c1) ->[inf] success) || (tell(c2) ->[inf] success)");
        let uni = build_universe(&p, &[&p.main], &[], 3);
        let den = denote_mp(&p, &p.main, &uni, 3);
        let c1 = &p.constraint("c1").unwrap().table;
        let c2 = &p.constraint("c2").unwrap().table;
        let both = c1.combine(c2);
        let connected: Vec<&RSeq> = den
            .seqs
            .iter()
            .filter(|s| s.complete && is_connected(s))
            .collect();
        assert!(!connected.is_empty());
        for s in connected {
            assert_eq!(s.steps[0].delta, both);
            assert_eq!(s.last_store(), &both);
        }
    }

    #[test]
    fn il_success_closes_with_one_visible_stutter() {
        let p = prog_il("main: success");
        let uni = build_universe(&p, &[&p.main], &[], 2);
        let den = denote_il(&p, &p.main, &uni, 2);
        let complete: Vec<&LSeq> = den.seqs.iter().filter(|s| s.complete).collect();
        assert!(!complete.is_empty());
        for s in &complete {
            let last = s.steps.last().unwrap();
            assert_eq!(last.label, Label::Omega);
            assert_eq!(last.before, last.after);
            for st in &s.steps[..s.steps.len() - 1] {
                assert_eq!(st.label, Label::Tau);
            }
        }
        assert!(complete.iter().any(|s| is_connected_il(s)));
    }

    #[test]
    fn il_tell_pads_silently_then_fires_visibly() {
        let p = prog_il("main: tell(c1) ->[inf] success");
        let uni = build_universe(&p, &[&p.main], &[], 4);
        let den = denote_il(&p, &p.main, &uni, 4);
        let c1 = &p.constraint("c1").unwrap().table;
        let connected: Vec<&LSeq> = den
            .seqs
            .iter()
            .filter(|s| s.complete && is_connected_il(s))
            .collect();
        assert!(!connected.is_empty());
        for s in connected {
            let tell = s
                .steps
                .iter()
                .find(|st| st.before != st.after)
                .expect("one visible tell");
            assert_eq!(&tell.delta, c1);
            assert_eq!(s.steps.last().unwrap().label, Label::Omega);
        }
        let padded = den.seqs.iter().any(|s| {
            s.complete && s.steps.len() > 2 && s.steps[0].label == Label::Tau
        });
        assert!(padded);
    }
}
