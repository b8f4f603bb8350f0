//! Operational engines: shared run/exploration types, scheduling and
//! call instantiation.

pub mod il;
pub mod mp;

use std::collections::BTreeSet;
use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::constraint::{all_tuples, SoftConstraint, Universe, VarId};
use crate::lang::ast::{Agent, CLabel, CRef, ProcDecl, Threshold};
use crate::semiring::SemiringKind;

/// One event-log row: which rule fired where, and the told constraint
/// for tells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub rule: &'static str,
    pub path: String,
    pub delta: Option<CLabel>,
}

impl Event {
    pub fn at(rule: &'static str, path: &str) -> Self {
        Event {
            rule,
            path: path.to_string(),
            delta: None,
        }
    }

    pub fn telling(rule: &'static str, path: &str, delta: CLabel) -> Self {
        Event {
            rule,
            path: path.to_string(),
            delta: Some(delta),
        }
    }
}

/// A branch decision taken at a choice with several enabled guards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceRec {
    pub path: String,
    pub chosen: usize,
    pub enabled: Vec<usize>,
}

/// The decisions of one tick: sum choices under maximal parallelism, a
/// transition index under interleaving.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TickDecision {
    Mp(Vec<ChoiceRec>),
    Il(usize),
}

pub type DecisionLog = Vec<TickDecision>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    Suspended,
    BudgetExceeded,
}

/// One clock tick of a run.
#[derive(Debug, Clone)]
pub struct Tick {
    pub index: u32,
    pub store_before: SoftConstraint,
    pub store_after: SoftConstraint,
    pub delta: SoftConstraint,
    pub events: Vec<Event>,
    pub decision: TickDecision,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub status: RunStatus,
    pub ticks: Vec<Tick>,
    pub final_agent: Agent,
    pub final_store: SoftConstraint,
    pub clock: u32,
    /// Final store projected onto the free variables of the starting
    /// agent; present on success only.
    pub observable: Option<SoftConstraint>,
    /// The program universe plus every variable instantiated during
    /// the run, so stores in `ticks` can be named.
    pub universe: Universe,
}

/// How branch and transition choices are resolved during a run.
#[derive(Debug, Clone)]
pub enum Scheduler {
    Seeded(u64),
    Priority,
    Replay(DecisionLog),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RunError {
    #[error("replay log ends at tick {tick} but the run continues")]
    ReplayExhausted { tick: u32 },
    #[error("replay log does not match the run at tick {tick}: {msg}")]
    ReplayMismatch { tick: u32, msg: String },
}

pub(crate) enum TickChooser<'a> {
    Priority,
    Seeded(&'a mut ChaCha8Rng),
    Replay(&'a TickDecision),
}

impl TickChooser<'_> {
    /// Resolves one sum choice; `enabled` holds branch indices in
    /// source order.
    pub(crate) fn choose_sum(
        &mut self,
        tick: u32,
        path: &str,
        enabled: &[usize],
    ) -> Result<usize, RunError> {
        match self {
            TickChooser::Priority => Ok(enabled[0]),
            TickChooser::Seeded(rng) => Ok(enabled[rng.gen_range(0..enabled.len())]),
            TickChooser::Replay(TickDecision::Mp(recs)) => recs
                .iter()
                .find(|r| r.path == path)
                .map(|r| r.chosen)
                .filter(|c| enabled.contains(c))
                .ok_or_else(|| RunError::ReplayMismatch {
                    tick,
                    msg: format!("no recorded choice for the sum at `{path}`"),
                }),
            TickChooser::Replay(TickDecision::Il(_)) => Err(RunError::ReplayMismatch {
                tick,
                msg: "an interleaving decision cannot drive a sum choice".into(),
            }),
        }
    }

    /// Resolves the transition pick among `count` enabled moves.
    pub(crate) fn choose_move(&mut self, tick: u32, count: usize) -> Result<usize, RunError> {
        match self {
            TickChooser::Priority => Ok(0),
            TickChooser::Seeded(rng) => Ok(rng.gen_range(0..count)),
            TickChooser::Replay(TickDecision::Il(ix)) if *ix < count => Ok(*ix),
            TickChooser::Replay(TickDecision::Il(ix)) => Err(RunError::ReplayMismatch {
                tick,
                msg: format!("recorded move {ix} is out of range ({count} enabled)"),
            }),
            TickChooser::Replay(TickDecision::Mp(_)) => Err(RunError::ReplayMismatch {
                tick,
                msg: "a sum decision cannot drive a transition pick".into(),
            }),
        }
    }
}

pub(crate) struct SchedulerState {
    scheduler: Scheduler,
    rng: Option<ChaCha8Rng>,
}

impl SchedulerState {
    pub(crate) fn new(scheduler: Scheduler) -> Self {
        let rng = match &scheduler {
            Scheduler::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        SchedulerState { scheduler, rng }
    }

    pub(crate) fn tick(&mut self, tick: u32) -> Result<TickChooser<'_>, RunError> {
        match &self.scheduler {
            Scheduler::Priority => Ok(TickChooser::Priority),
            Scheduler::Seeded(_) => Ok(TickChooser::Seeded(self.rng.as_mut().unwrap())),
            Scheduler::Replay(log) => log
                .get(tick as usize)
                .map(TickChooser::Replay)
                .ok_or(RunError::ReplayExhausted { tick }),
        }
    }
}

/// Exhaustive exploration result: the deduplicated terminal states
/// with one witness schedule each. `universe` includes the variables
/// instantiated while exploring, so terminal stores can be named.
#[derive(Debug, Clone)]
pub struct Exploration {
    pub terminals: Vec<Terminal>,
    pub truncated: bool,
    pub states: usize,
    pub universe: Universe,
}

#[derive(Debug, Clone)]
pub struct Terminal {
    pub status: RunStatus,
    pub store: SoftConstraint,
    pub observable: Option<SoftConstraint>,
    pub clock: u32,
    pub witness: DecisionLog,
    pub key: String,
}

impl Exploration {
    /// The canonical store keys of successful terminals.
    pub fn success_keys(&self) -> BTreeSet<String> {
        self.terminals
            .iter()
            .filter(|t| t.status == RunStatus::Success)
            .map(|t| t.key.clone())
            .collect()
    }
}

pub(crate) struct Env<'a> {
    pub(crate) decls: &'a [ProcDecl],
    pub(crate) kind: SemiringKind,
}

impl Env<'_> {
    pub(crate) fn decl(&self, name: &str) -> &ProcDecl {
        self.decls
            .iter()
            .find(|d| d.name == name)
            .expect("calls are validated at parse")
    }
}

pub(crate) fn join_path(path: &str, seg: &str) -> String {
    if path.is_empty() {
        seg.to_string()
    } else {
        format!("{path}.{seg}")
    }
}

/// The decisions of a finished run, in replayable form.
pub fn decision_log(run: &Run) -> DecisionLog {
    run.ticks.iter().map(|t| t.decision.clone()).collect()
}

pub(crate) fn record_terminal(
    terminals: &mut std::collections::BTreeMap<(u8, String), Terminal>,
    status: RunStatus,
    store: &SoftConstraint,
    u: &Universe,
    depth: u32,
    witness: DecisionLog,
    fv: &BTreeSet<VarId>,
) {
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
    let key = canonical_store_string(store, u, &resolve);
    let tag = match status {
        RunStatus::Success => 0,
        RunStatus::Suspended => 1,
        RunStatus::BudgetExceeded => 2,
    };
    terminals
        .entry((tag, key.clone()))
        .or_insert_with(|| Terminal {
            status,
            store: store.clone(),
            observable: (status == RunStatus::Success).then(|| project_observable(store, fv)),
            clock: depth,
            witness,
            key,
        });
}

/// Expands a call at its tick: verbatim actuals reuse the body, other
/// actuals run the body on fresh formals linked to the actuals by a
/// told diagonal.
pub fn instantiate_call(u: &mut Universe, decl: &ProcDecl, actuals: &[VarId]) -> Agent {
    assert_eq!(decl.formals.len(), actuals.len(), "arity was checked at parse");
    if decl.formals == actuals {
        return decl.body.clone();
    }
    let kind = u.kind();
    let fresh: Vec<VarId> = decl.formals.iter().map(|&f| u.fresh_like(f)).collect();
    let mut body = decl.body.clone();
    for (&f, &g) in decl.formals.iter().zip(&fresh) {
        body = body.rename_var(u, f, g);
    }
    let mut link = SoftConstraint::top(kind);
    let mut pairs = Vec::new();
    for (&g, &a) in fresh.iter().zip(actuals) {
        link = link.combine(&SoftConstraint::diagonal(u, g, a));
        pairs.push((u.var_name(g).to_string(), u.var_name(a).to_string()));
    }
    let label = if pairs.len() == 1 {
        CLabel::Diag(pairs[0].0.clone(), pairs[0].1.clone())
    } else {
        let text: Vec<String> = pairs.iter().map(|(g, a)| format!("{g}={a}")).collect();
        CLabel::Named(format!("bind({})", text.join(",")))
    };
    let tell = Agent::tell(
        CRef { label, table: link },
        Threshold::plain(kind),
        Agent::Success,
    );
    Agent::Parallel(Box::new(tell), Box::new(body))
}

/// `true` when the store (or grown store, for tells) passes a guard
/// threshold.
pub fn threshold_ok(kind: SemiringKind, thr: &Threshold, s: &SoftConstraint) -> bool {
    match thr {
        Threshold::Value(a) => kind.not_lt(&s.blevel(), a),
        Threshold::Constraint(c) => !(s.leq(&c.table) && *s != c.table),
    }
}

pub fn project_observable(store: &SoftConstraint, fv: &BTreeSet<VarId>) -> SoftConstraint {
    let onto: Vec<VarId> = fv.iter().copied().collect();
    store.project(&onto)
}

/// A state key that renames run-generated `$n` variables to their
/// first-occurrence order, so states differing only in fresh-name
/// choices collide.
pub fn canonical_key(agent: &Agent, store: &SoftConstraint, u: &Universe) -> String {
    let mut order: Vec<VarId> = Vec::new();
    collect_fresh(agent, u, &mut order);
    for &v in store.support() {
        if u.is_fresh(v) && !order.contains(&v) {
            order.push(v);
        }
    }
    let map: HashMap<VarId, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let resolve = |v: VarId| -> String {
        match map.get(&v) {
            Some(i) => format!("~{i}"),
            None => u.var_name(v).to_string(),
        }
    };
    let mut out = String::new();
    write_agent_key(agent, u, &resolve, &mut out);
    out.push('|');
    out.push_str(&canonical_store_string(store, u, &resolve));
    out
}

pub(crate) fn canonical_store_string(
    store: &SoftConstraint,
    u: &Universe,
    resolve: &dyn Fn(VarId) -> String,
) -> String {
    let mut named: Vec<(String, VarId)> = store
        .support()
        .iter()
        .map(|&v| (resolve(v), v))
        .collect();
    named.sort();
    let order: Vec<VarId> = named.iter().map(|&(_, v)| v).collect();
    let cards: Vec<usize> = order.iter().map(|&v| u.card(v)).collect();
    let mut sorted_support: Vec<VarId> = order.clone();
    sorted_support.sort();
    let mut out = String::new();
    out.push('{');
    for (i, (name, _)) in named.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(name);
    }
    out.push(':');
    for tuple in all_tuples(&cards) {
        let mut by_sorted = vec![0; tuple.len()];
        for (pos, &v) in order.iter().enumerate() {
            let at = sorted_support.iter().position(|&s| s == v).unwrap();
            by_sorted[at] = tuple[pos];
        }
        out.push_str(&store.eval_under(&sorted_support, &by_sorted).to_string());
        out.push(';');
    }
    out.push('}');
    out
}

fn collect_fresh(agent: &Agent, u: &Universe, out: &mut Vec<VarId>) {
    let push = |v: VarId, out: &mut Vec<VarId>| {
        if u.is_fresh(v) && !out.contains(&v) {
            out.push(v);
        }
    };
    let cref = |c: &CRef, out: &mut Vec<VarId>| {
        for &v in c.table.support() {
            push(v, out);
        }
    };
    match agent {
        Agent::Success => {}
        Agent::Tell { c, thr, cont, .. } => {
            cref(c, out);
            if let Threshold::Constraint(t) = thr {
                cref(t, out);
            }
            collect_fresh(cont, u, out);
        }
        Agent::Sum(branches) => {
            for b in branches {
                cref(&b.c, out);
                if let Threshold::Constraint(t) = &b.thr {
                    cref(t, out);
                }
                collect_fresh(&b.cont, u, out);
            }
        }
        Agent::Parallel(l, r) => {
            collect_fresh(l, u, out);
            collect_fresh(r, u, out);
        }
        Agent::Exists { var, body } => {
            push(*var, out);
            collect_fresh(body, u, out);
        }
        Agent::Call { actuals, .. } => {
            for &a in actuals {
                push(a, out);
            }
        }
        Agent::Now { c, thr, then, els } | Agent::Askp { c, thr, then, els, .. } => {
            cref(c, out);
            if let Threshold::Constraint(t) = thr {
                cref(t, out);
            }
            collect_fresh(then, u, out);
            collect_fresh(els, u, out);
        }
        Agent::Timeout { branches, els, .. } => {
            for b in branches {
                cref(&b.c, out);
                collect_fresh(&b.cont, u, out);
            }
            collect_fresh(els, u, out);
        }
        Agent::Watchdog { body, c, els, .. } => {
            collect_fresh(body, u, out);
            cref(c, out);
            if let Some(e) = els {
                collect_fresh(e, u, out);
            }
        }
    }
}

fn write_threshold_key(
    thr: &Threshold,
    u: &Universe,
    resolve: &dyn Fn(VarId) -> String,
    out: &mut String,
) {
    match thr {
        Threshold::Value(g) => {
            out.push('[');
            out.push_str(&g.to_string());
            out.push(']');
        }
        Threshold::Constraint(c) => {
            out.push('{');
            out.push_str(&canonical_store_string(&c.table, u, resolve));
            out.push('}');
        }
    }
}

fn write_agent_key(
    agent: &Agent,
    u: &Universe,
    resolve: &dyn Fn(VarId) -> String,
    out: &mut String,
) {
    match agent {
        Agent::Success => out.push('S'),
        Agent::Tell {
            c,
            thr,
            delay,
            cont,
        } => {
            out.push_str("T(");
            out.push_str(&canonical_store_string(&c.table, u, resolve));
            write_threshold_key(thr, u, resolve, out);
            if *delay > 0 {
                out.push_str(&format!("d{delay}"));
            }
            out.push(')');
            write_agent_key(cont, u, resolve, out);
        }
        Agent::Sum(branches) => {
            out.push_str("+[");
            for b in branches {
                out.push_str("A(");
                out.push_str(&canonical_store_string(&b.c.table, u, resolve));
                write_threshold_key(&b.thr, u, resolve, out);
                if b.delay > 0 {
                    out.push_str(&format!("d{}", b.delay));
                }
                out.push(')');
                write_agent_key(&b.cont, u, resolve, out);
                out.push(',');
            }
            out.push(']');
        }
        Agent::Parallel(l, r) => {
            out.push_str("P(");
            write_agent_key(l, u, resolve, out);
            out.push(',');
            write_agent_key(r, u, resolve, out);
            out.push(')');
        }
        Agent::Exists { var, body } => {
            out.push_str("E(");
            out.push_str(&resolve(*var));
            out.push(')');
            write_agent_key(body, u, resolve, out);
        }
        Agent::Call { name, actuals } => {
            out.push_str("C(");
            out.push_str(name);
            for &a in actuals {
                out.push(',');
                out.push_str(&resolve(a));
            }
            out.push(')');
        }
        Agent::Now { c, thr, then, els } => {
            out.push_str("N(");
            out.push_str(&canonical_store_string(&c.table, u, resolve));
            write_threshold_key(thr, u, resolve, out);
            out.push(')');
            write_agent_key(then, u, resolve, out);
            out.push(':');
            write_agent_key(els, u, resolve, out);
        }
        Agent::Askp {
            t,
            c,
            thr,
            then,
            els,
        } => {
            out.push_str(&format!("K{t}("));
            out.push_str(&canonical_store_string(&c.table, u, resolve));
            write_threshold_key(thr, u, resolve, out);
            out.push(')');
            write_agent_key(then, u, resolve, out);
            out.push(':');
            write_agent_key(els, u, resolve, out);
        }
        Agent::Timeout { branches, m, els } => {
            out.push_str(&format!("O{m}("));
            for b in branches {
                write_agent_key(&Agent::Sum(vec![b.clone()]), u, resolve, out);
            }
            out.push(')');
            write_agent_key(els, u, resolve, out);
        }
        Agent::Watchdog { body, c, thr, els } => {
            out.push_str("W(");
            out.push_str(&canonical_store_string(&c.table, u, resolve));
            write_threshold_key(thr, u, resolve, out);
            out.push(')');
            write_agent_key(body, u, resolve, out);
            if let Some(e) = els {
                out.push(':');
                write_agent_key(e, u, resolve, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse_program;
    use crate::lang::printer::pretty_agent;

    const HEADER: &str = "\
dialect tsccp
semiring weighted
var x in {0, 1}
var y in {0, 1}
constraint c1 on (x) { (0) -> 3 (1) -> 4 }
";

    #[test]
    fn verbatim_calls_reuse_the_body() {
        let p = parse_program(&format!(
            "{HEADER}proc loop(x) :: tell(c1) -> loop(x)\nmain: loop(x)"
        ))
        .unwrap();
        let mut u = p.universe.clone();
        let d = p.decl("loop").unwrap();
        let body = instantiate_call(&mut u, d, &[p.universe.var_id("x").unwrap()]);
        assert_eq!(body, d.body);
        assert_eq!(u.var_count(), p.universe.var_count());
    }

    #[test]
    fn foreign_actuals_link_through_a_diagonal() {
        let p = parse_program(&format!(
            "{HEADER}proc loop(x) :: tell(c1) -> loop(x)\nmain: loop(y)"
        ))
        .unwrap();
        let mut u = p.universe.clone();
        let d = p.decl("loop").unwrap();
        let y = p.universe.var_id("y").unwrap();
        let agent = instantiate_call(&mut u, d, &[y]);
        let printed = pretty_agent(&agent, &u);
        assert_eq!(printed, "tell(diag($1,y)) || tell(c1[x:=$1]) -> loop($1)");
        match &agent {
            Agent::Parallel(tell, body) => {
                match tell.as_ref() {
                    Agent::Tell { c, .. } => assert_eq!(c.table.support().len(), 2),
                    other => panic!("unexpected {other:?}"),
                }
                assert!(matches!(body.as_ref(), Agent::Tell { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn canonical_keys_identify_fresh_renamings() {
        let p = parse_program(&format!("{HEADER}main: exists x. tell(c1)")).unwrap();
        let body = match &p.main {
            Agent::Exists { body, .. } => body.as_ref().clone(),
            other => panic!("unexpected {other:?}"),
        };
        let mut u1 = p.universe.clone();
        let x = u1.var_id("x").unwrap();
        let f1 = u1.fresh_like(x);
        let a1 = body.rename_var(&u1, x, f1);
        let mut u2 = p.universe.clone();
        let _ = u2.fresh_like(x);
        let f2 = u2.fresh_like(x);
        let a2 = body.rename_var(&u2, x, f2);
        let top = SoftConstraint::top(SemiringKind::Weighted);
        assert_eq!(canonical_key(&a1, &top, &u1), canonical_key(&a2, &top, &u2));
        let distinct = canonical_key(&p.main, &top, &p.universe);
        assert_ne!(distinct, canonical_key(&a1, &top, &u1));
    }

    #[test]
    fn threshold_checks_cover_both_families() {
        let p = parse_program(&format!("{HEADER}main: success")).unwrap();
        let k = p.kind;
        let c1 = &p.constraint("c1").unwrap().table;
        let five = k.parse_grade("5").unwrap();
        let two = k.parse_grade("2").unwrap();
        assert!(threshold_ok(k, &Threshold::Value(five), c1));
        assert!(!threshold_ok(k, &Threshold::Value(two), c1));
        let phi = Threshold::Constraint(CRef::named("c1", c1.clone()));
        assert!(threshold_ok(k, &phi, c1));
        let stronger = c1.combine(c1);
        assert!(!threshold_ok(k, &phi, &stronger));
        assert!(threshold_ok(
            k,
            &Threshold::plain(k),
            &SoftConstraint::top(k)
        ));
    }
}
