//! Maximal-parallelism engine: every enabled component moves at each
//! clock tick.

use std::collections::{BTreeMap, HashSet, VecDeque};

use crate::constraint::{SoftConstraint, Universe};
use crate::lang::ast::{Agent, Program, Threshold};

use super::{
    canonical_key, instantiate_call, join_path, project_observable, record_terminal,
    threshold_ok, ChoiceRec, DecisionLog, Env, Event, Exploration, Run, RunError, RunStatus,
    Scheduler, SchedulerState, Terminal, Tick, TickChooser, TickDecision,
};

fn sum_rule(thr: &Threshold) -> &'static str {
    match thr {
        Threshold::Value(_) => "R3",
        Threshold::Constraint(_) => "R4",
    }
}

fn tell_rule(thr: &Threshold) -> &'static str {
    match thr {
        Threshold::Value(_) => "R1",
        Threshold::Constraint(_) => "R2",
    }
}

fn now_rules(thr: &Threshold, entailed: bool) -> (&'static str, &'static str) {
    match (thr, entailed) {
        (Threshold::Value(_), true) => ("R8", "R9"),
        (Threshold::Value(_), false) => ("R10", "R11"),
        (Threshold::Constraint(_), true) => ("R12", "R13"),
        (Threshold::Constraint(_), false) => ("R14", "R15"),
    }
}

/// One tick of a single agent under a chooser; `None` means the agent
/// cannot move and keeps waiting.
#[allow(clippy::too_many_arguments)]
fn try_step(
    ctx: &Env,
    u: &mut Universe,
    agent: &Agent,
    path: &str,
    store: &SoftConstraint,
    tick: u32,
    chooser: &mut TickChooser,
    events: &mut Vec<Event>,
    choices: &mut Vec<ChoiceRec>,
) -> Result<Option<(Agent, SoftConstraint)>, RunError> {
    match agent {
        Agent::Success => Ok(None),
        Agent::Tell {
            c,
            thr,
            delay,
            cont,
        } => {
            debug_assert_eq!(*delay, 0, "delays are removed by expansion");
            let grown = store.combine(&c.table);
            if threshold_ok(ctx.kind, thr, &grown) {
                events.push(Event::telling(tell_rule(thr), path, c.label.clone()));
                Ok(Some((cont.as_ref().clone(), c.table.clone())))
            } else {
                Ok(None)
            }
        }
        Agent::Sum(branches) => {
            let enabled: Vec<usize> = branches
                .iter()
                .enumerate()
                .filter(|(_, b)| {
                    debug_assert_eq!(b.delay, 0, "delays are removed by expansion");
                    store.entails(&b.c.table) && threshold_ok(ctx.kind, &b.thr, store)
                })
                .map(|(i, _)| i)
                .collect();
            if enabled.is_empty() {
                return Ok(None);
            }
            let chosen = if enabled.len() == 1 {
                enabled[0]
            } else {
                let c = chooser.choose_sum(tick, path, &enabled)?;
                choices.push(ChoiceRec {
                    path: path.to_string(),
                    chosen: c,
                    enabled: enabled.clone(),
                });
                c
            };
            let b = &branches[chosen];
            let at = if branches.len() > 1 {
                join_path(path, &format!("b{chosen}"))
            } else {
                path.to_string()
            };
            events.push(Event::at(sum_rule(&b.thr), &at));
            Ok(Some((b.cont.clone(), SoftConstraint::top(ctx.kind))))
        }
        Agent::Parallel(l, r) => {
            let mut ev_l = Vec::new();
            let mut ch_l = Vec::new();
            let left = try_step(
                ctx,
                u,
                l,
                &join_path(path, "0"),
                store,
                tick,
                chooser,
                &mut ev_l,
                &mut ch_l,
            )?;
            let mut ev_r = Vec::new();
            let mut ch_r = Vec::new();
            let right = try_step(
                ctx,
                u,
                r,
                &join_path(path, "1"),
                store,
                tick,
                chooser,
                &mut ev_r,
                &mut ch_r,
            )?;
            match (left, right) {
                (Some((la, ld)), Some((ra, rd))) => {
                    events.push(Event::at("R5", path));
                    events.extend(ev_l);
                    events.extend(ev_r);
                    choices.extend(ch_l);
                    choices.extend(ch_r);
                    Ok(Some((
                        Agent::Parallel(Box::new(la), Box::new(ra)),
                        ld.combine(&rd),
                    )))
                }
                (Some((la, ld)), None) => {
                    events.push(Event::at("R6", path));
                    events.extend(ev_l);
                    choices.extend(ch_l);
                    Ok(Some((
                        Agent::Parallel(Box::new(la), Box::new(r.as_ref().clone())),
                        ld,
                    )))
                }
                (None, Some((ra, rd))) => {
                    events.push(Event::at("R6", path));
                    events.extend(ev_r);
                    choices.extend(ch_r);
                    Ok(Some((
                        Agent::Parallel(Box::new(l.as_ref().clone()), Box::new(ra)),
                        rd,
                    )))
                }
                (None, None) => Ok(None),
            }
        }
        Agent::Exists { var, body } => {
            let fresh = u.fresh_like(*var);
            let renamed = body.rename_var(u, *var, fresh);
            let mut ev = Vec::new();
            match try_step(ctx, u, &renamed, path, store, tick, chooser, &mut ev, choices)? {
                Some(next) => {
                    events.push(Event::at("R16", path));
                    events.extend(ev);
                    Ok(Some(next))
                }
                None => Ok(None),
            }
        }
        Agent::Call { name, actuals } => {
            let decl = ctx.decl(name).clone();
            let body = instantiate_call(u, &decl, actuals);
            events.push(Event::at("R17", path));
            Ok(Some((body, SoftConstraint::top(ctx.kind))))
        }
        Agent::Now { c, thr, then, els } => {
            if !threshold_ok(ctx.kind, thr, store) {
                return Ok(None);
            }
            let entailed = store.entails(&c.table);
            let (lift, stuck) = now_rules(thr, entailed);
            let (branch, seg) = if entailed {
                (then, "then")
            } else {
                (els, "else")
            };
            let mut ev = Vec::new();
            match try_step(
                ctx,
                u,
                branch,
                &join_path(path, seg),
                store,
                tick,
                chooser,
                &mut ev,
                choices,
            )? {
                Some(next) => {
                    events.push(Event::at(lift, path));
                    events.extend(ev);
                    Ok(Some(next))
                }
                None => {
                    events.push(Event::at(stuck, path));
                    Ok(Some((
                        branch.as_ref().clone(),
                        SoftConstraint::top(ctx.kind),
                    )))
                }
            }
        }
        Agent::Askp { .. } | Agent::Timeout { .. } | Agent::Watchdog { .. } => {
            unreachable!("dialect checks and expansion precede runs")
        }
    }
}

/// All one-tick alternatives of an agent, in canonical order.
#[derive(Debug, Clone)]
pub(crate) struct Variant {
    pub agent: Agent,
    pub delta: SoftConstraint,
    pub events: Vec<Event>,
    pub choices: Vec<ChoiceRec>,
}

pub(crate) fn step_all(
    ctx: &Env,
    u: &mut Universe,
    agent: &Agent,
    path: &str,
    store: &SoftConstraint,
) -> Vec<Variant> {
    match agent {
        Agent::Success => Vec::new(),
        Agent::Tell { c, thr, cont, .. } => {
            let grown = store.combine(&c.table);
            if threshold_ok(ctx.kind, thr, &grown) {
                vec![Variant {
                    agent: cont.as_ref().clone(),
                    delta: c.table.clone(),
                    events: vec![Event::telling(tell_rule(thr), path, c.label.clone())],
                    choices: Vec::new(),
                }]
            } else {
                Vec::new()
            }
        }
        Agent::Sum(branches) => {
            let enabled: Vec<usize> = branches
                .iter()
                .enumerate()
                .filter(|(_, b)| store.entails(&b.c.table) && threshold_ok(ctx.kind, &b.thr, store))
                .map(|(i, _)| i)
                .collect();
            enabled
                .iter()
                .map(|&i| {
                    let b = &branches[i];
                    let at = if branches.len() > 1 {
                        join_path(path, &format!("b{i}"))
                    } else {
                        path.to_string()
                    };
                    let choices = if enabled.len() > 1 {
                        vec![ChoiceRec {
                            path: path.to_string(),
                            chosen: i,
                            enabled: enabled.clone(),
                        }]
                    } else {
                        Vec::new()
                    };
                    Variant {
                        agent: b.cont.clone(),
                        delta: SoftConstraint::top(ctx.kind),
                        events: vec![Event::at(sum_rule(&b.thr), &at)],
                        choices,
                    }
                })
                .collect()
        }
        Agent::Parallel(l, r) => {
            let lv = step_all(ctx, u, l, &join_path(path, "0"), store);
            let rv = step_all(ctx, u, r, &join_path(path, "1"), store);
            match (lv.is_empty(), rv.is_empty()) {
                (false, false) => {
                    let mut out = Vec::new();
                    for a in &lv {
                        for b in &rv {
                            let mut events = vec![Event::at("R5", path)];
                            events.extend(a.events.iter().cloned());
                            events.extend(b.events.iter().cloned());
                            let mut choices = a.choices.clone();
                            choices.extend(b.choices.iter().cloned());
                            out.push(Variant {
                                agent: Agent::Parallel(
                                    Box::new(a.agent.clone()),
                                    Box::new(b.agent.clone()),
                                ),
                                delta: a.delta.combine(&b.delta),
                                events,
                                choices,
                            });
                        }
                    }
                    out
                }
                (false, true) => lv
                    .into_iter()
                    .map(|a| {
                        let mut events = vec![Event::at("R6", path)];
                        events.extend(a.events);
                        Variant {
                            agent: Agent::Parallel(
                                Box::new(a.agent),
                                Box::new(r.as_ref().clone()),
                            ),
                            delta: a.delta,
                            events,
                            choices: a.choices,
                        }
                    })
                    .collect(),
                (true, false) => rv
                    .into_iter()
                    .map(|b| {
                        let mut events = vec![Event::at("R6", path)];
                        events.extend(b.events);
                        Variant {
                            agent: Agent::Parallel(
                                Box::new(l.as_ref().clone()),
                                Box::new(b.agent),
                            ),
                            delta: b.delta,
                            events,
                            choices: b.choices,
                        }
                    })
                    .collect(),
                (true, true) => Vec::new(),
            }
        }
        Agent::Exists { var, body } => {
            let fresh = u.fresh_like(*var);
            let renamed = body.rename_var(u, *var, fresh);
            step_all(ctx, u, &renamed, path, store)
                .into_iter()
                .map(|mut v| {
                    let mut events = vec![Event::at("R16", path)];
                    events.append(&mut v.events);
                    v.events = events;
                    v
                })
                .collect()
        }
        Agent::Call { name, actuals } => {
            let decl = ctx.decl(name).clone();
            let body = instantiate_call(u, &decl, actuals);
            vec![Variant {
                agent: body,
                delta: SoftConstraint::top(ctx.kind),
                events: vec![Event::at("R17", path)],
                choices: Vec::new(),
            }]
        }
        Agent::Now { c, thr, then, els } => {
            if !threshold_ok(ctx.kind, thr, store) {
                return Vec::new();
            }
            let entailed = store.entails(&c.table);
            let (lift, stuck) = now_rules(thr, entailed);
            let (branch, seg) = if entailed {
                (then, "then")
            } else {
                (els, "else")
            };
            let inner = step_all(ctx, u, branch, &join_path(path, seg), store);
            if inner.is_empty() {
                vec![Variant {
                    agent: branch.as_ref().clone(),
                    delta: SoftConstraint::top(ctx.kind),
                    events: vec![Event::at(stuck, path)],
                    choices: Vec::new(),
                }]
            } else {
                inner
                    .into_iter()
                    .map(|mut v| {
                        let mut events = vec![Event::at(lift, path)];
                        events.append(&mut v.events);
                        v.events = events;
                        v
                    })
                    .collect()
            }
        }
        Agent::Askp { .. } | Agent::Timeout { .. } | Agent::Watchdog { .. } => {
            unreachable!("dialect checks and expansion precede runs")
        }
    }
}

/// Runs a maximal-parallelism program to success, suspension or the
/// step budget.
pub fn run_mp(
    program: &Program,
    scheduler: Scheduler,
    max_steps: u32,
    initial: Option<SoftConstraint>,
) -> Result<Run, RunError> {
    let ctx = Env {
        decls: &program.decls,
        kind: program.kind,
    };
    let mut u = program.universe.clone();
    let mut agent = program.main.clone();
    let fv = agent.free_vars();
    let mut store = initial.unwrap_or_else(|| SoftConstraint::top(program.kind));
    let mut sched = SchedulerState::new(scheduler);
    let mut ticks: Vec<Tick> = Vec::new();
    let status = loop {
        if agent.is_success_shape() {
            break RunStatus::Success;
        }
        if ticks.len() as u32 >= max_steps {
            break RunStatus::BudgetExceeded;
        }
        let index = ticks.len() as u32;
        let mut chooser = sched.tick(index)?;
        let mut events = Vec::new();
        let mut choices = Vec::new();
        match try_step(
            &ctx,
            &mut u,
            &agent,
            "",
            &store,
            index,
            &mut chooser,
            &mut events,
            &mut choices,
        )? {
            None => break RunStatus::Suspended,
            Some((next, delta)) => {
                let after = store.combine(&delta);
                ticks.push(Tick {
                    index,
                    store_before: store.clone(),
                    store_after: after.clone(),
                    delta,
                    events,
                    decision: TickDecision::Mp(choices),
                });
                agent = next;
                store = after;
            }
        }
    };
    let observable = (status == RunStatus::Success).then(|| project_observable(&store, &fv));
    Ok(Run {
        status,
        clock: ticks.len() as u32,
        ticks,
        final_agent: agent,
        final_store: store,
        observable,
        universe: u,
    })
}

/// Breadth-first exploration of all schedules up to `max_steps` ticks
/// and `state_budget` distinct states.
pub fn explore_mp(program: &Program, max_steps: u32, state_budget: usize) -> Exploration {
    let ctx = Env {
        decls: &program.decls,
        kind: program.kind,
    };
    let mut u = program.universe.clone();
    let fv = program.main.free_vars();
    let start_store = SoftConstraint::top(program.kind);
    let mut queue: VecDeque<(Agent, SoftConstraint, u32, DecisionLog)> = VecDeque::new();
    let mut visited: HashSet<String> = HashSet::new();
    let mut terminals: BTreeMap<(u8, String), Terminal> = BTreeMap::new();
    let mut truncated = false;
    visited.insert(canonical_key(&program.main, &start_store, &u));
    queue.push_back((program.main.clone(), start_store, 0, Vec::new()));
    while let Some((agent, store, depth, log)) = queue.pop_front() {
        if agent.is_success_shape() {
            record_terminal(&mut terminals, RunStatus::Success, &store, &u, depth, log, &fv);
            continue;
        }
        let variants = step_all(&ctx, &mut u, &agent, "", &store);
        if variants.is_empty() {
            record_terminal(&mut terminals, RunStatus::Suspended, &store, &u, depth, log, &fv);
            continue;
        }
        if depth >= max_steps {
            truncated = true;
            continue;
        }
        for v in variants {
            let next_store = store.combine(&v.delta);
            let key = canonical_key(&v.agent, &next_store, &u);
            if visited.contains(&key) {
                continue;
            }
            if visited.len() >= state_budget {
                truncated = true;
                continue;
            }
            visited.insert(key);
            let mut next_log = log.clone();
            next_log.push(TickDecision::Mp(v.choices));
            queue.push_back((v.agent, next_store, depth + 1, next_log));
        }
    }
    Exploration {
        terminals: terminals.into_values().collect(),
        truncated,
        states: visited.len(),
        universe: u,
    }
}
