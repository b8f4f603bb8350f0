//! Interleaving engine: one component acts per clock tick while the
//! others stutter, under the base system or its tau-saturated variant.

use std::collections::{BTreeMap, HashSet, VecDeque};

use crate::constraint::{SoftConstraint, Universe};
use crate::lang::ast::{Agent, Program, Threshold};

use super::{
    canonical_key, instantiate_call, join_path, project_observable, record_terminal,
    threshold_ok, DecisionLog, Env, Event, Exploration, Run, RunError, RunStatus, Scheduler,
    SchedulerState, Terminal, Tick, TickDecision,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Omega,
    Tau,
}

#[derive(Debug, Clone)]
pub(crate) struct Move {
    pub label: Label,
    pub agent: Agent,
    pub delta: SoftConstraint,
    pub events: Vec<Event>,
}

fn tell_rules(thr: &Threshold) -> (&'static str, &'static str) {
    match thr {
        Threshold::Value(_) => ("Q1", "Q1'"),
        Threshold::Constraint(_) => ("Q2", "Q2'"),
    }
}

fn ask_rule(thr: &Threshold) -> &'static str {
    match thr {
        Threshold::Value(_) => "Q3",
        Threshold::Constraint(_) => "Q4",
    }
}

struct AskpRules {
    fire: &'static str,
    fallback: &'static str,
    wait: &'static str,
    dec_tau: &'static str,
    expire: &'static str,
    expire_tau: &'static str,
}

fn askp_rules(thr: &Threshold) -> AskpRules {
    match thr {
        Threshold::Value(_) => AskpRules {
            fire: "Q10",
            fallback: "Q11",
            wait: "Q12",
            dec_tau: "Q13",
            expire: "Q14",
            expire_tau: "Q14'",
        },
        Threshold::Constraint(_) => AskpRules {
            fire: "Q15",
            fallback: "Q16",
            wait: "Q17",
            dec_tau: "Q18",
            expire: "Q19",
            expire_tau: "Q19'",
        },
    }
}

/// All transitions of an agent at the current store, in canonical
/// order; `prime` selects the tau-saturated system.
pub(crate) fn moves(
    ctx: &Env,
    u: &mut Universe,
    agent: &Agent,
    path: &str,
    store: &SoftConstraint,
    prime: bool,
) -> Vec<Move> {
    match agent {
        Agent::Success => {
            if prime {
                vec![Move {
                    label: Label::Tau,
                    agent: Agent::Success,
                    delta: SoftConstraint::top(ctx.kind),
                    events: vec![Event::at("Q0'", path)],
                }]
            } else {
                Vec::new()
            }
        }
        Agent::Tell {
            c,
            thr,
            delay,
            cont,
        } => {
            debug_assert_eq!(*delay, 0, "delays are removed by expansion");
            let (fire, stutter) = tell_rules(thr);
            let mut out = Vec::new();
            let grown = store.combine(&c.table);
            if threshold_ok(ctx.kind, thr, &grown) {
                out.push(Move {
                    label: Label::Omega,
                    agent: cont.as_ref().clone(),
                    delta: c.table.clone(),
                    events: vec![Event::telling(fire, path, c.label.clone())],
                });
            }
            if prime {
                out.push(Move {
                    label: Label::Tau,
                    agent: agent.clone(),
                    delta: SoftConstraint::top(ctx.kind),
                    events: vec![Event::at(stutter, path)],
                });
            }
            out
        }
        Agent::Sum(branches) => {
            let mut out = Vec::new();
            for (i, b) in branches.iter().enumerate() {
                debug_assert_eq!(b.delay, 0, "delays are removed by expansion");
                if store.entails(&b.c.table) && threshold_ok(ctx.kind, &b.thr, store) {
                    let at = if branches.len() > 1 {
                        join_path(path, &format!("b{i}"))
                    } else {
                        path.to_string()
                    };
                    out.push(Move {
                        label: Label::Omega,
                        agent: b.cont.clone(),
                        delta: SoftConstraint::top(ctx.kind),
                        events: vec![Event::at(ask_rule(&b.thr), &at)],
                    });
                }
            }
            if prime {
                out.push(Move {
                    label: Label::Tau,
                    agent: agent.clone(),
                    delta: SoftConstraint::top(ctx.kind),
                    events: vec![Event::at("Q7'", path)],
                });
            }
            out
        }
        Agent::Parallel(l, r) => {
            let lv = moves(ctx, u, l, &join_path(path, "0"), store, prime);
            let rv = moves(ctx, u, r, &join_path(path, "1"), store, prime);
            let pair = |acting: &Move, idle: &Move, left_first: (&Move, &Move)| -> Move {
                let mut events = vec![Event::at("Q5", path)];
                events.extend(left_first.0.events.iter().cloned());
                events.extend(left_first.1.events.iter().cloned());
                Move {
                    label: acting.label,
                    agent: Agent::Parallel(
                        Box::new(left_first.0.agent.clone()),
                        Box::new(left_first.1.agent.clone()),
                    ),
                    delta: acting.delta.combine(&idle.delta),
                    events,
                }
            };
            let l_taus: Vec<&Move> = lv.iter().filter(|m| m.label == Label::Tau).collect();
            let r_taus: Vec<&Move> = rv.iter().filter(|m| m.label == Label::Tau).collect();
            let mut out = Vec::new();
            for a in &lv {
                for b in &r_taus {
                    out.push(pair(a, b, (a, b)));
                }
            }
            for b in rv.iter().filter(|m| m.label == Label::Omega) {
                for a in &l_taus {
                    out.push(pair(b, a, (a, b)));
                }
            }
            if !prime {
                if r_taus.is_empty() {
                    for a in &lv {
                        let mut events = vec![Event::at("Q6", path)];
                        events.extend(a.events.iter().cloned());
                        out.push(Move {
                            label: a.label,
                            agent: Agent::Parallel(
                                Box::new(a.agent.clone()),
                                Box::new(r.as_ref().clone()),
                            ),
                            delta: a.delta.clone(),
                            events,
                        });
                    }
                }
                if l_taus.is_empty() {
                    for b in &rv {
                        let mut events = vec![Event::at("Q6", path)];
                        events.extend(b.events.iter().cloned());
                        out.push(Move {
                            label: b.label,
                            agent: Agent::Parallel(
                                Box::new(l.as_ref().clone()),
                                Box::new(b.agent.clone()),
                            ),
                            delta: b.delta.clone(),
                            events,
                        });
                    }
                }
            }
            out
        }
        Agent::Exists { var, body } => {
            let fresh = u.fresh_like(*var);
            let renamed = body.rename_var(u, *var, fresh);
            moves(ctx, u, &renamed, path, store, prime)
                .into_iter()
                .map(|mut m| {
                    let mut events = vec![Event::at("Q9", path)];
                    events.append(&mut m.events);
                    m.events = events;
                    m
                })
                .collect()
        }
        Agent::Call { name, actuals } => {
            let decl = ctx.decl(name).clone();
            let body = instantiate_call(u, &decl, actuals);
            let mut out = vec![Move {
                label: Label::Omega,
                agent: body.clone(),
                delta: SoftConstraint::top(ctx.kind),
                events: vec![Event::at("Q8", path)],
            }];
            if prime {
                out.push(Move {
                    label: Label::Tau,
                    agent: body,
                    delta: SoftConstraint::top(ctx.kind),
                    events: vec![Event::at("Q8'", path)],
                });
            }
            out
        }
        Agent::Askp {
            t,
            c,
            thr,
            then,
            els,
        } => {
            let rules = askp_rules(thr);
            let top = SoftConstraint::top(ctx.kind);
            if *t == 0 {
                let mut out = vec![Move {
                    label: Label::Omega,
                    agent: els.as_ref().clone(),
                    delta: top.clone(),
                    events: vec![Event::at(rules.expire, path)],
                }];
                if prime {
                    out.push(Move {
                        label: Label::Tau,
                        agent: agent.clone(),
                        delta: top,
                        events: vec![Event::at(rules.expire_tau, path)],
                    });
                }
                return out;
            }
            let ok = threshold_ok(ctx.kind, thr, store);
            let decremented = Agent::Askp {
                t: t - 1,
                c: c.clone(),
                thr: thr.clone(),
                then: then.clone(),
                els: els.clone(),
            };
            let (rule, next) = if !ok {
                (rules.fallback, els.as_ref().clone())
            } else if store.entails(&c.table) {
                (rules.fire, then.as_ref().clone())
            } else {
                (rules.wait, decremented.clone())
            };
            vec![
                Move {
                    label: Label::Omega,
                    agent: next,
                    delta: top.clone(),
                    events: vec![Event::at(rule, path)],
                },
                Move {
                    label: Label::Tau,
                    agent: decremented,
                    delta: top,
                    events: vec![Event::at(rules.dec_tau, path)],
                },
            ]
        }
        Agent::Now { .. } | Agent::Timeout { .. } | Agent::Watchdog { .. } => {
            unreachable!("dialect checks precede runs")
        }
    }
}

/// Runs an interleaving program along visible transitions only.
pub fn run_il(
    program: &Program,
    scheduler: Scheduler,
    max_steps: u32,
    prime: bool,
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
        let visible: Vec<Move> = moves(&ctx, &mut u, &agent, "", &store, prime)
            .into_iter()
            .filter(|m| m.label == Label::Omega)
            .collect();
        if visible.is_empty() {
            break RunStatus::Suspended;
        }
        let mut chooser = sched.tick(index)?;
        let ix = chooser.choose_move(index, visible.len())?;
        let m = visible.into_iter().nth(ix).unwrap();
        let after = store.combine(&m.delta);
        ticks.push(Tick {
            index,
            store_before: store.clone(),
            store_after: after.clone(),
            delta: m.delta,
            events: m.events,
            decision: TickDecision::Il(ix),
        });
        agent = m.agent;
        store = after;
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

/// Breadth-first exploration of all visible-transition schedules.
pub fn explore_il(
    program: &Program,
    max_steps: u32,
    state_budget: usize,
    prime: bool,
) -> Exploration {
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
        let visible: Vec<Move> = moves(&ctx, &mut u, &agent, "", &store, prime)
            .into_iter()
            .filter(|m| m.label == Label::Omega)
            .collect();
        if visible.is_empty() {
            record_terminal(&mut terminals, RunStatus::Suspended, &store, &u, depth, log, &fv);
            continue;
        }
        if depth >= max_steps {
            truncated = true;
            continue;
        }
        for (ix, m) in visible.into_iter().enumerate() {
            let next_store = store.combine(&m.delta);
            let key = canonical_key(&m.agent, &next_store, &u);
            if visited.contains(&key) {
                continue;
            }
            if visited.len() >= state_budget {
                truncated = true;
                continue;
            }
            visited.insert(key);
            let mut next_log = log.clone();
            next_log.push(TickDecision::Il(ix));
            queue.push_back((m.agent, next_store, depth + 1, next_log));
        }
    }
    Exploration {
        terminals: terminals.into_values().collect(),
        truncated,
        states: visited.len(),
        universe: u,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::decision_log;
    use crate::lang::expand::expand_program;
    use crate::lang::parser::parse_program;

    const SLICE: &str = "\
dialect tsccp-i
semiring weighted
var x in {0, 1, 2, 3}
constraint c1 on (x) { (0) -> 3 (1) -> 4 (2) -> 5 (3) -> 6 }
constraint c2 on (x) { (0) -> 5 (1) -> 6 (2) -> 7 (3) -> 8 }
constraint c3 on (x) { (0) -> 8 (1) -> 10 (2) -> 12 (3) -> 14 }
";

    const THREE_AGENTS: &str = "\
main: (askp(5, c3)[inf] ? tell(c1) ->[inf] success : success) \
|| tell(c1) ->[inf] success \
|| tell(c2) ->[inf] success";

    fn prog(main: &str) -> Program {
        let src = format!("{SLICE}{main}");
        expand_program(&parse_program(&src).unwrap()).unwrap()
    }

    fn rows(t: &Tick) -> Vec<(&'static str, &str)> {
        t.events.iter().map(|e| (e.rule, e.path.as_str())).collect()
    }

    fn full_store(p: &Program) -> SoftConstraint {
        let c1 = &p.constraint("c1").unwrap().table;
        let c2 = &p.constraint("c2").unwrap().table;
        c1.combine(c2).combine(c1)
    }

    #[test]
    fn a_guarded_agent_waits_for_its_peers_to_combine() {
        let p = prog(THREE_AGENTS);
        let run = run_il(&p, Scheduler::Priority, 32, false, None).unwrap();
        assert_eq!(run.status, RunStatus::Success);
        assert_eq!(run.clock, 4);
        let expect: Vec<Vec<(&str, &str)>> = vec![
            vec![("Q5", ""), ("Q13", "0"), ("Q6", "1"), ("Q1", "1.0")],
            vec![("Q5", ""), ("Q13", "0"), ("Q6", "1"), ("Q1", "1.1")],
            vec![("Q6", ""), ("Q10", "0")],
            vec![("Q6", ""), ("Q1", "0")],
        ];
        for (t, want) in run.ticks.iter().zip(&expect) {
            assert_eq!(&rows(t), want, "tick {}", t.index);
        }
        assert_eq!(run.final_store, full_store(&p));
    }

    #[test]
    fn the_opposite_teller_order_reaches_the_same_store() {
        let p = prog(THREE_AGENTS);
        let log = vec![
            TickDecision::Il(1),
            TickDecision::Il(0),
            TickDecision::Il(0),
            TickDecision::Il(0),
        ];
        let run = run_il(&p, Scheduler::Replay(log), 32, false, None).unwrap();
        assert_eq!(run.status, RunStatus::Success);
        assert_eq!(run.clock, 4);
        assert_eq!(
            rows(&run.ticks[0]),
            vec![("Q5", ""), ("Q13", "0"), ("Q6", "1"), ("Q1", "1.1")]
        );
        assert_eq!(run.final_store, full_store(&p));
    }

    #[test]
    fn exploration_finds_the_patient_and_starved_outcomes() {
        let p = prog(THREE_AGENTS);
        let ex = explore_il(&p, 12, 50_000, false);
        assert!(!ex.truncated);
        let success: Vec<&Terminal> = ex
            .terminals
            .iter()
            .filter(|t| t.status == RunStatus::Success)
            .collect();
        assert_eq!(success.len(), 2);
        assert_eq!(
            ex.terminals.len(),
            success.len(),
            "every schedule ends in success"
        );
        let c3 = &p.constraint("c3").unwrap().table;
        let patient = success
            .iter()
            .find(|t| t.store == full_store(&p))
            .expect("the guarded path");
        assert_eq!(patient.clock, 4);
        let starved = success
            .iter()
            .find(|t| &t.store == c3)
            .expect("the expiry path");
        assert!(starved.clock > 4);
        for t in &success {
            let replayed =
                run_il(&p, Scheduler::Replay(t.witness.clone()), 32, false, None).unwrap();
            assert_eq!(replayed.status, RunStatus::Success);
            assert_eq!(replayed.final_store, t.store);
            assert_eq!(replayed.clock, t.clock);
        }
    }

    #[test]
    fn the_saturated_system_preserves_the_observables() {
        let p = prog(THREE_AGENTS);
        let base = explore_il(&p, 12, 50_000, false);
        let saturated = explore_il(&p, 12, 50_000, true);
        assert!(!saturated.truncated);
        assert_eq!(base.success_keys(), saturated.success_keys());
        let run = run_il(&p, Scheduler::Priority, 32, true, None).unwrap();
        assert_eq!(run.status, RunStatus::Success);
        assert_eq!(run.ticks[0].events[1].rule, "Q12");
    }

    #[test]
    fn solo_rules_need_a_stutter_free_sibling() {
        let p = prog(
            "main: (askp(2, c1)[inf] ? success : success) || tell(c1) ->[inf] success",
        );
        let ctx = Env {
            decls: &p.decls,
            kind: p.kind,
        };
        let mut u = p.universe.clone();
        let store = SoftConstraint::top(p.kind);
        let all = moves(&ctx, &mut u, &p.main, "", &store, false);
        assert_eq!(all.len(), 3);
        let q6_paths: Vec<&str> = all
            .iter()
            .filter(|m| m.events[0].rule == "Q6")
            .map(|m| m.events[1].path.as_str())
            .collect();
        assert_eq!(q6_paths, vec!["0", "0"]);
        for m in &all {
            if m.label == Label::Tau {
                assert!(m.delta.is_top(), "stutters leave the store unchanged");
            }
        }
        let visible: Vec<&Move> = all.iter().filter(|m| m.label == Label::Omega).collect();
        assert_eq!(visible.len(), 2);
    }

    #[test]
    fn a_timer_counts_down_one_per_tick() {
        let p = prog("main: askp(2, c2)[inf] ? success : success");
        for prime in [false, true] {
            let run = run_il(&p, Scheduler::Priority, 8, prime, None).unwrap();
            assert_eq!(run.status, RunStatus::Success);
            assert_eq!(run.clock, 3);
            assert_eq!(rows(&run.ticks[0]), vec![("Q12", "")]);
            assert_eq!(rows(&run.ticks[1]), vec![("Q12", "")]);
            assert_eq!(rows(&run.ticks[2]), vec![("Q14", "")]);
        }
    }

    #[test]
    fn a_threshold_failure_takes_the_fallback_branch() {
        let p = prog("main: askp(3, c1)[7] ? success : tell(c2) ->[inf] success");
        let run = run_il(&p, Scheduler::Priority, 8, false, Some(
            p.constraint("c3").unwrap().table.clone(),
        ))
        .unwrap();
        assert_eq!(run.status, RunStatus::Success);
        assert_eq!(rows(&run.ticks[0]), vec![("Q11", "")]);
        let c2 = &p.constraint("c2").unwrap().table;
        let c3 = &p.constraint("c3").unwrap().table;
        assert_eq!(run.final_store, c3.combine(c2));
    }

    #[test]
    fn replaying_a_seeded_interleaving_reproduces_it() {
        let p = prog(THREE_AGENTS);
        let seeded = run_il(&p, Scheduler::Seeded(11), 32, false, None).unwrap();
        assert_eq!(seeded.status, RunStatus::Success);
        let log = decision_log(&seeded);
        let replayed = run_il(&p, Scheduler::Replay(log), 32, false, None).unwrap();
        assert_eq!(replayed.clock, seeded.clock);
        for (a, b) in seeded.ticks.iter().zip(&replayed.ticks) {
            assert_eq!(a.events, b.events);
            assert_eq!(a.store_after, b.store_after);
        }
    }
}
