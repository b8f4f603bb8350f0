//! Idiom expansion: delayed prefixes, `timeout` and `do/watching`
//! rewrite into the core agent language.
//!
//! Wrapping a procedure call produces a guarded companion declaration
//! named `p@watchN`; the name is reserved before the body is built, so
//! recursive and mutually recursive procedures expand to finitely many
//! declarations.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::constraint::Universe;
use crate::lang::ast::{Agent, AskBranch, CRef, ProcDecl, Program, Threshold};
use crate::semiring::SemiringKind;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExpandError {
    #[error("the watched constraint mentions `{var}`, which is hidden inside the watched body")]
    HiddenSignal { var: String },
    #[error("the watchdog else-agent mentions `{var}`, which is hidden inside the watched body")]
    HiddenElse { var: String },
}

/// Rewrites every idiom in declaration bodies and the main agent,
/// appending the declarations watchdog wrapping generates.
pub fn expand_program(p: &Program) -> Result<Program, ExpandError> {
    let mut ctx = Ctx {
        u: &p.universe,
        kind: p.kind,
        expanded: HashMap::new(),
        generated: Vec::new(),
        memo: HashMap::new(),
        counters: HashMap::new(),
        pending: VecDeque::new(),
    };
    for d in &p.decls {
        let body = expand_agent(&d.body, &mut ctx)?;
        ctx.expanded.insert(d.name.clone(), body);
    }
    let main = expand_agent(&p.main, &mut ctx)?;
    while let Some(item) = ctx.pending.pop_front() {
        let base = ctx
            .expanded
            .get(&item.target)
            .cloned()
            .or_else(|| {
                ctx.generated
                    .iter()
                    .find(|d| d.name == item.target)
                    .map(|d| d.body.clone())
            })
            .expect("watchdog targets expand before their guards");
        let body = wrap(&base, &item.c, &item.thr, &item.els, &mut ctx)?;
        let formals = p
            .decl(&item.target)
            .map(|d| d.formals.clone())
            .or_else(|| {
                ctx.generated
                    .iter()
                    .find(|d| d.name == item.target)
                    .map(|d| d.formals.clone())
            })
            .expect("watchdog targets are declared");
        ctx.generated.push(ProcDecl {
            name: item.name,
            formals,
            body,
        });
    }
    let mut decls: Vec<ProcDecl> = p
        .decls
        .iter()
        .map(|d| ProcDecl {
            name: d.name.clone(),
            formals: d.formals.clone(),
            body: ctx.expanded.remove(&d.name).expect("every declaration expands"),
        })
        .collect();
    decls.extend(ctx.generated);
    Ok(Program {
        dialect: p.dialect,
        kind: p.kind,
        universe: p.universe.clone(),
        constraints: p.constraints.clone(),
        decls,
        main,
    })
}

struct Pending {
    name: String,
    target: String,
    c: CRef,
    thr: Threshold,
    els: Option<Agent>,
}

struct Ctx<'a> {
    u: &'a Universe,
    kind: SemiringKind,
    expanded: HashMap<String, Agent>,
    generated: Vec<ProcDecl>,
    memo: HashMap<(String, CRef, Threshold, Option<Agent>), String>,
    counters: HashMap<String, u32>,
    pending: VecDeque<Pending>,
}

impl Ctx<'_> {
    /// The guarded companion of `target` for this watchdog context,
    /// reserving a name and queueing its declaration on first use.
    fn watch_name(&mut self, target: &str, c: &CRef, thr: &Threshold, els: &Option<Agent>) -> String {
        let key = (target.to_string(), c.clone(), thr.clone(), els.clone());
        if let Some(name) = self.memo.get(&key) {
            return name.clone();
        }
        let n = self.counters.entry(target.to_string()).or_insert(0);
        *n += 1;
        let name = format!("{target}@watch{n}");
        self.memo.insert(key, name.clone());
        self.pending.push_back(Pending {
            name: name.clone(),
            target: target.to_string(),
            c: c.clone(),
            thr: thr.clone(),
            els: els.clone(),
        });
        name
    }
}

/// `delay` padding tells between a prefix and its continuation, each
/// with the never-blocking threshold of the base arrow's family.
fn pad(delay: u32, base_thr: &Threshold, cont: Agent, ctx: &Ctx) -> Agent {
    let zero = base_thr.zero_of_family(ctx.kind);
    let mut at = cont;
    for _ in 0..delay {
        at = Agent::Tell {
            c: CRef::top(ctx.kind),
            thr: zero.clone(),
            delay: 0,
            cont: Box::new(at),
        };
    }
    at
}

fn expand_branches(branches: &[AskBranch], ctx: &mut Ctx) -> Result<Vec<AskBranch>, ExpandError> {
    branches
        .iter()
        .map(|b| {
            let cont = expand_agent(&b.cont, ctx)?;
            Ok(AskBranch {
                c: b.c.clone(),
                thr: b.thr.clone(),
                delay: 0,
                cont: pad(b.delay, &b.thr, cont, ctx),
            })
        })
        .collect()
}

fn expand_agent(a: &Agent, ctx: &mut Ctx) -> Result<Agent, ExpandError> {
    match a {
        Agent::Success => Ok(Agent::Success),
        Agent::Call { name, actuals } => Ok(Agent::Call {
            name: name.clone(),
            actuals: actuals.clone(),
        }),
        Agent::Tell {
            c,
            thr,
            delay,
            cont,
        } => {
            let cont = expand_agent(cont, ctx)?;
            Ok(Agent::Tell {
                c: c.clone(),
                thr: thr.clone(),
                delay: 0,
                cont: Box::new(pad(*delay, thr, cont, ctx)),
            })
        }
        Agent::Sum(branches) => Ok(Agent::Sum(expand_branches(branches, ctx)?)),
        Agent::Parallel(l, r) => Ok(Agent::Parallel(
            Box::new(expand_agent(l, ctx)?),
            Box::new(expand_agent(r, ctx)?),
        )),
        Agent::Exists { var, body } => Ok(Agent::Exists {
            var: *var,
            body: Box::new(expand_agent(body, ctx)?),
        }),
        Agent::Now { c, thr, then, els } => Ok(Agent::Now {
            c: c.clone(),
            thr: thr.clone(),
            then: Box::new(expand_agent(then, ctx)?),
            els: Box::new(expand_agent(els, ctx)?),
        }),
        Agent::Askp {
            t,
            c,
            thr,
            then,
            els,
        } => Ok(Agent::Askp {
            t: *t,
            c: c.clone(),
            thr: thr.clone(),
            then: Box::new(expand_agent(then, ctx)?),
            els: Box::new(expand_agent(els, ctx)?),
        }),
        Agent::Timeout { branches, m, els } => {
            let branches = expand_branches(branches, ctx)?;
            let els = expand_agent(els, ctx)?;
            let sum = Agent::Sum(branches.clone());
            let mut inner = els;
            for _ in 0..=*m {
                let mut chain = Agent::ask(
                    CRef::top(ctx.kind),
                    Threshold::plain(ctx.kind),
                    inner,
                );
                for b in branches.iter().rev() {
                    chain = Agent::Now {
                        c: b.c.clone(),
                        thr: b.thr.clone(),
                        then: Box::new(sum.clone()),
                        els: Box::new(chain),
                    };
                }
                inner = chain;
            }
            Ok(inner)
        }
        Agent::Watchdog { body, c, thr, els } => {
            let body = expand_agent(body, ctx)?;
            let els = match els {
                Some(e) => Some(expand_agent(e, ctx)?),
                None => None,
            };
            wrap(&body, c, thr, &els, ctx)
        }
    }
}

/// One watchdog rewriting layer over an already-expanded body.
fn wrap(
    a: &Agent,
    c: &CRef,
    thr: &Threshold,
    els: &Option<Agent>,
    ctx: &mut Ctx,
) -> Result<Agent, ExpandError> {
    let guard = |inner: Agent| Agent::Now {
        c: c.clone(),
        thr: thr.clone(),
        then: Box::new(els.clone().unwrap_or(Agent::Success)),
        els: Box::new(inner),
    };
    match a {
        Agent::Success => Ok(match els {
            None => Agent::Success,
            Some(_) => guard(Agent::Success),
        }),
        Agent::Tell {
            c: d,
            thr: t,
            delay,
            cont,
        } => {
            debug_assert_eq!(*delay, 0);
            Ok(guard(Agent::Tell {
                c: d.clone(),
                thr: t.clone(),
                delay: 0,
                cont: Box::new(wrap(cont, c, thr, els, ctx)?),
            }))
        }
        Agent::Sum(branches) => {
            let wrapped = branches
                .iter()
                .map(|b| {
                    Ok(AskBranch {
                        c: b.c.clone(),
                        thr: b.thr.clone(),
                        delay: 0,
                        cont: wrap(&b.cont, c, thr, els, ctx)?,
                    })
                })
                .collect::<Result<Vec<_>, ExpandError>>()?;
            Ok(guard(Agent::Sum(wrapped)))
        }
        Agent::Parallel(l, r) => Ok(Agent::Parallel(
            Box::new(wrap(l, c, thr, els, ctx)?),
            Box::new(wrap(r, c, thr, els, ctx)?),
        )),
        Agent::Now {
            c: d,
            thr: t,
            then,
            els: e,
        } => Ok(Agent::Now {
            c: d.clone(),
            thr: t.clone(),
            then: Box::new(wrap(then, c, thr, els, ctx)?),
            els: Box::new(wrap(e, c, thr, els, ctx)?),
        }),
        Agent::Exists { var, body } => {
            if c.table.support().contains(var) {
                return Err(ExpandError::HiddenSignal {
                    var: ctx.u.var_name(*var).to_string(),
                });
            }
            if let Some(e) = els {
                if e.free_vars().contains(var) {
                    return Err(ExpandError::HiddenElse {
                        var: ctx.u.var_name(*var).to_string(),
                    });
                }
            }
            Ok(Agent::Exists {
                var: *var,
                body: Box::new(wrap(body, c, thr, els, ctx)?),
            })
        }
        Agent::Call { name, actuals } => {
            let gen = ctx.watch_name(name, c, thr, els);
            Ok(guard(Agent::Call {
                name: gen,
                actuals: actuals.clone(),
            }))
        }
        Agent::Askp { .. } | Agent::Timeout { .. } | Agent::Watchdog { .. } => {
            unreachable!("watchdog bodies are expanded before wrapping")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse_program;
    use crate::lang::printer::{pretty_agent, pretty_program};

    const HEADER: &str = "\
dialect tsccp
semiring weighted
var x in {0, 1, 2, 3}
constraint c1 on (x) { (0) -> 3 (1) -> 4 (2) -> 5 (3) -> 6 }
constraint c2 on (x) { (0) -> 5 (1) -> 6 (2) -> 7 (3) -> 8 }
constraint c3 on (x) { (0) -> 8 (1) -> 10 (2) -> 12 (3) -> 14 }
";

    fn expand_main(main: &str) -> (Program, String) {
        let p = parse_program(&format!("{HEADER}main: {main}")).unwrap();
        let q = expand_program(&p).unwrap();
        let printed = pretty_agent(&q.main, &q.universe);
        (q, printed)
    }

    #[test]
    fn delay_pads_with_top_tells() {
        let (_, printed) = expand_main("tell(c1) -2->[9] success");
        assert_eq!(
            printed,
            "tell(c1) ->[9] tell(top) ->[inf] tell(top) ->[inf] success"
        );
        let (_, phi) = expand_main("tell(c1) -2-> success");
        assert_eq!(phi, "tell(c1) -> tell(top) -> tell(top)");
        let (_, ask) = expand_main("ask(c1) -1->[9] success");
        assert_eq!(ask, "ask(c1) ->[9] tell(top) ->[inf] success");
    }

    #[test]
    fn timeout_expands_to_now_cascades() {
        let (_, printed) = expand_main(
            "timeout(1) { ask(c1) ->[inf] success + ask(c2) ->[inf] success } else ask(c1) ->[inf] success",
        );
        let sum = "(ask(c1) ->[inf] success + ask(c2) ->[inf] success)";
        let layer0 = format!(
            "now[inf] c1 then {sum} else now[inf] c2 then {sum} else ask(top) -> ask(c1) ->[inf] success"
        );
        let layer1 = format!(
            "now[inf] c1 then {sum} else now[inf] c2 then {sum} else ask(top) -> {layer0}"
        );
        assert_eq!(printed, layer1);
    }

    #[test]
    fn watchdog_rewrites_tell_chains() {
        let (_, printed) = expand_main(
            "do tell(c1) ->[inf] ask(c3) ->[inf] success watching[inf] (c2) else tell(c3) ->[inf] success",
        );
        let b = "tell(c3) ->[inf] success";
        assert_eq!(
            printed,
            format!(
                "now[inf] c2 then {b} else tell(c1) ->[inf] now[inf] c2 then {b} else \
                 ask(c3) ->[inf] now[inf] c2 then {b} else success"
            )
        );
    }

    #[test]
    fn watchdog_without_else_leaves_success_inert() {
        let (_, printed) = expand_main("do tell(c1) -> tell(c2) watching (c3)");
        assert_eq!(printed, "now c3 else tell(c1) -> now c3 else tell(c2)");
    }

    #[test]
    fn watchdog_distributes_over_parallel_and_now() {
        let (_, printed) =
            expand_main("do (tell(c1) || now c1 then tell(c2) else success) watching (c3)");
        assert_eq!(
            printed,
            "now c3 else tell(c1) || now c1 then now c3 else tell(c2) else success"
        );
    }

    #[test]
    fn watchdog_wraps_calls_with_generated_decls() {
        let src = format!(
            "{HEADER}proc loop(x) :: tell(c1) -> loop(x)\nmain: do loop(x) watching (c2) else tell(c3)"
        );
        let p = parse_program(&src).unwrap();
        let q = expand_program(&p).unwrap();
        assert_eq!(
            pretty_agent(&q.main, &q.universe),
            "now c2 then tell(c3) else loop@watch1(x)"
        );
        let gen = q.decl("loop@watch1").expect("generated declaration");
        assert_eq!(gen.formals, p.decl("loop").unwrap().formals);
        assert_eq!(
            pretty_agent(&gen.body, &q.universe),
            "now c2 then tell(c3) else tell(c1) -> now c2 then tell(c3) else loop@watch1(x)"
        );
        assert_eq!(q.decls.len(), 2);
    }

    #[test]
    fn watchdog_memo_covers_mutual_recursion() {
        let src = format!(
            "{HEADER}proc ping(x) :: tell(c1) -> pong(x)\nproc pong(x) :: tell(c2) -> ping(x)\nmain: do ping(x) watching (c3)"
        );
        let p = parse_program(&src).unwrap();
        let q = expand_program(&p).unwrap();
        let names: Vec<&str> = q.decls.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, vec!["ping", "pong", "ping@watch1", "pong@watch1"]);
        assert_eq!(
            pretty_agent(&q.decl("pong@watch1").unwrap().body, &q.universe),
            "now c3 else tell(c2) -> now c3 else ping@watch1(x)"
        );
    }

    #[test]
    fn hidden_signal_is_rejected() {
        let p = parse_program(&format!(
            "{HEADER}main: do exists x. tell(c1) watching (c2)"
        ))
        .unwrap();
        let err = expand_program(&p).unwrap_err();
        assert_eq!(err, ExpandError::HiddenSignal { var: "x".into() });
    }

    #[test]
    fn hidden_else_is_rejected() {
        let p = parse_program(&format!(
            "{HEADER}main: do exists x. tell(top) watching (top) else tell(c1)"
        ))
        .unwrap();
        let err = expand_program(&p).unwrap_err();
        assert_eq!(err, ExpandError::HiddenElse { var: "x".into() });
    }

    #[test]
    fn expansion_is_idempotent() {
        let src = format!(
            "{HEADER}proc loop(x) :: tell(c1) -> loop(x)\nmain: timeout(1) {{ ask(c1) ->[inf] success }} else do loop(x) watching (c2)"
        );
        let p = parse_program(&src).unwrap();
        let once = expand_program(&p).unwrap();
        let twice = expand_program(&once).unwrap();
        assert_eq!(pretty_program(&once), pretty_program(&twice));
        assert_eq!(once, twice);
    }

    #[test]
    fn expansion_preserves_free_variables() {
        let p = parse_program(&format!(
            "{HEADER}main: do tell(c1) -1-> tell(c2) watching (c3) || timeout(0) {{ ask(c2) -> success }} else tell(c1)"
        ))
        .unwrap();
        let q = expand_program(&p).unwrap();
        assert_eq!(p.main.free_vars(), q.main.free_vars());
    }
}
