//! Abstract syntax for programs: header declarations plus the agent
//! language, with surface idioms kept as explicit nodes until
//! [`crate::lang::expand`] rewrites them away.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::constraint::{SoftConstraint, Universe, VarId};
use crate::semiring::{Grade, SemiringKind};

/// A program mixing constructs across dialects, or run under the wrong
/// semantics.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DialectError {
    #[error("`{construct}` is not available in dialect {dialect}")]
    ForeignConstruct {
        construct: &'static str,
        dialect: Dialect,
    },
    #[error("program dialect {declared} does not match the requested semantics {requested}")]
    Mismatch { declared: Dialect, requested: Dialect },
}

/// Which interpreter a program is written for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dialect {
    /// Maximal parallelism (`tsccp`).
    Mp,
    /// Interleaving with timed guards (`tsccp-i`).
    Il,
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dialect::Mp => write!(f, "tsccp"),
            Dialect::Il => write!(f, "tsccp-i"),
        }
    }
}

/// How a constraint occurrence was written down; the table alongside it
/// is what the semantics uses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CLabel {
    Named(String),
    Top,
    Bot,
    Diag(String, String),
    Renamed {
        base: Box<CLabel>,
        from: String,
        to: String,
    },
}

impl fmt::Display for CLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CLabel::Named(n) => write!(f, "{n}"),
            CLabel::Top => write!(f, "top"),
            CLabel::Bot => write!(f, "bot"),
            CLabel::Diag(x, y) => write!(f, "diag({x},{y})"),
            CLabel::Renamed { base, from, to } => write!(f, "{base}[{from}:={to}]"),
        }
    }
}

/// A constraint occurrence: display label plus its table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CRef {
    pub label: CLabel,
    pub table: SoftConstraint,
}

impl CRef {
    pub fn named(name: &str, table: SoftConstraint) -> Self {
        CRef {
            label: CLabel::Named(name.to_string()),
            table,
        }
    }

    pub fn top(kind: SemiringKind) -> Self {
        CRef {
            label: CLabel::Top,
            table: SoftConstraint::top(kind),
        }
    }

    pub fn bot(kind: SemiringKind) -> Self {
        CRef {
            label: CLabel::Bot,
            table: SoftConstraint::bot(kind),
        }
    }

    /// Renames a variable in the table, recording the rename in the
    /// label when it actually touches the support.
    pub fn rename_var(&self, u: &Universe, from: VarId, to: VarId) -> Self {
        if !self.table.support().contains(&from) {
            return self.clone();
        }
        CRef {
            label: CLabel::Renamed {
                base: Box::new(self.label.clone()),
                from: u.var_name(from).to_string(),
                to: u.var_name(to).to_string(),
            },
            table: self.table.rename_var(u, from, to),
        }
    }
}

/// A cut level on ask/tell/now guards: either a grade bound on the
/// consistency level or a constraint the store must not lie strictly
/// below.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Threshold {
    Value(Grade),
    Constraint(CRef),
}

impl Threshold {
    /// The unconstraining threshold written as a bare arrow.
    pub fn plain(kind: SemiringKind) -> Self {
        Threshold::Constraint(CRef::bot(kind))
    }

    pub fn is_plain(&self) -> bool {
        matches!(
            self,
            Threshold::Constraint(CRef {
                label: CLabel::Bot,
                ..
            })
        )
    }

    /// The never-blocking threshold in the same family as `self`.
    pub fn zero_of_family(&self, kind: SemiringKind) -> Self {
        match self {
            Threshold::Value(_) => Threshold::Value(kind.zero()),
            Threshold::Constraint(_) => Threshold::plain(kind),
        }
    }

    fn rename_var(&self, u: &Universe, from: VarId, to: VarId) -> Self {
        match self {
            Threshold::Value(g) => Threshold::Value(g.clone()),
            Threshold::Constraint(c) => Threshold::Constraint(c.rename_var(u, from, to)),
        }
    }

    fn collect_vars(&self, acc: &mut BTreeSet<VarId>) {
        if let Threshold::Constraint(c) = self {
            acc.extend(c.table.support().iter().copied());
        }
    }
}

/// One guarded branch of a sum: `ask(c) ->thr cont`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AskBranch {
    pub c: CRef,
    pub thr: Threshold,
    pub delay: u32,
    pub cont: Agent,
}

/// The agent language. `Timeout` and `Watchdog` are surface idioms and
/// `delay` fields above zero mark delayed prefixes; all three disappear
/// under expansion.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Agent {
    Success,
    Tell {
        c: CRef,
        thr: Threshold,
        delay: u32,
        cont: Box<Agent>,
    },
    Sum(Vec<AskBranch>),
    Parallel(Box<Agent>, Box<Agent>),
    Exists {
        var: VarId,
        body: Box<Agent>,
    },
    Call {
        name: String,
        actuals: Vec<VarId>,
    },
    Now {
        c: CRef,
        thr: Threshold,
        then: Box<Agent>,
        els: Box<Agent>,
    },
    Askp {
        t: u32,
        c: CRef,
        thr: Threshold,
        then: Box<Agent>,
        els: Box<Agent>,
    },
    Timeout {
        branches: Vec<AskBranch>,
        m: u32,
        els: Box<Agent>,
    },
    Watchdog {
        body: Box<Agent>,
        c: CRef,
        thr: Threshold,
        els: Option<Box<Agent>>,
    },
}

impl Agent {
    pub fn ask(c: CRef, thr: Threshold, cont: Agent) -> Agent {
        Agent::Sum(vec![AskBranch {
            c,
            thr,
            delay: 0,
            cont,
        }])
    }

    pub fn tell(c: CRef, thr: Threshold, cont: Agent) -> Agent {
        Agent::Tell {
            c,
            thr,
            delay: 0,
            cont: Box::new(cont),
        }
    }

    /// An agent that can only repeat success: `success` or a parallel
    /// composition of such agents.
    pub fn is_success_shape(&self) -> bool {
        match self {
            Agent::Success => true,
            Agent::Parallel(l, r) => l.is_success_shape() && r.is_success_shape(),
            _ => false,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<VarId> {
        let mut acc = BTreeSet::new();
        self.collect_free(&mut acc, &mut Vec::new());
        acc
    }

    fn collect_free(&self, acc: &mut BTreeSet<VarId>, bound: &mut Vec<VarId>) {
        let c_vars = |c: &CRef, acc: &mut BTreeSet<VarId>, bound: &[VarId]| {
            for v in c.table.support() {
                if !bound.contains(v) {
                    acc.insert(*v);
                }
            }
        };
        match self {
            Agent::Success => {}
            Agent::Tell { c, thr, cont, .. } => {
                c_vars(c, acc, bound);
                let mut t = BTreeSet::new();
                thr.collect_vars(&mut t);
                acc.extend(t.into_iter().filter(|v| !bound.contains(v)));
                cont.collect_free(acc, bound);
            }
            Agent::Sum(branches) => {
                for b in branches {
                    c_vars(&b.c, acc, bound);
                    let mut t = BTreeSet::new();
                    b.thr.collect_vars(&mut t);
                    acc.extend(t.into_iter().filter(|v| !bound.contains(v)));
                    b.cont.collect_free(acc, bound);
                }
            }
            Agent::Parallel(l, r) => {
                l.collect_free(acc, bound);
                r.collect_free(acc, bound);
            }
            Agent::Exists { var, body } => {
                bound.push(*var);
                body.collect_free(acc, bound);
                bound.pop();
            }
            Agent::Call { actuals, .. } => {
                acc.extend(actuals.iter().filter(|v| !bound.contains(v)));
            }
            Agent::Now { c, thr, then, els } => {
                c_vars(c, acc, bound);
                let mut t = BTreeSet::new();
                thr.collect_vars(&mut t);
                acc.extend(t.into_iter().filter(|v| !bound.contains(v)));
                then.collect_free(acc, bound);
                els.collect_free(acc, bound);
            }
            Agent::Askp {
                c, thr, then, els, ..
            } => {
                c_vars(c, acc, bound);
                let mut t = BTreeSet::new();
                thr.collect_vars(&mut t);
                acc.extend(t.into_iter().filter(|v| !bound.contains(v)));
                then.collect_free(acc, bound);
                els.collect_free(acc, bound);
            }
            Agent::Timeout { branches, els, .. } => {
                for b in branches {
                    c_vars(&b.c, acc, bound);
                    let mut t = BTreeSet::new();
                    b.thr.collect_vars(&mut t);
                    acc.extend(t.into_iter().filter(|v| !bound.contains(v)));
                    b.cont.collect_free(acc, bound);
                }
                els.collect_free(acc, bound);
            }
            Agent::Watchdog { body, c, thr, els } => {
                body.collect_free(acc, bound);
                c_vars(c, acc, bound);
                let mut t = BTreeSet::new();
                thr.collect_vars(&mut t);
                acc.extend(t.into_iter().filter(|v| !bound.contains(v)));
                if let Some(e) = els {
                    e.collect_free(acc, bound);
                }
            }
        }
    }

    /// Substitutes `to` for free occurrences of `from`. `to` must be
    /// fresh for the agent so no capture is possible.
    pub fn rename_var(&self, u: &Universe, from: VarId, to: VarId) -> Agent {
        match self {
            Agent::Success => Agent::Success,
            Agent::Tell {
                c,
                thr,
                delay,
                cont,
            } => Agent::Tell {
                c: c.rename_var(u, from, to),
                thr: thr.rename_var(u, from, to),
                delay: *delay,
                cont: Box::new(cont.rename_var(u, from, to)),
            },
            Agent::Sum(branches) => Agent::Sum(
                branches
                    .iter()
                    .map(|b| AskBranch {
                        c: b.c.rename_var(u, from, to),
                        thr: b.thr.rename_var(u, from, to),
                        delay: b.delay,
                        cont: b.cont.rename_var(u, from, to),
                    })
                    .collect(),
            ),
            Agent::Parallel(l, r) => Agent::Parallel(
                Box::new(l.rename_var(u, from, to)),
                Box::new(r.rename_var(u, from, to)),
            ),
            Agent::Exists { var, body } => {
                if *var == from {
                    self.clone()
                } else {
                    Agent::Exists {
                        var: *var,
                        body: Box::new(body.rename_var(u, from, to)),
                    }
                }
            }
            Agent::Call { name, actuals } => Agent::Call {
                name: name.clone(),
                actuals: actuals
                    .iter()
                    .map(|&a| if a == from { to } else { a })
                    .collect(),
            },
            Agent::Now { c, thr, then, els } => Agent::Now {
                c: c.rename_var(u, from, to),
                thr: thr.rename_var(u, from, to),
                then: Box::new(then.rename_var(u, from, to)),
                els: Box::new(els.rename_var(u, from, to)),
            },
            Agent::Askp {
                t,
                c,
                thr,
                then,
                els,
            } => Agent::Askp {
                t: *t,
                c: c.rename_var(u, from, to),
                thr: thr.rename_var(u, from, to),
                then: Box::new(then.rename_var(u, from, to)),
                els: Box::new(els.rename_var(u, from, to)),
            },
            Agent::Timeout { branches, m, els } => Agent::Timeout {
                branches: branches
                    .iter()
                    .map(|b| AskBranch {
                        c: b.c.rename_var(u, from, to),
                        thr: b.thr.rename_var(u, from, to),
                        delay: b.delay,
                        cont: b.cont.rename_var(u, from, to),
                    })
                    .collect(),
                m: *m,
                els: Box::new(els.rename_var(u, from, to)),
            },
            Agent::Watchdog { body, c, thr, els } => Agent::Watchdog {
                body: Box::new(body.rename_var(u, from, to)),
                c: c.rename_var(u, from, to),
                thr: thr.rename_var(u, from, to),
                els: els.as_ref().map(|e| Box::new(e.rename_var(u, from, to))),
            },
        }
    }

    /// The name of the first construct foreign to `dialect`, if any.
    pub fn dialect_violation(&self, dialect: Dialect) -> Option<&'static str> {
        let bad = match (self, dialect) {
            (Agent::Now { .. }, Dialect::Il) => Some("now"),
            (Agent::Timeout { .. }, Dialect::Il) => Some("timeout"),
            (Agent::Watchdog { .. }, Dialect::Il) => Some("do/watching"),
            (Agent::Askp { .. }, Dialect::Mp) => Some("askp"),
            _ => None,
        };
        if bad.is_some() {
            return bad;
        }
        match self {
            Agent::Success | Agent::Call { .. } => None,
            Agent::Tell { cont, .. } => cont.dialect_violation(dialect),
            Agent::Sum(branches) => branches
                .iter()
                .find_map(|b| b.cont.dialect_violation(dialect)),
            Agent::Parallel(l, r) => l
                .dialect_violation(dialect)
                .or_else(|| r.dialect_violation(dialect)),
            Agent::Exists { body, .. } => body.dialect_violation(dialect),
            Agent::Now { then, els, .. } | Agent::Askp { then, els, .. } => then
                .dialect_violation(dialect)
                .or_else(|| els.dialect_violation(dialect)),
            Agent::Timeout { branches, els, .. } => branches
                .iter()
                .find_map(|b| b.cont.dialect_violation(dialect))
                .or_else(|| els.dialect_violation(dialect)),
            Agent::Watchdog { body, els, .. } => body.dialect_violation(dialect).or_else(|| {
                els.as_ref()
                    .and_then(|e| e.dialect_violation(dialect))
            }),
        }
    }
}

/// A procedure declaration `proc p(x, y) :: body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcDecl {
    pub name: String,
    pub formals: Vec<VarId>,
    pub body: Agent,
}

/// A constraint declaration, keeping the variable list as written so
/// printing survives table normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintDecl {
    pub name: String,
    pub vars: Vec<VarId>,
    pub table: SoftConstraint,
}

/// A parsed program: header declarations plus the main agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub dialect: Dialect,
    pub kind: SemiringKind,
    pub universe: Universe,
    pub constraints: Vec<ConstraintDecl>,
    pub decls: Vec<ProcDecl>,
    pub main: Agent,
}

impl Program {
    pub fn constraint(&self, name: &str) -> Option<&ConstraintDecl> {
        self.constraints.iter().find(|c| c.name == name)
    }

    pub fn decl(&self, name: &str) -> Option<&ProcDecl> {
        self.decls.iter().find(|d| d.name == name)
    }

    /// The top components of the main agent, flattening the right
    /// spine of parallel compositions.
    pub fn top_components(&self) -> Vec<&Agent> {
        let mut out = Vec::new();
        let mut at = &self.main;
        while let Agent::Parallel(l, r) = at {
            out.push(l.as_ref());
            at = r;
        }
        out.push(at);
        out
    }

    /// Checks that no agent uses a construct foreign to the declared
    /// dialect.
    pub fn check_dialect(&self) -> Result<(), DialectError> {
        let mut agents: Vec<&Agent> = vec![&self.main];
        agents.extend(self.decls.iter().map(|d| &d.body));
        for a in agents {
            if let Some(construct) = a.dialect_violation(self.dialect) {
                return Err(DialectError::ForeignConstruct {
                    construct,
                    dialect: self.dialect,
                });
            }
        }
        Ok(())
    }

    /// Checks that the program may run under `requested` semantics.
    pub fn check_semantics(&self, requested: Dialect) -> Result<(), DialectError> {
        if self.dialect != requested {
            return Err(DialectError::Mismatch {
                declared: self.dialect,
                requested,
            });
        }
        self.check_dialect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn universe() -> Universe {
        let mut u = Universe::new(SemiringKind::Weighted);
        u.add_var("x", vec!["0".into(), "1".into()]).unwrap();
        u.add_var("y", vec!["0".into(), "1".into()]).unwrap();
        u
    }

    fn unary(u: &Universe, var: &str) -> SoftConstraint {
        let v = u.var_id(var).unwrap();
        let k = u.kind();
        SoftConstraint::build(u, &[v], &[(vec![0], k.parse_grade("3").unwrap())], k.one())
    }

    #[test]
    fn free_vars_respect_binders() {
        let u = universe();
        let x = u.var_id("x").unwrap();
        let y = u.var_id("y").unwrap();
        let cx = CRef::named("cx", unary(&u, "x"));
        let cy = CRef::named("cy", unary(&u, "y"));
        let inner = Agent::tell(
            cx.clone(),
            Threshold::plain(SemiringKind::Weighted),
            Agent::ask(cy, Threshold::plain(SemiringKind::Weighted), Agent::Success),
        );
        let hidden = Agent::Exists {
            var: x,
            body: Box::new(inner.clone()),
        };
        assert_eq!(inner.free_vars().into_iter().collect::<Vec<_>>(), vec![x, y]);
        assert_eq!(hidden.free_vars().into_iter().collect::<Vec<_>>(), vec![y]);
    }

    #[test]
    fn rename_skips_shadowed_binder() {
        let mut u = universe();
        let x = u.var_id("x").unwrap();
        let cx = CRef::named("cx", unary(&u, "x"));
        let fresh = u.fresh_like(x);
        let shadowed = Agent::Exists {
            var: x,
            body: Box::new(Agent::tell(
                cx.clone(),
                Threshold::plain(SemiringKind::Weighted),
                Agent::Success,
            )),
        };
        assert_eq!(shadowed.rename_var(&u, x, fresh), shadowed);

        let open = Agent::tell(cx, Threshold::plain(SemiringKind::Weighted), Agent::Success);
        let renamed = open.rename_var(&u, x, fresh);
        assert_eq!(
            renamed.free_vars().into_iter().collect::<Vec<_>>(),
            vec![fresh]
        );
        match &renamed {
            Agent::Tell { c, .. } => {
                assert_eq!(c.label.to_string(), "cx[x:=$1]");
            }
            other => panic!("unexpected shape {other:?}"),
        }
    }

    #[test]
    fn dialect_gating_flags_foreign_constructs() {
        let u = universe();
        let cx = CRef::named("cx", unary(&u, "x"));
        let now = Agent::Now {
            c: cx.clone(),
            thr: Threshold::plain(SemiringKind::Weighted),
            then: Box::new(Agent::Success),
            els: Box::new(Agent::Success),
        };
        assert_eq!(now.dialect_violation(Dialect::Mp), None);
        assert_eq!(now.dialect_violation(Dialect::Il), Some("now"));

        let askp = Agent::Askp {
            t: 2,
            c: cx,
            thr: Threshold::plain(SemiringKind::Weighted),
            then: Box::new(Agent::Success),
            els: Box::new(Agent::Success),
        };
        assert_eq!(askp.dialect_violation(Dialect::Il), None);
        assert_eq!(askp.dialect_violation(Dialect::Mp), Some("askp"));
    }

    #[test]
    fn success_shape_covers_parallel_success() {
        let both = Agent::Parallel(Box::new(Agent::Success), Box::new(Agent::Success));
        assert!(both.is_success_shape());
        let u = universe();
        let mixed = Agent::Parallel(
            Box::new(Agent::Success),
            Box::new(Agent::tell(
                CRef::top(SemiringKind::Weighted),
                Threshold::plain(SemiringKind::Weighted),
                Agent::Success,
            )),
        );
        let _ = u;
        assert!(!mixed.is_success_shape());
    }
}
