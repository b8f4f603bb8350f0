//! Soft constraints over finite domains.
//!
//! A soft constraint is a total function from assignments of its support
//! variables to grades of one c-semiring instance. Tables are stored in
//! row-major order over the (sorted) support; every public constructor
//! normalizes, so a constraint never mentions a variable it does not
//! actually depend on. Two constraints are equal exactly when they denote
//! the same function.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::semiring::{Grade, SemiringKind};

/// Index of a variable inside a [`Universe`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
struct VarInfo {
    name: String,
    domain: Vec<String>,
}

/// The declared variables of a program: names and finite domains.
///
/// Fresh variables (created when a local binder is dissolved or a
/// procedure body is instantiated) get reserved `$n` names; renaming in
/// the trace layer canonicalizes those away.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Universe {
    kind: SemiringKind,
    vars: Vec<VarInfo>,
    by_name: HashMap<String, VarId>,
    fresh: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("variable {0} is declared twice")]
    DuplicateVar(String),
    #[error("variable {0} has an empty domain")]
    EmptyDomain(String),
    #[error("value {value} repeats in the domain of {var}")]
    DuplicateValue { var: String, value: String },
}

impl Universe {
    pub fn new(kind: SemiringKind) -> Self {
        Universe {
            kind,
            vars: Vec::new(),
            by_name: HashMap::new(),
            fresh: 0,
        }
    }

    pub fn kind(&self) -> SemiringKind {
        self.kind
    }

    pub fn add_var(&mut self, name: &str, domain: Vec<String>) -> Result<VarId, ConstraintError> {
        if self.by_name.contains_key(name) {
            return Err(ConstraintError::DuplicateVar(name.to_string()));
        }
        if domain.is_empty() {
            return Err(ConstraintError::EmptyDomain(name.to_string()));
        }
        for (i, v) in domain.iter().enumerate() {
            if domain[..i].contains(v) {
                return Err(ConstraintError::DuplicateValue {
                    var: name.to_string(),
                    value: v.clone(),
                });
            }
        }
        let id = VarId(self.vars.len() as u32);
        self.by_name.insert(name.to_string(), id);
        self.vars.push(VarInfo {
            name: name.to_string(),
            domain,
        });
        Ok(id)
    }

    /// Adds a fresh variable (named `$1`, `$2`, ...) with the same
    /// domain as `like`.
    pub fn fresh_like(&mut self, like: VarId) -> VarId {
        let domain = self.domain(like).to_vec();
        loop {
            self.fresh += 1;
            let name = format!("${}", self.fresh);
            if !self.by_name.contains_key(&name) {
                return self.add_var(&name, domain).expect("fresh name is unused");
            }
        }
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn var_name(&self, id: VarId) -> &str {
        &self.vars[id.0 as usize].name
    }

    pub fn domain(&self, id: VarId) -> &[String] {
        &self.vars[id.0 as usize].domain
    }

    pub fn card(&self, id: VarId) -> usize {
        self.domain(id).len()
    }

    pub fn value_index(&self, id: VarId, value: &str) -> Option<usize> {
        self.domain(id).iter().position(|v| v == value)
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn is_fresh(&self, id: VarId) -> bool {
        self.var_name(id).starts_with('$')
    }
}

/// Iterates all tuples over the given cardinalities in row-major order
/// (last coordinate fastest). The empty cardinality list yields the one
/// empty tuple.
pub fn all_tuples(cards: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = cards.iter().product();
    (0..total).map(move |mut ix| {
        let mut t = vec![0; cards.len()];
        for (pos, &c) in cards.iter().enumerate().rev() {
            t[pos] = ix % c;
            ix /= c;
        }
        t
    })
}

/// A normalized soft constraint: sorted support, cardinalities and a
/// total row-major grade table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SoftConstraint {
    kind: SemiringKind,
    support: Vec<VarId>,
    cards: Vec<usize>,
    table: Vec<Grade>,
}

impl SoftConstraint {
    fn raw(kind: SemiringKind, support: Vec<VarId>, cards: Vec<usize>, table: Vec<Grade>) -> Self {
        debug_assert!(support.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(table.len(), cards.iter().product::<usize>());
        SoftConstraint {
            kind,
            support,
            cards,
            table,
        }
        .normalized()
    }

    /// The constant constraint with empty support.
    pub fn constant(kind: SemiringKind, grade: Grade) -> Self {
        kind.check(&grade).expect("constant grade fits the instance");
        SoftConstraint {
            kind,
            support: Vec::new(),
            cards: Vec::new(),
            table: vec![grade],
        }
    }

    /// The top constraint `1`, unit of combination.
    pub fn top(kind: SemiringKind) -> Self {
        Self::constant(kind, kind.one())
    }

    /// The bottom constraint `0`.
    pub fn bot(kind: SemiringKind) -> Self {
        Self::constant(kind, kind.zero())
    }

    /// Builds a constraint from explicit entries plus a default grade.
    /// `vars` may be in any order and lists the written support; entries
    /// give value indices in that same order. Later entries overwrite
    /// earlier ones.
    pub fn build(
        u: &Universe,
        vars: &[VarId],
        entries: &[(Vec<usize>, Grade)],
        default: Grade,
    ) -> Self {
        let mut order: Vec<usize> = (0..vars.len()).collect();
        order.sort_by_key(|&i| vars[i]);
        let support: Vec<VarId> = order.iter().map(|&i| vars[i]).collect();
        let cards: Vec<usize> = support.iter().map(|&v| u.card(v)).collect();
        let total: usize = cards.iter().product();
        let mut table = vec![default; total];
        for (tuple, grade) in entries {
            let mut ix = 0;
            for (pos, &i) in order.iter().enumerate() {
                ix = ix * cards[pos] + tuple[i];
            }
            table[ix] = grade.clone();
        }
        Self::raw(u.kind(), support, cards, table)
    }

    /// The diagonal constraint: `1` where `x` and `y` take equal values
    /// (compared by name), `0` elsewhere.
    pub fn diagonal(u: &Universe, x: VarId, y: VarId) -> Self {
        if x == y {
            return Self::top(u.kind());
        }
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        let (ca, cb) = (u.card(a), u.card(b));
        let mut table = Vec::with_capacity(ca * cb);
        for i in 0..ca {
            for j in 0..cb {
                let equal = u.domain(a)[i] == u.domain(b)[j];
                table.push(if equal { u.kind().one() } else { u.kind().zero() });
            }
        }
        Self::raw(u.kind(), vec![a, b], vec![ca, cb], table)
    }

    pub fn kind(&self) -> SemiringKind {
        self.kind
    }

    pub fn support(&self) -> &[VarId] {
        &self.support
    }

    pub fn is_top(&self) -> bool {
        self.support.is_empty() && self.table[0] == self.kind.one()
    }

    fn index_of(&self, tuple: &[usize]) -> usize {
        let mut ix = 0;
        for (pos, &v) in tuple.iter().enumerate() {
            ix = ix * self.cards[pos] + v;
        }
        ix
    }

    /// Grade at a tuple over this constraint's own support.
    pub fn eval_tuple(&self, tuple: &[usize]) -> &Grade {
        &self.table[self.index_of(tuple)]
    }

    /// Grade under an assignment to a superset of the support. `vars`
    /// must be sorted and `tuple` parallel to it.
    pub fn eval_under(&self, vars: &[VarId], tuple: &[usize]) -> &Grade {
        let own: Vec<usize> = self
            .support
            .iter()
            .map(|v| {
                let pos = vars.binary_search(v).expect("assignment covers the support");
                tuple[pos]
            })
            .collect();
        self.eval_tuple(&own)
    }

    fn normalized(mut self) -> Self {
        let mut keep = vec![true; self.support.len()];
        for (axis, slot) in keep.iter_mut().enumerate() {
            let stride: usize = self.cards[axis + 1..].iter().product();
            let card = self.cards[axis];
            let block = stride * card;
            let constant = (0..self.table.len()).all(|ix| {
                let base = (ix / block) * block + ix % stride;
                self.table[ix] == self.table[base]
            });
            *slot = !constant;
        }
        if keep.iter().all(|&k| k) {
            return self;
        }
        let support: Vec<VarId> = self
            .support
            .iter()
            .zip(&keep)
            .filter(|&(_, &k)| k)
            .map(|(&v, _)| v)
            .collect();
        let cards: Vec<usize> = self
            .cards
            .iter()
            .zip(&keep)
            .filter(|&(_, &k)| k)
            .map(|(&c, _)| c)
            .collect();
        let mut table = Vec::with_capacity(cards.iter().product());
        for tuple in all_tuples(&cards) {
            let mut full = vec![0; self.support.len()];
            let mut at = 0;
            for (pos, &k) in keep.iter().enumerate() {
                if k {
                    full[pos] = tuple[at];
                    at += 1;
                }
            }
            table.push(self.table[self.index_of(&full)].clone());
        }
        self.support = support;
        self.cards = cards;
        self.table = table;
        self
    }

    fn merged_support(&self, other: &Self) -> (Vec<VarId>, Vec<usize>) {
        let mut support = self.support.clone();
        for v in &other.support {
            if !support.contains(v) {
                support.push(*v);
            }
        }
        support.sort();
        let card_of = |v: &VarId| {
            self.support
                .iter()
                .position(|s| s == v)
                .map(|p| self.cards[p])
                .or_else(|| {
                    other
                        .support
                        .iter()
                        .position(|s| s == v)
                        .map(|p| other.cards[p])
                })
                .expect("var comes from one operand")
        };
        let cards = support.iter().map(card_of).collect();
        (support, cards)
    }

    /// Combination: pointwise `x` over the union support.
    pub fn combine(&self, other: &Self) -> Self {
        assert_eq!(self.kind, other.kind, "combining foreign constraints");
        let (support, cards) = self.merged_support(other);
        let mut table = Vec::with_capacity(cards.iter().product());
        for tuple in all_tuples(&cards) {
            let a = self.eval_under(&support, &tuple);
            let b = other.eval_under(&support, &tuple);
            table.push(self.kind.times(a, b));
        }
        Self::raw(self.kind, support, cards, table)
    }

    /// Projection onto `onto`: pointwise `+` over every eliminated
    /// variable. Variables in `onto` outside the support are ignored.
    pub fn project(&self, onto: &[VarId]) -> Self {
        let support: Vec<VarId> = self
            .support
            .iter()
            .copied()
            .filter(|v| onto.contains(v))
            .collect();
        let cards: Vec<usize> = support
            .iter()
            .map(|v| self.cards[self.support.iter().position(|s| s == v).unwrap()])
            .collect();
        let gone: Vec<usize> = (0..self.support.len())
            .filter(|&i| !onto.contains(&self.support[i]))
            .collect();
        let gone_cards: Vec<usize> = gone.iter().map(|&i| self.cards[i]).collect();
        let mut table = Vec::with_capacity(cards.iter().product());
        for kept in all_tuples(&cards) {
            let mut acc: Option<Grade> = None;
            for elim in all_tuples(&gone_cards) {
                let mut full = vec![0; self.support.len()];
                let mut at = 0;
                for (pos, slot) in full.iter_mut().enumerate() {
                    if let Some(g) = gone.iter().position(|&i| i == pos) {
                        *slot = elim[g];
                    } else {
                        *slot = kept[at];
                        at += 1;
                    }
                }
                let g = self.eval_tuple(&full);
                acc = Some(match acc {
                    None => g.clone(),
                    Some(prev) => self.kind.plus(&prev, g),
                });
            }
            table.push(acc.expect("domains are nonempty"));
        }
        Self::raw(self.kind, support, cards, table)
    }

    /// Projects a single variable away.
    pub fn hide(&self, x: VarId) -> Self {
        let onto: Vec<VarId> = self.support.iter().copied().filter(|&v| v != x).collect();
        self.project(&onto)
    }

    /// Best level of consistency: the projection onto no variables.
    pub fn blevel(&self) -> Grade {
        self.project(&[]).table[0].clone()
    }

    /// Pointwise order: `self(t) <= other(t)` for every assignment over
    /// the union support.
    pub fn leq(&self, other: &Self) -> bool {
        assert_eq!(self.kind, other.kind, "comparing foreign constraints");
        let (support, cards) = self.merged_support(other);
        let below = all_tuples(&cards).all(|tuple| {
            self.kind
                .leq(self.eval_under(&support, &tuple), other.eval_under(&support, &tuple))
        });
        below
    }

    /// Entailment of `c` by this store: the store lies below `c`.
    pub fn entails(&self, c: &Self) -> bool {
        self.leq(c)
    }

    /// Renames `from` to `to`; `to` must have the same cardinality and
    /// must not already occur in the support.
    pub fn rename_var(&self, u: &Universe, from: VarId, to: VarId) -> Self {
        if !self.support.contains(&from) || from == to {
            return self.clone();
        }
        assert!(
            !self.support.contains(&to),
            "renaming onto an existing support variable"
        );
        assert_eq!(u.card(from), u.card(to), "renaming across domains");
        let mut vars: Vec<VarId> = self
            .support
            .iter()
            .map(|&v| if v == from { to } else { v })
            .collect();
        let mut order: Vec<usize> = (0..vars.len()).collect();
        order.sort_by_key(|&i| vars[i]);
        vars.sort();
        let cards: Vec<usize> = order.iter().map(|&i| self.cards[i]).collect();
        let mut table = Vec::with_capacity(self.table.len());
        for tuple in all_tuples(&cards) {
            let mut old = vec![0; tuple.len()];
            for (new_pos, &old_pos) in order.iter().enumerate() {
                old[old_pos] = tuple[new_pos];
            }
            table.push(self.eval_tuple(&old).clone());
        }
        Self::raw(self.kind, vars, cards, table)
    }

    /// Renders the table with variable and value names.
    pub fn fmt_with(&self, u: &Universe) -> String {
        if self.support.is_empty() {
            return self.table[0].to_string();
        }
        let mut out = String::from("{");
        let mut first = true;
        for tuple in all_tuples(&self.cards) {
            if !first {
                out.push_str("; ");
            }
            first = false;
            let binds: Vec<String> = self
                .support
                .iter()
                .zip(&tuple)
                .map(|(&v, &ix)| format!("{}={}", u.var_name(v), u.domain(v)[ix]))
                .collect();
            let _ = write!(out, "{} -> {}", binds.join(","), self.eval_tuple(&tuple));
        }
        out.push('}');
        out
    }
}
