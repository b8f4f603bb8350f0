//! Pretty-printer emitting the same surface grammar the parser reads.
//!
//! Printing a parsed program and reparsing it yields a structurally
//! equal program; generated runtime names (`$n`, `name@watchN`) fall
//! outside the surface grammar and only show up when printing expanded
//! or running agents for display.

use std::fmt::Write as _;

use crate::constraint::{all_tuples, Universe, VarId};
use crate::lang::ast::{Agent, AskBranch, Program, Threshold};

#[derive(Clone, Copy, PartialEq)]
enum Level {
    Par,
    Sum,
    Prefix,
}

pub fn pretty_program(p: &Program) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dialect {}", p.dialect);
    let _ = writeln!(out, "semiring {}", p.kind);
    for ix in 0..p.universe.var_count() {
        let v = VarId(ix as u32);
        if p.universe.is_fresh(v) {
            continue;
        }
        let _ = writeln!(
            out,
            "var {} in {{{}}}",
            p.universe.var_name(v),
            p.universe.domain(v).join(", ")
        );
    }
    for c in &p.constraints {
        let names: Vec<&str> = c.vars.iter().map(|&v| p.universe.var_name(v)).collect();
        let _ = writeln!(out, "constraint {} on ({}) {{", c.name, names.join(", "));
        let cards: Vec<usize> = c.vars.iter().map(|&v| p.universe.card(v)).collect();
        let mut sorted = c.vars.clone();
        sorted.sort();
        for tuple in all_tuples(&cards) {
            let values: Vec<&str> = c
                .vars
                .iter()
                .zip(&tuple)
                .map(|(&v, &ix)| p.universe.domain(v)[ix].as_str())
                .collect();
            let mut by_sorted = vec![0; tuple.len()];
            for (pos, &v) in c.vars.iter().enumerate() {
                let at = sorted.iter().position(|&s| s == v).unwrap();
                by_sorted[at] = tuple[pos];
            }
            let grade = c.table.eval_under(&sorted, &by_sorted);
            let _ = writeln!(out, "  ({}) -> {}", values.join(", "), grade);
        }
        let _ = writeln!(out, "}}");
    }
    for d in &p.decls {
        let formals: Vec<&str> = d.formals.iter().map(|&v| p.universe.var_name(v)).collect();
        let _ = writeln!(
            out,
            "proc {}({}) :: {}",
            d.name,
            formals.join(", "),
            pretty_agent(&d.body, &p.universe)
        );
    }
    let _ = writeln!(out, "main: {}", pretty_agent(&p.main, &p.universe));
    out
}

pub fn pretty_agent(a: &Agent, u: &Universe) -> String {
    let mut out = String::new();
    write_agent(&mut out, a, u, Level::Par);
    out
}

fn write_threshold(out: &mut String, thr: &Threshold) {
    match thr {
        Threshold::Value(g) => {
            let _ = write!(out, "[{g}]");
        }
        Threshold::Constraint(c) => {
            if !thr.is_plain() {
                let _ = write!(out, "{{{}}}", c.label);
            }
        }
    }
}

fn write_tail(out: &mut String, thr: &Threshold, delay: u32, cont: &Agent, u: &Universe) {
    if delay == 0 && thr.is_plain() && *cont == Agent::Success {
        return;
    }
    if delay > 0 {
        let _ = write!(out, " -{delay}->");
    } else {
        out.push_str(" ->");
    }
    write_threshold(out, thr);
    out.push(' ');
    write_agent(out, cont, u, Level::Prefix);
}

fn write_branch(out: &mut String, b: &AskBranch, u: &Universe) {
    let _ = write!(out, "ask({})", b.c.label);
    write_tail(out, &b.thr, b.delay, &b.cont, u);
}

fn write_agent(out: &mut String, a: &Agent, u: &Universe, level: Level) {
    match level {
        Level::Par => {
            if let Agent::Parallel(l, r) = a {
                write_agent(out, l, u, Level::Sum);
                out.push_str(" || ");
                write_agent(out, r, u, Level::Par);
                return;
            }
            write_agent(out, a, u, Level::Sum);
        }
        Level::Sum => match a {
            Agent::Parallel(_, _) => {
                out.push('(');
                write_agent(out, a, u, Level::Par);
                out.push(')');
            }
            Agent::Sum(branches) if branches.len() > 1 => {
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" + ");
                    }
                    write_branch(out, b, u);
                }
            }
            _ => write_agent(out, a, u, Level::Prefix),
        },
        Level::Prefix => match a {
            Agent::Parallel(_, _) => {
                out.push('(');
                write_agent(out, a, u, Level::Par);
                out.push(')');
            }
            Agent::Sum(branches) if branches.len() > 1 => {
                out.push('(');
                write_agent(out, a, u, Level::Sum);
                out.push(')');
            }
            Agent::Sum(branches) => write_branch(out, &branches[0], u),
            Agent::Success => out.push_str("success"),
            Agent::Tell {
                c,
                thr,
                delay,
                cont,
            } => {
                let _ = write!(out, "tell({})", c.label);
                write_tail(out, thr, *delay, cont, u);
            }
            Agent::Exists { var, body } => {
                let _ = write!(out, "exists {}. ", u.var_name(*var));
                write_agent(out, body, u, Level::Prefix);
            }
            Agent::Call { name, actuals } => {
                let names: Vec<&str> = actuals.iter().map(|&v| u.var_name(v)).collect();
                let _ = write!(out, "{name}({})", names.join(", "));
            }
            Agent::Now { c, thr, then, els } => {
                out.push_str("now");
                write_threshold(out, thr);
                let _ = write!(out, " {}", c.label);
                if **then != Agent::Success {
                    out.push_str(" then ");
                    write_agent(out, then, u, Level::Prefix);
                }
                out.push_str(" else ");
                write_agent(out, els, u, Level::Prefix);
            }
            Agent::Askp {
                t,
                c,
                thr,
                then,
                els,
            } => {
                let _ = write!(out, "askp({t}, {})", c.label);
                write_threshold(out, thr);
                out.push_str(" ? ");
                write_agent(out, then, u, Level::Prefix);
                out.push_str(" : ");
                write_agent(out, els, u, Level::Prefix);
            }
            Agent::Timeout { branches, m, els } => {
                let _ = write!(out, "timeout({m}) {{ ");
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" + ");
                    }
                    write_branch(out, b, u);
                }
                out.push_str(" } else ");
                write_agent(out, els, u, Level::Prefix);
            }
            Agent::Watchdog { body, c, thr, els } => {
                out.push_str("do ");
                write_agent(out, body, u, Level::Prefix);
                out.push_str(" watching");
                write_threshold(out, thr);
                let _ = write!(out, " ({})", c.label);
                if let Some(e) = els {
                    out.push_str(" else ");
                    write_agent(out, e, u, Level::Prefix);
                }
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse_program;

    fn roundtrip(src: &str) {
        let p = parse_program(src).unwrap();
        let printed = pretty_program(&p);
        let q = parse_program(&printed).unwrap_or_else(|e| {
            panic!("reparse failed: {e}\n--- printed ---\n{printed}")
        });
        assert_eq!(p, q, "--- printed ---\n{printed}");
    }

    #[test]
    fn roundtrips_core_constructs() {
        roundtrip(
            "\
dialect tsccp
semiring weighted
var x in {0, 1, 2, 3}
constraint c1 on (x) { (0) -> 3 (1) -> 4 (2) -> 5 (3) -> 6 }
constraint c2 on (x) { default -> 8 (0) -> 5 }
proc loop(x) :: tell(c1) ->[9] loop(x)
main: tell(c1) -2->[inf] success || (ask(c1) -> success + ask(c2) ->{c1} success) || exists x. tell(c2) -> loop(x)
",
        );
    }

    #[test]
    fn roundtrips_idioms() {
        roundtrip(
            "\
dialect tsccp
semiring fuzzy
var x in {a, b}
constraint c on (x) { (a) -> 1 (b) -> 1/2 }
main: timeout(2) { ask(c) ->[1/4] success } else (do tell(c) -> success watching (c) else success) || now {c} c then success else tell(c)
",
        );
    }

    #[test]
    fn roundtrips_il_constructs() {
        roundtrip(
            "\
dialect tsccp-i
semiring boolean
var b in {t, f}
constraint cb on (b) { (t) -> true (f) -> false }
main: askp(3, cb)[true] ? tell(cb) : success || tell(cb) -> success
",
        );
    }

    #[test]
    fn roundtrips_two_variable_tables() {
        roundtrip(
            "\
dialect tsccp
semiring weighted
var x in {a, b}
var y in {a, b}
constraint c2 on (y, x) { (a, a) -> 5 (a, b) -> 1 (b, a) -> 2 (b, b) -> 2 }
main: tell(c2) -> tell(diag(x, y)) -> success
",
        );
    }

    #[test]
    fn omits_redundant_syntax() {
        let p = parse_program(
            "\
dialect tsccp
semiring weighted
var x in {0, 1}
constraint c on (x) { default -> 2 (0) -> 1 }
main: tell(c) -> (now c else tell(c))
",
        )
        .unwrap();
        let printed = pretty_program(&p);
        assert!(printed.contains("main: tell(c) -> now c else tell(c)"), "{printed}");
    }
}
