//! Surface language: syntax tree, lexer, parser, pretty-printer and
//! idiom expansion.

pub mod ast;
pub mod expand;
pub mod lexer;
pub mod parser;
pub mod printer;

pub use ast::{
    Agent, AskBranch, CLabel, CRef, ConstraintDecl, Dialect, DialectError, ProcDecl, Program,
    Threshold,
};
pub use expand::{expand_program, ExpandError};
pub use parser::{parse_program, ParseError};
pub use printer::{pretty_agent, pretty_program};
