//! Soft-constraint algebra and interpreters for timed soft concurrent
//! constraint languages.
//!
//! The crate is organised bottom-up:
//!
//! * [`semiring`] — c-semiring grades (boolean, fuzzy, weighted,
//!   probabilistic) with exact rational arithmetic;
//! * [`constraint`] — soft constraints as total tables over a finite
//!   variable universe, with combination, projection and entailment;
//! * [`lang`] — surface syntax, AST, pretty-printer and idiom expansion
//!   (delay, timeout, watchdog);
//! * [`engine`] — the two operational engines: maximal parallelism
//!   (`engine::mp`) and interleaving (`engine::il`, with its primed
//!   variant used for the equivalence checks);
//! * [`traces`] — reactive sequences, bounded operational/denotational
//!   enumeration and the correctness/compositionality checkers;
//! * [`trace_doc`] — the versioned JSON trace document; and
//! * [`cli`] — the command implementations behind the `softtime` binary.

pub mod cli;
pub mod constraint;
pub mod engine;
pub mod lang;
pub mod semiring;
pub mod trace_doc;
pub mod traces;

pub use cli::run_cli;
