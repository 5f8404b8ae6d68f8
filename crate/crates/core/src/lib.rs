//! Clause-structured grammar-based text-to-SQL decoding.
//!
//! The crate builds SQL abstract syntax trees through a three-action
//! transition system (`ApplyRule`, `SelectColumn`/`SelectTable`, plus
//! `SelectValue` for copied condition values) driven by an LSTM decoder.
//! Queries decompose into six top-level clauses — SELECT, WHERE, GROUP,
//! ORDER, IEU, FROM — which can be decoded sequentially (each clause
//! inheriting the previous clause's recurrent state) or in parallel (every
//! clause rolled from one shared learned initial state, batched).
//! Training combines teacher-forced action likelihood with a clause-level
//! attention alignment loss built from string-match question segments.
//!
//! The crate is `no_std` + `alloc`: all IO, timing, and the command-line
//! front end live in the companion `parsql` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod align;
pub mod ast;
pub mod corpus;
pub mod decoder;
pub mod encoder;
pub mod gen;
pub mod grammar;
pub mod nn;
pub mod rng;
pub mod schema;
pub mod sql;
pub mod train;

/// The grammar shipped with the toolkit, covering the six-clause SQL subset.
pub const DEFAULT_GRAMMAR: &str = include_str!("sql.grammar");
