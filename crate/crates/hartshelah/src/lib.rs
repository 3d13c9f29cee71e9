//! Finite parity structures over GF(2) — the Hart-Shelah family — with the
//! constructive machinery around them: solutions and their amalgamation, the
//! solution ↔ isomorphism correspondence, Galois-type equality with an
//! exhaustive oracle, explicit nonforking, uniqueness-triple analysis, and
//! NF witness chains.
//!
//! Everything here is exact, deterministic, and sized for exhaustive
//! checking at micro scale. Start with the runnable programs under
//! `examples/` — one per capability — or the `hs` command-line tool.

#![forbid(unsafe_code)]

pub mod amalgam;
pub mod embedding;
pub mod error;
pub mod forking;
pub mod format;
pub mod gen;
pub mod group;
pub mod index;
pub mod linsys;
pub mod model;
pub mod nf;
pub mod solution;
pub mod suite;
pub mod types;
pub mod witness;

pub use embedding::{extend_index_map, Embedding, IndexMapExtension};
pub use error::{Error, Result};
pub use group::GroupElem;
pub use index::{AtomId, Block, CompTuple};
pub use model::{Element, Model, StalkAction, StalkPoint, Violation};
pub use solution::{
    amalgamate_solutions, blocks_over, conjugate_solution, extend_solution, iso_from_solutions,
    solve_solution, standardize_pair, Solution, SolutionPins, SolveResult, StandardizedPair,
    UnsatCertificate,
};
