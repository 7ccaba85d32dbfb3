//! Certified constructions of optimal balanced difference packings.
//!
//! A `(G, K, 1)` difference packing is a family of blocks (subsets of a finite
//! abelian group `G`, sizes drawn from `K`) whose list of within-block
//! differences covers every group element at most once. This crate constructs
//! optimal balanced packings over `Z_{4u} x Z_{8v}` with `K = {4, 5}` for all
//! odd `u, v`, and exports them as optical orthogonal signature pattern codes
//! for 2-D optical CDMA.
//!
//! Nothing here is trusted: every construction step re-verifies its output by
//! exhaustive difference counting, and the final object carries a certificate
//! embedding the full derivation tree. The building blocks are
//!
//! * [`abelian`] — arithmetic over products of cyclic groups, CRT relabelings;
//! * [`residues`] — quadratic-residue tables over `Z_p`;
//! * [`packing`] — the design types and the certifying verifier;
//! * [`catalog`] — embedded base block lists and parameter tables;
//! * [`direct`] — quadratic-residue lifting constructions over
//!   `Z_4 x Z_8 x Z_p` and `Z_4 x Z_24 x Z_p`;
//! * [`diffmat`] — difference matrices: algebraic constructions, backtracking
//!   search and a verified registry;
//! * [`compose`] — the filling and inflation rules that combine packings;
//! * [`engine`] — the planner that derives an optimal packing for a given
//!   `(u, v)` and executes the derivation with certification;
//! * [`oospc`] — pattern-code export and independent correlation checking.

pub mod abelian;
pub mod catalog;
pub mod compose;
pub mod diffmat;
pub mod direct;
pub mod engine;
pub mod error;
pub mod files;
pub mod oospc;
pub mod packing;
pub mod residues;

pub use abelian::{Elem, Group, Relabeling};
pub use error::{Error, Result};
pub use packing::{Block, Certificate, MultiBlock, Packing};
