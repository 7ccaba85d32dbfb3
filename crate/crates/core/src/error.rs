//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("arity mismatch: expected {expected} coordinates, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("modulus must be >= 1, got {0}")]
    BadModulus(u32),

    #[error("coordinates {i} and {j} have non-coprime moduli {mi}, {mj}")]
    NonCoprimeRelabel { i: usize, j: usize, mi: u32, mj: u32 },

    #[error("factor {w} does not split off coordinate of modulus {m}")]
    BadFactorMove { w: u32, m: u32 },

    #[error("{inner} does not divide {outer} coordinatewise")]
    EmbeddingMismatch { inner: String, outer: String },

    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),

    #[error("{what} is undefined for p = {p}")]
    ResidueDomain { what: &'static str, p: u64 },

    #[error("no residue class covers p = {p} for {family}")]
    ClassCoverage { family: &'static str, p: u64 },

    #[error("prime {p} is outside the domain of {family}")]
    PrimeDomain { family: &'static str, p: u64 },

    #[error("no catalog entry for ({u}, {v})")]
    NotInCatalog { u: u32, v: u32 },

    #[error("no embedded strong difference family for lambda = {0}")]
    NoSuchSdf(u32),

    #[error("block of size {0} is too small (need >= 2)")]
    BlockTooSmall(usize),

    #[error("block size {size} not in K = {k:?}")]
    SizeNotInK { size: usize, k: Vec<usize> },

    #[error("element {elem} is not valid in group {group}")]
    ElementOutOfGroup { elem: String, group: String },

    #[error("blocks over mixed groups")]
    MixedGroups,

    #[error("scaling by {multiplier} collapses block {block} (repeated element)")]
    ScaledBlockCollapse { multiplier: u64, block: String },

    #[error("fiber {fiber} of the base family breaks the lifting precondition: {reason}")]
    FiberCondition { fiber: String, reason: String },

    #[error("difference-matrix table is {rows}x{cols}, expected {k}x{order}")]
    DmShape {
        rows: usize,
        cols: usize,
        k: usize,
        order: usize,
    },

    #[error("no multiplication-table difference matrix: gcd({m}, {kf}!) != 1")]
    DmGcd { m: u32, kf: usize },

    #[error("difference matrix needs {need} rows, only {have} available")]
    DmRowDeficit { need: usize, have: usize },

    #[error("no ({group}, {k}; 1) difference matrix available (searched and exhausted or out of budget)")]
    DmUnavailable { group: String, k: usize },

    #[error("group of order {0} is too large for difference-matrix search")]
    DmTooLarge(usize),

    #[error("k = {k} exceeds group order {order}; no difference matrix exists")]
    DmInfeasible { k: usize, order: usize },

    #[error("ingredient failed certification in rule {rule}: {detail}")]
    Certification { rule: String, detail: String },

    #[error("plan is blocked; missing difference matrices: {0}")]
    BlockedPlan(String),

    #[error("u and v must be odd and >= 1, got ({u}, {v})")]
    EvenInput { u: u64, v: u64 },

    #[error("packing is not a verified difference packing: {0}")]
    UncertifiedInput(String),

    #[error("codeword dimensions differ: {a} vs {b}")]
    DimMismatch { a: String, b: String },

    #[error("malformed document: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
