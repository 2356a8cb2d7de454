//! Multilevel lattice network coding over Eisenstein integers.
//!
//! The crate builds complex lattices from an elementary-divisor decomposition
//! of `Z[w]/(varpi)` — one linear code per prime-power layer — and implements
//! the two-way-relay machinery on top of them: shaping and dithering, integer
//! (lattice) forwarding, layered soft detection with per-layer non-binary
//! decoders, and the rate/mutual-information analysis used to compare the
//! decoder variants.
//!
//! Module map:
//!
//! * [`eisenstein`] — exact `Z[w]` arithmetic, quantization, factorization.
//! * [`residue`] — residue rings `Z[w]/(p^g)`, coset leaders, CRT, digit
//!   decomposition, field tables.
//! * [`code`] — linear block codes over residue rings, including nested
//!   (construction-D style) families for chain-ring layers.
//! * [`convcode`] — non-binary convolutional codes: trellis, Viterbi with a
//!   pluggable branch metric, exact symbol-MAP (BCJR) decoding.
//! * [`lattice`] — layered lattice construction, generator matrices in
//!   Hermite normal form, message embeddings/projections, coding-gain and
//!   kissing-number figures of merit.
//! * [`mlnc`] — the multiple-access simulation chain: transmit/receive,
//!   integer-forwarding decoder, layered soft detector, multistage and
//!   iterative multistage decoding.
//! * [`analysis`] — computation rates, union bounds, Monte-Carlo mutual
//!   information and EXIT curves.
//! * [`oracle`] — independent brute-force reference implementations used by
//!   the self-test suite and the acceptance tests.

pub mod analysis;
pub mod code;
pub mod convcode;
pub mod eisenstein;
pub mod lattice;
mod logdomain;
pub mod mlnc;
pub mod oracle;
pub mod residue;
pub mod selftest;

use thiserror::Error as ThisError;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, ThisError)]
pub enum Error {
    #[error("integer overflow outside the declared coefficient range")]
    Overflow,
    #[error("non-finite floating-point input")]
    NonFinite,
    #[error("division by zero")]
    DivisionByZero,
    #[error("inexact division")]
    InexactDivision,
    #[error("element is not a unit")]
    NotAUnit,
    #[error("cannot factor zero")]
    ZeroFactor,
    #[error("norm {0} outside supported range")]
    NormOutOfRange(i128),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("modulus mismatch between operands")]
    ModulusMismatch,
    #[error("residue ring cardinality {0} exceeds the enumeration bound {1}")]
    CardinalityBound(u128, u128),
    #[error("field table requires a prime modulus (exponent 1), got exponent {0}")]
    NotAField(u32),
    #[error("layer index {0} out of range ({1} layers)")]
    LayerIndex(usize, usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid code: {0}")]
    InvalidCode(String),
    #[error("code has no nonzero codeword")]
    NoNonzeroCodeword,
    #[error("enumeration bound exceeded: {0}")]
    BoundExceeded(String),
    #[error("degenerate probability vector: {0}")]
    DegeneratePrior(String),
    #[error("point is not a lattice member")]
    NotInLattice,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("internal invariant violated: {0}")]
    Internal(&'static str),
}
