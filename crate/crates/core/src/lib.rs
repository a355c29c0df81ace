//! Exact computations in free-field and lattice vertex algebras.
//!
//! The crate is organised bottom-up:
//!
//! - [`fock`]: generator systems, canonical mode monomials, exact mode action.
//! - [`ope`]: the products `a_(j) b`, singular OPE parts, locality and
//!   translation checks, and an independent Wick-contraction oracle.
//! - [`superconf`]: Virasoro and N=2 structures, mirror involution,
//!   topological twist, `(y, q)` supertrace tables.
//! - [`toric`]: reflexive polytope pairs, cones, fans and lattice points.
//! - [`lattice`]: the lattice vertex algebra `Fock_{M+N}` with its
//!   fan-deformed product and the Calabi-Yau N=2 fields.
//! - [`linalg`]: exact sparse rank computation.
//! - [`brst`]: BRST operator, graded blocks and cohomology reports.

pub mod brst;
pub mod fock;
pub mod lattice;
pub mod linalg;
pub mod ope;
pub mod rational;
pub mod superconf;
pub mod toric;

pub use fock::{GenId, GeneratorSystem, ModeSymbol, Monomial, Parity, Sector, State};
pub use rational::Q;
