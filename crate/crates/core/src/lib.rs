//! Exact computer algebra for depth-4 lower-bound ingredients and
//! determinantal-complexity witnesses of the iterated matrix product.
//!
//! * [`algebra`]: prime fields, big integers and rationals, binomials,
//!   factorial-ratio logarithms.
//! * [`poly`]: monomials, lexicographic order, monomial distance, sparse
//!   polynomials.
//! * [`spanspace`]: derivative spans, shifted spans, exact ranks.
//! * [`families`]: design polynomials, iterated matrix products, restricted
//!   leading-monomial families, depth-4 circuits.
//! * [`bounds`]: extension counting and the circuit-size parameter engine.
//! * [`witness`]: Hessians of the matrix product and of the determinant, and
//!   the inductive zero-point construction.
//! * [`suites`]: seeded randomized check harnesses shared by the CLI and the
//!   acceptance tests.

pub mod algebra;
pub mod poly;
pub mod spanspace;
pub mod families;
pub mod bounds;
pub mod witness;
pub mod suites;
