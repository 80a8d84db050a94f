//! Independent numerical oracles used by the test suites.
//!
//! Nothing here may call into the library under test: every routine takes the
//! long way round (brute-force quadrature, explicit matrix algebra, 1-D
//! search) so that agreement with the fast implementations is evidence, not
//! tautology.

pub mod bf_oracle;
pub mod ols_oracle;
pub mod search;
pub mod stats;
