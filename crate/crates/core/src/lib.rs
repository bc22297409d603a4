//! Numerical laboratory for the occupation time of the opposite quadrants
//! `T = Leb{t in [0,1]: X(t)·Y(t) > 0}` of a planar Brownian motion started
//! at the origin.
//!
//! Three independent routes to the resolvent functional `E[1/(alpha + lambda T)]`
//! are implemented and cross-checked:
//!
//! * [`sim`] — direct Monte Carlo simulation of discretized paths,
//! * [`pde`] — a finite-difference solve of the piecewise-constant-coefficient
//!   Helmholtz problem `(1/2)ΔU − βU + 1 = 0` on a truncated domain,
//! * [`spectral`] — a Kontorovich–Lebedev expansion in each quadrant whose
//!   unknown signed measures are fitted by regularized least squares against
//!   the axis-pasting equation.
//!
//! Supporting modules: [`special`] evaluates the modified Bessel function of
//! imaginary order `K_{iν}(x)` and verifies the transform identities the
//! spectral route is built on; [`oracle`] provides closed-form ground truth
//! (arcsine law, Gaussian orthant probabilities, occupation-time moments);
//! [`quad`] holds the quadrature and extrapolation kernels shared by all of
//! the above.
//!
//! The crate is `no_std` (with `alloc`); everything is deterministic given
//! its inputs, including the Monte Carlo engine, which draws from
//! counter-based per-path streams.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod oracle;
pub mod pde;
pub mod quad;
pub mod rng;
pub mod sim;
pub mod special;
pub mod spectral;

pub use oracle::{arcsine_cdf, ks_threshold, moment, orthant3, sign_pair_prob, MomentResult, Region};
pub use pde::{BoundaryKind, Field, GridSpec};
pub use sim::{EmpiricalDistribution, OccupationSampleSet, SimConfig};
pub use special::{BesselEval, IdentityReport};
pub use spectral::{Measure, Params, SpectralSolution};
