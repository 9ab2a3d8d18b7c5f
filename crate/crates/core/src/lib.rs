//! Continuous renormalization-group construction of quasi-periodic solutions
//! of `theta'' = -lambda grad v(theta)` with frequency `omega`.
//!
//! The kernel hierarchy `w_n` of the effective force is flowed in a cutoff
//! time `t` ([`flow`]), the conjugacy hierarchy `f_n` is flowed alongside
//! ([`conjugacy`]), and the torus is read off as `x = f_0(t_end)`. The
//! [`oracles`] module checks the result against a Lindstedt series, a dense
//! Newton solver and the residual of the equation of motion.
//!
//! ```
//! use kam_rg::lattice::{FrequencyVector, TruncationBox};
//! use kam_rg::potential::AnalyticPotential;
//! use kam_rg::oracles::newton_solve;
//!
//! let v = AnalyticPotential::cosine_sum(2);
//! let bx = TruncationBox::new(2, 4).unwrap();
//! let report = newton_solve(&v, 1e-2, &FrequencyVector::golden(), &bx, None).unwrap();
//! assert!(report.converged);
//! ```

pub mod config;
pub mod conjugacy;
pub mod cutoff;
pub mod error;
pub mod flow;
pub mod io;
pub mod kernels;
pub mod lattice;
pub mod oracles;
pub mod pipeline;
pub mod potential;
pub mod spectral;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/cutoff.md")]
    mod cutoff {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/flow.md")]
    mod flow {}
    #[doc = include_str!("../../../book/src/torus.md")]
    mod torus {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
