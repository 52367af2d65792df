//! Thermoacoustic / photoacoustic source reconstruction with variable sound
//! speed.
//!
//! Boundary measurements `h = Lambda f` are synthesized by a PML-truncated
//! staggered wave solver ([`wave`]). The source is recovered by the Neumann
//! series `f = sum_m K^m A h` ([`neumann`]), where `A` is time reversal with
//! harmonic-extension terminal data ([`time_reversal`], [`elliptic`]) and
//! `K = Id - A Lambda`. The [`eikonal`] and [`rays`] modules provide the
//! travel-time and geodesic diagnostics that predict when the series is
//! stable.

pub mod boundary;
pub mod eikonal;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod io;
pub mod neumann;
pub mod phantom;
pub mod rays;
pub mod speed;
pub mod time_reversal;
pub mod wave;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grids-and-speeds.md")]
    mod grids_and_speeds {}
    #[doc = include_str!("../../../book/src/wave-solver.md")]
    mod wave_solver {}
    #[doc = include_str!("../../../book/src/time-reversal.md")]
    mod time_reversal {}
    #[doc = include_str!("../../../book/src/neumann-series.md")]
    mod neumann_series {}
    #[doc = include_str!("../../../book/src/travel-times-and-rays.md")]
    mod travel_times_and_rays {}
    #[doc = include_str!("../../../book/src/phantoms-and-files.md")]
    mod phantoms_and_files {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    mod acceptance {}
}
