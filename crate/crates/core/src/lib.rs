//! Set-valued barycentric rational approximation.

pub mod aaa;
pub mod barycentric;
pub mod commands;
pub mod error;
pub mod io;
pub mod linalg;
pub mod pqr;
pub mod problems;
pub mod qr_aaa;

pub use barycentric::{
    evaluate, evaluate_grid, node_polynomial_max, node_polynomial_max_on, Axis, BarycentricModel, Chart, HistoryEntry,
    SampleGrid,
};
pub use error::{Error, Result};

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/library.md")]
    mod library {}
    #[doc = include_str!("../../../book/src/parallel.md")]
    mod parallel {}
    #[doc = include_str!("../../../book/src/accuracy.md")]
    mod accuracy {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
