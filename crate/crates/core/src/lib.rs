//! Numerical thermodynamic formalism for the entire family
//! `f_{ℓ,c}(z) = ℓz + c − (ℓ−1)·log c − e^z`, `c ∈ D(ℓ, 1)`, projected to
//! the cylinder `ℂ / 2πiℤ`.
//!
//! The crate enumerates preimages, iterates the transfer operator
//! `L_t g(z) = Σ_{F(x)=z} |F'(x)|^{-t} g(x)`, estimates the topological
//! pressure `P(t)`, and locates its zero `t*`, the Hausdorff dimension of
//! the radial Julia set. See the `book/` directory for a guided tour.

pub mod analysis;
pub mod classify;
pub mod cli;
pub mod dimension;
pub mod dynamics;
pub mod error;
pub mod preimage;
pub mod roots;
pub mod transfer;

pub use dynamics::{CylinderPoint, MapParams};
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cylinder.md")]
    mod cylinder {}
    #[doc = include_str!("../../../book/src/preimages.md")]
    mod preimages {}
    #[doc = include_str!("../../../book/src/transfer.md")]
    mod transfer {}
    #[doc = include_str!("../../../book/src/dimension.md")]
    mod dimension {}
    #[doc = include_str!("../../../book/src/parameters.md")]
    mod parameters {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
