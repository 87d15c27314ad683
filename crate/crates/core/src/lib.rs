//! Non-action shot classification and segment-weighted action recognition over
//! per-frame descriptor streams.
//!
//! Pipeline: [`dataset`] manifests and descriptor files are encoded into
//! frame-wise Fisher Vectors by [`encoding`]; [`nonaction`] trains a shot
//! classifier from the resulting shot features; [`pooling`] and [`darwin`]
//! use its scores to build video representations; [`eval`] measures them.

pub mod container;
pub mod darwin;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod models;
pub mod nonaction;
pub mod pooling;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $path))]
            mod $name {}
        };
    }
    chapter!(introduction, "introduction.md");
    chapter!(fisher, "fisher-vectors.md");
    chapter!(classifiers, "classifiers.md");
    chapter!(nonaction, "non-action.md");
    chapter!(pooling, "pooling.md");
    chapter!(darwin, "rank-pooling.md");
    chapter!(evaluation, "evaluation.md");
    chapter!(cli, "cli.md");
}
