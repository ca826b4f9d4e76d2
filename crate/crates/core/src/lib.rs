pub mod ane;
pub mod classifier;
pub mod datagen;
pub mod diffcore;
pub mod error;
pub mod eval;
pub mod integrity;
pub mod io;
pub mod lexicon;
pub mod phonetics;
pub mod rewriter;
pub mod rule;
pub mod textmetrics;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/phonetics.md")]
    mod phonetics {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/rewriters.md")]
    mod rewriters {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
