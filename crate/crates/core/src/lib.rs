//! Translating natural-language questions into SPARQL over a knowledge base
//! with a jointly trained entity tagger and template translator.

pub mod assemble;
pub mod cli;
pub mod eval;
pub mod kb;
pub mod linalg;
pub mod neural;
pub mod qqt;
pub mod scalar;
pub mod sparql;
pub mod synthetic;
pub mod text;

/// Scalar type used by the command line and the file formats.
pub type Real = f64;
pub type Matrix = linalg::Mat<Real>;
pub type Model = neural::ModelParams<Real>;
pub type NetworkWeights = neural::Weights<Real>;
pub type Embeddings = text::EmbeddingTable<Real>;
