//! Item feature channels for the hybrid factorization model.

mod dense;
mod sparse;

pub use dense::{format_sig9, DenseItemEmbeddings};
pub use sparse::{build_identity_features, build_tag_features, build_tfidf_features, FeatureKind, FeatureMatrix};
