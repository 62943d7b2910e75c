//! Feature-importance fusion for tabular classification.
//!
//! The pipeline trains an ensemble of classifiers, computes importance
//! coefficients with several techniques (permutation importance, exact
//! Shapley values, local surrogate models), and fuses the resulting tensor
//! of coefficients with crisp statistics and fuzzy linguistic labels.

pub mod data;
pub mod explain;
pub mod fuse;
pub mod fuzzy;
pub mod models;
pub mod pipeline;
pub mod plot;
pub mod stats;
