//! Nominal logistic biplots.
//!
//! A multinomial logistic latent-trait model is fitted to a table of nominal
//! variables ([`em::fit_em`]). Each fitted variable induces a convex
//! tessellation of the score plane into prediction regions
//! ([`geometry::build_tessellation`]), and each tessellation is inverted into
//! a set of Voronoi generators, the category points
//! ([`voronoi::invert_tessellation`]), so that every row is predicted by
//! its nearest category point.

pub mod data;
pub mod em;
pub mod error;
pub mod geometry;
mod linalg;
pub mod model;
pub mod mstep;
pub mod voronoi;

pub use data::{indicator_of, IndicatorMatrix, NominalDataset, ScoreMatrix};
pub use em::{fit_em, EmConfig, QuadratureGrid};
pub use error::{DataError, FitError, GeometryError, InversionError};
pub use geometry::{build_tessellation, predict_category, BoundingBox, PlanarPredictor, PredictionTessellation};
pub use model::{category_probabilities, Baseline, BiplotModel, VariableParams};
pub use mstep::{fit_variable, RidgeConfig};
pub use voronoi::{assemble_system, diagram_agreement, invert_tessellation, solve_generators, Algorithm, CategoryPoints};
