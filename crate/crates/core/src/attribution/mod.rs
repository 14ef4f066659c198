//! Integrated Gradients along straight paths, averaged over baseline
//! distributions, with completeness diagnostics and class-level aggregation.

mod baseline;
mod ig;
mod report;
mod toy;

pub use baseline::{build_baseline, BaselineSpace, BaselineSpec, BaselineTag};
pub use ig::{
    averaged_ig, completeness_check, integrated_gradients, quadrature, AffineFunction,
    AttributionTarget, AttributionVector, CompletenessReport, IgConfig, QuadratureRule,
};
pub use report::{class_attribution, rank_descending, AttributionReport};
pub use toy::{ZeroBlindnessToy, BLIND_FEATURE};
