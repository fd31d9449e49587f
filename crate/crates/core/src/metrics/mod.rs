//! No-reference quality metrics: LOE, NIQE and BRISQUE features.

mod batch;
mod brisque;
mod loe;
mod niqe;
mod nss;

pub use batch::{
    evaluate_batch, Aggregate, EvalItem, EvalOptions, Metric, MetricRecord, MetricReport,
};
pub use brisque::{brisque_features, BRISQUE_DIM};
pub use loe::{loe, loe_bruteforce, loe_sample_dims, BRUTE_FORCE_MAX_PIXELS, DEFAULT_LOE_GRID};
pub use niqe::{
    gaussian_distance, niqe, niqe_feature_stats, niqe_features, niqe_patch_features, niqe_score,
    NiqeModel, NiqeVector, NIQE_DIM,
};
pub use nss::{
    fit_aggd, fit_ggd, generalized_gaussian_ratio, luminance_255, mscn, mscn_with_deviation,
    neighbour_products, nss_features, shape_from_ratio, AggdFit, GgdFit, Mscn, MscnParams,
};
