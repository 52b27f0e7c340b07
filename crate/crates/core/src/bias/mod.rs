//! Bias measures: WEAT association deltas and effect sizes, permutation
//! significance, and comparisons of scores across models.

mod permutation;
mod spec;
mod weat;

pub use permutation::{
    binomial, PermutationConfig, PermutationInfo, PermutationMethod, PermutationUniverse,
};
pub use spec::{WeatTestSpec, BUILTIN_SPECS};
pub use weat::{
    association_delta, resolve, weat, weat_effect_size, weat_p_value, weat_statistics, ListSizes,
    OovReport, ResolvedSpec, WeatResult, WeatStatistics,
};

use crate::error::{Error, Result};
use crate::scalar::{sample_variance, Scalar};

/// Conservative-model score minus liberal-model score.
pub fn delta_accuracy<T: Scalar>(score_conservative: T, score_liberal: T) -> Result<T> {
    if !score_conservative.is_finite() || !score_liberal.is_finite() {
        return Err(Error::InvalidInput("delta of non-finite scores".into()));
    }
    Ok(score_conservative - score_liberal)
}

/// Sample variance of WEAT values of one data subset across algorithms.
pub fn cross_algorithm_variance<T: Scalar>(scores: &[T]) -> Result<T> {
    sample_variance(scores).ok_or_else(|| {
        Error::InvalidInput("variance needs at least two scores".into())
    })
}
