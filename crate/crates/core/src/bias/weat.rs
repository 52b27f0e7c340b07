use serde::{Deserialize, Serialize};

use super::permutation::{PermutationConfig, PermutationInfo, PermutationUniverse};
use super::spec::WeatTestSpec;
use crate::embedding::{cosine, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::scalar::{mean, sample_variance, Scalar};

/// `mean_{g∈G} cos(w, g) − mean_{g̃∈G̃} cos(w, g̃)`.
pub fn association_delta<T: Scalar>(w: &[T], group: &[&[T]], other: &[&[T]]) -> Result<T> {
    if group.is_empty() || other.is_empty() {
        return Err(Error::InvalidInput("association needs two non-empty groups".into()));
    }
    let mean_cos = |set: &[&[T]]| -> Result<T> {
        let cos = set.iter().map(|g| cosine(w, g)).collect::<Result<Vec<T>>>()?;
        Ok(mean(&cos).expect("set is non-empty"))
    };
    Ok(mean_cos(group)? - mean_cos(other)?)
}

fn unit<T: Scalar>(v: &[T]) -> Result<Vec<T>> {
    let n = crate::embedding::norm(v);
    if n == T::zero() {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|&x| x / n).collect())
}

/// Mean of unit vectors; `w · centroid / |w|` is then the mean cosine of `w`
/// to the set.
fn unit_centroid<T: Scalar>(set: &[&[T]], dim: usize) -> Result<Vec<T>> {
    let mut c = vec![T::zero(); dim];
    for v in set {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { left: dim, right: v.len() });
        }
        for (ci, ui) in c.iter_mut().zip(unit(v)?) {
            *ci += ui;
        }
    }
    let n = T::of(set.len() as f64);
    c.iter_mut().for_each(|x| *x /= n);
    Ok(c)
}

/// Deltas of both attribute lists and the statistics derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatStatistics<T> {
    pub deltas_1: Vec<T>,
    pub deltas_2: Vec<T>,
    /// `mean(deltas_1) − mean(deltas_2)`.
    pub difference: T,
    /// Sample standard deviation of all deltas.
    pub std_dev: T,
    pub effect_size: T,
}

/// Effect size from resolved vectors. Centroids of the unit group vectors are
/// computed once, so each attribute word costs one dot product.
pub fn weat_statistics<T: Scalar>(
    group_1: &[&[T]],
    group_2: &[&[T]],
    attribute_1: &[&[T]],
    attribute_2: &[&[T]],
) -> Result<WeatStatistics<T>> {
    for (name, list) in [
        ("group_1", group_1),
        ("group_2", group_2),
        ("attribute_1", attribute_1),
        ("attribute_2", attribute_2),
    ] {
        if list.is_empty() {
            return Err(Error::EmptyList { list: name.into() });
        }
    }
    let dim = group_1[0].len();
    let c1 = unit_centroid(group_1, dim)?;
    let c2 = unit_centroid(group_2, dim)?;
    let direction: Vec<T> = c1.iter().zip(&c2).map(|(&a, &b)| a - b).collect();
    let delta = |w: &&[T]| -> Result<T> {
        if w.len() != dim {
            return Err(Error::DimensionMismatch { left: dim, right: w.len() });
        }
        let u = unit(w)?;
        Ok(u.iter().zip(&direction).fold(T::zero(), |acc, (&x, &y)| acc + x * y))
    };
    let deltas_1 = attribute_1.iter().map(delta).collect::<Result<Vec<T>>>()?;
    let deltas_2 = attribute_2.iter().map(delta).collect::<Result<Vec<T>>>()?;
    let all: Vec<T> = deltas_1.iter().chain(&deltas_2).copied().collect();
    if all.len() < 2 {
        return Err(Error::Degenerate(
            "the attribute lists need at least two words in total".into(),
        ));
    }
    let std_dev = sample_variance(&all).expect("two or more deltas").sqrt();
    let scale = all.iter().fold(T::zero(), |m, d| m.max(d.abs()));
    if std_dev <= T::of(8.0) * T::epsilon() * scale || std_dev == T::zero() {
        return Err(Error::Degenerate(
            "all attribute words have the same association delta".into(),
        ));
    }
    let difference = mean(&deltas_1).expect("non-empty") - mean(&deltas_2).expect("non-empty");
    Ok(WeatStatistics {
        deltas_1,
        deltas_2,
        difference,
        std_dev,
        effect_size: difference / std_dev,
    })
}

/// Per-list word counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListSizes {
    pub group_1: usize,
    pub group_2: usize,
    pub attribute_1: usize,
    pub attribute_2: usize,
}

/// Words without an embedding, per list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OovReport {
    pub group_1: Vec<String>,
    pub group_2: Vec<String>,
    pub attribute_1: Vec<String>,
    pub attribute_2: Vec<String>,
}

impl OovReport {
    pub fn total(&self) -> usize {
        self.group_1.len() + self.group_2.len() + self.attribute_1.len() + self.attribute_2.len()
    }
}

/// Vectors of the in-vocabulary words of a spec.
#[derive(Debug, Clone)]
pub struct ResolvedSpec<'a, T> {
    pub group_1: Vec<&'a [T]>,
    pub group_2: Vec<&'a [T]>,
    pub attribute_1: Vec<&'a [T]>,
    pub attribute_2: Vec<&'a [T]>,
    pub oov: OovReport,
}

impl<T> ResolvedSpec<'_, T> {
    pub fn sizes(&self) -> ListSizes {
        ListSizes {
            group_1: self.group_1.len(),
            group_2: self.group_2.len(),
            attribute_1: self.attribute_1.len(),
            attribute_2: self.attribute_2.len(),
        }
    }
}

pub fn resolve<'a, T: Scalar>(spec: &WeatTestSpec, space: &'a EmbeddingSpace<T>) -> ResolvedSpec<'a, T> {
    let split = |words: &[String]| {
        let mut found = Vec::new();
        let mut missing = Vec::new();
        for w in words {
            match space.lookup(w).vector() {
                Some(v) => found.push(v),
                None => missing.push(w.clone()),
            }
        }
        (found, missing)
    };
    let (group_1, oov_g1) = split(&spec.group_1);
    let (group_2, oov_g2) = split(&spec.group_2);
    let (attribute_1, oov_a1) = split(&spec.attribute_1);
    let (attribute_2, oov_a2) = split(&spec.attribute_2);
    ResolvedSpec {
        group_1,
        group_2,
        attribute_1,
        attribute_2,
        oov: OovReport {
            group_1: oov_g1,
            group_2: oov_g2,
            attribute_1: oov_a1,
            attribute_2: oov_a2,
        },
    }
}

/// One WEAT evaluation of a spec against a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatResult {
    pub spec: String,
    pub effect_size: f64,
    /// Set when `|effect_size| > 2`, possible under the sample standard
    /// deviation for small lists. The value is never clamped.
    pub exceeds_nominal_range: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<PermutationInfo>,
    pub original_sizes: ListSizes,
    pub resolved_sizes: ListSizes,
    pub oov: OovReport,
}

fn statistics_for<T: Scalar>(
    spec: &WeatTestSpec,
    resolved: &ResolvedSpec<'_, T>,
) -> Result<WeatStatistics<T>> {
    let lists = [
        ("group_1", resolved.group_1.is_empty()),
        ("group_2", resolved.group_2.is_empty()),
        ("attribute_1", resolved.attribute_1.is_empty()),
        ("attribute_2", resolved.attribute_2.is_empty()),
    ];
    if let Some((name, _)) = lists.iter().find(|(_, empty)| *empty) {
        return Err(Error::EmptyList {
            list: format!("{} {name}", spec.name),
        });
    }
    weat_statistics(
        &resolved.group_1,
        &resolved.group_2,
        &resolved.attribute_1,
        &resolved.attribute_2,
    )
}

fn sizes_of(spec: &WeatTestSpec) -> ListSizes {
    ListSizes {
        group_1: spec.group_1.len(),
        group_2: spec.group_2.len(),
        attribute_1: spec.attribute_1.len(),
        attribute_2: spec.attribute_2.len(),
    }
}

/// Effect size with OOV words removed and reported.
pub fn weat_effect_size<T: Scalar>(spec: &WeatTestSpec, space: &EmbeddingSpace<T>) -> Result<WeatResult> {
    weat(spec, space, None)
}

/// Effect size plus, when `permutations` is given, a one-sided permutation
/// p-value.
pub fn weat<T: Scalar>(
    spec: &WeatTestSpec,
    space: &EmbeddingSpace<T>,
    permutations: Option<&PermutationConfig>,
) -> Result<WeatResult> {
    let resolved = resolve(spec, space);
    let stats = statistics_for(spec, &resolved)?;
    let effect_size = stats.effect_size.as_f64();
    let (p_value, permutation) = match permutations {
        Some(cfg) => {
            let universe = PermutationUniverse::new(&stats.deltas_1, &stats.deltas_2, cfg);
            let p = universe.p_value(universe.observed());
            (Some(p), Some(universe.info()))
        }
        None => (None, None),
    };
    if resolved.oov.total() > 0 {
        log::info!("{}: {} OOV words ignored", spec.name, resolved.oov.total());
    }
    Ok(WeatResult {
        spec: spec.name.clone(),
        effect_size,
        exceeds_nominal_range: effect_size.abs() > 2.0,
        p_value,
        permutation,
        original_sizes: sizes_of(spec),
        resolved_sizes: resolved.sizes(),
        oov: resolved.oov,
    })
}

/// p-value alone.
pub fn weat_p_value<T: Scalar>(
    spec: &WeatTestSpec,
    space: &EmbeddingSpace<T>,
    n_permutations: usize,
    seed: u64,
) -> Result<f64> {
    let cfg = PermutationConfig { permutations: n_permutations, seed, ..Default::default() };
    let result = weat(spec, space, Some(&cfg))?;
    Ok(result.p_value.expect("permutations were requested"))
}
