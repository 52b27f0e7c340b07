use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias::{weat_effect_size, WeatTestSpec};
use crate::corpus::{build_vocab, Corpus, Orientation, SliceFilter, TokenizeConfig, VocabPolicy};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sgns::{train, TrainConfig};

/// One model per (orientation, year), all trained with the same
/// configuration and each with its own vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalPlan {
    pub orientations: Vec<Orientation>,
    pub from: i32,
    pub to: i32,
    pub config: TrainConfig,
    pub vocab: VocabPolicy,
    pub tokenize: TokenizeConfig,
    pub measures: Vec<WeatTestSpec>,
}

impl TemporalPlan {
    pub fn years(&self) -> std::ops::RangeInclusive<i32> {
        self.from..=self.to
    }

    pub fn validate(&self) -> Result<()> {
        if self.from > self.to {
            return Err(Error::Config(format!("empty year range {}..{}", self.from, self.to)));
        }
        if self.orientations.is_empty() {
            return Err(Error::Config("no orientations".into()));
        }
        if self.measures.is_empty() {
            return Err(Error::Config("no measures".into()));
        }
        self.measures.iter().try_for_each(WeatTestSpec::validate)?;
        self.config.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearCount {
    pub orientation: Orientation,
    pub year: i32,
    pub articles: usize,
}

/// Where the articles of the selected orientations went.
/// `dated + dated_outside_range + undated == total`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalAccounting {
    pub counts: Vec<YearCount>,
    /// Articles used by the year models.
    pub dated: usize,
    pub dated_outside_range: usize,
    /// Articles without a year, excluded from every year model.
    pub undated: usize,
    pub total: usize,
}

impl TemporalAccounting {
    pub fn count(&self, orientation: Orientation, year: i32) -> Option<usize> {
        self.counts
            .iter()
            .find(|c| c.orientation == orientation && c.year == year)
            .map(|c| c.articles)
    }
}

/// Count the articles each (orientation, year) model would use.
pub fn temporal_accounting(
    corpus: &Corpus,
    orientations: &[Orientation],
    years: std::ops::RangeInclusive<i32>,
) -> TemporalAccounting {
    let by_year = corpus.year_counts();
    let mut acc = TemporalAccounting {
        counts: Vec::new(),
        dated: 0,
        dated_outside_range: 0,
        undated: 0,
        total: 0,
    };
    let empty = BTreeMap::new();
    let mut seen = Vec::new();
    for &o in orientations {
        if seen.contains(&o) {
            continue;
        }
        seen.push(o);
        let counts = by_year.get(&o).unwrap_or(&empty);
        for (year, &n) in counts {
            acc.total += n;
            match year {
                None => acc.undated += n,
                Some(y) if years.contains(y) => acc.dated += n,
                Some(_) => acc.dated_outside_range += n,
            }
        }
        for year in years.clone() {
            let articles = counts.get(&Some(year)).copied().unwrap_or(0);
            acc.counts.push(YearCount { orientation: o, year, articles });
        }
    }
    acc
}

/// Ordinary least squares line through `(x, y)` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; needs at least three points.
    pub slope_se: Option<f64>,
    pub points: usize,
}

/// `None` with fewer than two distinct x values.
pub fn ols(points: &[(f64, f64)]) -> Option<OlsFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = (n > 2).then(|| {
        let ssr: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    });
    Some(OlsFit { slope, intercept, slope_se, points: n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalPoint {
    pub year: i32,
    pub articles: usize,
    /// Effect size; `None` marks a missing point.
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalSeries {
    pub orientation: Orientation,
    pub measure: String,
    pub points: Vec<TemporalPoint>,
    pub fit: Option<OlsFit>,
}

impl TemporalSeries {
    /// Populated `(year, value)` pairs.
    pub fn populated(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.value.map(|v| (f64::from(p.year), v)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalResult {
    pub series: Vec<TemporalSeries>,
    pub accounting: TemporalAccounting,
    pub plan: TemporalPlan,
    pub version: String,
}

impl TemporalResult {
    pub fn series(&self, orientation: Orientation, measure: &str) -> Option<&TemporalSeries> {
        self.series
            .iter()
            .find(|s| s.orientation == orientation && s.measure == measure)
    }

    /// Verify that every fit matches its points and that the article counts
    /// of the points add up to the dated total.
    pub fn check(&self) -> Result<()> {
        let inconsistent = |m: String| Err(Error::InvalidInput(format!("inconsistent temporal result: {m}")));
        for s in &self.series {
            if ols(&s.populated()) != s.fit {
                return inconsistent(format!("fit of {} {} does not match its points", s.orientation, s.measure));
            }
            if s.points.iter().any(|p| p.value.is_some_and(|v| !v.is_finite())) {
                return inconsistent(format!("{} {} has a non-finite value", s.orientation, s.measure));
            }
        }
        let mut per_cell: BTreeMap<(Orientation, i32), usize> = BTreeMap::new();
        for s in &self.series {
            for p in &s.points {
                let prev = per_cell.insert((s.orientation, p.year), p.articles);
                if prev.is_some_and(|n| n != p.articles) {
                    return inconsistent(format!("{} {} has conflicting article counts", s.orientation, p.year));
                }
            }
        }
        let used: usize = per_cell.values().sum();
        if !self.series.is_empty() && used != self.accounting.dated {
            return inconsistent(format!("points use {used} articles, {} are dated", self.accounting.dated));
        }
        Ok(())
    }
}

/// Train one model per (orientation, year) of `plan` and score every
/// measure on it. Undated articles are excluded. Years without articles, or
/// whose model fails, are missing points; the regression uses the rest.
pub fn temporal_run<T: Scalar>(corpus: &Corpus, plan: &TemporalPlan) -> Result<TemporalResult> {
    plan.validate()?;
    let accounting = temporal_accounting(corpus, &plan.orientations, plan.years());
    let models: Vec<(YearCount, Result<Vec<Result<f64>>>)> = accounting
        .counts
        .par_iter()
        .map(|&count| {
            let scores = (|| {
                if count.articles == 0 {
                    return Err(Error::InvalidInput("no dated articles".into()));
                }
                let view = corpus.slice(&SliceFilter::new([count.orientation], [count.year]));
                let vocab = build_vocab(&view, plan.vocab, &plan.tokenize)?;
                let trained = train::<T>(&view, &vocab, &plan.config, &plan.tokenize)?;
                Ok(plan
                    .measures
                    .iter()
                    .map(|spec| weat_effect_size(spec, &trained.space).map(|r| r.effect_size))
                    .collect())
            })();
            (count, scores)
        })
        .collect();

    let mut series = Vec::new();
    let mut seen = Vec::new();
    for &o in &plan.orientations {
        if seen.contains(&o) {
            continue;
        }
        seen.push(o);
        for (m, spec) in plan.measures.iter().enumerate() {
            let points: Vec<TemporalPoint> = models
                .iter()
                .filter(|(c, _)| c.orientation == o)
                .map(|(c, scores)| {
                    let score = match scores {
                        Ok(s) => match &s[m] {
                            Ok(v) => Ok(*v),
                            Err(e) => Err(e.to_string()),
                        },
                        Err(e) => Err(e.to_string()),
                    };
                    TemporalPoint {
                        year: c.year,
                        articles: c.articles,
                        value: score.as_ref().ok().copied(),
                        error: score.err(),
                    }
                })
                .collect();
            let mut s = TemporalSeries { orientation: o, measure: spec.name.clone(), points, fit: None };
            s.fit = ols(&s.populated());
            series.push(s);
        }
    }
    let result = TemporalResult {
        series,
        accounting,
        plan: plan.clone(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
    };
    result.check()?;
    Ok(result)
}
