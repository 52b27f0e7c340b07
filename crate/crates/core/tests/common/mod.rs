//! Oracles and fixtures shared by the integration tests. The oracles are
//! straight transcriptions of the definitions and share no code with the
//! library.

#![allow(dead_code)]

use std::collections::HashMap;

use biasaudit::bias::WeatTestSpec;
use biasaudit::corpus::{Article, Corpus, Orientation, SubLabel};
use biasaudit::synthetic::PlantedBias;
use biasaudit::Embeddings64;

pub fn oracle_cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nu * nv)
}

/// WEAT effect size by enumerating every attribute-group cosine, with the
/// sample standard deviation.
pub fn oracle_weat(spec: &WeatTestSpec, space: &Embeddings64) -> f64 {
    let vec = |w: &String| space.get(w).expect("oracle instances have no OOV words");
    let delta = |w: &String| {
        let g: f64 = spec.group_1.iter().map(|g| oracle_cosine(vec(w), vec(g))).sum::<f64>()
            / spec.group_1.len() as f64;
        let h: f64 = spec.group_2.iter().map(|g| oracle_cosine(vec(w), vec(g))).sum::<f64>()
            / spec.group_2.len() as f64;
        g - h
    };
    let d1: Vec<f64> = spec.attribute_1.iter().map(delta).collect();
    let d2: Vec<f64> = spec.attribute_2.iter().map(delta).collect();
    let all: Vec<f64> = d1.iter().chain(&d2).copied().collect();
    let n = all.len() as f64;
    let m = all.iter().sum::<f64>() / n;
    let sd = (all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let m1 = d1.iter().sum::<f64>() / d1.len() as f64;
    let m2 = d2.iter().sum::<f64>() / d2.len() as f64;
    (m1 - m2) / sd
}

/// Rank of each value: one plus the number of smaller values plus half the
/// number of other equal values.
pub fn definitional_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&o| o < v).count() as f64;
            let equal = x.iter().filter(|&&o| o == v).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx.sqrt() * syy.sqrt())
}

pub fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
    oracle_pearson(&definitional_ranks(x), &definitional_ranks(y))
}

/// Every permutation of `items`.
pub fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head.clone());
            out.push(p);
        }
    }
    out
}

/// Positive pointwise mutual information of two tokens over sentence
/// co-occurrence within `window`.
pub fn ppmi(sentences: &[Vec<String>], window: usize) -> impl Fn(&str, &str) -> f64 {
    let mut pair: HashMap<(String, String), f64> = HashMap::new();
    let mut single: HashMap<String, f64> = HashMap::new();
    let mut total = 0.0;
    for s in sentences {
        for (i, w) in s.iter().enumerate() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(s.len() - 1);
            for (j, c) in s.iter().enumerate().take(hi + 1).skip(lo) {
                if i != j {
                    *pair.entry((w.clone(), c.clone())).or_default() += 1.0;
                    *single.entry(w.clone()).or_default() += 1.0;
                    total += 1.0;
                }
            }
        }
    }
    move |a: &str, b: &str| {
        let joint = pair.get(&(a.to_owned(), b.to_owned())).copied().unwrap_or(0.0);
        if joint == 0.0 {
            return 0.0;
        }
        let pa = single[a] / total;
        let pb = single[b] / total;
        ((joint / total) / (pa * pb)).ln().max(0.0)
    }
}

/// Per-year article counts of a rated news collection, split by
/// five-level rating, 2010 through 2021, then the undated count.
pub const YEAR_COUNTS: [(SubLabel, [usize; 13]); 5] = [
    (SubLabel::Left, [3955, 5847, 9679, 9133, 17186, 22018, 20767, 19301, 15962, 14892, 18494, 22193, 24043]),
    (SubLabel::LeanLeft, [604, 2106, 4290, 4341, 4499, 4220, 2133, 2001, 1679, 1650, 2119, 4921, 47365]),
    (SubLabel::Center, [4800, 3100, 5023, 3584, 6304, 7558, 7832, 6045, 7299, 8756, 11621, 10218, 7535]),
    (SubLabel::LeanRight, [2392, 2521, 4083, 3203, 3617, 3659, 2715, 3814, 5259, 4434, 7583, 15382, 16298]),
    (SubLabel::Right, [1486, 2225, 2541, 3463, 3642, 4263, 5723, 4901, 5608, 5790, 7214, 11944, 11965]),
];

pub const FIXTURE_TOTAL: usize = 520_798;
pub const FIXTURE_UNDATED: usize = 107_206;

/// One tiny article per counted article of [`YEAR_COUNTS`].
pub fn year_count_corpus() -> Corpus {
    let mut articles = Vec::with_capacity(FIXTURE_TOTAL);
    for (label, counts) in YEAR_COUNTS {
        for (i, &n) in counts.iter().enumerate() {
            let year = (i < 12).then_some(2010 + i as i32);
            for _ in 0..n {
                let id = articles.len();
                let article = Article::new(format!("t{id}"), "news text", "outlet", label.orientation(), year)
                    .unwrap()
                    .with_sub_label(label)
                    .unwrap();
                articles.push(article);
            }
        }
    }
    Corpus::from_articles(articles).unwrap()
}

/// Planted-bias articles for consecutive years starting at 2010, with
/// `biased[i]` biased words per attribute list in year `i`. Each year gets
/// its own generator seed derived from `seed`.
pub fn planted_years(
    spec: &WeatTestSpec,
    orientation: Orientation,
    biased: &[usize],
    sentences: usize,
    seed: u64,
) -> Vec<Article> {
    biased
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| {
            let p = PlantedBias {
                sentences,
                biased_attributes: Some(k),
                ..PlantedBias::new(spec.clone(), seed * 1000 + i as u64)
            };
            let prefix = format!("{}-{seed}-{i}", orientation.as_str());
            p.articles(&prefix, orientation, Some(2010 + i as i32), 10)
        })
        .collect()
}

/// Undated neutral articles of `per_article` sentences each.
pub fn sentence_corpus(sentences: &[String], per_article: usize) -> Corpus {
    let articles = sentences
        .chunks(per_article)
        .enumerate()
        .map(|(i, c)| Article::new(format!("s{i}"), c.join(" "), "synthetic", Orientation::Neutral, None).unwrap())
        .collect();
    Corpus::from_articles(articles).unwrap()
}

/// Textbook negative-sampling loss: `-ln σ(u·v) - Σ ln σ(-u·n)`.
pub fn oracle_ns_loss(u: &[f64], v: &[f64], negatives: &[Vec<f64>]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let sigma = |x: f64| 1.0 / (1.0 + (-x).exp());
    -sigma(dot(u, v)).ln() - negatives.iter().map(|n| sigma(-dot(u, n)).ln()).sum::<f64>()
}

/// Largest relative difference between the analytic gradients and central
/// finite differences of [`oracle_ns_loss`], over `trials` random pairs.
pub fn gradient_check(trials: u64, dim: usize, negatives: usize) -> f64 {
    use biasaudit::sgns::negative_sampling_gradients;
    use rand::{Rng, SeedableRng};
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..trials {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let u = draw();
        let v = draw();
        let ns: Vec<Vec<f64>> = (0..negatives).map(|_| draw()).collect();
        let refs: Vec<&[f64]> = ns.iter().map(Vec::as_slice).collect();
        let g = negative_sampling_gradients(&u, &v, &refs);
        let mut compare = |analytic: f64, plus: f64, minus: f64| {
            let numeric = (plus - minus) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / scale);
        };
        for d in 0..dim {
            let bump = |x: &[f64], s: f64| {
                let mut y = x.to_vec();
                y[d] += s;
                y
            };
            compare(g.input[d], oracle_ns_loss(&bump(&u, h), &v, &ns), oracle_ns_loss(&bump(&u, -h), &v, &ns));
            compare(g.positive[d], oracle_ns_loss(&u, &bump(&v, h), &ns), oracle_ns_loss(&u, &bump(&v, -h), &ns));
            for k in 0..negatives {
                let mut plus = ns.clone();
                plus[k][d] += h;
                let mut minus = ns.clone();
                minus[k][d] -= h;
                compare(g.negatives[k][d], oracle_ns_loss(&u, &v, &plus), oracle_ns_loss(&u, &v, &minus));
            }
        }
        assert!((g.loss - oracle_ns_loss(&u, &v, &ns)).abs() <= 1e-12);
    }
    worst
}

/// Total variation distance between `draws` negative samples and the
/// `count^0.75` distribution, over a Zipf-like vocabulary of `tokens` words.
pub fn negative_table_tv(tokens: usize, draws: usize, seed: u64) -> f64 {
    use biasaudit::corpus::{VocabPolicy, Vocabulary};
    use biasaudit::sgns::NegativeTable;
    use rand::SeedableRng;
    let counts: Vec<(String, u64)> = (1..=tokens).map(|r| (format!("w{r}"), 100_000 / r as u64 + 1)).collect();
    let vocab = Vocabulary::from_counts(counts.clone(), VocabPolicy::MinCount(1)).unwrap();
    let table = NegativeTable::new(&vocab, false).unwrap();
    let weight: HashMap<&str, f64> = counts.iter().map(|(t, c)| (t.as_str(), (*c as f64).powf(0.75))).collect();
    let total: f64 = weight.values().sum();
    let mut seen = vec![0usize; vocab.len()];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..draws {
        seen[table.sample(&mut rng)] += 1;
    }
    assert_eq!(seen[0], 0, "<unk> must not be drawn");
    (1..vocab.len())
        .map(|id| (seen[id] as f64 / draws as f64 - weight[vocab.token(id)] / total).abs())
        .sum::<f64>()
        / 2.0
}

/// A result table with a single WEAT cell.
pub fn one_cell_table() -> biasaudit::harness::ResultTable {
    use biasaudit::harness::{Cell, MeasureKind, Provenance, ResultTable, SliceSpec};
    let cell = Cell {
        algorithm: "sgns".into(),
        slice: "liberal".into(),
        measure: "gender".into(),
        kind: MeasureKind::Weat,
        value: Some(0.25),
        p_value: Some(0.03),
        evaluated: Some(32),
        skipped: Some(0),
        error: None,
        weat: None,
        similarity: None,
    };
    let provenance = Provenance {
        version: "test".into(),
        plan_hash: "abc".into(),
        seeds: vec![42],
        permutations: None,
        slices: vec![SliceSpec { name: "liberal".into(), filter: "orientation=liberal".into() }],
        spaces: Vec::new(),
    };
    ResultTable::new(vec![cell], provenance).unwrap()
}

/// A temporal result with one three-year series and its fit.
pub fn three_point_temporal() -> biasaudit::harness::TemporalResult {
    use biasaudit::harness::{
        ols, TemporalAccounting, TemporalPlan, TemporalPoint, TemporalResult, TemporalSeries, YearCount,
    };
    let values = [0.1, 0.35, 0.5];
    let points: Vec<TemporalPoint> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| TemporalPoint { year: 2010 + i as i32, articles: 10, value: Some(v), error: None })
        .collect();
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (f64::from(p.year), p.value.unwrap())).collect();
    let series = TemporalSeries { orientation: Orientation::Liberal, measure: "gender".into(), points, fit: ols(&xy) };
    let counts = (0..3).map(|i| YearCount { orientation: Orientation::Liberal, year: 2010 + i, articles: 10 }).collect();
    TemporalResult {
        series: vec![series],
        accounting: TemporalAccounting { counts, dated: 30, dated_outside_range: 0, undated: 4, total: 34 },
        plan: TemporalPlan {
            orientations: vec![Orientation::Liberal],
            from: 2010,
            to: 2012,
            config: Default::default(),
            vocab: Default::default(),
            tokenize: Default::default(),
            measures: vec![WeatTestSpec::builtin("gender").unwrap()],
        },
        version: "test".into(),
    }
}

/// Scores of the non-contextual model: (measure, conservative, liberal).
pub const STATIC_SCORES: [(&str, f64, f64); 2] = [("gender", 0.230, -0.151), ("religion", -0.298, 0.301)];

/// Write spec files and one imported space per orientation whose WEAT scores
/// are [`STATIC_SCORES`], and return a plan over them.
pub fn delta_plan(dir: &std::path::Path) -> biasaudit::harness::ExperimentPlan {
    use biasaudit::harness::{AlgorithmSpec, ExperimentPlan, MeasureSet, SliceSpec};
    use biasaudit::synthetic::space_with_effect_size;
    let mut weat = Vec::new();
    let mut rows: [Vec<(String, Vec<f64>)>; 2] = [Vec::new(), Vec::new()];
    for (name, cons, lib) in STATIC_SCORES {
        let prefixed = |l: &[String]| l.iter().map(|w| format!("{name}_{w}")).collect::<Vec<_>>();
        for (side, target) in [cons, lib].into_iter().enumerate() {
            let (spec, space) = space_with_effect_size(target).unwrap();
            if side == 0 {
                let spec = WeatTestSpec::new(
                    name,
                    &prefixed(&spec.group_1),
                    &prefixed(&spec.group_2),
                    &prefixed(&spec.attribute_1),
                    &prefixed(&spec.attribute_2),
                )
                .unwrap();
                let path = dir.join(format!("{name}.json"));
                spec.save(&path).unwrap();
                weat.push(path.to_string_lossy().into_owned());
            }
            rows[side].extend(space.rows().map(|(t, v)| (format!("{name}_{t}"), v.to_vec())));
        }
    }
    let mut files = std::collections::BTreeMap::new();
    for (side, slice) in ["conservative", "liberal"].into_iter().enumerate() {
        let space = Embeddings64::from_rows(rows[side].clone(), Default::default()).unwrap();
        let path = dir.join(format!("{slice}.vec"));
        space.save_text(&path).unwrap();
        files.insert(slice.to_owned(), path);
    }
    ExperimentPlan {
        corpus: None,
        output_dir: dir.join("out"),
        slices: vec![
            SliceSpec { name: "conservative".into(), filter: "orientation=conservative".into() },
            SliceSpec { name: "liberal".into(), filter: "orientation=liberal".into() },
        ],
        algorithms: vec![AlgorithmSpec::ExternalImport { name: "static".into(), files }],
        measures: MeasureSet { weat, benchmarks: Vec::new(), permutations: 0 },
        seeds: vec![42],
        vocab: Default::default(),
        tokenize: Default::default(),
    }
}
