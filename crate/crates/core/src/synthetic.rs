//! Seeded synthetic data: corpora with planted associations, random
//! embedding spaces and WEAT instances, and contextual vector streams. Used
//! by tests and demos in place of real corpora and language models.

use std::io::Write;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bias::WeatTestSpec;
use crate::corpus::{Article, Orientation};
use crate::embedding::{EmbeddingSpace, SpaceMetadata};
use crate::error::Result;
use crate::pool::{write_record, StreamHeader};

/// Sentences generated from a WEAT spec: each pairs one group word with
/// attribute words from one attribute list. For biased attribute words the
/// group is congruent (group 1 ↔ attribute 1, group 2 ↔ attribute 2) with
/// probability `congruence`; for the others it is drawn uniformly.
#[derive(Debug, Clone)]
pub struct PlantedBias {
    pub spec: WeatTestSpec,
    pub sentences: usize,
    /// Probability that a sentence follows the planted association.
    pub congruence: f64,
    /// Planted association reversed (group 1 ↔ attribute 2).
    pub reversed: bool,
    pub filler_vocabulary: usize,
    pub fillers_per_sentence: usize,
    pub attributes_per_sentence: usize,
    /// Number of leading words of each attribute list that carry the planted
    /// association; `None` biases every word.
    pub biased_attributes: Option<usize>,
    pub seed: u64,
}

impl PlantedBias {
    pub fn new(spec: WeatTestSpec, seed: u64) -> Self {
        Self {
            spec,
            sentences: 5000,
            congruence: 0.95,
            reversed: false,
            filler_vocabulary: 200,
            fillers_per_sentence: 4,
            attributes_per_sentence: 2,
            biased_attributes: None,
            seed,
        }
    }

    /// One lowercased sentence per entry, terminated by a period.
    pub fn sentences(&self) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let fillers: Vec<String> = (0..self.filler_vocabulary).map(|i| format!("filler{i}")).collect();
        let lower = |l: &[String]| l.iter().map(|w| w.to_lowercase()).collect::<Vec<_>>();
        let groups = [lower(&self.spec.group_1), lower(&self.spec.group_2)];
        let attributes = [lower(&self.spec.attribute_1), lower(&self.spec.attribute_2)];
        (0..self.sentences)
            .map(|_| {
                let a = rng.random_range(0..2);
                let first = rng.random_range(0..attributes[a].len());
                let biased = self.biased_attributes.is_none_or(|k| first < k);
                let planted = if self.reversed { 1 - a } else { a };
                let g = if !biased {
                    rng.random_range(0..2)
                } else if rng.random::<f64>() < self.congruence {
                    planted
                } else {
                    1 - planted
                };
                let mut words: Vec<&str> = vec![groups[g].choose(&mut rng).expect("non-empty")];
                words.push(&attributes[a][first]);
                // Companion attribute words share the first word's bias status.
                let k = self.biased_attributes.map_or(attributes[a].len(), |k| k.min(attributes[a].len()));
                let pool = if biased { &attributes[a][..k] } else { &attributes[a][k..] };
                for _ in 1..self.attributes_per_sentence {
                    words.push(pool.choose(&mut rng).expect("non-empty"));
                }
                for _ in 0..self.fillers_per_sentence {
                    words.push(fillers.choose(&mut rng).expect("non-empty"));
                }
                words.shuffle(&mut rng);
                format!("{}.", words.join(" "))
            })
            .collect()
    }

    /// Pack the sentences into articles of `per_article` sentences each.
    pub fn articles(
        &self,
        id_prefix: &str,
        orientation: Orientation,
        year: Option<i32>,
        per_article: usize,
    ) -> Vec<Article> {
        self.sentences()
            .chunks(per_article.max(1))
            .enumerate()
            .map(|(i, chunk)| {
                Article::new(format!("{id_prefix}-{i}"), chunk.join(" "), "synthetic", orientation, year)
                    .expect("generated text is non-empty")
            })
            .collect()
    }
}

/// Two disjoint token clusters `a1..a5` and `b1..b5`; tokens co-occur only
/// within their cluster.
pub fn two_cluster_sentences(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let prefix = if i % 2 == 0 { "a" } else { "b" };
            let len = rng.random_range(4..=8);
            let words: Vec<String> = (0..len)
                .map(|_| format!("{prefix}{}", rng.random_range(1..=5)))
                .collect();
            format!("{}.", words.join(" "))
        })
        .collect()
}

/// Standard-normal vectors for `tokens`.
pub fn gaussian_space<S: AsRef<str>>(tokens: &[S], dim: usize, seed: u64) -> Result<EmbeddingSpace<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = tokens.iter().map(|t| {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        (t.as_ref().to_owned(), v)
    });
    EmbeddingSpace::from_rows(rows, SpaceMetadata::new("gaussian", format!("seed={seed}")))
}

/// A random WEAT spec over fresh words with the given list sizes, and an
/// isotropic Gaussian space containing every word.
pub fn random_weat_instance(
    sizes: [usize; 4],
    dim: usize,
    seed: u64,
) -> Result<(WeatTestSpec, EmbeddingSpace<f64>)> {
    let names = ["g", "h", "a", "b"];
    let lists: Vec<Vec<String>> = names
        .iter()
        .zip(sizes)
        .map(|(p, n)| (0..n).map(|i| format!("{p}{i}")).collect())
        .collect();
    let spec = WeatTestSpec::new("random", &lists[0], &lists[1], &lists[2], &lists[3])?;
    let all: Vec<&String> = lists.iter().flatten().collect();
    let space = gaussian_space(&all, dim, seed)?;
    Ok((spec, space))
}

/// A 2-d space whose WEAT effect size for the returned spec is `target`
/// (`|target| < √3`). Groups are the unit axes; attribute deltas are
/// `±c ± h` with `√3·c / √(c² + h²) = target`.
pub fn space_with_effect_size(target: f64) -> Result<(WeatTestSpec, EmbeddingSpace<f64>)> {
    let k = target / 3f64.sqrt();
    assert!(k.abs() < 1.0, "target effect size must lie strictly inside ±√3");
    let c = 0.5 * k;
    let h = 0.5 * (1.0 - k * k).sqrt();
    // A unit vector at angle θ has delta cos θ − sin θ = √2·cos(θ + π/4).
    let vector_for = |delta: f64| {
        let theta = (delta / 2f64.sqrt()).acos() - std::f64::consts::FRAC_PI_4;
        vec![theta.cos(), theta.sin()]
    };
    let rows = vec![
        ("grp1".to_owned(), vec![1.0, 0.0]),
        ("grp2".to_owned(), vec![0.0, 1.0]),
        ("attr1a".to_owned(), vector_for(c + h)),
        ("attr1b".to_owned(), vector_for(c - h)),
        ("attr2a".to_owned(), vector_for(-c + h)),
        ("attr2b".to_owned(), vector_for(-c - h)),
    ];
    let spec = WeatTestSpec::new(
        "fixture",
        &["grp1"],
        &["grp2"],
        &["attr1a", "attr1b"],
        &["attr2a", "attr2b"],
    )?;
    Ok((spec, EmbeddingSpace::from_rows(rows, SpaceMetadata::new("fixture", "planted effect"))?))
}

/// Write a stream in the contextual-vector format: `occurrences[i]` records
/// for `tokens[i]`, each a noisy copy of a per-token centre.
pub fn write_context_stream<W: Write, S: AsRef<str>>(
    mut out: W,
    model: &str,
    tokens: &[S],
    occurrences: &[usize],
    dim: usize,
    seed: u64,
) -> std::io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StreamHeader { dim, model: model.to_owned() }.write(&mut out)?;
    let centres: Vec<Vec<f64>> = tokens
        .iter()
        .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let mut records: Vec<usize> = occurrences
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| std::iter::repeat_n(i, n))
        .collect();
    records.shuffle(&mut rng);
    for i in records {
        let v: Vec<f64> = centres[i]
            .iter()
            .map(|&c| c + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        write_record(&mut out, tokens[i].as_ref(), &v)?;
    }
    out.flush()
}
