mod common;

use approx::assert_abs_diff_eq;
use biasaudit::corpus::{build_vocab, TokenizeConfig, VocabPolicy, Vocabulary};
use biasaudit::embedding::cosine;
use biasaudit::sgns::{subsample_keep_prob, train, train_ids, NegativeTable, TrainConfig};
use biasaudit::synthetic::two_cluster_sentences;
use biasaudit::Trained64;
use common::{gradient_check, negative_table_tv, ppmi, sentence_corpus};

fn small_config() -> TrainConfig {
    TrainConfig { dim: 50, subsample: Some(1e-3), ..Default::default() }
}

fn two_clusters(config: &TrainConfig) -> (Trained64, Vec<Vec<String>>) {
    let corpus = sentence_corpus(&two_cluster_sentences(5000, 7), 10);
    let tok = TokenizeConfig::default();
    let view = corpus.all();
    let vocab = build_vocab(&view, VocabPolicy::MinCount(5), &tok).unwrap();
    (train::<f64>(&view, &vocab, config, &tok).unwrap(), view.sentences(&tok))
}

fn mean_cosines(trained: &Trained64) -> (f64, f64) {
    let (mut within, mut across) = (Vec::new(), Vec::new());
    for i in 1..=5 {
        for j in 1..=5 {
            for (p, q) in [("a", "a"), ("b", "b"), ("a", "b")] {
                let (x, y) = (format!("{p}{i}"), format!("{q}{j}"));
                if x == y {
                    continue;
                }
                let c = cosine(trained.space.get(&x).unwrap(), trained.space.get(&y).unwrap()).unwrap();
                if p == q { within.push(c) } else { across.push(c) }
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (mean(&within), mean(&across))
}

#[test]
fn gradients_match_finite_differences() {
    assert!(gradient_check(20, 10, 5) <= 1e-4);
}

#[test]
fn negative_samples_follow_the_noise_distribution() {
    let tv = negative_table_tv(100, 1_000_000, 3);
    assert!(tv < 0.01, "TV distance {tv}");
}

#[test]
fn negative_table_probabilities() {
    let table = NegativeTable::from_counts(vec![4, 9], &[16, 1]).unwrap();
    let p: Vec<(usize, f64)> = table.probabilities().collect();
    assert_abs_diff_eq!(p[0].1, 8.0 / 9.0, epsilon = 1e-12);
    assert_eq!((p[1].0, table.len()), (9, 2));
    assert!(NegativeTable::from_counts(vec![], &[]).is_err());
}

#[test]
fn subsampling_probability() {
    assert_eq!(subsample_keep_prob(1e-6, 1e-5).unwrap(), 1.0);
    let f = 0.01;
    assert_abs_diff_eq!(subsample_keep_prob(f, 1e-5).unwrap(), (1e-3f64).sqrt() + 1e-3, epsilon = 1e-15);
    assert!(subsample_keep_prob(0.0, 1e-5).is_err());
}

#[test]
fn clusters_are_recovered_like_the_cooccurrence_oracle() {
    let (trained, sentences) = two_clusters(&small_config());
    let (within, across) = mean_cosines(&trained);
    assert!(within > across + 0.2, "within {within}, across {across}");
    let pmi = ppmi(&sentences, 5);
    assert!(pmi("a1", "a2") > pmi("a1", "b2"));
    assert!(pmi("b3", "b4") > pmi("b3", "a4"));
    assert_eq!(pmi("a1", "b1"), 0.0);
}

#[test]
fn evaluation_loss_falls_every_epoch() {
    for subsample in [Some(1e-3), None] {
        let (trained, _) = two_clusters(&TrainConfig { subsample, ..small_config() });
        let l = &trained.report.epoch_losses;
        assert_eq!(l.len(), 5);
        assert!(l.windows(2).all(|w| w[1] < w[0]), "{l:?}");
        assert!(trained.report.pairs_per_epoch.iter().all(|&p| p > 0));
    }
}

#[test]
fn equal_seeds_give_identical_spaces() {
    let cfg = TrainConfig { epochs: 2, ..small_config() };
    let (a, _) = two_clusters(&cfg);
    let (b, _) = two_clusters(&cfg);
    assert_eq!(a.space, b.space);
    assert_eq!(a.report, b.report);
    let (c, _) = two_clusters(&TrainConfig { seed: 43, ..cfg });
    assert_ne!(a.space, c.space);
}

#[test]
fn hogwild_workers_produce_finite_spaces() {
    let cfg = TrainConfig { epochs: 2, workers: 4, deterministic: false, ..small_config() };
    let (t, _) = two_clusters(&cfg);
    assert_eq!(t.report.workers, 4);
    assert!(t.space.rows().all(|(_, r)| r.iter().all(|x| x.is_finite())));
    let (within, across) = mean_cosines(&t);
    assert!(within > across);
}

#[test]
fn unk_is_excluded_unless_requested() {
    let (t, _) = two_clusters(&TrainConfig { epochs: 1, ..small_config() });
    assert!(!t.space.contains("<unk>"));
    assert_eq!(t.space.len(), 10);
}

#[test]
fn too_small_inputs_are_rejected() {
    let vocab = Vocabulary::from_counts([("a", 5), ("b", 5)], VocabPolicy::MinCount(1)).unwrap();
    let cfg = small_config();
    assert!(train_ids::<f64>(&[vec![1]], &vocab, &cfg, "t").is_err());
    assert!(train_ids::<f64>(&[vec![1, 7]], &vocab, &cfg, "t").is_err());
    assert!(train_ids::<f64>(&[vec![1, 2]], &vocab, &TrainConfig { dim: 0, ..cfg }, "t").is_err());
}
