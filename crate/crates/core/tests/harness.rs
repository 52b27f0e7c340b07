mod common;

use std::path::{Path, PathBuf};

use approx::assert_abs_diff_eq;
use biasaudit::bias::WeatTestSpec;
use biasaudit::corpus::{Article, Corpus, Orientation};
use biasaudit::harness::{
    run, temporal_run, AlgorithmSpec, Emittable, EmitFormat, ExperimentPlan, MeasureSet, SliceSpec,
    TemporalPlan,
};
use biasaudit::sgns::TrainConfig;
use biasaudit::synthetic::PlantedBias;
use common::{delta_plan, planted_years, STATIC_SCORES};

fn quick_config() -> TrainConfig {
    TrainConfig { dim: 20, epochs: 2, subsample: Some(1e-3), ..Default::default() }
}

/// A planted-bias corpus split between liberal and conservative articles.
fn save_corpus(dir: &Path) -> PathBuf {
    let spec = WeatTestSpec::builtin("gender").unwrap();
    let mut articles = PlantedBias { sentences: 1500, ..PlantedBias::new(spec.clone(), 1) }
        .articles("lib", Orientation::Liberal, Some(2015), 10);
    articles.extend(
        PlantedBias { sentences: 1500, reversed: true, ..PlantedBias::new(spec, 2) }
            .articles("con", Orientation::Conservative, Some(2015), 10),
    );
    let path = dir.join("corpus");
    Corpus::from_articles(articles).unwrap().save_dir(&path, None).unwrap();
    path
}

fn sgns_plan(dir: &Path, slices: &[(&str, &str)], weat: &[&str]) -> ExperimentPlan {
    ExperimentPlan {
        corpus: Some(save_corpus(dir)),
        output_dir: dir.join("out"),
        slices: slices.iter().map(|(n, f)| SliceSpec { name: (*n).into(), filter: (*f).into() }).collect(),
        algorithms: vec![AlgorithmSpec::Sgns { name: "sgns".into(), config: quick_config() }],
        measures: MeasureSet { weat: weat.iter().map(|s| s.to_string()).collect(), benchmarks: Vec::new(), permutations: 200 },
        seeds: vec![42],
        vocab: Default::default(),
        tokenize: Default::default(),
    }
}

#[test]
fn one_slice_plan_gives_one_cell() {
    let dir = tempfile::tempdir().unwrap();
    let plan = sgns_plan(dir.path(), &[("liberal", "orientation=liberal")], &["gender"]);
    let table = run::<f32>(&plan).unwrap();
    assert_eq!(table.cells.len(), 1);
    let cell = table.cell("sgns", "liberal", "gender").unwrap();
    assert!(cell.value.is_some() && cell.error.is_none());
    assert!(cell.p_value.is_some_and(|p| p > 0.0 && p <= 1.0));
    assert!(table.deltas.is_empty() && table.variances.is_empty());
    let space = &table.provenance.spaces[0];
    assert_eq!((space.articles, space.seed), (Some(150), Some(42)));
}

#[test]
fn delta_rows_reproduce_the_static_differences() {
    let dir = tempfile::tempdir().unwrap();
    let table = run::<f64>(&delta_plan(dir.path())).unwrap();
    assert_eq!(table.cells.len(), 4);
    assert_eq!(table.deltas.len(), 2);
    for (measure, cons, lib) in STATIC_SCORES {
        assert_abs_diff_eq!(table.cell("static", "conservative", measure).unwrap().value.unwrap(), cons, epsilon = 1e-12);
        assert_abs_diff_eq!(table.cell("static", "liberal", measure).unwrap().value.unwrap(), lib, epsilon = 1e-12);
    }
    let delta = |m: &str| table.deltas.iter().find(|d| d.measure == m).unwrap().value;
    assert_abs_diff_eq!(delta("gender"), 0.381, epsilon = 1e-12);
    assert_abs_diff_eq!(delta("religion"), -0.599, epsilon = 1e-12);
}

#[test]
fn oov_measures_fail_alone() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = delta_plan(dir.path());
    let unknown = WeatTestSpec::new("unknown", &["zq1"], &["zq2"], &["zq3"], &["zq4"]).unwrap();
    let path = dir.path().join("unknown.json");
    unknown.save(&path).unwrap();
    plan.measures.weat.push(path.to_string_lossy().into_owned());
    let table = run::<f64>(&plan).unwrap();
    assert_eq!(table.cells.len(), 6);
    for slice in ["conservative", "liberal"] {
        let bad = table.cell("static", slice, "unknown").unwrap();
        assert!(bad.value.is_none());
        assert!(bad.error.as_deref().unwrap().contains("group_1"), "{:?}", bad.error);
        assert!(table.cell("static", slice, "gender").unwrap().value.is_some());
    }
    assert_eq!(table.deltas.len(), 2);
    let csv = Emittable::Table(table).render(EmitFormat::Csv).unwrap();
    assert_eq!(csv.lines().filter(|l| l.contains(",unknown,") && l.ends_with(|c: char| c != ',')).count(), 2);
}

#[test]
fn missing_import_files_mark_every_measure() {
    let dir = tempfile::tempdir().unwrap();
    let plan = delta_plan(dir.path());
    std::fs::write(dir.path().join("liberal.vec"), "1 2\nbroken 1\n").unwrap();
    let table = run::<f64>(&plan).unwrap();
    assert!(table.cells.iter().filter(|c| c.slice == "liberal").all(|c| c.error.is_some()));
    assert!(table.cells.iter().filter(|c| c.slice == "conservative").all(|c| c.value.is_some()));
    assert!(table.deltas.is_empty());
    assert!(table.provenance.spaces.iter().any(|s| s.error.is_some()));
}

#[test]
fn reruns_are_identical_and_use_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = sgns_plan(
        dir.path(),
        &[("liberal", "orientation=liberal"), ("conservative", "orientation=conservative")],
        &["gender"],
    );
    plan.seeds = vec![1, 2];
    let first = run::<f32>(&plan).unwrap();
    let entries = std::fs::read_dir(dir.path().join("out/cache")).unwrap().count();
    assert_eq!(entries, 8, "a vector file and a sidecar per trained space");
    let second = run::<f32>(&plan).unwrap();
    assert_eq!(first, second);
    // Without the cache the spaces are retrained to the same values.
    std::fs::remove_dir_all(dir.path().join("out/cache")).unwrap();
    assert_eq!(run::<f32>(&plan).unwrap(), first);

    assert_eq!(first.cells.len(), 4);
    assert!(first.cell("sgns-s1", "liberal", "gender").is_some());
    assert_eq!(first.deltas.len(), 2);
    assert_eq!(first.variances.len(), 2);
}

#[test]
fn plans_load_from_toml_with_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let plan = delta_plan(dir.path());
    let mut relative = plan.clone();
    relative.output_dir = "out".into();
    relative.measures.weat = vec!["gender".into(), "religion.json".into()];
    for alg in &mut relative.algorithms {
        if let AlgorithmSpec::ExternalImport { files, .. } = alg {
            files.values_mut().for_each(|p| *p = p.file_name().unwrap().into());
        }
    }
    let path = dir.path().join("plan.toml");
    std::fs::write(&path, relative.to_toml().unwrap()).unwrap();
    let loaded = ExperimentPlan::load(&path).unwrap();
    assert_eq!(loaded.output_dir, dir.path().join("out"));
    assert_eq!(loaded.algorithms, plan.algorithms);
    loaded.validate().unwrap();

    let mut bad = plan.clone();
    bad.slices.clear();
    assert!(bad.validate().is_err());
    let mut unknown = plan;
    if let AlgorithmSpec::ExternalImport { files, .. } = &mut unknown.algorithms[0] {
        files.insert("centre".into(), dir.path().join("liberal.vec"));
    }
    assert!(unknown.validate().is_err());
}

fn temporal_plan(from: i32, to: i32) -> TemporalPlan {
    TemporalPlan {
        orientations: vec![Orientation::Liberal],
        from,
        to,
        config: quick_config(),
        vocab: Default::default(),
        tokenize: Default::default(),
        measures: vec![WeatTestSpec::builtin("gender").unwrap()],
    }
}

#[test]
fn temporal_run_fits_each_series() {
    let spec = WeatTestSpec::builtin("gender").unwrap();
    let mut articles = planted_years(&spec, Orientation::Liberal, &[2, 4, 6], 2000, 3);
    articles.push(Article::new("undated", "No date here.", "o", Orientation::Liberal, None).unwrap());
    articles.push(Article::new("old", "Long ago.", "o", Orientation::Liberal, Some(1999)).unwrap());
    let corpus = Corpus::from_articles(articles).unwrap();
    let result = temporal_run::<f32>(&corpus, &temporal_plan(2010, 2012)).unwrap();
    result.check().unwrap();
    let acc = &result.accounting;
    assert_eq!((acc.dated, acc.undated, acc.dated_outside_range, acc.total), (600, 1, 1, 602));
    let series = result.series(Orientation::Liberal, "gender").unwrap();
    assert_eq!(series.points.len(), 3);
    assert!(series.points.iter().all(|p| p.value.is_some() && p.articles == 200));
    let fit = series.fit.as_ref().unwrap();
    assert_eq!(fit.points, 3);
    assert!(fit.slope_se.is_some());
    let again = temporal_run::<f32>(&corpus, &temporal_plan(2010, 2012)).unwrap();
    assert_eq!(again, result);
}

#[test]
fn a_single_populated_year_has_no_regression() {
    let spec = WeatTestSpec::builtin("gender").unwrap();
    let corpus = Corpus::from_articles(planted_years(&spec, Orientation::Liberal, &[4], 1500, 5)).unwrap();
    let result = temporal_run::<f32>(&corpus, &temporal_plan(2010, 2012)).unwrap();
    let series = &result.series[0];
    assert!(series.fit.is_none());
    assert!(series.points[0].value.is_some());
    assert!(series.points[1..].iter().all(|p| p.value.is_none() && p.error.is_some()));
    let plot = Emittable::Temporal(result).render(EmitFormat::Plotdata).unwrap();
    assert!(plot.contains("# missing 2011") && !plot.contains("# fit"));
    assert!(temporal_run::<f32>(&corpus, &temporal_plan(2012, 2010)).is_err());
}
