use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;

use super::config::{ExperimentConfig, FeatureConfig};
use super::report::{DecaySummary, EnsembleRow, ExperimentReport, FeatureRow, TermResult};
use super::split::{split, SplitSpec};
use super::synth::SyntheticCorpus;
use super::HarnessError;
use crate::aggregate::{aggregate_rows, write_prediction_csv, Aggregation, PredictionTable};
use crate::corpus::{
    load_annotations_csv, load_captions_csv, load_feature_csv, load_labels_csv, load_word_vectors, CaptionSet,
    FeatureSet, LabelTable, Modality, Term, VideoId, WordVectorTable,
};
use crate::decay::{adjust_labels, fit_decay, DecayFit};
use crate::ensemble::{apply_weights, grid_search};
use crate::metrics::spearman;
use crate::model::{predict_rows, train_model, Inputs, ModelParams, TrainedModel};

/// Everything an experiment reads, in memory.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub features: BTreeMap<String, FeatureSet>,
    pub captions: Option<CaptionSet>,
    pub word_vectors: Option<WordVectorTable>,
    pub labels: BTreeMap<Term, LabelTable>,
    pub test_labels: BTreeMap<Term, LabelTable>,
    pub decay: BTreeMap<Term, DecayFit>,
}

impl Corpus {
    /// Loads the files named by `cfg`. Terms without a label file but with
    /// an annotation log get decay-adjusted labels.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let d = &cfg.data;
        let mut corpus = Corpus::default();
        for (term, labels, annotations, test) in [
            (Term::Short, &d.labels_short, &d.annotations_short, &d.test_labels_short),
            (Term::Long, &d.labels_long, &d.annotations_long, &d.test_labels_long),
        ] {
            if let Some(p) = labels {
                corpus.labels.insert(term, load_labels_csv(p, term)?);
            } else if let Some(p) = annotations {
                let log = load_annotations_csv(p)?;
                let fit = fit_decay(&log, cfg.decay.target_duration, cfg.decay.iterations)?;
                corpus.labels.insert(term, adjust_labels(&fit, term));
                corpus.decay.insert(term, fit);
            }
            if let Some(p) = test {
                corpus.test_labels.insert(term, load_labels_csv(p, term)?);
            }
        }
        if let Some(p) = &d.captions {
            corpus.captions = Some(load_captions_csv(p)?);
        }
        if let Some(p) = &d.word_vectors {
            corpus.word_vectors = Some(load_word_vectors(p)?);
        }
        for f in &cfg.features {
            if let Some(p) = &f.path {
                corpus
                    .features
                    .insert(f.name.clone(), load_feature_csv(p, f.modality, &f.name)?);
            }
        }
        Ok(corpus)
    }

    /// An in-memory corpus over generated data, labelled for both terms.
    pub fn from_synthetic(s: &SyntheticCorpus) -> Self {
        Corpus {
            features: s.features.iter().map(|f| (f.name().to_string(), f.clone())).collect(),
            captions: Some(s.captions.clone()),
            word_vectors: Some(s.word_vectors.clone()),
            labels: [(Term::Short, s.labels_short.clone()), (Term::Long, s.labels_long.clone())].into(),
            test_labels: BTreeMap::new(),
            decay: BTreeMap::new(),
        }
    }

    pub fn inputs(&self, f: &FeatureConfig) -> Result<Inputs<'_>, HarnessError> {
        if f.model.is_text() {
            let captions = self
                .captions
                .as_ref()
                .ok_or_else(|| HarnessError::Config(format!("feature {:?} needs captions", f.name)))?;
            Ok(Inputs::Text {
                captions,
                word_vectors: self.word_vectors.as_ref(),
            })
        } else {
            self.features
                .get(&f.name)
                .map(Inputs::Features)
                .ok_or_else(|| HarnessError::Config(format!("feature {:?} was not loaded", f.name)))
        }
    }
}

fn predict_table(
    model: &TrainedModel,
    inputs: Inputs<'_>,
    ids: &[VideoId],
    name: &str,
    aggregation: Aggregation,
) -> Result<PredictionTable, HarnessError> {
    let rows = predict_rows(model, inputs, ids)?;
    let universe: BTreeSet<VideoId> = ids.iter().cloned().collect();
    Ok(aggregate_rows(name, &rows, aggregation, &universe)?)
}

fn score(table: &PredictionTable, truth: &LabelTable) -> Result<f64, HarnessError> {
    let mut p = Vec::with_capacity(truth.len());
    let mut t = Vec::with_capacity(truth.len());
    for (id, y) in truth.scores() {
        p.push(table.get(id).ok_or_else(|| {
            HarnessError::Config(format!("no prediction for video {id} in {}", table.model_name))
        })?);
        t.push(*y);
    }
    Ok(spearman(&p, &t)?)
}

fn term_split(cfg: &ExperimentConfig, labels: &LabelTable, seed: u64) -> Result<SplitSpec, HarnessError> {
    let s = split(labels.ids(), seed, cfg.train_fraction)?;
    if !s.is_disjoint() {
        return Err(HarnessError::Split("train and validation ids overlap".into()));
    }
    Ok(s)
}

/// Trains one feature model on the training part and predicts the
/// validation part.
fn fit_on_split(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    f: &FeatureConfig,
    params: &ModelParams,
    labels: &LabelTable,
    s: &SplitSpec,
) -> Result<(TrainedModel, PredictionTable), HarnessError> {
    let inputs = corpus.inputs(f)?;
    let train_labels = labels.subset(&s.train_ids);
    let model = train_model(f.model, params, inputs, &train_labels, s.seed)?;
    let table = predict_table(&model, inputs, &s.valid_ids, &f.name, cfg.aggregation)?;
    Ok((model, table))
}

fn pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| HarnessError::Pool(e.to_string()))?;
    Ok(pool.install(job))
}

/// Validation rank correlation of every configured feature model, for every
/// labelled term and seed. Failures are recorded per seed.
pub fn run_feature_experiment(cfg: &ExperimentConfig, corpus: &Corpus) -> Vec<FeatureRow> {
    let terms: Vec<Term> = corpus.labels.keys().copied().collect();
    let jobs: Vec<(usize, Term, u64)> = (0..cfg.features.len())
        .flat_map(|fi| terms.iter().flat_map(move |t| cfg.seeds.iter().map(move |s| (fi, *t, *s))))
        .collect();
    let outcomes: Vec<Result<f64, String>> = jobs
        .par_iter()
        .map(|&(fi, term, seed)| {
            let f = &cfg.features[fi];
            let labels = &corpus.labels[&term];
            let run = || -> Result<f64, HarnessError> {
                let params = f.model_params()?;
                let s = term_split(cfg, labels, seed)?;
                let (_, table) = fit_on_split(cfg, corpus, f, &params, labels, &s)?;
                score(&table, &labels.subset(&s.valid_ids))
            };
            run().map_err(|e| e.to_string())
        })
        .collect();

    let mut by_key: BTreeMap<(usize, Term), Vec<(u64, Result<f64, String>)>> = BTreeMap::new();
    for ((fi, term, seed), r) in jobs.into_iter().zip(outcomes) {
        by_key.entry((fi, term)).or_default().push((seed, r));
    }
    let mut rows: Vec<FeatureRow> = cfg
        .features
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let mut take = |t| by_key.remove(&(fi, t)).map(TermResult::new);
            FeatureRow {
                modality: f.modality,
                feature: f.name.clone(),
                model: f.model,
                short: take(Term::Short),
                long: take(Term::Long),
                best_for: Vec::new(),
            }
        })
        .collect();

    for term in terms {
        for m in Modality::ALL {
            let mut best: Option<(usize, f64)> = None;
            for (i, r) in rows.iter().enumerate() {
                if r.modality != m {
                    continue;
                }
                if let Some(mean) = r.term(term).and_then(|t| t.mean) {
                    if best.map_or(true, |(_, b)| mean > b) {
                        best = Some((i, mean));
                    }
                }
            }
            if let Some((i, _)) = best {
                rows[i].best_for.push(term);
            }
        }
    }
    rows
}

/// Feature indices to ensemble for `term`: the configured list, or the
/// best feature of each modality in config order.
fn ensemble_selection(cfg: &ExperimentConfig, rows: &[FeatureRow], term: Term) -> Vec<usize> {
    match &cfg.ensemble.features {
        Some(names) => names
            .iter()
            .filter_map(|n| cfg.features.iter().position(|f| &f.name == n))
            .collect(),
        None => rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.best_for.contains(&term))
            .map(|(i, _)| i)
            .collect(),
    }
}

fn artifact_stem(term: Term, seed: u64, name: &str) -> String {
    format!("{term}_seed{seed}_{name}")
}

fn save_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes") + "\n";
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn ensemble_once(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    selection: &[usize],
    term: Term,
    seed: u64,
    artifacts: Option<&Path>,
) -> Result<EnsembleRow, HarnessError> {
    let labels = &corpus.labels[&term];
    let s = term_split(cfg, labels, seed)?;
    let test = corpus.test_labels.get(&term);
    let test_ids: Vec<VideoId> = test.map(|t| t.ids().cloned().collect()).unwrap_or_default();

    let mut valid_tables = Vec::new();
    let mut test_tables = Vec::new();
    for &fi in selection {
        let f = &cfg.features[fi];
        let params = f.model_params()?;
        let (model, table) = fit_on_split(cfg, corpus, f, &params, labels, &s)?;
        if let Some(dir) = artifacts {
            let stem = artifact_stem(term, seed, &f.name);
            save_json(&dir.join("models").join(format!("{stem}.json")), &model)?;
            write_prediction_csv(&table, dir.join("predictions").join(format!("{stem}_valid.csv")), true)?;
        }
        if test.is_some() {
            let t = predict_table(&model, corpus.inputs(f)?, &test_ids, &f.name, cfg.aggregation)?;
            if let Some(dir) = artifacts {
                let stem = artifact_stem(term, seed, &f.name);
                write_prediction_csv(&t, dir.join("predictions").join(format!("{stem}_test.csv")), true)?;
            }
            test_tables.push(t);
        }
        valid_tables.push(table);
    }

    let weights = grid_search(&valid_tables, &labels.subset(&s.valid_ids), cfg.bucket)?;
    let test_srcc = match test {
        Some(t) => {
            let combined = apply_weights(&weights, &test_tables)?;
            if let Some(dir) = artifacts {
                let stem = artifact_stem(term, seed, "ensemble");
                write_prediction_csv(&combined, dir.join("predictions").join(format!("{stem}_test.csv")), true)?;
            }
            Some(score(&combined, t)?)
        }
        None => None,
    };
    if let Some(dir) = artifacts {
        let stem = artifact_stem(term, seed, "ensemble");
        save_json(&dir.join("models").join(format!("{stem}_weights.json")), &weights)?;
    }
    Ok(EnsembleRow {
        term,
        seed,
        model_names: weights.model_names,
        weights: weights.weights,
        validation_srcc: Some(weights.validation_srcc),
        test_srcc,
        error: None,
    })
}

/// Grid-searched ensembles per term and seed over the selected features.
/// When `artifacts` is set, models, prediction CSVs and weights are written
/// under it.
pub fn run_ensemble_experiment(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    feature_rows: &[FeatureRow],
    artifacts: Option<&Path>,
) -> Result<Vec<EnsembleRow>, HarnessError> {
    if let Some(dir) = artifacts {
        for sub in ["models", "predictions"] {
            let p = dir.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| HarnessError::io(&p, e))?;
        }
    }
    let mut jobs = Vec::new();
    for term in corpus.labels.keys().copied() {
        let selection = ensemble_selection(cfg, feature_rows, term);
        for &seed in &cfg.seeds {
            jobs.push((term, seed, selection.clone()));
        }
    }
    Ok(jobs
        .par_iter()
        .map(|(term, seed, selection)| {
            let names: Vec<String> = selection.iter().map(|&i| cfg.features[i].name.clone()).collect();
            let failed = |error: String| EnsembleRow {
                term: *term,
                seed: *seed,
                model_names: names.clone(),
                weights: Vec::new(),
                validation_srcc: None,
                test_srcc: None,
                error: Some(error),
            };
            if selection.is_empty() {
                return failed("no feature model produced a validation score".into());
            }
            ensemble_once(cfg, corpus, selection, *term, *seed, artifacts).unwrap_or_else(|e| failed(e.to_string()))
        })
        .collect())
}

/// Runs the feature table and, when enabled, the ensemble search, on a pool
/// of `cfg.workers` threads.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    artifacts: Option<&Path>,
) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    if corpus.labels.is_empty() {
        return Err(HarnessError::Config("no term has labels".into()));
    }
    pool(cfg.workers, || {
        let feature_rows = run_feature_experiment(cfg, corpus);
        let ensemble_rows = if cfg.ensemble.enabled {
            run_ensemble_experiment(cfg, corpus, &feature_rows, artifacts)?
        } else {
            Vec::new()
        };
        Ok(ExperimentReport {
            seeds: cfg.seeds.clone(),
            train_fraction: cfg.train_fraction,
            aggregation: cfg.aggregation,
            bucket: cfg.bucket,
            terms: corpus.labels.keys().copied().collect(),
            decay: corpus
                .decay
                .iter()
                .map(|(t, f)| {
                    (
                        *t,
                        DecaySummary {
                            alpha: f.alpha,
                            target_duration: f.target_duration,
                            iterations_run: f.iterations_run,
                            videos: f.m_t.len(),
                            warnings: f.warnings.clone(),
                        },
                    )
                })
                .collect(),
            feature_rows,
            ensemble_rows,
        })
    })?
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    for (name, text) in [("report.json", report.to_json()), ("report.txt", report.to_text())] {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| HarnessError::io(&p, e))?;
    }
    Ok(())
}

/// Loads the corpus named by `cfg`, runs everything and writes the report
/// (and artifacts, if enabled) to `cfg.output_dir`.
pub fn run_experiment_in_dir(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let corpus = Corpus::load(cfg)?;
    let artifacts = cfg.save_artifacts.then_some(cfg.output_dir.as_path());
    let report = run_experiment(cfg, &corpus, artifacts)?;
    write_report(&report, &cfg.output_dir)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth::{generate_synthetic, SyntheticCorpusSpec};
    use crate::harness::ExperimentConfig;

    fn config(features: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            "output_dir = \"x\"\nseeds = [0, 1]\n[data]\nlabels_short = \"l.csv\"\ncaptions = \"c.csv\"\n{features}"
        ))
        .unwrap()
    }

    fn corpus() -> Corpus {
        let spec = SyntheticCorpusSpec {
            n_videos: 60,
            obs_per_video: 2,
            ..SyntheticCorpusSpec::default()
        };
        let mut c = Corpus::from_synthetic(&generate_synthetic(&spec).unwrap());
        c.labels.remove(&Term::Long);
        c
    }

    #[test]
    fn informative_feature_wins_its_modality_and_the_ensemble() {
        let cfg = config(
            "[[features]]\nname = \"C3D\"\nmodality = \"video\"\npath = \"a.csv\"\nmodel = \"ridge\"\n\
             [[features]]\nname = \"ResNet152\"\nmodality = \"image\"\npath = \"b.csv\"\nmodel = \"ridge\"\n",
        );
        let c = corpus();
        let report = run_experiment(&cfg, &c, None).unwrap();
        let c3d = &report.feature_rows[0];
        assert!(c3d.short.as_ref().unwrap().mean.unwrap() > 0.9);
        assert_eq!(c3d.best_for, vec![Term::Short]);
        assert!(c3d.long.is_none());
        assert_eq!(report.ensemble_rows.len(), 2);
        for r in &report.ensemble_rows {
            assert!(r.weights[0] >= 0.8, "{r:?}");
        }
    }

    #[test]
    fn trainer_errors_stay_in_their_row() {
        let cfg = config(
            "[[features]]\nname = \"C3D\"\nmodality = \"video\"\npath = \"a.csv\"\nmodel = \"ridge\"\n\
             [[features]]\nname = \"Missing\"\nmodality = \"audio\"\npath = \"m.csv\"\nmodel = \"ridge\"\n",
        );
        let report = run_experiment(&cfg, &corpus(), None).unwrap();
        let missing = report.feature_rows[1].short.as_ref().unwrap();
        assert_eq!(missing.errors.len(), 2);
        assert!(missing.mean.is_none());
        assert!(report.feature_rows[0].short.as_ref().unwrap().errors.is_empty());
    }
}
