//! Synthetic corpora with known ground truth.
//!
//! Every video draws a latent `s` uniformly from `[0, 1]`. Labels are
//! `clamp(link(s) + noise * N(0, 1), 0, 1)`, drawn independently per term.
//! An informative feature carries `s` in component 0 of every row; all other
//! components (and every component of uninformative features) are standard
//! normal. Annotation observations follow the decay model with
//! `m* = lo + (hi - lo) * s`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::{
    write_annotations_csv, write_captions_csv, write_feature_csv, write_labels_csv, write_word_vectors, AnnotationLog,
    CaptionSet, FeatureSet, LabelTable, Modality, Observation, Term, VideoId, WordVectorTable,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Link {
    #[default]
    Identity,
    /// `1 / (1 + exp(-steepness * (s - 0.5)))`
    Logistic { steepness: f64 },
}

impl Link {
    pub fn apply(&self, s: f64) -> f64 {
        match *self {
            Link::Identity => s,
            Link::Logistic { steepness } => 1.0 / (1.0 + (-steepness * (s - 0.5)).exp()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticFeature {
    pub name: String,
    pub modality: Modality,
    pub dimension: usize,
    /// Inclusive range of rows per video.
    #[serde(default = "one_row")]
    pub rows: [usize; 2],
    #[serde(default)]
    pub informative: bool,
    /// The last this-many videos get no rows at all.
    #[serde(default)]
    pub missing_videos: usize,
}

fn one_row() -> [usize; 2] {
    [1, 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptionSpec {
    /// Inclusive range of captions per video (at most 5).
    pub per_video: [usize; 2],
    pub words_per_caption: [usize; 2],
    pub vocabulary: usize,
    pub vector_dimension: usize,
    /// Prefix each caption with a token naming the latent's decile.
    pub informative: bool,
}

impl Default for CaptionSpec {
    fn default() -> Self {
        CaptionSpec {
            per_video: [2, 5],
            words_per_caption: [3, 8],
            vocabulary: 200,
            vector_dimension: 16,
            informative: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCorpusSpec {
    pub n_videos: usize,
    pub obs_per_video: usize,
    pub true_alpha: f64,
    pub target_duration: f64,
    pub memorability_range: [f64; 2],
    pub delay_range: [f64; 2],
    pub link: Link,
    pub noise: f64,
    pub seed: u64,
    pub features: Vec<SyntheticFeature>,
    pub captions: CaptionSpec,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        let feature = |name: &str, modality, dimension, rows, informative, missing_videos| SyntheticFeature {
            name: name.into(),
            modality,
            dimension,
            rows,
            informative,
            missing_videos,
        };
        SyntheticCorpusSpec {
            n_videos: 590,
            obs_per_video: 30,
            true_alpha: -0.03,
            target_duration: 75.0,
            memorability_range: [0.3, 0.9],
            delay_range: [30.0, 150.0],
            link: Link::Identity,
            noise: 0.0,
            seed: 0,
            features: vec![
                feature("C3D", Modality::Video, 8, [1, 1], true, 0),
                feature("ResNet152", Modality::Image, 8, [1, 3], false, 0),
                feature("VGGish", Modality::Audio, 8, [4, 7], false, 1),
            ],
            captions: CaptionSpec::default(),
        }
    }
}

impl SyntheticCorpusSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.n_videos < 2 {
            return bad("at least 2 videos are needed".into());
        }
        let [lo, hi] = self.memorability_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return bad(format!("memorability range [{lo}, {hi}] must lie inside [0, 1]"));
        }
        let [t0, t1] = self.delay_range;
        if !(t0 > 0.0 && t0 <= t1 && t1.is_finite()) {
            return bad(format!("delay range [{t0}, {t1}] must be positive and ordered"));
        }
        if !(self.target_duration > 0.0 && self.target_duration.is_finite()) {
            return bad("target duration must be positive".into());
        }
        if !self.true_alpha.is_finite() || !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("alpha must be finite and noise non-negative".into());
        }
        if let Link::Logistic { steepness } = self.link {
            if !steepness.is_finite() {
                return bad("logistic steepness must be finite".into());
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for f in &self.features {
            if !names.insert(f.name.as_str()) {
                return bad(format!("duplicate feature name {:?}", f.name));
            }
            if f.dimension == 0 || f.rows[0] == 0 || f.rows[0] > f.rows[1] {
                return bad(format!("feature {:?} needs a positive dimension and row range", f.name));
            }
            if f.missing_videos >= self.n_videos {
                return bad(format!("feature {:?} would have no rows at all", f.name));
            }
        }
        let c = &self.captions;
        if c.per_video[0] == 0 || c.per_video[0] > c.per_video[1] || c.per_video[1] > 5 {
            return bad("captions per video must be a range inside 1..=5".into());
        }
        if c.words_per_caption[0] == 0 || c.words_per_caption[0] > c.words_per_caption[1] {
            return bad("words per caption must be a positive range".into());
        }
        if c.vocabulary == 0 || c.vector_dimension == 0 {
            return bad("vocabulary and vector dimension must be positive".into());
        }
        Ok(())
    }
}

/// Values the generator drew, for checking what fits recover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub alpha: f64,
    pub target_duration: f64,
    pub latent: BTreeMap<VideoId, f64>,
    pub m_star: BTreeMap<VideoId, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub annotations: AnnotationLog,
    pub features: Vec<FeatureSet>,
    pub captions: CaptionSet,
    pub word_vectors: WordVectorTable,
    pub labels_short: LabelTable,
    pub labels_long: LabelTable,
    pub truth: SyntheticTruth,
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn generate_synthetic(spec: &SyntheticCorpusSpec) -> Result<SyntheticCorpus, HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ids: Vec<VideoId> = (0..spec.n_videos)
        .map(|i| VideoId::new(format!("video{i:05}")).expect("generated ids are valid"))
        .collect();
    let latent: Vec<f64> = ids.iter().map(|_| rng.random::<f64>()).collect();

    let [lo, hi] = spec.memorability_range;
    let [t0, t1] = spec.delay_range;
    let mut annotations = AnnotationLog::new();
    let mut m_star = BTreeMap::new();
    for (id, s) in ids.iter().zip(&latent) {
        let m = lo + (hi - lo) * s;
        m_star.insert(id.clone(), m);
        for _ in 0..spec.obs_per_video {
            let t = if t0 == t1 { t0 } else { rng.random_range(t0..t1) };
            let p = (m + spec.true_alpha * (t / spec.target_duration).ln()).clamp(0.0, 1.0);
            let x = rng.random::<f64>() < p;
            annotations.push(id.clone(), Observation::new(x, t).expect("delay is positive"));
        }
    }

    let mut labels_short = LabelTable::new(Term::Short);
    let mut labels_long = LabelTable::new(Term::Long);
    for table in [&mut labels_short, &mut labels_long] {
        for (id, s) in ids.iter().zip(&latent) {
            let mut y = spec.link.apply(*s);
            if spec.noise > 0.0 {
                y += spec.noise * normal(&mut rng);
            }
            table.insert(id.clone(), y.clamp(0.0, 1.0)).expect("clamped label");
        }
    }

    let mut features = Vec::with_capacity(spec.features.len());
    for f in &spec.features {
        let mut set = FeatureSet::new(f.modality, f.name.clone(), f.dimension).expect("validated dimension");
        for (id, s) in ids.iter().zip(&latent).take(spec.n_videos - f.missing_videos) {
            let n_rows = rng.random_range(f.rows[0]..=f.rows[1]);
            for _ in 0..n_rows {
                let mut row: Vec<f64> = (0..f.dimension).map(|_| normal(&mut rng)).collect();
                if f.informative {
                    row[0] = *s;
                }
                set.push_row(id.clone(), row).expect("finite row of the right size");
            }
        }
        features.push(set);
    }

    let c = &spec.captions;
    let vocab: Vec<String> = (0..c.vocabulary).map(|i| format!("w{i}")).collect();
    let mut captions = CaptionSet::new();
    for (id, s) in ids.iter().zip(&latent) {
        let n = rng.random_range(c.per_video[0]..=c.per_video[1]);
        for _ in 0..n {
            let len = rng.random_range(c.words_per_caption[0]..=c.words_per_caption[1]);
            let mut words: Vec<&str> = Vec::with_capacity(len + 1);
            let level;
            if c.informative {
                level = format!("level{}", ((s * 10.0) as usize).min(9));
                words.push(&level);
            }
            for _ in 0..len {
                words.push(vocab.choose(&mut rng).expect("non-empty vocabulary"));
            }
            captions.push(id.clone(), words.join(" ")).expect("non-empty caption");
        }
    }

    let mut word_vectors = WordVectorTable::new(c.vector_dimension).expect("validated dimension");
    let scale = 1.0 / (c.vector_dimension as f64).sqrt();
    for token in &vocab {
        let v = (0..c.vector_dimension).map(|_| (normal(&mut rng) * scale) as f32).collect();
        word_vectors.insert(token, v).expect("finite vector");
    }
    if c.informative {
        for k in 0..10 {
            let mut v = vec![0.0f32; c.vector_dimension];
            v[0] = (k as f32 + 0.5) / 10.0;
            word_vectors.insert(&format!("level{k}"), v).expect("finite vector");
        }
    }

    Ok(SyntheticCorpus {
        annotations,
        features,
        captions,
        word_vectors,
        labels_short,
        labels_long,
        truth: SyntheticTruth {
            alpha: spec.true_alpha,
            target_duration: spec.target_duration,
            latent: ids.iter().cloned().zip(latent).collect(),
            m_star,
        },
    })
}

/// Files written by [`write_synthetic`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SyntheticFiles {
    pub annotations: PathBuf,
    pub labels_short: PathBuf,
    pub labels_long: PathBuf,
    pub captions: PathBuf,
    pub word_vectors: PathBuf,
    pub features: Vec<PathBuf>,
    pub truth: PathBuf,
    /// Experiment configuration over the written corpus.
    pub config: PathBuf,
}

/// Writes the corpus as CSV and text files under `dir`, plus a `truth.json`
/// sidecar and an `experiment.toml` that runs every feature through a
/// default model.
pub fn write_synthetic(corpus: &SyntheticCorpus, dir: &Path) -> Result<SyntheticFiles, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let files = SyntheticFiles {
        annotations: dir.join("annotations.csv"),
        labels_short: dir.join("labels_short.csv"),
        labels_long: dir.join("labels_long.csv"),
        captions: dir.join("captions.csv"),
        word_vectors: dir.join("word_vectors.txt"),
        features: corpus
            .features
            .iter()
            .map(|f| dir.join(format!("features_{}.csv", f.name())))
            .collect(),
        truth: dir.join("truth.json"),
        config: dir.join("experiment.toml"),
    };
    write_annotations_csv(&corpus.annotations, &files.annotations)?;
    write_labels_csv(&corpus.labels_short, &files.labels_short)?;
    write_labels_csv(&corpus.labels_long, &files.labels_long)?;
    write_captions_csv(&corpus.captions, &files.captions)?;
    write_word_vectors(&corpus.word_vectors, &files.word_vectors)?;
    for (set, path) in corpus.features.iter().zip(&files.features) {
        write_feature_csv(set, path)?;
    }
    let truth = serde_json::to_string_pretty(&corpus.truth).expect("truth serializes");
    std::fs::write(&files.truth, truth + "\n").map_err(|e| HarnessError::io(&files.truth, e))?;

    let mut config = String::from(
        "output_dir = \"run\"\nseeds = [0, 1, 2, 3, 4]\ntrain_fraction = 0.8\naggregation = \"median\"\nbucket = 0.05\n\n\
         [data]\nlabels_short = \"labels_short.csv\"\nlabels_long = \"labels_long.csv\"\n\
         captions = \"captions.csv\"\nword_vectors = \"word_vectors.txt\"\n",
    );
    for set in &corpus.features {
        config.push_str(&format!(
            "\n[[features]]\nname = \"{0}\"\nmodality = \"{1}\"\npath = \"features_{0}.csv\"\nmodel = \"svr\"\n",
            set.name(),
            set.modality()
        ));
    }
    config.push_str("\n[[features]]\nname = \"BoW\"\nmodality = \"text\"\nmodel = \"bow-ridge\"\n");
    std::fs::write(&files.config, config).map_err(|e| HarnessError::io(&files.config, e))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticCorpusSpec {
        SyntheticCorpusSpec {
            n_videos: 20,
            obs_per_video: 5,
            ..SyntheticCorpusSpec::default()
        }
    }

    #[test]
    fn noiseless_identity_labels_equal_the_informative_component() {
        let c = generate_synthetic(&small()).unwrap();
        let informative = &c.features[0];
        for (id, y) in c.labels_short.scores() {
            for row in informative.rows_for(id) {
                assert_eq!(row[0], *y);
            }
            assert_eq!(c.labels_long.get(id), Some(*y));
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(generate_synthetic(&small()).unwrap(), generate_synthetic(&small()).unwrap());
        let other = SyntheticCorpusSpec { seed: 1, ..small() };
        assert_ne!(
            generate_synthetic(&small()).unwrap().truth,
            generate_synthetic(&other).unwrap().truth
        );
    }

    #[test]
    fn shape_follows_spec() {
        let c = generate_synthetic(&small()).unwrap();
        assert_eq!(c.annotations.len(), 20);
        assert_eq!(c.annotations.total_observations(), 100);
        let audio = &c.features[2];
        assert_eq!(audio.rows().len(), 19);
        for rows in audio.rows().values() {
            assert!((4..=7).contains(&rows.len()));
        }
        for caps in c.captions.captions().values() {
            assert!((2..=5).contains(&caps.len()));
        }
    }

    #[test]
    fn logistic_link_is_monotone_and_bounded() {
        let l = Link::Logistic { steepness: 6.0 };
        assert_eq!(l.apply(0.5), 0.5);
        assert!(l.apply(0.2) < l.apply(0.3));
        assert!(l.apply(1.0) < 1.0 && l.apply(0.0) > 0.0);
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            SyntheticCorpusSpec { n_videos: 1, ..small() },
            SyntheticCorpusSpec {
                memorability_range: [0.5, 1.2],
                ..small()
            },
            SyntheticCorpusSpec {
                delay_range: [0.0, 10.0],
                ..small()
            },
            SyntheticCorpusSpec { noise: -1.0, ..small() },
        ];
        for spec in bad {
            assert!(generate_synthetic(&spec).is_err());
        }
    }
}
