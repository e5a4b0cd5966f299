use std::collections::BTreeSet;
use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use memorability::aggregate::{aggregate_rows, load_prediction_csv, write_prediction_csv, Aggregation};
use memorability::corpus::{
    load_annotations_csv, load_captions_csv, load_feature_csv, load_id_list, load_labels_csv, load_word_vectors,
    write_labels_csv, CaptionSet, FeatureSet, Modality, Term, VideoId, WordVectorTable,
};
use memorability::decay::{adjust_labels, fit_decay, DEFAULT_ITERATIONS, DEFAULT_TARGET_DURATION};
use memorability::ensemble::{grid_search, DEFAULT_BUCKET};
use memorability::harness::{generate_synthetic, run_experiment_in_dir, write_synthetic, ExperimentConfig, SyntheticCorpusSpec};
use memorability::metrics::spearman;
use memorability::model::{predict_rows, train_model, Inputs, ModelKind, TrainedModel};

type CliResult = Result<(), Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "memorability", version, about = "Video memorability modeling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the decay model to an annotation log and write adjusted labels.
    AdjustLabels {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TARGET_DURATION)]
        target_duration: f64,
        #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
        iterations: usize,
        #[arg(long, default_value = "short")]
        term: Term,
        /// Labels CSV; the fit summary goes next to it with a `.json` extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and save it as JSON.
    Train {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        model: ModelKind,
        /// Hyperparameters as a JSON object; defaults when absent.
        #[arg(long)]
        params: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score videos with a saved model and aggregate to one score per video.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long, default_value = "median")]
        aggregate: Aggregation,
        /// Ids to score, one per line. Defaults to every video with inputs.
        #[arg(long)]
        ids: Option<PathBuf>,
        /// Model name recorded with the predictions; defaults to the file stem.
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the rank correlation between predictions and labels.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Grid-search ensemble weights over prediction files.
    EnsembleSearch {
        #[arg(long, num_args = 1.., required = true)]
        pred: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BUCKET)]
        bucket: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full experiment described by a TOML file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the worker count of the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Generate a synthetic corpus from a TOML spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory; defaults to `synthetic` next to the spec.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InputArgs {
    #[arg(long, conflicts_with = "captions")]
    features: Option<PathBuf>,
    #[arg(long, default_value = "video")]
    modality: Modality,
    #[arg(long)]
    captions: Option<PathBuf>,
    #[arg(long, requires = "captions")]
    word_vectors: Option<PathBuf>,
}

enum Loaded {
    Features(FeatureSet),
    Text(CaptionSet, Option<WordVectorTable>),
}

impl Loaded {
    fn inputs(&self) -> Inputs<'_> {
        match self {
            Loaded::Features(f) => Inputs::Features(f),
            Loaded::Text(c, w) => Inputs::Text {
                captions: c,
                word_vectors: w.as_ref(),
            },
        }
    }

    fn ids(&self) -> BTreeSet<VideoId> {
        match self {
            Loaded::Features(f) => f.rows().keys().cloned().collect(),
            Loaded::Text(c, _) => c.captions().keys().cloned().collect(),
        }
    }
}

impl InputArgs {
    fn load(&self, name: &str) -> Result<Loaded, Box<dyn Error>> {
        if let Some(p) = &self.features {
            return Ok(Loaded::Features(load_feature_csv(p, self.modality, name)?));
        }
        let Some(c) = &self.captions else {
            return Err("one of --features or --captions is required".into());
        };
        let wv = self.word_vectors.as_ref().map(load_word_vectors).transpose()?;
        Ok(Loaded::Text(load_captions_csv(c)?, wv))
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::AdjustLabels {
            annotations,
            target_duration,
            iterations,
            term,
            out,
        } => {
            let log = load_annotations_csv(&annotations)?;
            let fit = fit_decay(&log, target_duration, iterations)?;
            write_labels_csv(&adjust_labels(&fit, term), &out)?;
            let sidecar = json!({
                "alpha": fit.alpha,
                "target_duration": fit.target_duration,
                "iterations_run": fit.iterations_run,
                "alpha_trajectory": fit.alpha_trajectory,
                "warnings": fit.warnings,
                "videos": fit.m_t.len(),
            });
            write_json(&out.with_extension("json"), &sidecar)?;
            for w in &fit.warnings {
                eprintln!("warning: {w:?}");
            }
            println!("alpha {:.6} over {} videos", fit.alpha, fit.m_t.len());
        }
        Command::Train {
            inputs,
            labels,
            model,
            params,
            seed,
            out,
        } => {
            let params = params.as_deref().map(serde_json::from_str).transpose()?;
            let params = model.params(params)?;
            let loaded = inputs.load(&stem(&out))?;
            let labels = load_labels_csv(&labels, Term::Short)?;
            let trained = train_model(model, &params, loaded.inputs(), &labels, seed)?;
            write_json(&out, &trained)?;
        }
        Command::Predict {
            model,
            inputs,
            aggregate,
            ids,
            name,
            out,
        } => {
            let text = std::fs::read_to_string(&model).map_err(|e| format!("{}: {e}", model.display()))?;
            let trained: TrainedModel = serde_json::from_str(&text)?;
            let name = name.unwrap_or_else(|| stem(&model));
            let loaded = inputs.load(&name)?;
            let universe: BTreeSet<VideoId> = match &ids {
                Some(p) => load_id_list(p)?.into_iter().collect(),
                None => loaded.ids(),
            };
            let list: Vec<VideoId> = universe.iter().cloned().collect();
            let rows = predict_rows(&trained, loaded.inputs(), &list)?;
            let table = aggregate_rows(&name, &rows, aggregate, &universe)?;
            write_prediction_csv(&table, &out, true)?;
            if table.fallback_count() > 0 {
                eprintln!("{} of {} videos had no inputs and got the fallback score", table.fallback_count(), table.len());
            }
        }
        Command::Evaluate { pred, truth } => {
            let pred = load_prediction_csv(&pred, &stem(&pred))?;
            let truth = load_labels_csv(&truth, Term::Short)?;
            let mut p = Vec::with_capacity(truth.len());
            let mut t = Vec::with_capacity(truth.len());
            for (id, y) in truth.scores() {
                p.push(pred.get(id).ok_or_else(|| format!("no prediction for video {id}"))?);
                t.push(*y);
            }
            println!("{:.6}", spearman(&p, &t)?);
        }
        Command::EnsembleSearch {
            pred,
            truth,
            bucket,
            out,
        } => {
            let tables = pred
                .iter()
                .map(|p| load_prediction_csv(p, &stem(p)))
                .collect::<Result<Vec<_>, _>>()?;
            let truth = load_labels_csv(&truth, Term::Short)?;
            let w = grid_search(&tables, &truth, bucket)?;
            write_json(&out, &w)?;
            let shown: Vec<String> = w
                .model_names
                .iter()
                .zip(&w.weights)
                .map(|(n, x)| format!("{n}={x:.2}"))
                .collect();
            println!("{} srcc {:.6}", shown.join(" "), w.validation_srcc);
        }
        Command::Experiment { config, workers } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if workers.is_some() {
                cfg.workers = workers;
                cfg.validate()?;
            }
            let report = run_experiment_in_dir(&cfg)?;
            print!("{}", report.to_text());
            eprintln!("report written to {}", cfg.output_dir.display());
        }
        Command::Synth { spec, out } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| format!("{}: {e}", spec.display()))?;
            let parsed: SyntheticCorpusSpec = toml::from_str(&text)?;
            let dir = out.unwrap_or_else(|| spec.parent().unwrap_or(Path::new("")).join("synthetic"));
            let corpus = generate_synthetic(&parsed)?;
            let files = write_synthetic(&corpus, &dir)?;
            println!("{}", files.config.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
