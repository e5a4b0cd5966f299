use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::aggregate::Aggregation;
use crate::corpus::{Modality, Term};
use crate::decay::DecayWarning;
use crate::model::ModelKind;
use crate::numeric::{mean, population_variance};

/// Header of the per-feature table.
pub const FEATURE_COLUMNS: [&str; 7] = [
    "Modality",
    "Feature",
    "Model",
    "Mean (ST)",
    "Variance (ST)",
    "Mean (LT)",
    "Variance (LT)",
];

/// Header of an ensemble table over the named models.
pub fn ensemble_columns(model_names: &[String]) -> Vec<String> {
    let mut cols = vec!["Model".to_string()];
    cols.extend(model_names.iter().cloned());
    cols.push("Valid".into());
    cols.push("Test".into());
    cols
}

/// Per-seed validation rank correlations of one feature model on one term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermResult {
    /// Seeds that produced a score, parallel to `per_seed_srcc`.
    pub seeds: Vec<u64>,
    pub per_seed_srcc: Vec<f64>,
    pub mean: Option<f64>,
    /// Population variance over seeds.
    pub variance: Option<f64>,
    /// One message per failed seed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl TermResult {
    pub fn new(outcomes: Vec<(u64, Result<f64, String>)>) -> Self {
        let mut seeds = Vec::new();
        let mut per_seed_srcc = Vec::new();
        let mut errors = Vec::new();
        for (seed, r) in outcomes {
            match r {
                Ok(v) => {
                    seeds.push(seed);
                    per_seed_srcc.push(v);
                }
                Err(e) => errors.push(format!("seed {seed}: {e}")),
            }
        }
        TermResult {
            mean: mean(&per_seed_srcc),
            variance: population_variance(&per_seed_srcc),
            seeds,
            per_seed_srcc,
            errors,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub modality: Modality,
    pub feature: String,
    pub model: ModelKind,
    pub short: Option<TermResult>,
    pub long: Option<TermResult>,
    /// Terms for which this is the best feature of its modality.
    #[serde(default)]
    pub best_for: Vec<Term>,
}

impl FeatureRow {
    pub fn term(&self, term: Term) -> Option<&TermResult> {
        match term {
            Term::Short => self.short.as_ref(),
            Term::Long => self.long.as_ref(),
        }
    }
}

/// One grid-searched ensemble, for one term and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub term: Term,
    pub seed: u64,
    pub model_names: Vec<String>,
    pub weights: Vec<f64>,
    pub validation_srcc: Option<f64>,
    pub test_srcc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySummary {
    pub alpha: f64,
    pub target_duration: f64,
    pub iterations_run: usize,
    pub videos: usize,
    pub warnings: Vec<DecayWarning>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seeds: Vec<u64>,
    pub train_fraction: f64,
    pub aggregation: Aggregation,
    pub bucket: f64,
    pub terms: Vec<Term>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub decay: BTreeMap<Term, DecaySummary>,
    pub feature_rows: Vec<FeatureRow>,
    pub ensemble_rows: Vec<EnsembleRow>,
}

fn num(v: Option<f64>, places: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.places$}"))
}

fn table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |out: &mut String, cells: &[String]| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(out, header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(out, &rule);
    for r in rows {
        line(out, r);
    }
}

impl ExperimentReport {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned text tables: the per-feature table, then one ensemble table
    /// per term.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "seeds {:?}, train fraction {}, aggregation {}, bucket {}",
            self.seeds, self.train_fraction, self.aggregation, self.bucket
        );
        for (term, d) in &self.decay {
            let _ = writeln!(
                out,
                "decay fit ({term}): alpha {:.6} over {} videos, {} iterations{}",
                d.alpha,
                d.videos,
                d.iterations_run,
                if d.warnings.is_empty() { "" } else { ", degenerate delays" }
            );
        }
        out.push('\n');

        let header: Vec<String> = FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect();
        let rows: Vec<Vec<String>> = self
            .feature_rows
            .iter()
            .map(|r| {
                let mark = |t: Term| if r.best_for.contains(&t) { "*" } else { "" };
                vec![
                    r.modality.to_string(),
                    r.feature.clone(),
                    r.model.to_string(),
                    format!("{}{}", num(r.short.as_ref().and_then(|t| t.mean), 4), mark(Term::Short)),
                    num(r.short.as_ref().and_then(|t| t.variance), 6),
                    format!("{}{}", num(r.long.as_ref().and_then(|t| t.mean), 4), mark(Term::Long)),
                    num(r.long.as_ref().and_then(|t| t.variance), 6),
                ]
            })
            .collect();
        table(&mut out, &header, &rows);

        for term in &self.terms {
            let ens: Vec<&EnsembleRow> = self.ensemble_rows.iter().filter(|r| r.term == *term).collect();
            let Some(first) = ens.first() else { continue };
            let _ = writeln!(out, "\nensemble ({term} term)");
            let header = ensemble_columns(&first.model_names);
            let rows: Vec<Vec<String>> = ens
                .iter()
                .map(|r| {
                    let mut cells = vec![format!("seed {}", r.seed)];
                    if r.weights.len() == r.model_names.len() {
                        cells.extend(r.weights.iter().map(|w| format!("{w:.2}")));
                    } else {
                        cells.extend(r.model_names.iter().map(|_| "-".to_string()));
                    }
                    cells.push(num(r.validation_srcc, 4));
                    cells.push(num(r.test_srcc, 4));
                    cells
                })
                .collect();
            table(&mut out, &header, &rows);
        }
        out
    }
}
