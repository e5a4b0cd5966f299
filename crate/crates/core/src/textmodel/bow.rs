use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{tokenize, TextError};
use crate::regress::{fit_linear, LinearKind, LinearModel, LinearParams, Regressor};

/// Token-count vectorizer; columns are the training vocabulary in sorted
/// order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowVectorizer {
    vocabulary: BTreeMap<String, usize>,
}

impl BowVectorizer {
    /// Builds the vocabulary from training captions only.
    pub fn fit<'a, I>(captions: I) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut vocabulary = BTreeMap::new();
        for c in captions {
            for t in tokenize(c)? {
                vocabulary.insert(t, 0);
            }
        }
        for (i, v) in vocabulary.values_mut().enumerate() {
            *v = i;
        }
        Ok(BowVectorizer { vocabulary })
    }

    pub fn from_vocabulary<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocabulary: BTreeMap<String, usize> = tokens.into_iter().map(|t| (t.into(), 0)).collect();
        for (i, v) in vocabulary.values_mut().enumerate() {
            *v = i;
        }
        BowVectorizer { vocabulary }
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    /// Count vector of one caption; unseen tokens are dropped.
    pub fn transform(&self, caption: &str) -> Result<Vec<f64>, TextError> {
        let mut row = vec![0.0; self.vocabulary.len()];
        for t in tokenize(caption)? {
            if let Some(&i) = self.vocabulary.get(&t) {
                row[i] += 1.0;
            }
        }
        Ok(row)
    }
}

pub fn bow_vectorize(captions: &[&str], vocab: &BowVectorizer) -> Result<Vec<Vec<f64>>, TextError> {
    captions.iter().map(|c| vocab.transform(c)).collect()
}

/// Bag-of-words features feeding a linear model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowLinearModel {
    pub vectorizer: BowVectorizer,
    pub model: LinearModel,
}

impl BowLinearModel {
    /// One training row per caption, labelled with its video's score.
    pub fn fit(captions: &[&str], labels: &[f64], kind: LinearKind, params: &LinearParams) -> Result<Self, TextError> {
        let vectorizer = BowVectorizer::fit(captions.iter().copied())?;
        if vectorizer.is_empty() {
            return Err(TextError::Config("empty vocabulary".into()));
        }
        let x = bow_vectorize(captions, &vectorizer)?;
        let model = fit_linear(&x, labels, kind, params)?;
        Ok(BowLinearModel { vectorizer, model })
    }

    pub fn predict_caption(&self, caption: &str) -> Result<f64, TextError> {
        let row = self.vectorizer.transform(caption)?;
        Ok(self.model.predict_row(&row)?)
    }
}
