//! Caption processing and text regressors: tokenization, word-vector
//! lookup, a bag-of-words baseline and a GRU regressor.

mod bow;
mod gru;
mod train;

pub use bow::{bow_vectorize, BowLinearModel, BowVectorizer};
pub use gru::{
    dropout_mask, gru_forward, Dense, ForwardCache, GruCell, GruParams, GruRegressor, Mat, Mode, DEFAULT_DENSE_DROPOUT,
    DEFAULT_DENSE_WIDTHS, DEFAULT_GRU_DROPOUT, DEFAULT_HIDDEN_UNITS,
};
pub use train::{gru_train, EpochRecord, TextSample, TrainConfig, TrainingLog};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::WordVectorTable;
use crate::regress::RegressError;

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("caption is empty or whitespace")]
    EmptyCaption,
    #[error("caption {0:?} contains no tokens")]
    NoTokens(String),
    #[error("token sequence is empty")]
    EmptySequence,
    #[error("input vector has dimension {found}, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Regress(#[from] RegressError),
}

/// Lowercases, deletes punctuation and symbols, and splits on whitespace.
pub fn tokenize(caption: &str) -> Result<Vec<String>, TextError> {
    if caption.trim().is_empty() {
        return Err(TextError::EmptyCaption);
    }
    let cleaned: String = caption
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    let tokens: Vec<String> = cleaned.split_whitespace().map(str::to_string).collect();
    if tokens.is_empty() {
        return Err(TextError::NoTokens(caption.to_string()));
    }
    Ok(tokens)
}

/// Tokens with their word vectors. Unknown tokens carry a zero vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub oov: usize,
}

impl TokenSequence {
    /// A sequence of raw vectors without token strings.
    pub fn from_vectors(vectors: Vec<Vec<f64>>) -> Self {
        TokenSequence {
            tokens: vec![String::new(); vectors.len()],
            vectors,
            oov: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

pub fn embed(tokens: &[String], table: &WordVectorTable) -> TokenSequence {
    let mut oov = 0;
    let vectors = tokens
        .iter()
        .map(|t| match table.get(t) {
            Some(v) => v.iter().map(|&x| f64::from(x)).collect(),
            None => {
                oov += 1;
                vec![0.0; table.dimension()]
            }
        })
        .collect();
    TokenSequence {
        tokens: tokens.to_vec(),
        vectors,
        oov,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("A man runs.").unwrap(), toks(&["a", "man", "runs"]));
        assert_eq!(tokenize("dog,  DOG!").unwrap(), toks(&["dog", "dog"]));
        assert_eq!(tokenize("!!!"), Err(TextError::NoTokens("!!!".into())));
        assert_eq!(tokenize("   "), Err(TextError::EmptyCaption));
        assert_eq!(tokenize(""), Err(TextError::EmptyCaption));
        assert_eq!(tokenize("Café déjà-vu").unwrap(), toks(&["café", "déjàvu"]));
    }

    #[test]
    fn embed_known_and_unknown() {
        let mut table = WordVectorTable::new(300).unwrap();
        let the: Vec<f32> = (0..300).map(|i| i as f32 * 0.25).collect();
        table.insert("the", the.clone()).unwrap();
        table.insert("cat", vec![1.0; 300]).unwrap();

        let seq = embed(&toks(&["the"]), &table);
        assert_eq!(seq.oov, 0);
        assert_eq!(seq.vectors[0], the.iter().map(|&v| v as f64).collect::<Vec<_>>());

        let seq = embed(&toks(&["zzzqqq"]), &table);
        assert_eq!(seq.oov, 1);
        assert_eq!(seq.vectors[0], vec![0.0; 300]);

        let seq = embed(&toks(&["the", "x", "cat", "y", "the"]), &table);
        assert_eq!(seq.oov, 2);
        assert_eq!(seq.len(), 5);
    }
}
