//! Data model and on-disk loaders.
//!
//! Every table in this module is built either by one of the `load_*`
//! functions or incrementally through its validating `push`/`insert`
//! methods; both paths enforce the same invariants. Loaders never skip a
//! malformed line: the first offending line aborts the load with a
//! [`CorpusError::Line`] carrying its 1-based line number.
//!
//! All CSV files are header-less, but a first line whose first field is
//! literally `video_id` is accepted and ignored.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum number of captions accepted for one video.
pub const MAX_CAPTIONS_PER_VIDEO: usize = 5;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {kind}")]
    Line {
        path: PathBuf,
        line: u64,
        kind: LineError,
    },
    #[error("{path}: file contains no data lines")]
    Empty { path: PathBuf },
    #[error(transparent)]
    Invalid(#[from] LineError),
}

/// What was wrong with a single record.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineError {
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("expected {expected} fields, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("field {index} is not a number: {value:?}")]
    NonNumeric { index: usize, value: String },
    #[error("field {index} is not finite")]
    NonFinite { index: usize },
    #[error("invalid video id {0:?}: must be non-empty without whitespace or commas")]
    BadVideoId(String),
    #[error("delay must be positive, got {0}")]
    NonPositiveDelay(f64),
    #[error("recognized flag must be 0 or 1, got {0:?}")]
    BadRecognized(String),
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("duplicate entry for {0}")]
    Duplicate(String),
    #[error("empty caption")]
    EmptyCaption,
    #[error("video {0} has more than {MAX_CAPTIONS_PER_VIDEO} captions")]
    TooManyCaptions(String),
    #[error("vector dimension must be positive")]
    ZeroDimension,
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Identifier of one video.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct VideoId(String);

impl VideoId {
    pub fn new(id: impl Into<String>) -> Result<Self, LineError> {
        let id = id.into();
        if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c == ',') {
            return Err(LineError::BadVideoId(id));
        }
        Ok(VideoId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VideoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for VideoId {
    type Err = LineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VideoId::new(s)
    }
}

impl TryFrom<String> for VideoId {
    type Error = LineError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        VideoId::new(s)
    }
}

impl From<VideoId> for String {
    fn from(id: VideoId) -> String {
        id.0
    }
}

/// One recognition trial: was the repeat detected, and after what delay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    recognized: bool,
    delay_seconds: f64,
}

impl Observation {
    pub fn new(recognized: bool, delay_seconds: f64) -> Result<Self, LineError> {
        if !delay_seconds.is_finite() {
            return Err(LineError::NonFinite { index: 1 });
        }
        if delay_seconds <= 0.0 {
            return Err(LineError::NonPositiveDelay(delay_seconds));
        }
        Ok(Observation {
            recognized,
            delay_seconds,
        })
    }

    pub fn recognized(&self) -> bool {
        self.recognized
    }

    /// The recognition outcome as 0.0 or 1.0.
    pub fn hit(&self) -> f64 {
        if self.recognized {
            1.0
        } else {
            0.0
        }
    }

    pub fn delay_seconds(&self) -> f64 {
        self.delay_seconds
    }
}

/// Recognition trials grouped by video.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationLog {
    entries: BTreeMap<VideoId, Vec<Observation>>,
}

impl AnnotationLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, id: VideoId, obs: Observation) {
        self.entries.entry(id).or_default().push(obs);
    }

    pub fn entries(&self) -> &BTreeMap<VideoId, Vec<Observation>> {
        &self.entries
    }

    pub fn observations(&self, id: &VideoId) -> Option<&[Observation]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    /// Number of videos.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_observations(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Image,
    Video,
    Text,
}

impl Modality {
    pub const ALL: [Modality; 4] = [
        Modality::Audio,
        Modality::Image,
        Modality::Video,
        Modality::Text,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Image => "image",
            Modality::Video => "video",
            Modality::Text => "text",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown modality {s:?}"))
    }
}

/// Precomputed feature vectors of one kind (e.g. per-second audio
/// embeddings), zero or more rows per video.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    modality: Modality,
    name: String,
    dimension: usize,
    rows: BTreeMap<VideoId, Vec<Vec<f64>>>,
}

impl FeatureSet {
    pub fn new(modality: Modality, name: impl Into<String>, dimension: usize) -> Result<Self, LineError> {
        if dimension == 0 {
            return Err(LineError::ZeroDimension);
        }
        Ok(FeatureSet {
            modality,
            name: name.into(),
            dimension,
            rows: BTreeMap::new(),
        })
    }

    pub fn push_row(&mut self, id: VideoId, row: Vec<f64>) -> Result<(), LineError> {
        if row.len() != self.dimension {
            return Err(LineError::DimensionMismatch {
                expected: self.dimension,
                found: row.len(),
            });
        }
        if let Some(index) = row.iter().position(|v| !v.is_finite()) {
            return Err(LineError::NonFinite { index: index + 1 });
        }
        self.rows.entry(id).or_default().push(row);
        Ok(())
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rows(&self) -> &BTreeMap<VideoId, Vec<Vec<f64>>> {
        &self.rows
    }

    /// Rows of one video; empty for a video the set does not cover.
    pub fn rows_for(&self, id: &VideoId) -> &[Vec<f64>] {
        self.rows.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total_rows(&self) -> usize {
        self.rows.values().map(Vec::len).sum()
    }
}

/// Human-written captions, one to five per video.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CaptionSet {
    captions: BTreeMap<VideoId, Vec<String>>,
}

impl CaptionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a caption with surrounding whitespace removed.
    pub fn push(&mut self, id: VideoId, caption: impl Into<String>) -> Result<(), LineError> {
        let mut caption: String = caption.into();
        let trimmed = caption.trim();
        if trimmed.len() != caption.len() {
            caption = trimmed.to_string();
        }
        if caption.is_empty() {
            return Err(LineError::EmptyCaption);
        }
        let list = self.captions.entry(id.clone()).or_default();
        if list.len() >= MAX_CAPTIONS_PER_VIDEO {
            return Err(LineError::TooManyCaptions(id.to_string()));
        }
        list.push(caption);
        Ok(())
    }

    pub fn captions(&self) -> &BTreeMap<VideoId, Vec<String>> {
        &self.captions
    }

    pub fn captions_for(&self, id: &VideoId) -> &[String] {
        self.captions.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.captions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captions.is_empty()
    }
}

/// Pretrained word vectors keyed by lowercase token.
///
/// Stored in single precision, as distributed.
#[derive(Clone, Debug, PartialEq)]
pub struct WordVectorTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl WordVectorTable {
    pub fn new(dimension: usize) -> Result<Self, LineError> {
        if dimension == 0 {
            return Err(LineError::ZeroDimension);
        }
        Ok(WordVectorTable {
            dimension,
            vectors: HashMap::new(),
        })
    }

    /// Adds a vector. The token is lowercased; an already present token
    /// keeps its first vector and `false` is returned.
    pub fn insert(&mut self, token: &str, vector: Vec<f32>) -> Result<bool, LineError> {
        if vector.len() != self.dimension {
            return Err(LineError::DimensionMismatch {
                expected: self.dimension,
                found: vector.len(),
            });
        }
        if let Some(index) = vector.iter().position(|v| !v.is_finite()) {
            return Err(LineError::NonFinite { index: index + 1 });
        }
        let key = token.to_lowercase();
        if self.vectors.contains_key(&key) {
            return Ok(false);
        }
        self.vectors.insert(key, vector);
        Ok(true)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Tokens in sorted order.
    pub fn tokens(&self) -> Vec<&str> {
        let mut t: Vec<&str> = self.vectors.keys().map(String::as_str).collect();
        t.sort_unstable();
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Short,
    Long,
}

impl Term {
    pub fn as_str(&self) -> &'static str {
        match self {
            Term::Short => "short",
            Term::Long => "long",
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Term {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "short" | "st" => Ok(Term::Short),
            "long" | "lt" => Ok(Term::Long),
            _ => Err(format!("unknown term {s:?}")),
        }
    }
}

/// Memorability scores in `[0, 1]` for one term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelTable {
    term: Term,
    scores: BTreeMap<VideoId, f64>,
}

impl LabelTable {
    pub fn new(term: Term) -> Self {
        LabelTable {
            term,
            scores: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: VideoId, score: f64) -> Result<(), LineError> {
        if !score.is_finite() {
            return Err(LineError::NonFinite { index: 1 });
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(LineError::ScoreOutOfRange(score));
        }
        if self.scores.contains_key(&id) {
            return Err(LineError::Duplicate(id.to_string()));
        }
        self.scores.insert(id, score);
        Ok(())
    }

    pub fn term(&self) -> Term {
        self.term
    }

    pub fn scores(&self) -> &BTreeMap<VideoId, f64> {
        &self.scores
    }

    pub fn get(&self, id: &VideoId) -> Option<f64> {
        self.scores.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &VideoId> {
        self.scores.keys()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Restricts the table to `ids`; ids without a label are ignored.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a VideoId>) -> LabelTable {
        let scores = ids
            .into_iter()
            .filter_map(|id| self.scores.get(id).map(|s| (id.clone(), *s)))
            .collect();
        LabelTable {
            term: self.term,
            scores,
        }
    }
}

// ---------------------------------------------------------------------------
// CSV plumbing

struct Records {
    path: PathBuf,
    reader: csv::Reader<File>,
    first: bool,
}

impl Records {
    fn open(path: &Path) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        Ok(Records {
            path: path.to_path_buf(),
            reader,
            first: true,
        })
    }

    fn line_err(&self, line: u64, kind: LineError) -> CorpusError {
        CorpusError::Line {
            path: self.path.clone(),
            line,
            kind,
        }
    }

    /// Next data record with its line number, skipping an optional header.
    fn next_record(&mut self) -> Result<Option<(u64, csv::StringRecord)>, CorpusError> {
        loop {
            let mut record = csv::StringRecord::new();
            let more = match self.reader.read_record(&mut record) {
                Ok(more) => more,
                Err(e) => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    return Err(match e.into_kind() {
                        csv::ErrorKind::Io(source) => io_err(&self.path, source),
                        other => self.line_err(line, LineError::Csv(format!("{other:?}"))),
                    });
                }
            };
            if !more {
                return Ok(None);
            }
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let first = std::mem::replace(&mut self.first, false);
            if first && record.get(0) == Some("video_id") {
                continue;
            }
            if record.len() == 1 && record.get(0) == Some("") {
                continue;
            }
            return Ok(Some((line, record)));
        }
    }
}

fn parse_f64(field: &str, index: usize) -> Result<f64, LineError> {
    let v: f64 = field.parse().map_err(|_| LineError::NonNumeric {
        index,
        value: field.to_string(),
    })?;
    if !v.is_finite() {
        return Err(LineError::NonFinite { index });
    }
    Ok(v)
}

fn expect_arity(record: &csv::StringRecord, expected: usize) -> Result<(), LineError> {
    if record.len() != expected {
        return Err(LineError::Arity {
            expected,
            found: record.len(),
        });
    }
    Ok(())
}

/// Loads a feature file with lines `video_id,f0,...,f(d-1)`.
pub fn load_feature_csv(
    path: impl AsRef<Path>,
    modality: Modality,
    name: &str,
) -> Result<FeatureSet, CorpusError> {
    let path = path.as_ref();
    let mut records = Records::open(path)?;
    let mut set: Option<FeatureSet> = None;
    while let Some((line, record)) = records.next_record()? {
        let parsed = (|| {
            if record.len() < 2 {
                return Err(LineError::Arity {
                    expected: 2,
                    found: record.len(),
                });
            }
            let id = VideoId::new(&record[0])?;
            let row = record
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, f)| parse_f64(f, i))
                .collect::<Result<Vec<_>, _>>()?;
            let set = match &mut set {
                Some(s) => s,
                None => set.insert(FeatureSet::new(modality, name, row.len())?),
            };
            set.push_row(id, row)
        })();
        parsed.map_err(|kind| records.line_err(line, kind))?;
    }
    set.ok_or_else(|| CorpusError::Empty {
        path: path.to_path_buf(),
    })
}

/// Loads `video_id,delay_seconds,recognized` lines.
pub fn load_annotations_csv(path: impl AsRef<Path>) -> Result<AnnotationLog, CorpusError> {
    let path = path.as_ref();
    let mut records = Records::open(path)?;
    let mut log = AnnotationLog::new();
    while let Some((line, record)) = records.next_record()? {
        let parsed = (|| {
            expect_arity(&record, 3)?;
            let id = VideoId::new(&record[0])?;
            let delay = parse_f64(&record[1], 1)?;
            let recognized = match &record[2] {
                "0" => false,
                "1" => true,
                other => return Err(LineError::BadRecognized(other.to_string())),
            };
            Ok((id, Observation::new(recognized, delay)?))
        })();
        let (id, obs) = parsed.map_err(|kind| records.line_err(line, kind))?;
        log.push(id, obs);
    }
    if log.is_empty() {
        return Err(CorpusError::Empty {
            path: path.to_path_buf(),
        });
    }
    Ok(log)
}

/// Loads `video_id,"caption text"` lines (standard CSV quoting).
pub fn load_captions_csv(path: impl AsRef<Path>) -> Result<CaptionSet, CorpusError> {
    let path = path.as_ref();
    let mut records = Records::open(path)?;
    let mut set = CaptionSet::new();
    while let Some((line, record)) = records.next_record()? {
        let parsed = (|| {
            expect_arity(&record, 2)?;
            let id = VideoId::new(&record[0])?;
            set.push(id, &record[1])
        })();
        parsed.map_err(|kind| records.line_err(line, kind))?;
    }
    if set.is_empty() {
        return Err(CorpusError::Empty {
            path: path.to_path_buf(),
        });
    }
    Ok(set)
}

/// Loads `video_id,score` lines into a table for `term`.
pub fn load_labels_csv(path: impl AsRef<Path>, term: Term) -> Result<LabelTable, CorpusError> {
    let path = path.as_ref();
    let mut records = Records::open(path)?;
    let mut table = LabelTable::new(term);
    while let Some((line, record)) = records.next_record()? {
        let parsed = (|| {
            expect_arity(&record, 2)?;
            let id = VideoId::new(&record[0])?;
            let score = parse_f64(&record[1], 1)?;
            table.insert(id, score)
        })();
        parsed.map_err(|kind| records.line_err(line, kind))?;
    }
    if table.is_empty() {
        return Err(CorpusError::Empty {
            path: path.to_path_buf(),
        });
    }
    Ok(table)
}

/// Loads a whitespace-separated `token f0 ... f(D-1)` file. `D` is taken
/// from the first line.
pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<WordVectorTable, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut table: Option<WordVectorTable> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = (|| {
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-blank line has a token");
            let vector = fields
                .enumerate()
                .map(|(i, f)| {
                    f.parse::<f32>().map_err(|_| LineError::NonNumeric {
                        index: i + 1,
                        value: f.to_string(),
                    })
                })
                .collect::<Result<Vec<f32>, _>>()?;
            let table = match &mut table {
                Some(t) => t,
                None => table.insert(WordVectorTable::new(vector.len())?),
            };
            table.insert(token, vector).map(|_| ())
        })();
        parsed.map_err(|kind| CorpusError::Line {
            path: path.to_path_buf(),
            line: line_no,
            kind,
        })?;
    }
    table.ok_or_else(|| CorpusError::Empty {
        path: path.to_path_buf(),
    })
}

/// Loads a list of video ids, one per line; blank lines are ignored. Only
/// the first comma-separated field counts, so label files work as id lists.
pub fn load_id_list(path: impl AsRef<Path>) -> Result<Vec<VideoId>, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut ids = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split(',').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let id = VideoId::new(line).map_err(|kind| CorpusError::Line {
            path: path.to_path_buf(),
            line: idx as u64 + 1,
            kind,
        })?;
        ids.push(id);
    }
    Ok(ids)
}

// ---------------------------------------------------------------------------
// Writers. Floats use Rust's shortest round-trip formatting, so reloading a
// written file reproduces every value bit for bit.

fn create(path: &Path) -> Result<BufWriter<File>, CorpusError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

pub fn write_feature_csv(set: &FeatureSet, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        for (id, rows) in &set.rows {
            for row in rows {
                write!(out, "{id}")?;
                for v in row {
                    write!(out, ",{v}")?;
                }
                writeln!(out)?;
            }
        }
        out.flush()
    };
    write(&mut out).map_err(|e| io_err(path, e))
}

pub fn write_annotations_csv(log: &AnnotationLog, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        for (id, obs) in &log.entries {
            for o in obs {
                writeln!(out, "{id},{},{}", o.delay_seconds, u8::from(o.recognized))?;
            }
        }
        out.flush()
    };
    write(&mut out).map_err(|e| io_err(path, e))
}

pub fn write_labels_csv(table: &LabelTable, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        for (id, s) in &table.scores {
            writeln!(out, "{id},{s}")?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| io_err(path, e))
}

pub fn write_captions_csv(set: &CaptionSet, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .quote_style(csv::QuoteStyle::Always)
        .from_writer(file);
    let to_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => io_err(path, std::io::Error::other(format!("{other:?}"))),
    };
    for (id, caps) in &set.captions {
        for c in caps {
            writer.write_record([id.as_str(), c.as_str()]).map_err(to_err)?;
        }
    }
    writer.flush().map_err(|e| io_err(path, e))
}

pub fn write_word_vectors(table: &WordVectorTable, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        for token in table.tokens() {
            write!(out, "{token}")?;
            for v in &table.vectors[token] {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| io_err(path, e))
}
