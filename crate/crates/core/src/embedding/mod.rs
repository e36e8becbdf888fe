//! Descriptive sentences for entities and the two entity-embedding
//! strategies: one embedding of the concatenated sentences, or a weighted sum
//! of per-sentence embeddings.

mod hash;
mod remote;

use serde::{Deserialize, Serialize};

use crate::model::{EdgeTactic, Entity};

pub use hash::{hash_embed, HashEmbedder};
pub use remote::RemoteEmbedder;

pub const DIM: usize = 384;
/// Per-sentence character budget.
pub const SENTENCE_BUDGET: usize = 4096;
pub const PREFIXES: [&str; 5] = ["title: ", "field: ", "content: ", "in references: ", "out references: "];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("expected {expected} components, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector has a non-finite component")]
    NonFinite,
    #[error("vector norm is too small to normalize")]
    DegenerateVector,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("sentence mask selects nothing")]
    EmptyMask,
    #[error("embedder unavailable: {0}")]
    BackendUnavailable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(components: Vec<f64>) -> Result<Self, EmbeddingError> {
        if components.len() != DIM {
            return Err(EmbeddingError::DimensionMismatch {
                expected: DIM,
                got: components.len(),
            });
        }
        if components.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(EmbeddingVector(components))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn normalized(self) -> Result<Self, EmbeddingError> {
        let mut v = self.0;
        normalize_in_place(&mut v)?;
        Ok(EmbeddingVector(v))
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = EmbeddingError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        EmbeddingVector::new(v)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// Sum of squares accumulated in index order.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn normalize_in_place(v: &mut [f64]) -> Result<(), EmbeddingError> {
    let n = l2_norm(v);
    if !(n >= 1e-12) {
        return Err(EmbeddingError::DegenerateVector);
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 5]", into = "[f64; 5]")]
pub struct WeightVector([f64; 5]);

impl WeightVector {
    pub fn new(w: [f64; 5]) -> Result<Self, EmbeddingError> {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(EmbeddingError::InvalidWeights(format!("{w:?} has a negative or non-finite entry")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EmbeddingError::InvalidWeights(format!("{w:?} sums to {sum}")));
        }
        Ok(WeightVector(w))
    }

    /// All weight on sentence `j` (0-based).
    pub fn one_hot(j: usize) -> Self {
        let mut w = [0.0; 5];
        w[j] = 1.0;
        WeightVector(w)
    }

    pub fn values(&self) -> [f64; 5] {
        self.0
    }
}

impl Default for WeightVector {
    fn default() -> Self {
        WeightVector([0.5, 0.3, 0.1, 0.05, 0.05])
    }
}

impl TryFrom<[f64; 5]> for WeightVector {
    type Error = EmbeddingError;

    fn try_from(w: [f64; 5]) -> Result<Self, Self::Error> {
        WeightVector::new(w)
    }
}

impl From<WeightVector> for [f64; 5] {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// Nonempty subset of the five sentences; bit `j` stands for sentence `j+1`.
/// Serialized as the list of included sentence numbers, e.g. `[1,2,3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct SentenceMask(u8);

impl SentenceMask {
    pub const ALL: SentenceMask = SentenceMask(0b11111);
    /// Title, field and content only.
    pub const NO_REFS: SentenceMask = SentenceMask(0b00111);

    pub fn from_bits(bits: u8) -> Result<Self, EmbeddingError> {
        let bits = bits & 0b11111;
        if bits == 0 {
            return Err(EmbeddingError::EmptyMask);
        }
        Ok(SentenceMask(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    /// `j` is 0-based.
    pub fn includes(self, j: usize) -> bool {
        j < 5 && self.0 & (1 << j) != 0
    }
}

impl Default for SentenceMask {
    fn default() -> Self {
        SentenceMask::ALL
    }
}

impl TryFrom<Vec<u8>> for SentenceMask {
    type Error = EmbeddingError;

    fn try_from(v: Vec<u8>) -> Result<Self, Self::Error> {
        let mut bits = 0u8;
        for n in v {
            if !(1..=5).contains(&n) {
                return Err(EmbeddingError::EmptyMask);
            }
            bits |= 1 << (n - 1);
        }
        SentenceMask::from_bits(bits)
    }
}

impl From<SentenceMask> for Vec<u8> {
    fn from(m: SentenceMask) -> Self {
        (0..5).filter(|&j| m.includes(j)).map(|j| j as u8 + 1).collect()
    }
}

/// How strategy 2 treats masked-out sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Masked sentences get weight 0.
    #[default]
    ZeroWeight,
    /// Masked sentences contribute the embedding of their bare prefix.
    BarePrefix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// One embedding of the concatenated sentences.
    Strategy1,
    /// Weighted sum of per-sentence embeddings.
    Strategy2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    pub strategy: Strategy,
    pub weights: WeightVector,
    pub mask: SentenceMask,
    pub mask_mode: MaskMode,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            strategy: Strategy::Strategy2,
            weights: WeightVector::default(),
            mask: SentenceMask::ALL,
            mask_mode: MaskMode::ZeroWeight,
        }
    }
}

/// A text-to-vector service. Must allow concurrent calls.
pub trait Embedder: Send + Sync {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let mut v = self.embed_texts(&[text.to_string()])?;
        v.pop().ok_or_else(|| EmbeddingError::BackendUnavailable("empty batch response".into()))
    }
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        (**self).embed_texts(texts)
    }
}

impl<E: Embedder + ?Sized> Embedder for Box<E> {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        (**self).embed_texts(texts)
    }
}

impl<E: Embedder + ?Sized> Embedder for std::sync::Arc<E> {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        (**self).embed_texts(texts)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptiveSentences(pub [String; 5]);

impl DescriptiveSentences {
    pub fn get(&self, j: usize) -> &str {
        &self.0[j]
    }
}

fn truncate(s: String) -> String {
    match s.char_indices().nth(SENTENCE_BUDGET) {
        Some((i, _)) => s[..i].to_string(),
        None => s,
    }
}

fn refs_sentence(refs: &std::collections::BTreeMap<String, EdgeTactic>) -> String {
    let mut entries: Vec<(&String, &EdgeTactic)> = refs.iter().collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    entries
        .into_iter()
        .map(|(title, tactic)| match tactic.0 {
            Some(t) => format!("{title} ({t})"),
            None => title.clone(),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// The five sentences; masked-out ones are empty strings.
pub fn build_sentences(e: &Entity, mask: SentenceMask) -> DescriptiveSentences {
    let values = [
        e.title.clone(),
        e.field.map(|f| f.to_string()).unwrap_or_default(),
        e.contents.join(" "),
        refs_sentence(&e.in_refs),
        refs_sentence(&e.out_refs),
    ];
    let mut out: [String; 5] = Default::default();
    for (j, value) in values.into_iter().enumerate() {
        if mask.includes(j) {
            out[j] = truncate(format!("{}{}", PREFIXES[j], value));
        }
    }
    DescriptiveSentences(out)
}

/// Included sentences joined by single spaces.
pub fn concatenated_text(s: &DescriptiveSentences, mask: SentenceMask) -> String {
    (0..5)
        .filter(|&j| mask.includes(j))
        .map(|j| s.get(j))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn embed_strategy1(
    e: &Entity,
    emb: &dyn Embedder,
    mask: SentenceMask,
) -> Result<EmbeddingVector, EmbeddingError> {
    let s = build_sentences(e, mask);
    emb.embed_text(&concatenated_text(&s, mask))?.normalized()
}

pub fn embed_strategy2(
    e: &Entity,
    emb: &dyn Embedder,
    w: &WeightVector,
    mask: SentenceMask,
    mode: MaskMode,
) -> Result<EmbeddingVector, EmbeddingError> {
    let s = build_sentences(e, mask);
    let mut weighted: Vec<(f64, String)> = Vec::new();
    for (j, &wj) in w.values().iter().enumerate() {
        if wj == 0.0 {
            continue;
        }
        if mask.includes(j) {
            weighted.push((wj, s.get(j).to_string()));
        } else if mode == MaskMode::BarePrefix {
            weighted.push((wj, PREFIXES[j].to_string()));
        }
    }
    if weighted.is_empty() {
        return Err(EmbeddingError::DegenerateVector);
    }
    let texts: Vec<String> = weighted.iter().map(|(_, t)| t.clone()).collect();
    let vectors = emb.embed_texts(&texts)?;
    let mut acc = vec![0.0f64; DIM];
    for ((wj, _), v) in weighted.iter().zip(&vectors) {
        for (a, x) in acc.iter_mut().zip(v.as_slice()) {
            *a += wj * x;
        }
    }
    normalize_in_place(&mut acc)?;
    EmbeddingVector::new(acc)
}

pub fn embed_entity(
    e: &Entity,
    emb: &dyn Embedder,
    cfg: &EmbedConfig,
) -> Result<EmbeddingVector, EmbeddingError> {
    match cfg.strategy {
        Strategy::Strategy1 => embed_strategy1(e, emb, cfg.mask),
        Strategy::Strategy2 => embed_strategy2(e, emb, &cfg.weights, cfg.mask, cfg.mask_mode),
    }
}
