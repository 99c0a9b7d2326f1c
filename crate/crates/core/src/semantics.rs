//! Answer text handling and embedding similarity.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemanticsError {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    ShapeMismatch { left: usize, right: usize },
    #[error("degenerate embedding: {0}")]
    DegenerateEmbedding(&'static str),
    #[error("at least two embeddings are required, got {0}")]
    InsufficientCandidates(usize),
    #[error("embedding dimension must be at least {min}, got {got}")]
    InvalidDimension { min: usize, got: usize },
}

/// Canonical answer form used for deduplication, numeric detection and
/// embedding lookup.
///
/// Lowercases, drops ASCII punctuation, collapses whitespace. Two exceptions
/// keep numbers and compounds readable: a `.` between two digits is kept as a
/// decimal point, and `-` separates words like whitespace does.
pub fn normalize_answer(raw: &str) -> String {
    let chars: Vec<char> = raw.chars().collect();
    let mut out = String::with_capacity(raw.len());
    for (i, &ch) in chars.iter().enumerate() {
        if ch == '.' {
            let prev = i.checked_sub(1).map(|p| chars[p]);
            let next = chars.get(i + 1).copied();
            if prev.is_some_and(|c| c.is_ascii_digit()) && next.is_some_and(|c| c.is_ascii_digit())
            {
                out.push('.');
            }
        } else if ch == '-' {
            out.push(' ');
        } else if ch.is_ascii_punctuation() {
        } else {
            out.extend(ch.to_lowercase());
        }
    }
    let mut collapsed = String::with_capacity(out.len());
    for word in out.split_whitespace() {
        if !collapsed.is_empty() {
            collapsed.push(' ');
        }
        collapsed.push_str(word);
    }
    collapsed
}

/// Spelled-out cardinals accepted as numeric tokens.
pub const CARDINAL_WORDS: &[&str] = &[
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
    "thirty",
    "forty",
    "fifty",
    "sixty",
    "seventy",
    "eighty",
    "ninety",
    "hundred",
    "thousand",
];

fn is_number_token(tok: &str) -> bool {
    let mut parts = tok.split('.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    if parts.next().is_some() {
        return false;
    }
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    digits(int) && frac.is_none_or(digits)
}

/// True for digit strings, decimals, and cardinal words, possibly compounded
/// with spaces or hyphens ("twenty one", "twenty-one").
pub fn is_numeric_answer(normalized: &str) -> bool {
    let mut tokens = normalized
        .split(|c: char| c.is_whitespace() || c == '-')
        .filter(|t| !t.is_empty())
        .peekable();
    if tokens.peek().is_none() {
        return false;
    }
    tokens.all(|t| is_number_token(t) || CARDINAL_WORDS.contains(&t))
}

/// One proposed answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerCandidate {
    pub raw: String,
    pub normalized: String,
    pub is_numeric: bool,
}

impl AnswerCandidate {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let normalized = normalize_answer(&raw);
        let is_numeric = is_numeric_answer(&normalized);
        Self {
            raw,
            normalized,
            is_numeric,
        }
    }
}

/// Answers that carry no content. Matched after normalization, so `"n/a"`
/// becomes `"na"`.
pub const DEFAULT_JUNK_ANSWERS: &[&str] = &[
    "unanswerable",
    "unsuitable",
    "none",
    "n/a",
    "unknown",
    "nothing",
];

/// Normalized junk set built from `DEFAULT_JUNK_ANSWERS`.
pub fn default_junk_list() -> BTreeSet<String> {
    DEFAULT_JUNK_ANSWERS
        .iter()
        .map(|s| normalize_answer(s))
        .collect()
}

/// Indices of the candidates that survive filtration: non-empty, not junk,
/// and not a repeat of an earlier normalized form. Order is preserved.
pub fn filter_indices(candidates: &[AnswerCandidate], junk: &BTreeSet<String>) -> Vec<usize> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut kept = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let n = c.normalized.as_str();
        if n.is_empty() || junk.contains(n) || !seen.insert(n) {
            continue;
        }
        kept.push(i);
    }
    kept
}

pub fn filter_candidates(
    candidates: &[AnswerCandidate],
    junk: &BTreeSet<String>,
) -> Vec<AnswerCandidate> {
    filter_indices(candidates, junk)
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect()
}

/// A sentence embedding: finite, non-zero, dimension ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, SemanticsError> {
        if values.is_empty() {
            return Err(SemanticsError::InvalidDimension { min: 1, got: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SemanticsError::DegenerateEmbedding("non-finite component"));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(SemanticsError::DegenerateEmbedding("zero vector"));
        }
        Ok(Self(values))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|v| v * v).sum())
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = SemanticsError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, SemanticsError> {
    if a.dimension() != b.dimension() {
        return Err(SemanticsError::ShapeMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let na2: f64 = a.0.iter().map(|v| v * v).sum();
    let nb2: f64 = b.0.iter().map(|v| v * v).sum();
    if na2 == 0.0 || nb2 == 0.0 {
        // components so small their squares underflow
        return Err(SemanticsError::DegenerateEmbedding("zero norm"));
    }
    // one sqrt of the product keeps sim(a, a) == 1.0 exactly
    Ok((dot / libm::sqrt(na2 * nb2)).clamp(-1.0, 1.0))
}

/// Symmetric pairwise cosine matrix with unit diagonal.
pub fn similarity_matrix(embeddings: &[Embedding]) -> Result<Vec<Vec<f64>>, SemanticsError> {
    let n = embeddings.len();
    let mut m = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = cosine_similarity(&embeddings[i], &embeddings[j])?;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

pub(crate) fn max_off_diagonal(m: &[Vec<f64>]) -> Option<f64> {
    let n = m.len();
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| m[i][j])
        .reduce(f64::max)
}

pub fn max_pairwise_similarity(embeddings: &[Embedding]) -> Result<f64, SemanticsError> {
    if embeddings.len() < 2 {
        return Err(SemanticsError::InsufficientCandidates(embeddings.len()));
    }
    let m = similarity_matrix(embeddings)?;
    Ok(max_off_diagonal(&m).expect("at least one pair"))
}

/// `D_S`: no pair of answers reaches `tau_sem` (strictly below).
pub fn semantic_disagreement(max_sim: f64, tau_sem: f64) -> bool {
    max_sim < tau_sem
}

fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic unit vector keyed on a hash of `normalized`.
///
/// Carries no meaning: unrelated words are roughly orthogonal and only
/// identical strings are guaranteed similarity 1. Used for tests and for
/// lenient runs where an answer is missing from the embedding table.
pub fn toy_embed(normalized: &str, dimension: usize) -> Result<Embedding, SemanticsError> {
    if dimension < 2 {
        return Err(SemanticsError::InvalidDimension {
            min: 2,
            got: dimension,
        });
    }
    let mut state = fnv1a(normalized);
    let mut v: Vec<f64> = (0..dimension)
        .map(|_| (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
        .collect();
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Embedding::new(v)
}

/// Normalize a user-supplied junk list.
pub fn junk_list_from<I, S>(entries: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    entries
        .into_iter()
        .map(|s| normalize_answer(s.as_ref()))
        .filter(|s| !s.is_empty())
        .collect()
}

impl core::fmt::Display for AnswerCandidate {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.raw)
    }
}

#[cfg(test)]
pub(crate) fn candidates_from<S: alloc::string::ToString>(raw: &[S]) -> Vec<AnswerCandidate> {
    raw.iter()
        .map(|s| AnswerCandidate::new(s.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_answer("  Table. "), "table");
        assert_eq!(normalize_answer("HEADPHONE"), "headphone");
        assert_eq!(normalize_answer("3!"), "3");
        assert_eq!(normalize_answer("n/a"), "na");
        assert_eq!(normalize_answer("3.5 inches"), "3.5 inches");
        assert_eq!(normalize_answer("end."), "end");
        assert_eq!(normalize_answer("twenty-one"), "twenty one");
        assert_eq!(normalize_answer("a \t\n b"), "a b");
        assert_eq!(normalize_answer("!!!"), "");
        assert_eq!(normalize_answer("Café"), "café");
    }

    #[test]
    fn numeric_examples() {
        assert!(is_numeric_answer("two"));
        assert!(is_numeric_answer("3"));
        assert!(!is_numeric_answer("table"));
        assert!(is_numeric_answer("3.5"));
        assert!(is_numeric_answer("twenty one"));
        assert!(is_numeric_answer("twenty-one"));
        assert!(is_numeric_answer("one hundred"));
        assert!(!is_numeric_answer("3 apples"));
        assert!(!is_numeric_answer(""));
        assert!(!is_numeric_answer("3.5.1"));
        assert!(!is_numeric_answer("twentyone"));
        for w in CARDINAL_WORDS {
            assert!(is_numeric_answer(w), "{w}");
        }
    }

    #[test]
    fn filter_examples() {
        let junk = default_junk_list();
        let kept = filter_candidates(&candidates_from(&["table", "Table", "headphone"]), &junk);
        let texts: Vec<_> = kept.iter().map(|c| c.raw.as_str()).collect();
        assert_eq!(texts, ["table", "headphone"]);

        let kept = filter_candidates(&candidates_from(&["unanswerable", "cat"]), &junk);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].raw, "cat");

        let all = candidates_from(&["dog", "cat", "bird"]);
        assert_eq!(filter_candidates(&all, &junk), all);

        // every default junk entry is filtered, in any casing
        for j in DEFAULT_JUNK_ANSWERS {
            let upper = j.to_uppercase();
            assert!(filter_candidates(&candidates_from(&[upper.as_str()]), &junk).is_empty());
        }
        assert!(filter_candidates(&candidates_from(&["", "  ?! "]), &junk).is_empty());
    }

    #[test]
    fn junk_list_is_configurable() {
        let junk = junk_list_from(["blurry"]);
        let kept = filter_candidates(&candidates_from(&["Blurry", "unanswerable"]), &junk);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].normalized, "unanswerable");
    }

    #[test]
    fn cosine_examples() {
        let a = emb(&[0.3, -2.0, 5.0]);
        assert_eq!(cosine_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(
            cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[0.0, 1.0])).unwrap(),
            0.0
        );
        let s = cosine_similarity(&emb(&[1.0, 1.0]), &emb(&[1.0, 0.0])).unwrap();
        assert!((s - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[-1.0, 0.0])).unwrap() == -1.0);
        assert!(matches!(
            cosine_similarity(&emb(&[1.0]), &emb(&[1.0, 0.0])),
            Err(SemanticsError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn embedding_validation() {
        assert!(Embedding::new(vec![0.0, 0.0]).is_err());
        assert!(Embedding::new(vec![]).is_err());
        assert!(Embedding::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(serde_json::from_str::<Embedding>("[0.0, 0.0]").is_err());
        assert_eq!(
            serde_json::from_str::<Embedding>("[1.0, 2.0]")
                .unwrap()
                .dimension(),
            2
        );
    }

    #[test]
    fn max_pairwise_examples() {
        assert_eq!(
            max_pairwise_similarity(&[emb(&[2.0, 1.0]), emb(&[2.0, 1.0])]).unwrap(),
            1.0
        );
        assert_eq!(
            max_pairwise_similarity(&[emb(&[1.0, 0.0]), emb(&[0.0, 1.0])]).unwrap(),
            0.0
        );
        let m = max_pairwise_similarity(&[emb(&[1.0, 0.0]), emb(&[0.0, 1.0]), emb(&[1.0, 1.0])])
            .unwrap();
        assert!((m - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(
            max_pairwise_similarity(&[emb(&[1.0])]),
            Err(SemanticsError::InsufficientCandidates(1))
        );
        // negative similarities flow through unclamped
        let m = max_pairwise_similarity(&[emb(&[1.0, 0.0]), emb(&[-1.0, 0.0])]).unwrap();
        assert_eq!(m, -1.0);
    }

    #[test]
    fn disagreement_is_strict() {
        assert!(semantic_disagreement(0.0, 0.7));
        assert!(!semantic_disagreement(1.0, 0.7));
        assert!(!semantic_disagreement(0.7, 0.7));
    }

    #[test]
    fn toy_embed_properties() {
        let a = toy_embed("cat", 8).unwrap();
        assert_eq!(a, toy_embed("cat", 8).unwrap());
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert_ne!(a, toy_embed("dog", 8).unwrap());
        assert!(toy_embed("cat", 1).is_err());
    }
}
