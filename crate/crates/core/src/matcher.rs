//! Map free-text mention embeddings onto a fixed concept lexicon.
//!
//! Each mention goes to the lexicon entry with the highest cosine
//! similarity, and is discarded when even that similarity falls below the
//! threshold `epsilon`.

use std::collections::HashSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{FadError, Result};

pub const DEFAULT_EPSILON: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub id: String,
    pub name: String,
    pub vector: Vec<f64>,
}

/// Immutable concept vocabulary with uniform, nonzero vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingLexicon {
    entries: Vec<LexiconEntry>,
    dim: usize,
}

impl EmbeddingLexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self> {
        let first = entries.first().ok_or_else(|| FadError::Config("lexicon is empty".into()))?;
        let dim = first.vector.len();
        if dim == 0 {
            return Err(FadError::Shape("lexicon vectors must have positive dimension".into()));
        }
        let mut ids = HashSet::new();
        for e in &entries {
            if e.vector.len() != dim {
                return Err(FadError::Shape(format!("entry '{}' has dim {}, expected {dim}", e.id, e.vector.len())));
            }
            check_vector(&e.vector, &e.id)?;
            if !ids.insert(e.id.as_str()) {
                return Err(FadError::Config(format!("duplicate concept id '{}'", e.id)));
            }
        }
        Ok(Self { entries, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn check_vector(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(FadError::Domain(format!("'{what}' has non-finite components")));
    }
    if v.iter().all(|x| *x == 0.0) {
        return Err(FadError::Domain(format!("'{what}' is the zero vector")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionEmbedding {
    pub text: String,
    pub vector: Vec<f64>,
}

impl MentionEmbedding {
    pub fn new(text: impl Into<String>, vector: Vec<f64>) -> Result<Self> {
        let text = text.into();
        check_vector(&vector, &text)?;
        Ok(Self { text, vector })
    }
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(FadError::Shape(format!("vectors have dims {} and {}", a.len(), b.len())));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(FadError::Domain("cosine similarity of a zero vector".into()));
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub mention: String,
    /// `None` when the best similarity is below epsilon.
    pub concept_id: Option<String>,
    /// Best similarity found, whether or not it passed the threshold.
    pub similarity: f64,
    /// Index of the best entry in lexicon order.
    pub best_index: usize,
    /// Another entry reached exactly the same similarity; the earliest won.
    pub tie: bool,
}

/// Most similar concept if its similarity reaches `epsilon`.
pub fn assign_symptom(mention: &MentionEmbedding, lexicon: &EmbeddingLexicon, epsilon: f64) -> Result<Assignment> {
    if !(-1.0..=1.0).contains(&epsilon) {
        return Err(FadError::Config(format!("epsilon {epsilon} outside [-1, 1]")));
    }
    if mention.vector.len() != lexicon.dim {
        return Err(FadError::Shape(format!(
            "mention '{}' has dim {}, lexicon has {}",
            mention.text,
            mention.vector.len(),
            lexicon.dim
        )));
    }
    let mut best_index = 0;
    let mut best = f64::NEG_INFINITY;
    let mut tie = false;
    for (i, entry) in lexicon.entries.iter().enumerate() {
        let s = cosine_sim(&mention.vector, &entry.vector)?;
        if s > best {
            best = s;
            best_index = i;
            tie = false;
        } else if s == best {
            tie = true;
        }
    }
    let concept_id = (best >= epsilon).then(|| lexicon.entries[best_index].id.clone());
    Ok(Assignment { mention: mention.text.clone(), concept_id, similarity: best, best_index, tie })
}

/// Assignments plus the fraction of mentions that were discarded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSummary {
    pub epsilon: f64,
    pub mentions: usize,
    pub filtered: usize,
    pub filtered_fraction: f64,
    pub ties: usize,
    pub assignments: Vec<Assignment>,
}

pub fn assign_all(mentions: &[MentionEmbedding], lexicon: &EmbeddingLexicon, epsilon: f64) -> Result<MatchSummary> {
    let assignments = mentions.iter().map(|m| assign_symptom(m, lexicon, epsilon)).collect::<Result<Vec<_>>>()?;
    let filtered = assignments.iter().filter(|a| a.concept_id.is_none()).count();
    let ties = assignments.iter().filter(|a| a.tie).count();
    let n = assignments.len();
    Ok(MatchSummary {
        epsilon,
        mentions: n,
        filtered,
        filtered_fraction: if n == 0 { 0.0 } else { filtered as f64 / n as f64 },
        ties,
        assignments,
    })
}

/// Rows of `(key, label, vector)` read from CSV or JSON.
///
/// CSV: header row, then `id,name,v0,v1,...` (lexicon) or `text,v0,v1,...`
/// (mentions; `label_column = false`). JSON: an array of objects with
/// `id`/`name`/`vector` or `text`/`vector`.
fn read_csv_rows(reader: impl Read, label_column: bool) -> Result<Vec<(String, String, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let first_numeric = if label_column { 2 } else { 1 };
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| FadError::Parse { line, message: e.to_string() })?;
        if record.len() <= first_numeric {
            return Err(FadError::Parse { line, message: "row has no vector components".into() });
        }
        let key = record[0].to_string();
        let label = if label_column { record[1].to_string() } else { key.clone() };
        let vector = record
            .iter()
            .skip(first_numeric)
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| FadError::Parse { line, message: format!("'{f}' is not a number") })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((key, label, vector));
    }
    Ok(rows)
}

pub fn read_lexicon_csv(reader: impl Read) -> Result<EmbeddingLexicon> {
    let entries = read_csv_rows(reader, true)?
        .into_iter()
        .map(|(id, name, vector)| LexiconEntry { id, name, vector })
        .collect();
    EmbeddingLexicon::new(entries)
}

pub fn read_lexicon_json(text: &str) -> Result<EmbeddingLexicon> {
    EmbeddingLexicon::new(serde_json::from_str(text)?)
}

pub fn read_mentions_csv(reader: impl Read) -> Result<Vec<MentionEmbedding>> {
    read_csv_rows(reader, false)?.into_iter().map(|(text, _, vector)| MentionEmbedding::new(text, vector)).collect()
}

pub fn read_mentions_json(text: &str) -> Result<Vec<MentionEmbedding>> {
    let raw: Vec<MentionEmbedding> = serde_json::from_str(text)?;
    raw.into_iter().map(|m| MentionEmbedding::new(m.text, m.vector)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Deterministic bag-of-character-trigrams embedder; only for tests.
    fn toy_embed(text: &str, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        let chars: Vec<char> = format!("  {}  ", text.to_lowercase()).chars().collect();
        for w in chars.windows(3) {
            let tag = crate::numeric::label_tag(&w.iter().collect::<String>());
            v[(tag % dim as u64) as usize] += if tag >> 63 == 0 { 1.0 } else { -1.0 };
        }
        v
    }

    fn lexicon(vectors: &[Vec<f64>]) -> EmbeddingLexicon {
        EmbeddingLexicon::new(
            vectors
                .iter()
                .enumerate()
                .map(|(i, v)| LexiconEntry { id: format!("c{i}"), name: format!("concept {i}"), vector: v.clone() })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_sim(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert!((cosine_sim(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(cosine_sim(&[0.0, 0.0], &[1.0, 1.0]), Err(FadError::Domain(_))));
    }

    #[test]
    fn exact_match_and_orthogonal_rejection() {
        let lex = lexicon(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let hit = assign_symptom(&MentionEmbedding::new("m", vec![0.0, 1.0, 0.0]).unwrap(), &lex, DEFAULT_EPSILON)
            .unwrap();
        assert_eq!(hit.concept_id.as_deref(), Some("c1"));
        assert_eq!(hit.similarity, 1.0);
        let miss = assign_symptom(&MentionEmbedding::new("m", vec![0.0, 0.0, 1.0]).unwrap(), &lex, DEFAULT_EPSILON)
            .unwrap();
        assert_eq!(miss.concept_id, None);
    }

    #[test]
    fn ties_go_to_first_entry() {
        let lex = lexicon(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let a = assign_symptom(&MentionEmbedding::new("m", vec![1.0, 1.0]).unwrap(), &lex, 0.35).unwrap();
        assert!(a.tie);
        assert_eq!(a.concept_id.as_deref(), Some("c0"));
    }

    #[test]
    fn lexicon_validation() {
        assert!(matches!(EmbeddingLexicon::new(vec![]), Err(FadError::Config(_))));
        let zero = LexiconEntry { id: "z".into(), name: "z".into(), vector: vec![0.0, 0.0] };
        assert!(matches!(EmbeddingLexicon::new(vec![zero]), Err(FadError::Domain(_))));
        let a = LexiconEntry { id: "a".into(), name: "a".into(), vector: vec![1.0] };
        assert!(matches!(EmbeddingLexicon::new(vec![a.clone(), a]), Err(FadError::Config(_))));
    }

    #[test]
    fn epsilon_range_checked() {
        let lex = lexicon(&[vec![1.0]]);
        let m = MentionEmbedding::new("m", vec![1.0]).unwrap();
        assert!(matches!(assign_symptom(&m, &lex, 1.01), Err(FadError::Config(_))));
    }

    #[test]
    fn toy_embedder_groups_similar_strings() {
        let dim = 64;
        let lex = EmbeddingLexicon::new(
            ["headache", "fatigue", "shortness of breath"]
                .iter()
                .map(|s| LexiconEntry { id: s.to_string(), name: s.to_string(), vector: toy_embed(s, dim) })
                .collect(),
        )
        .unwrap();
        let m = MentionEmbedding::new("bad headaches", toy_embed("bad headaches", dim)).unwrap();
        assert_eq!(assign_symptom(&m, &lex, 0.2).unwrap().concept_id.as_deref(), Some("headache"));
    }

    #[test]
    fn matches_linear_scan_oracle_on_random_mentions() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let dim = 16;
        let vectors: Vec<Vec<f64>> =
            (0..50).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let lex = lexicon(&vectors);
        for _ in 0..1000 {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = assign_symptom(&MentionEmbedding::new("m", v.clone()).unwrap(), &lex, 0.35).unwrap();
            // Oracle: normalise everything first, then scan.
            let norm = |u: &[f64]| {
                let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                u.iter().map(|x| x / n).collect::<Vec<_>>()
            };
            let nv = norm(&v);
            let sims: Vec<f64> = vectors.iter().map(|e| norm(e).iter().zip(&nv).map(|(a, b)| a * b).sum()).collect();
            let (mut arg, mut best) = (0, f64::NEG_INFINITY);
            for (i, s) in sims.iter().enumerate() {
                if *s > best {
                    best = *s;
                    arg = i;
                }
            }
            assert_eq!(got.best_index, arg);
            assert_eq!(got.concept_id.is_some(), best >= 0.35);
        }
    }

    #[test]
    fn csv_readers() {
        let lex = read_lexicon_csv("id,name,v0,v1\nc0,cough,1,0\nc1,fever,0,1\n".as_bytes()).unwrap();
        assert_eq!(lex.len(), 2);
        let mentions = read_mentions_csv("text,v0,v1\ncoughing,0.9,0.1\n".as_bytes()).unwrap();
        assert_eq!(mentions[0].text, "coughing");
        let err = read_mentions_csv("text,v0\nx,abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FadError::Parse { line: 2, .. }));
    }
}
