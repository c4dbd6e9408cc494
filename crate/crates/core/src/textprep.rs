//! Tokenization, lemmatization and TF-IDF over merged summary + description.
//!
//! The lemmatizer is a small rule-based plural stripper with an exception
//! table. It approximates a dictionary noun lemmatizer; it is not one.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{BugId, BugRecord};
use crate::error::{validation, Result};

pub const MAX_TOKEN_CHARS: usize = 20;

/// Bumped whenever the bundled stop-word list or lemma rules change.
pub const TEXT_RULES_VERSION: u32 = 1;

const STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "cannot", "could", "did", "do", "does", "doing", "down", "during", "each",
    "either", "else", "etc", "ever", "every", "few", "for", "from", "further", "get", "gets",
    "got", "had", "has", "have", "having", "he", "her", "here", "hers", "herself", "him",
    "himself", "his", "how", "however", "i", "if", "in", "into", "is", "it", "its", "itself",
    "just", "me", "might", "more", "most", "must", "my", "myself", "no", "nor", "not", "now",
    "of", "off", "on", "once", "only", "or", "other", "others", "our", "ours", "ourselves", "out",
    "over", "own", "please", "same", "shall", "she", "should", "so", "some", "such", "than",
    "that", "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they",
    "this", "those", "though", "through", "thus", "to", "too", "under", "until", "up", "upon",
    "us", "very", "via", "was", "we", "were", "what", "when", "where", "whether", "which",
    "while", "who", "whom", "why", "will", "with", "within", "without", "would", "yet", "you",
    "your", "yours", "yourself", "yourselves",
];

const LEMMA_EXCEPTIONS: &[(&str, &str)] = &[
    ("aliases", "alias"),
    ("analyses", "analysis"),
    ("children", "child"),
    ("crises", "crisis"),
    ("feet", "foot"),
    ("indices", "index"),
    ("matrices", "matrix"),
    ("men", "man"),
    ("mice", "mouse"),
    ("people", "person"),
    ("statuses", "status"),
    ("teeth", "tooth"),
    ("vertices", "vertex"),
    ("women", "woman"),
];

fn is_stop_word(token: &str) -> bool {
    STOP_WORDS.binary_search(&token).is_ok()
}

pub fn lemmatize(token: &str) -> String {
    if let Ok(i) = LEMMA_EXCEPTIONS.binary_search_by_key(&token, |(from, _)| from) {
        return LEMMA_EXCEPTIONS[i].1.to_string();
    }
    let n = token.chars().count();
    if n <= 3 || !token.ends_with('s') {
        return token.to_string();
    }
    if let Some(stem) = token.strip_suffix("ies") {
        if n > 4 {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = token.strip_suffix("sses") {
        return format!("{stem}ss");
    }
    for suffix in ["xes", "ches", "shes", "zes"] {
        if token.ends_with(suffix) {
            return token[..token.len() - 2].to_string();
        }
    }
    if token.ends_with("ss") || token.ends_with("us") || token.ends_with("is") {
        return token.to_string();
    }
    token[..token.len() - 1].to_string()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub bug_id: BugId,
    pub tokens: Vec<String>,
}

/// Lowercase, split on anything that is not alphanumeric, drop numbers,
/// stop words and tokens over [`MAX_TOKEN_CHARS`], then lemmatize.
pub fn preprocess_text(summary: &str, description: &str) -> Vec<String> {
    let merged = format!("{summary} {description}").to_lowercase();
    merged
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter(|t| t.chars().count() <= MAX_TOKEN_CHARS)
        .filter(|t| !t.chars().all(|c| c.is_numeric()))
        .filter(|t| !is_stop_word(t))
        .map(lemmatize)
        .filter(|t| !is_stop_word(t))
        .collect()
}

pub fn tokenize_record(record: &BugRecord) -> TokenizedDoc {
    TokenizedDoc {
        bug_id: record.bug_id,
        tokens: preprocess_text(&record.summary, &record.description),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TermEntry {
    term: String,
    index: usize,
    df: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct VocabularyFile {
    n_docs: usize,
    min_df: usize,
    terms: Vec<TermEntry>,
}

/// Dense, lexicographically ordered term index with document frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
    min_df: usize,
    lookup: HashMap<String, usize>,
}

impl TryFrom<VocabularyFile> for Vocabulary {
    type Error = String;

    fn try_from(file: VocabularyFile) -> Result<Self, String> {
        let mut terms = Vec::with_capacity(file.terms.len());
        let mut df = Vec::with_capacity(file.terms.len());
        for (i, e) in file.terms.into_iter().enumerate() {
            if e.index != i {
                return Err(format!("term {:?} has index {} at position {i}", e.term, e.index));
            }
            terms.push(e.term);
            df.push(e.df);
        }
        Ok(Vocabulary::from_parts(terms, df, file.n_docs, file.min_df))
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        VocabularyFile {
            n_docs: v.n_docs,
            min_df: v.min_df,
            terms: v
                .terms
                .into_iter()
                .zip(v.df)
                .enumerate()
                .map(|(index, (term, df))| TermEntry { term, index, df })
                .collect(),
        }
    }
}

impl Vocabulary {
    fn from_parts(terms: Vec<String>, df: Vec<usize>, n_docs: usize, min_df: usize) -> Self {
        let lookup = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            terms,
            df,
            n_docs,
            min_df,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.lookup.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn df(&self, index: usize) -> usize {
        self.df[index]
    }

    /// `ln((1 + N) / (1 + df)) + 1`
    pub fn idf(&self, index: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.df[index] as f64)).ln() + 1.0
    }

    /// In-vocabulary token indices, in document order.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.index_of(t)).collect()
    }
}

pub fn build_vocabulary(docs: &[TokenizedDoc], min_df: usize) -> Result<Vocabulary> {
    if docs.iter().all(|d| d.tokens.is_empty()) {
        return Err(validation("cannot build a vocabulary from an all-empty corpus"));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.tokens.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let (terms, counts): (Vec<String>, Vec<usize>) = df
        .into_iter()
        .filter(|&(_, n)| n >= min_df)
        .map(|(t, n)| (t.to_string(), n))
        .unzip();
    Ok(Vocabulary::from_parts(terms, counts, docs.len(), min_df))
}

/// Sparse TF-IDF weights sorted by term index, L2-normalized unless empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TfidfVector {
    pub entries: Vec<(usize, f64)>,
}

impl TfidfVector {
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| w * dense[i]).sum()
    }
}

pub fn tfidf_transform(tokens: &[String], vocab: &Vocabulary) -> TfidfVector {
    let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
    for idx in vocab.encode(tokens) {
        *tf.entry(idx).or_default() += 1.0;
    }
    let mut entries: Vec<(usize, f64)> = tf
        .into_iter()
        .map(|(i, count)| (i, count * vocab.idf(i)))
        .collect();
    let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in &mut entries {
            *w /= norm;
        }
    }
    TfidfVector { entries }
}
