use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use crate::corpus::{decode_spans, Corpus, WordVectors};
use crate::error::{Error, Result};

/// Entity mentions of the training set grouped by type, deduplicated in
/// first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityDict {
    mentions: BTreeMap<String, Vec<Vec<String>>>,
}

impl EntityDict {
    pub fn build(corpus: &Corpus) -> Self {
        let mut dict = Self::default();
        for ex in corpus.examples() {
            for span in decode_spans(ex.labels()).0 {
                let mention = ex.tokens()[span.start..=span.end].to_vec();
                dict.insert(&span.entity_type, mention);
            }
        }
        if dict.is_empty() {
            log::warn!("corpus has no entities; entity mention substitution is disabled");
        }
        dict
    }

    pub fn insert(&mut self, entity_type: &str, mention: Vec<String>) {
        assert!(!mention.is_empty(), "entity mention must be nonempty");
        let list = self.mentions.entry(entity_type.to_string()).or_default();
        if !list.contains(&mention) {
            list.push(mention);
        }
    }

    pub fn mentions(&self, entity_type: &str) -> &[Vec<String>] {
        self.mentions.get(entity_type).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.mentions.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.mentions.is_empty()
    }

    /// Number of distinct mentions across types.
    pub fn len(&self) -> usize {
        self.mentions.values().map(Vec::len).sum()
    }

    /// `TYPE<TAB>mention<TAB>mention…`, tokens of a mention joined by spaces.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (ty, list) in &self.mentions {
            out.push_str(ty);
            for m in list {
                out.push('\t');
                out.push_str(&m.join(" "));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut dict = Self::default();
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let ty = fields.next().unwrap_or_default();
            if ty.is_empty() {
                return Err(Error::Data(format!("entity dictionary line {}: empty type", no + 1)));
            }
            for f in fields {
                let mention: Vec<String> = f.split_whitespace().map(str::to_string).collect();
                if mention.is_empty() {
                    return Err(Error::Data(format!("entity dictionary line {}: empty mention", no + 1)));
                }
                dict.insert(ty, mention);
            }
        }
        Ok(dict)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synonym {
    pub word: String,
    pub cosine: f64,
}

/// Nearest neighbours by cosine similarity in a word-vector space.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynonymDict {
    entries: BTreeMap<String, Vec<Synonym>>,
}

impl SynonymDict {
    /// Exhaustive top-`k` search. Stop-words and zero vectors are excluded
    /// from both keys and candidates; a word never lists itself. When
    /// `keys` is given, only those words get entries.
    pub fn build(
        vectors: &WordVectors,
        k: usize,
        stopwords: &HashSet<String>,
        keys: Option<&HashSet<String>>,
    ) -> Self {
        assert!(k >= 1, "k must be at least 1");
        let eligible: Vec<(usize, f64)> = (0..vectors.len())
            .filter(|&i| !stopwords.contains(&vectors.words()[i]))
            .filter_map(|i| {
                let norm = vectors.vector(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                (norm > 0.0).then_some((i, norm))
            })
            .collect();

        let mut entries = BTreeMap::new();
        for &(i, ni) in &eligible {
            let word = &vectors.words()[i];
            if keys.is_some_and(|ks| !ks.contains(word)) {
                continue;
            }
            let vi = vectors.vector(i);
            let mut scored: Vec<(f64, usize)> = eligible
                .iter()
                .filter(|&&(j, _)| j != i)
                .map(|&(j, nj)| {
                    let dot: f64 = vi.iter().zip(vectors.vector(j)).map(|(a, b)| a * b).sum();
                    (dot / (ni * nj), j)
                })
                .collect();
            // descending cosine, file order among ties
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            scored.truncate(k);
            if scored.is_empty() {
                continue;
            }
            let list = scored
                .into_iter()
                .map(|(cosine, j)| Synonym {
                    word: vectors.words()[j].clone(),
                    cosine,
                })
                .collect();
            entries.insert(word.clone(), list);
        }
        Self { entries }
    }

    pub fn get(&self, word: &str) -> Option<&[Synonym]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Synonym])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// `word<TAB>syn cosine<TAB>syn cosine…` in rank order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (w, list) in &self.entries {
            out.push_str(w);
            for s in list {
                out.push_str(&format!("\t{} {}", s.word, s.cosine));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let key = fields.next().unwrap_or_default().to_string();
            let mut list = Vec::new();
            for f in fields {
                let mut parts = f.split_whitespace();
                let (Some(word), cos) = (parts.next(), parts.next()) else {
                    return Err(Error::Data(format!("synonym dictionary line {}: empty value", no + 1)));
                };
                let cosine = match cos {
                    Some(c) => c.parse().map_err(|_| {
                        Error::Data(format!("synonym dictionary line {}: bad cosine `{c}`", no + 1))
                    })?,
                    None => f64::NAN,
                };
                list.push(Synonym {
                    word: word.to_string(),
                    cosine,
                });
            }
            if !list.is_empty() {
                entries.insert(key, list);
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// One word per line; blank lines ignored.
pub fn read_stopwords(path: &Path) -> Result<HashSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}
