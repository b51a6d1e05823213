use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use super::scheme::{convert_scheme, decode_spans, parse_tag, LabeledSequence, Scheme};
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Token vocabulary with reserved PAD and UNK entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
    lowercase: bool,
}

impl Vocab {
    pub fn new(lowercase: bool) -> Self {
        let mut v = Self {
            words: Vec::new(),
            index: HashMap::new(),
            lowercase,
        };
        v.push(PAD.to_string());
        v.push(UNK.to_string());
        v
    }

    /// Builds from tokens in first-seen order.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>, lowercase: bool) -> Self {
        let mut v = Self::new(lowercase);
        for t in tokens {
            v.add(t);
        }
        v
    }

    /// Restores a vocabulary from its word list (PAD and UNK first).
    pub fn from_words(words: Vec<String>, lowercase: bool) -> Result<Self> {
        if words.len() < 2 || words[PAD_ID] != PAD || words[UNK_ID] != UNK {
            return Err(Error::Data("vocabulary must start with <pad> and <unk>".into()));
        }
        let mut v = Self {
            words: Vec::new(),
            index: HashMap::new(),
            lowercase,
        };
        for w in words {
            if v.index.contains_key(&w) {
                return Err(Error::Data(format!("duplicate vocabulary entry `{w}`")));
            }
            v.push(w);
        }
        Ok(v)
    }

    fn push(&mut self, w: String) {
        self.index.insert(w.clone(), self.words.len());
        self.words.push(w);
    }

    fn normalize<'a>(&self, token: &'a str) -> std::borrow::Cow<'a, str> {
        if self.lowercase {
            token.to_lowercase().into()
        } else {
            token.into()
        }
    }

    pub fn add(&mut self, token: &str) -> usize {
        let key = self.normalize(token).into_owned();
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.push(key);
        self.words.len() - 1
    }

    /// Index of `token`, or [`UNK_ID`] when unseen.
    pub fn id(&self, token: &str) -> usize {
        *self.index.get(self.normalize(token).as_ref()).unwrap_or(&UNK_ID)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(self.normalize(token).as_ref())
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }
}

/// An ordered collection of sequences sharing one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    examples: Vec<LabeledSequence>,
    scheme: Scheme,
    labels: Vec<String>,
    vocab: Vocab,
}

impl Corpus {
    pub fn new(examples: Vec<LabeledSequence>, scheme: Scheme) -> Result<Self> {
        if let Some(bad) = examples.iter().find(|e| e.scheme() != scheme) {
            return Err(Error::Data(format!(
                "corpus mixes schemes: expected {scheme}, found {}",
                bad.scheme()
            )));
        }
        let labels: BTreeSet<&str> = examples
            .iter()
            .flat_map(|e| e.labels().iter().map(String::as_str))
            .collect();
        let vocab = Vocab::build(
            examples.iter().flat_map(|e| e.tokens().iter().map(String::as_str)),
            false,
        );
        let labels = labels.into_iter().map(str::to_string).collect();
        Ok(Self {
            examples,
            scheme,
            labels,
            vocab,
        })
    }

    pub fn empty(scheme: Scheme) -> Self {
        Self::new(Vec::new(), scheme).expect("empty corpus is valid")
    }

    pub fn examples(&self) -> &[LabeledSequence] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<LabeledSequence> {
        self.examples
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Every label string used, sorted.
    pub fn label_vocab(&self) -> &[String] {
        &self.labels
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Sorted entity types appearing in any label.
    pub fn entity_types(&self) -> Vec<String> {
        let set: BTreeSet<String> = self
            .labels
            .iter()
            .filter_map(|l| parse_tag(l).and_then(|t| t.entity_type).map(str::to_string))
            .collect();
        set.into_iter().collect()
    }

    pub fn convert(&self, target: Scheme) -> Self {
        let ex = self
            .examples
            .iter()
            .map(|e| convert_scheme(e, target))
            .collect();
        Self::new(ex, target).expect("conversion keeps one scheme")
    }

    /// Number of entity spans across the corpus.
    pub fn num_entities(&self) -> usize {
        self.examples
            .iter()
            .map(|e| decode_spans(e.labels()).0.len())
            .sum()
    }
}

/// Parses two-column CoNLL text. `path` is used for diagnostics only.
///
/// The scheme is inferred from the labels (BIOES when any `E-`/`S-` label
/// occurs). `-DOCSTART-` lines are skipped.
pub fn parse_conll(text: &str, path: &Path) -> Result<Corpus> {
    let mut raw: Vec<(Vec<String>, Vec<String>, usize)> = Vec::new();
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    let mut start_line = 0;

    for (no, line) in text.lines().enumerate() {
        let line_no = no + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if !tokens.is_empty() {
                raw.push((std::mem::take(&mut tokens), std::mem::take(&mut labels), start_line));
            }
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 2 columns (token label), found {}", cols.len()),
            });
        }
        if cols[0] == "-DOCSTART-" {
            continue;
        }
        if parse_tag(cols[1]).is_none() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("malformed label `{}`", cols[1]),
            });
        }
        if tokens.is_empty() {
            start_line = line_no;
        }
        tokens.push(cols[0].to_string());
        labels.push(cols[1].to_string());
    }
    if !tokens.is_empty() {
        raw.push((tokens, labels, start_line));
    }

    let scheme = Scheme::detect(raw.iter().flat_map(|(_, l, _)| l.iter().map(String::as_str)));
    let examples = raw
        .into_iter()
        .map(|(t, l, line)| {
            LabeledSequence::new(t, l, scheme).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Corpus::new(examples, scheme)
}

pub fn read_conll(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conll(&text, path)
}

/// Two-column text, one blank line after every sentence.
pub fn format_conll<'a>(sequences: impl IntoIterator<Item = (&'a [String], &'a [String])>) -> String {
    let mut out = String::new();
    for (tokens, labels) in sequences {
        for (t, l) in tokens.iter().zip(labels) {
            out.push_str(t);
            out.push(' ');
            out.push_str(l);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

pub fn write_conll(path: &Path, sequences: &[LabeledSequence]) -> Result<()> {
    let text = format_conll(sequences.iter().map(|s| (s.tokens(), s.labels())));
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
