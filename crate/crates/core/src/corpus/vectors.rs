use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Pretrained word vectors: one word per line followed by its components.
///
/// A leading `count dim` header line (word2vec text format) is skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    words: Vec<String>,
    data: Vec<f64>,
    dim: usize,
    index: HashMap<String, usize>,
}

impl WordVectors {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut words = Vec::new();
        let mut data = Vec::new();
        let mut index = HashMap::new();
        let mut dim = 0;
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        for (no, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let rest: Vec<&str> = parts.collect();
            if no == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
                continue;
            }
            if rest.is_empty() {
                return Err(err(no + 1, format!("word `{word}` has no vector components")));
            }
            if dim == 0 {
                dim = rest.len();
            } else if rest.len() != dim {
                return Err(err(
                    no + 1,
                    format!("expected {dim} components for `{word}`, found {}", rest.len()),
                ));
            }
            for r in &rest {
                let v: f64 = r
                    .parse()
                    .map_err(|_| err(no + 1, format!("`{r}` is not a number")))?;
                if !v.is_finite() {
                    return Err(err(no + 1, format!("non-finite component `{r}`")));
                }
                data.push(v);
            }
            if index.insert(word.to_string(), words.len()).is_some() {
                return Err(err(no + 1, format!("duplicate word `{word}`")));
            }
            words.push(word.to_string());
        }
        Ok(Self {
            words,
            data,
            dim,
            index,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.vector(i))
    }
}
