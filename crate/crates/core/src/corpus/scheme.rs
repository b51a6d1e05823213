use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positional tagging scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Bio,
    Bioes,
}

impl Scheme {
    /// BIOES if any label uses an `E-` or `S-` prefix, BIO otherwise.
    pub fn detect<'a>(labels: impl IntoIterator<Item = &'a str>) -> Scheme {
        for l in labels {
            if l.starts_with("E-") || l.starts_with("S-") {
                return Scheme::Bioes;
            }
        }
        Scheme::Bio
    }

    fn allows(self, p: Prefix) -> bool {
        match self {
            Scheme::Bio => matches!(p, Prefix::B | Prefix::I | Prefix::O),
            Scheme::Bioes => true,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Bio => "BIO",
            Scheme::Bioes => "BIOES",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BIO" | "IOB2" => Ok(Scheme::Bio),
            "BIOES" | "IOBES" => Ok(Scheme::Bioes),
            _ => Err(format!("unknown tagging scheme `{s}` (expected BIO or BIOES)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prefix {
    B,
    I,
    E,
    S,
    O,
}

/// A parsed label: positional prefix plus entity type (absent for `O`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tag<'a> {
    pub prefix: Prefix,
    pub entity_type: Option<&'a str>,
}

pub fn parse_tag(label: &str) -> Option<Tag<'_>> {
    if label == "O" {
        return Some(Tag {
            prefix: Prefix::O,
            entity_type: None,
        });
    }
    let (p, ty) = label.split_once('-')?;
    if ty.is_empty() {
        return None;
    }
    let prefix = match p {
        "B" => Prefix::B,
        "I" => Prefix::I,
        "E" => Prefix::E,
        "S" => Prefix::S,
        _ => return None,
    };
    Some(Tag {
        prefix,
        entity_type: Some(ty),
    })
}

/// A typed entity span over inclusive token indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub entity_type: String,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A sentence with one label per token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSequence {
    tokens: Vec<String>,
    labels: Vec<String>,
    scheme: Scheme,
}

impl LabeledSequence {
    pub fn new(tokens: Vec<String>, labels: Vec<String>, scheme: Scheme) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidSequence("empty sentence".into()));
        }
        if tokens.len() != labels.len() {
            return Err(Error::InvalidSequence(format!(
                "{} tokens but {} labels",
                tokens.len(),
                labels.len()
            )));
        }
        for l in &labels {
            match parse_tag(l) {
                Some(t) if scheme.allows(t.prefix) => {}
                _ => {
                    return Err(Error::InvalidSequence(format!(
                        "label `{l}` is not valid in the {scheme} scheme"
                    )))
                }
            }
        }
        Ok(Self {
            tokens,
            labels,
            scheme,
        })
    }

    /// Builds a sequence from spans, writing labels in `scheme`.
    pub fn from_spans(tokens: Vec<String>, spans: &[Span], scheme: Scheme) -> Result<Self> {
        let labels = encode_spans(tokens.len(), spans, scheme);
        Self::new(tokens, labels, scheme)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Same tokens with replacement labels (validated against the scheme).
    pub fn with_labels(&self, labels: Vec<String>) -> Result<Self> {
        Self::new(self.tokens.clone(), labels, self.scheme)
    }
}

/// Maximal typed spans of `labels`, repairing ill-formed transitions.
///
/// Returns the spans and whether any repair was needed. The decoder accepts
/// any mix of BIO and BIOES prefixes: `I-X` or `E-X` without an open span of
/// type `X` starts a new span, `B-X`/`S-X`/`O` close whatever is open.
pub fn decode_spans(labels: &[String]) -> (Vec<Span>, bool) {
    let mut spans = Vec::new();
    let mut repaired = false;
    let mut open: Option<(String, usize)> = None;

    let close = |open: &mut Option<(String, usize)>, end: usize, spans: &mut Vec<Span>| {
        if let Some((ty, start)) = open.take() {
            spans.push(Span {
                entity_type: ty,
                start,
                end,
            });
        }
    };

    for (i, label) in labels.iter().enumerate() {
        let Some(tag) = parse_tag(label) else {
            repaired = true;
            close(&mut open, i.saturating_sub(1), &mut spans);
            continue;
        };
        let ty = tag.entity_type.unwrap_or("");
        let continues = matches!(&open, Some((t, _)) if t == ty);
        match tag.prefix {
            Prefix::O => close(&mut open, i.wrapping_sub(1), &mut spans),
            Prefix::B => {
                close(&mut open, i.wrapping_sub(1), &mut spans);
                open = Some((ty.to_string(), i));
            }
            Prefix::S => {
                close(&mut open, i.wrapping_sub(1), &mut spans);
                spans.push(Span {
                    entity_type: ty.to_string(),
                    start: i,
                    end: i,
                });
            }
            Prefix::I => {
                if !continues {
                    repaired = true;
                    close(&mut open, i.wrapping_sub(1), &mut spans);
                    open = Some((ty.to_string(), i));
                }
            }
            Prefix::E => {
                if !continues {
                    repaired = true;
                    close(&mut open, i.wrapping_sub(1), &mut spans);
                    open = Some((ty.to_string(), i));
                }
                close(&mut open, i, &mut spans);
            }
        }
    }
    close(&mut open, labels.len().wrapping_sub(1), &mut spans);
    (spans, repaired)
}

/// Entity spans of a sequence. Ill-formed transitions are repaired with a
/// warning (`I-X` without an opener is read as `B-X`).
pub fn extract_spans(seq: &LabeledSequence) -> Vec<Span> {
    let (spans, repaired) = decode_spans(&seq.labels);
    if repaired {
        log::warn!(
            "repaired invalid label transitions in `{}`",
            seq.tokens.join(" ")
        );
    }
    spans
}

/// Writes labels for `spans` over `n` tokens in the given scheme.
pub fn encode_spans(n: usize, spans: &[Span], scheme: Scheme) -> Vec<String> {
    let mut labels = vec!["O".to_string(); n];
    for s in spans {
        assert!(s.start <= s.end && s.end < n, "span {s:?} out of range for length {n}");
        let ty = &s.entity_type;
        match scheme {
            Scheme::Bio => {
                labels[s.start] = format!("B-{ty}");
                for l in &mut labels[s.start + 1..=s.end] {
                    *l = format!("I-{ty}");
                }
            }
            Scheme::Bioes => {
                if s.start == s.end {
                    labels[s.start] = format!("S-{ty}");
                } else {
                    labels[s.start] = format!("B-{ty}");
                    for l in &mut labels[s.start + 1..s.end] {
                        *l = format!("I-{ty}");
                    }
                    labels[s.end] = format!("E-{ty}");
                }
            }
        }
    }
    labels
}

/// Rewrites a sequence in `target`, preserving its entity spans.
pub fn convert_scheme(seq: &LabeledSequence, target: Scheme) -> LabeledSequence {
    let spans = extract_spans(seq);
    LabeledSequence {
        tokens: seq.tokens.clone(),
        labels: encode_spans(seq.len(), &spans, target),
        scheme: target,
    }
}

/// All labels of `scheme` for the given entity types: `O` first, then each
/// type's positional labels.
pub fn label_set(entity_types: &[String], scheme: Scheme) -> Vec<String> {
    let prefixes: &[&str] = match scheme {
        Scheme::Bio => &["B", "I"],
        Scheme::Bioes => &["B", "I", "E", "S"],
    };
    let mut out = vec!["O".to_string()];
    for ty in entity_types {
        for p in prefixes {
            out.push(format!("{p}-{ty}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(labels: &[&str], scheme: Scheme) -> LabeledSequence {
        let tokens = (0..labels.len()).map(|i| format!("w{i}")).collect();
        LabeledSequence::new(tokens, labels.iter().map(|s| s.to_string()).collect(), scheme).unwrap()
    }

    fn labels(s: &LabeledSequence) -> Vec<&str> {
        s.labels().iter().map(String::as_str).collect()
    }

    fn span(ty: &str, start: usize, end: usize) -> Span {
        Span {
            entity_type: ty.into(),
            start,
            end,
        }
    }

    #[test]
    fn bio_to_bioes_examples() {
        let s = seq(&["B-PER", "I-PER", "O"], Scheme::Bio);
        assert_eq!(labels(&convert_scheme(&s, Scheme::Bioes)), ["B-PER", "E-PER", "O"]);
        let s = seq(&["B-LOC"], Scheme::Bio);
        assert_eq!(labels(&convert_scheme(&s, Scheme::Bioes)), ["S-LOC"]);
    }

    #[test]
    fn span_extraction_examples() {
        assert_eq!(
            extract_spans(&seq(&["B-PER", "E-PER", "O"], Scheme::Bioes)),
            vec![span("PER", 0, 1)]
        );
        assert!(extract_spans(&seq(&["O", "O", "O"], Scheme::Bioes)).is_empty());
        assert_eq!(
            extract_spans(&seq(&["S-LOC", "S-LOC"], Scheme::Bioes)),
            vec![span("LOC", 0, 0), span("LOC", 1, 1)]
        );
    }

    #[test]
    fn orphan_inside_is_repaired_as_begin() {
        let (spans, repaired) = decode_spans(&["O".into(), "I-ORG".into(), "I-ORG".into(), "I-PER".into()]);
        assert!(repaired);
        assert_eq!(spans, vec![span("ORG", 1, 2), span("PER", 3, 3)]);
        let s = seq(&["I-MISC", "O"], Scheme::Bio);
        assert_eq!(labels(&convert_scheme(&s, Scheme::Bio)), ["B-MISC", "O"]);
    }

    #[test]
    fn validation_rejects_scheme_violations() {
        let t = vec!["a".to_string()];
        assert!(LabeledSequence::new(t.clone(), vec!["S-PER".into()], Scheme::Bio).is_err());
        assert!(LabeledSequence::new(t.clone(), vec!["X-PER".into()], Scheme::Bioes).is_err());
        assert!(LabeledSequence::new(t.clone(), vec!["B-".into()], Scheme::Bioes).is_err());
        assert!(LabeledSequence::new(vec![], vec![], Scheme::Bioes).is_err());
        assert!(LabeledSequence::new(t, vec![], Scheme::Bioes).is_err());
    }

    #[test]
    fn detects_scheme() {
        assert_eq!(Scheme::detect(["O", "B-PER", "I-PER"]), Scheme::Bio);
        assert_eq!(Scheme::detect(["O", "S-PER"]), Scheme::Bioes);
    }
}
