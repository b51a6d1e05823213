use rand::Rng;

use super::dicts::{EntityDict, SynonymDict};
use super::AugConfig;
use crate::corpus::{decode_spans, LabeledSequence, Scheme, Span};

/// Attempts per example before giving up on it.
pub const MAX_RETRIES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubstitutionKind {
    /// Entity mention substitution.
    Ems,
    /// Normal (O-labeled) word substitution.
    Nws,
}

/// One replacement made in a source sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replacement {
    pub kind: SubstitutionKind,
    /// First token replaced, in source coordinates.
    pub position: usize,
    pub original: Vec<String>,
    pub replacement: Vec<String>,
}

/// A token-substituted copy of a clean example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substituted {
    pub sequence: LabeledSequence,
    pub replacements: Vec<Replacement>,
}

enum Site<'a> {
    Entity(&'a Span),
    Word(usize),
}

/// Generates one substituted example, or `None` when no substitution could be
/// made within [`MAX_RETRIES`] attempts (the caller should draw another
/// example).
///
/// The number of operations is `Binomial(#sites, p_sub)`; each operation is
/// EMS with probability `γ` and NWS otherwise and lands on a uniformly chosen
/// unused site of its kind (an operation whose kind has no free site is
/// dropped). EMS replaces a whole span with a different same-type mention,
/// relabelled in BIOES; NWS replaces an `O` token with one of its synonyms.
pub fn token_substitute(
    ex: &LabeledSequence,
    edict: &EntityDict,
    sdict: &SynonymDict,
    cfg: &AugConfig,
    rng: &mut impl Rng,
) -> Option<Substituted> {
    let (spans, _) = decode_spans(ex.labels());
    let tokens = ex.tokens();
    let entity_sites: Vec<&Span> = spans
        .iter()
        .filter(|s| {
            let surface = &tokens[s.start..=s.end];
            edict.mentions(&s.entity_type).iter().any(|m| m.as_slice() != surface)
        })
        .collect();
    let word_sites: Vec<usize> = (0..ex.len())
        .filter(|&i| ex.labels()[i] == "O" && sdict.get(&tokens[i]).is_some())
        .collect();
    let n_sites = entity_sites.len() + word_sites.len();
    if n_sites == 0 || cfg.p_sub <= 0.0 {
        return None;
    }

    for _ in 0..MAX_RETRIES {
        let n_ops = (0..n_sites).filter(|_| rng.random::<f64>() < cfg.p_sub).count();
        let mut free_entities = entity_sites.clone();
        let mut free_words = word_sites.clone();
        let mut chosen: Vec<Site> = Vec::new();
        for _ in 0..n_ops {
            if rng.random::<f64>() < cfg.gamma {
                if !free_entities.is_empty() {
                    let k = rng.random_range(0..free_entities.len());
                    chosen.push(Site::Entity(free_entities.swap_remove(k)));
                }
            } else if !free_words.is_empty() {
                let k = rng.random_range(0..free_words.len());
                chosen.push(Site::Word(free_words.swap_remove(k)));
            }
        }
        if chosen.is_empty() {
            continue;
        }
        return Some(apply(ex, &spans, chosen, edict, sdict, rng));
    }
    None
}

fn apply(
    ex: &LabeledSequence,
    spans: &[Span],
    chosen: Vec<Site>,
    edict: &EntityDict,
    sdict: &SynonymDict,
    rng: &mut impl Rng,
) -> Substituted {
    let tokens = ex.tokens();
    let mut replacements = Vec::with_capacity(chosen.len());
    for site in &chosen {
        match *site {
            Site::Entity(span) => {
                let surface = &tokens[span.start..=span.end];
                let options: Vec<&Vec<String>> = edict
                    .mentions(&span.entity_type)
                    .iter()
                    .filter(|m| m.as_slice() != surface)
                    .collect();
                let pick = options[rng.random_range(0..options.len())];
                replacements.push(Replacement {
                    kind: SubstitutionKind::Ems,
                    position: span.start,
                    original: surface.to_vec(),
                    replacement: pick.clone(),
                });
            }
            Site::Word(i) => {
                let syns = sdict.get(&tokens[i]).expect("site has synonyms");
                let pick = &syns[rng.random_range(0..syns.len())];
                replacements.push(Replacement {
                    kind: SubstitutionKind::Nws,
                    position: i,
                    original: vec![tokens[i].clone()],
                    replacement: vec![pick.word.clone()],
                });
            }
        }
    }
    replacements.sort_by_key(|r| r.position);

    // Rebuild tokens left to right, shifting spans by the length change of
    // every earlier replacement.
    let mut out_tokens = Vec::with_capacity(tokens.len());
    let mut new_spans = Vec::with_capacity(spans.len());
    let mut span_iter = spans.iter().peekable();
    let mut rep_iter = replacements.iter().peekable();
    let mut i = 0;
    while i < tokens.len() {
        let out_start = out_tokens.len();
        if let Some(r) = rep_iter.next_if(|r| r.position == i) {
            out_tokens.extend(r.replacement.iter().cloned());
            if let Some(s) = span_iter.next_if(|s| s.start == i) {
                new_spans.push(Span {
                    entity_type: s.entity_type.clone(),
                    start: out_start,
                    end: out_tokens.len() - 1,
                });
            }
            i += r.original.len();
            continue;
        }
        if let Some(s) = span_iter.next_if(|s| s.start == i) {
            out_tokens.extend(tokens[s.start..=s.end].iter().cloned());
            new_spans.push(Span {
                entity_type: s.entity_type.clone(),
                start: out_start,
                end: out_tokens.len() - 1,
            });
            i = s.end + 1;
            continue;
        }
        out_tokens.push(tokens[i].clone());
        i += 1;
    }

    let sequence = LabeledSequence::from_spans(out_tokens, &new_spans, Scheme::Bioes)
        .expect("relabelled spans are valid BIOES");
    Substituted {
        sequence,
        replacements,
    }
}
