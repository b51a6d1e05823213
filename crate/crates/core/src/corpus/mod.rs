//! Corpus ingestion, tagging schemes, span extraction and span-level F1.

mod conll;
mod metrics;
mod sample;
mod scheme;
mod vectors;

pub use conll::{
    format_conll, parse_conll, read_conll, write_conll, Corpus, Vocab, PAD, PAD_ID, UNK, UNK_ID,
};
pub use metrics::{span_f1, SpanScores};
pub use sample::subsample;
pub use scheme::{
    convert_scheme, decode_spans, encode_spans, extract_spans, label_set, parse_tag, LabeledSequence,
    Prefix, Scheme, Span, Tag,
};
pub use vectors::WordVectors;
