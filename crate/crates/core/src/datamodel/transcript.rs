//! Transcript cleaning and sentence-to-frame alignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Longest run of one repeated word kept by [`clean_text`].
const MAX_WORD_RUN: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    /// Start time in seconds.
    pub offset: f64,
    /// Length in seconds.
    pub duration: f64,
}

impl Sentence {
    pub fn new(text: impl Into<String>, offset: f64, duration: f64) -> Self {
        Self {
            text: text.into(),
            offset,
            duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.offset.is_finite() && self.offset >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sentence offset {} must be >= 0",
                self.offset
            )));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sentence duration {} must be > 0",
                self.duration
            )));
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.offset + self.duration
    }
}

/// Sentence indices assigned to each one-second frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedTranscript {
    pub per_frame: Vec<Vec<usize>>,
}

impl AlignedTranscript {
    pub fn empty_frames(&self) -> usize {
        self.per_frame.iter().filter(|f| f.is_empty()).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    /// Indices of sentences that intersect no frame window.
    pub dropped: Vec<usize>,
    pub empty_frames: usize,
}

/// Assigns every sentence to each frame window `[t, t + 1)` that its
/// `[offset, offset + duration)` interval intersects. A sentence spanning
/// several windows is duplicated into all of them. Within a frame, indices
/// are ordered by sentence offset (ties by index).
pub fn align_transcript(
    n: usize,
    sentences: &[Sentence],
) -> Result<(AlignedTranscript, AlignmentReport)> {
    if n == 0 {
        return Err(Error::InvalidArgument("frame count must be >= 1".into()));
    }
    for s in sentences {
        s.validate()?;
    }
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.sort_by(|&a, &b| {
        sentences[a]
            .offset
            .total_cmp(&sentences[b].offset)
            .then(a.cmp(&b))
    });

    let mut per_frame = vec![Vec::new(); n];
    let mut report = AlignmentReport::default();
    for &i in &order {
        let s = &sentences[i];
        // Windows t with t < end and t + 1 > offset.
        let first = s.offset.floor() as usize;
        let last_excl = (s.end().ceil() as usize).min(n);
        if first >= last_excl {
            log::warn!(
                "sentence {i} at {:.2}s lies beyond the {n}-frame video; dropped",
                s.offset
            );
            report.dropped.push(i);
            continue;
        }
        for frame in &mut per_frame[first..last_excl] {
            frame.push(i);
        }
    }
    report.dropped.sort_unstable();
    let aligned = AlignedTranscript { per_frame };
    report.empty_frames = aligned.empty_frames();
    Ok((aligned, report))
}

/// Collapses any word repeated more than three times in a row down to three
/// occurrences. Whitespace between kept words is preserved.
pub fn clean_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prev: Option<&str> = None;
    let mut run = 0usize;
    let mut rest = text;
    while !rest.is_empty() {
        let ws_len = rest.len() - rest.trim_start().len();
        let (ws, after) = rest.split_at(ws_len);
        if after.is_empty() {
            out.push_str(ws);
            break;
        }
        let word_len = after.find(char::is_whitespace).unwrap_or(after.len());
        let (word, tail) = after.split_at(word_len);
        if prev == Some(word) {
            run += 1;
        } else {
            prev = Some(word);
            run = 1;
        }
        if run <= MAX_WORD_RUN {
            out.push_str(ws);
            out.push_str(word);
        }
        rest = tail;
    }
    out
}

pub fn clean_transcript(sentences: &[Sentence]) -> Vec<Sentence> {
    sentences
        .iter()
        .map(|s| Sentence {
            text: clean_text(&s.text),
            ..s.clone()
        })
        .collect()
}
