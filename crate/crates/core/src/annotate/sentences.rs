use crate::corpus::{CharSpan, Review, Sentence};

/// Words whose trailing period does not end a sentence. Compared
/// lowercased with the final period removed.
const ABBREVIATIONS: &[&str] = &[
    "approx", "appr", "ca", "dr", "e.g", "etc", "fig", "i.e", "inc", "incl", "jr", "ltd", "mr", "mrs", "ms", "prof",
    "sr", "st", "vs",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];

/// Segments `review.normalized_text` into sentences.
///
/// A boundary follows a run of `. ! ?` (plus closing quotes or brackets)
/// that is followed by whitespace or the end of text, unless the run is a
/// single period closing a known abbreviation.
pub fn split_sentences(review: &Review) -> Vec<Sentence> {
    segment(&review.normalized_text)
        .into_iter()
        .enumerate()
        .map(|(ordinal, (span, text))| Sentence { review_id: review.id.clone(), ordinal, span, text })
        .collect()
}

pub(crate) fn segment(text: &str) -> Vec<(CharSpan, String)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if !crate::corpus::is_sentence_final(chars[i]) {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < chars.len() && crate::corpus::is_sentence_final(chars[i]) {
            i += 1;
        }
        let run_is_single_period = i - run_start == 1 && chars[run_start] == '.';
        while i < chars.len() && CLOSERS.contains(&chars[i]) {
            i += 1;
        }
        let at_break = i == chars.len() || chars[i].is_whitespace();
        if at_break && !(run_is_single_period && follows_abbreviation(&chars, run_start)) {
            push_trimmed(&chars, start, i, &mut out);
            start = i;
        }
    }
    push_trimmed(&chars, start, chars.len(), &mut out);
    out
}

fn follows_abbreviation(chars: &[char], dot: usize) -> bool {
    let word_start = chars[..dot].iter().rposition(|c| !(c.is_alphabetic() || *c == '.')).map_or(0, |p| p + 1);
    if word_start == dot {
        return false;
    }
    let word: String = chars[word_start..dot].iter().collect::<String>().to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

fn push_trimmed(chars: &[char], mut start: usize, mut end: usize, out: &mut Vec<(CharSpan, String)>) {
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    if start < end {
        out.push((CharSpan { start, end }, chars[start..end].iter().collect()));
    }
}
