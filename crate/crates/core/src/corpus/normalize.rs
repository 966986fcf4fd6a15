//! Deterministic orthographic clean-up of raw review text.

const PUNCTUATION: [char; 6] = ['.', ',', '!', '?', ';', ':'];
const SENTENCE_FINAL: [char; 3] = ['.', '!', '?'];
const TRAILING_SOFT: [char; 3] = [',', ';', ':'];

fn is_punct(c: char) -> bool {
    PUNCTUATION.contains(&c)
}

pub(crate) fn is_sentence_final(c: char) -> bool {
    SENTENCE_FINAL.contains(&c)
}

/// Normalizes whitespace and punctuation spacing.
///
/// Rules, applied in order:
/// 1. runs of whitespace collapse to one space and the ends are trimmed;
/// 2. spaces before `. , ! ? ; :` are removed;
/// 3. a space is inserted after `.`, `!` or `?` when a letter follows
///    directly, except for a period that closes a single-letter run such as
///    the ones in `e.g.` or `U.S.`;
/// 4. trailing `, ; :` are dropped and a period is appended unless the text
///    already ends in `.`, `!` or `?`.
///
/// The function is idempotent and maps the empty string to itself.
pub fn normalize_text(raw: &str) -> String {
    let mut chars: Vec<char> = Vec::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !chars.is_empty() {
            chars.push(' ');
        }
        chars.extend(word.chars());
    }

    let mut tight: Vec<char> = Vec::with_capacity(chars.len());
    for c in chars {
        if is_punct(c) {
            while tight.last() == Some(&' ') {
                tight.pop();
            }
        }
        tight.push(c);
    }

    let mut spaced: Vec<char> = Vec::with_capacity(tight.len() + 8);
    for (i, &c) in tight.iter().enumerate() {
        spaced.push(c);
        let next_is_letter = tight.get(i + 1).is_some_and(|n| n.is_alphabetic());
        if next_is_letter && is_sentence_final(c) && !(c == '.' && closes_initial(&tight, i)) {
            spaced.push(' ');
        }
    }

    while spaced.last().is_some_and(|c| TRAILING_SOFT.contains(c)) {
        spaced.pop();
    }
    if let Some(&last) = spaced.last() {
        if !is_sentence_final(last) {
            spaced.push('.');
        }
    }
    spaced.into_iter().collect()
}

/// True when the period at `dot` follows exactly one letter, as in `e.g.`.
fn closes_initial(chars: &[char], dot: usize) -> bool {
    let run = chars[..dot].iter().rev().take_while(|c| c.is_alphabetic()).count();
    run == 1
}
