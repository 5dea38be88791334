//! String similarity used to match entity mentions against lookup tables.
//!
//! The score is the larger of two components:
//!
//! * an edit component, `1 - levenshtein(a, b) / max(len(a), len(b))`
//!   over Unicode scalar values;
//! * a token component scaled by [`TOKEN_WEIGHT`], which rewards a mention
//!   whose words all appear (approximately) in the candidate, such as
//!   `"messi"` against `"lionel messi"`, and single-word abbreviations that
//!   cover the candidate's words by prefixes (`"manu"` for
//!   `"manchester united"`, `"psg"` for `"paris saint germain"`).
//!
//! Because the token component is capped below 1, the score is exactly 1
//! only for equal strings.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Ceiling of the token component.
pub const TOKEN_WEIGHT: f64 = 0.95;

/// Lowercases, strips diacritics and punctuation, trims and collapses runs
/// of whitespace. Apostrophes are dropped; other punctuation separates words.
pub fn normalize(s: &str) -> String {
    let mut cleaned = String::with_capacity(s.len());
    for c in s.nfd() {
        if is_combining_mark(c) || c == '\'' || c == '\u{2019}' {
            continue;
        }
        if c.is_alphanumeric() {
            cleaned.extend(c.to_lowercase());
        } else {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Levenshtein distance over chars, two-row table.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitution.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - distance / longer length`; 1 for two empty strings.
pub fn edit_ratio(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Mean over `from` of the best edit ratio against any word of `to`.
fn directed_cover(from: &[&str], to: &[&str]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|x| to.iter().map(|y| edit_ratio(x, y)).fold(0.0, f64::max))
        .sum();
    total / from.len() as f64
}

/// Whether `short` splits into `words.len()` non-empty pieces, each a prefix
/// of the matching word.
pub fn prefix_cover(short: &str, words: &[&str]) -> bool {
    fn go(rest: &[char], words: &[Vec<char>]) -> bool {
        match words.split_first() {
            None => rest.is_empty(),
            Some((word, tail)) => {
                let max_take = word.len().min(rest.len().saturating_sub(tail.len()));
                (1..=max_take).any(|take| rest[..take] == word[..take] && go(&rest[take..], tail))
            }
        }
    }
    if words.len() < 2 {
        return false;
    }
    let rest: Vec<char> = short.chars().collect();
    let words: Vec<Vec<char>> = words.iter().map(|w| w.chars().collect()).collect();
    go(&rest, &words)
}

/// Word-level score in `[0, 1]`, symmetric in its arguments.
pub fn token_score(a: &str, b: &str) -> f64 {
    let ta: Vec<&str> = a.split_whitespace().collect();
    let tb: Vec<&str> = b.split_whitespace().collect();
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let overlap = match ta.len().cmp(&tb.len()) {
        std::cmp::Ordering::Less => directed_cover(&ta, &tb),
        std::cmp::Ordering::Greater => directed_cover(&tb, &ta),
        std::cmp::Ordering::Equal => directed_cover(&ta, &tb).min(directed_cover(&tb, &ta)),
    };
    let abbreviation = (ta.len() == 1 && prefix_cover(ta[0], &tb))
        || (tb.len() == 1 && prefix_cover(tb[0], &ta));
    if abbreviation {
        1.0
    } else {
        overlap
    }
}

/// Similarity of two normalized strings, in `[0, 1]`.
pub fn similarity(a: &str, b: &str) -> f64 {
    if a == b {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    edit_ratio(a, b).max(TOKEN_WEIGHT * token_score(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("  Messi "), "messi");
        assert_eq!(normalize("Real Madrids"), "real madrids");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("Atlético   Madrid"), "atletico madrid");
        assert_eq!(normalize("Paris Saint-Germain"), "paris saint germain");
        assert_eq!(normalize("Newell's Old Boys!"), "newells old boys");
        assert_eq!(normalize("Yellow->red card"), "yellow red card");
        assert_eq!(normalize("Ørsted Ç"), "ørsted c");
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity("messi", "messi"), 1.0);
        assert!((similarity("mesi", "messi") - 0.8).abs() < 1e-12);
        assert_eq!(similarity("", "x"), 0.0);
        assert_eq!(similarity("", ""), 1.0);
    }

    #[test]
    fn token_component_examples() {
        assert!((similarity("messi", "lionel messi") - TOKEN_WEIGHT).abs() < 1e-12);
        assert!((similarity("manu", "manchester united") - TOKEN_WEIGHT).abs() < 1e-12);
        assert!(similarity("manu", "manchester city") < 0.5);
        assert!((similarity("psg", "paris saint germain") - TOKEN_WEIGHT).abs() < 1e-12);
        assert!(similarity("lionel messi", "lionel messi jr") < 1.0);
    }

    #[test]
    fn prefix_cover_cases() {
        assert!(prefix_cover("manu", &["manchester", "united"]));
        assert!(prefix_cover("mu", &["manchester", "united"]));
        assert!(!prefix_cover("manu", &["manchester", "city"]));
        assert!(!prefix_cover("m", &["manchester", "united"]));
        assert!(!prefix_cover("manchester", &["manchester"]));
        assert!(!prefix_cover("manux", &["manchester", "united"]));
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("flaw", "lawn"), 2);
        assert_eq!(levenshtein("çé", "ce"), 2);
    }
}
