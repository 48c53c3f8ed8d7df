//! Deterministic, model-free token accounting.
//!
//! The count is the rounded-up mean of two common estimates: one token per
//! four bytes, and one token per whitespace-separated word:
//!
//! ```text
//! count = ceil((ceil(bytes / 4) + words) / 2)
//! ```
//!
//! Both estimates are subadditive under concatenation and non-decreasing
//! when text is extended, so the combined count is too.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// Approximate token count of a piece of text.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TokenCount(pub u64);

impl TokenCount {
    pub const ZERO: TokenCount = TokenCount(0);

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, other: TokenCount) -> TokenCount {
        TokenCount(self.0.saturating_sub(other.0))
    }
}

impl fmt::Display for TokenCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for TokenCount {
    type Output = TokenCount;
    fn add(self, rhs: TokenCount) -> TokenCount {
        TokenCount(self.0 + rhs.0)
    }
}

impl AddAssign for TokenCount {
    fn add_assign(&mut self, rhs: TokenCount) {
        self.0 += rhs.0;
    }
}

impl Sub for TokenCount {
    type Output = TokenCount;
    fn sub(self, rhs: TokenCount) -> TokenCount {
        TokenCount(self.0 - rhs.0)
    }
}

impl Sum for TokenCount {
    fn sum<I: Iterator<Item = TokenCount>>(iter: I) -> TokenCount {
        iter.fold(TokenCount::ZERO, Add::add)
    }
}

impl From<u64> for TokenCount {
    fn from(value: u64) -> Self {
        TokenCount(value)
    }
}

pub fn token_count(text: &str) -> TokenCount {
    if text.is_empty() {
        return TokenCount::ZERO;
    }
    let byte_estimate = (text.len() as u64).div_ceil(4);
    let words = text.split_whitespace().count() as u64;
    TokenCount((byte_estimate + words).div_ceil(2))
}

/// Longest prefix of `text` (on a char boundary) whose count is at most `max`.
pub fn truncate_to_tokens(text: &str, max: TokenCount) -> &str {
    if token_count(text) <= max {
        return text;
    }
    let boundaries: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect();
    // count is non-decreasing over prefixes, so the feasible prefixes form a
    // leading run of `boundaries`
    let (mut lo, mut hi) = (0usize, boundaries.len() - 1);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if token_count(&text[..boundaries[mid]]) <= max {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    text[..boundaries[lo]].trim_end()
}

/// The first `n` whitespace-separated words, joined by single spaces.
pub fn first_words(text: &str, n: usize) -> String {
    text.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture_1000() -> String {
        "The quick brown fox jumps over the lazy dog while seven wizards quietly juggle boxes of frozen plums. "
            .repeat(20)
            .chars()
            .take(1000)
            .collect()
    }

    #[test]
    fn empty_and_single() {
        assert_eq!(token_count(""), TokenCount(0));
        assert_eq!(token_count("a"), TokenCount(1));
    }

    #[test]
    fn golden_thousand_chars() {
        // 1000 bytes, 177 words: ceil((250 + 177) / 2)
        let text = fixture_1000();
        assert_eq!(text.len(), 1000);
        assert_eq!(token_count(&text), TokenCount(214));
    }

    #[test]
    fn truncation_respects_limit() {
        let text = fixture_1000();
        let cut = truncate_to_tokens(&text, TokenCount(50));
        assert!(token_count(cut) <= TokenCount(50));
        assert!(!cut.is_empty());
        assert_eq!(truncate_to_tokens("short", TokenCount(10)), "short");
        assert_eq!(truncate_to_tokens("anything", TokenCount(0)), "");
    }

    proptest! {
        #[test]
        fn subadditive(a in ".{0,200}", b in ".{0,200}") {
            let joined = format!("{a}{b}");
            prop_assert!(token_count(&joined).0 <= token_count(&a).0 + token_count(&b).0 + 1);
        }

        #[test]
        fn deterministic_and_monotone_under_extension(a in ".{0,200}", b in ".{0,50}") {
            prop_assert_eq!(token_count(&a), token_count(&a.clone()));
            let extended = format!("{a}{b}");
            prop_assert!(token_count(&a) <= token_count(&extended));
        }

        #[test]
        fn truncation_never_exceeds(text in ".{0,300}", max in 0u64..80) {
            let cut = truncate_to_tokens(&text, TokenCount(max));
            prop_assert!(token_count(cut).0 <= max);
            prop_assert!(text.starts_with(cut));
        }
    }
}
