//! Word segmentation used by length limits and pack sizes.
//!
//! Text containing an ASCII space is counted in whitespace tokens. Text with
//! no ASCII space whose non-whitespace code points are at least half CJK is
//! counted one word per CJK character, with each maximal run of other
//! non-whitespace characters counting as one word. Anything else falls back
//! to whitespace tokens.

use std::ops::Range;

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF     // hiragana, katakana
        | 0x3400..=0x4DBF   // ideographs ext. A
        | 0x4E00..=0x9FFF   // unified ideographs
        | 0xAC00..=0xD7AF   // hangul syllables
        | 0xF900..=0xFAFF   // compatibility ideographs
        | 0x20000..=0x2FA1F // ext. B onwards, compat supplement
    )
}

fn counts_by_character(text: &str) -> bool {
    if text.contains(' ') {
        return false;
    }
    let mut total = 0usize;
    let mut cjk = 0usize;
    for c in text.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        if is_cjk(c) {
            cjk += 1;
        }
    }
    total > 0 && cjk * 2 >= total
}

/// Byte ranges of the words in `text`, in order.
pub fn word_spans(text: &str) -> Vec<Range<usize>> {
    if counts_by_character(text) {
        let mut spans = Vec::new();
        let mut run: Option<usize> = None;
        for (i, c) in text.char_indices() {
            if c.is_whitespace() || is_cjk(c) {
                if let Some(start) = run.take() {
                    spans.push(start..i);
                }
                if is_cjk(c) {
                    spans.push(i..i + c.len_utf8());
                }
            } else if run.is_none() {
                run = Some(i);
            }
        }
        if let Some(start) = run {
            spans.push(start..text.len());
        }
        spans
    } else {
        whitespace_spans(text)
    }
}

fn whitespace_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                spans.push(s..i);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        spans.push(s..text.len());
    }
    spans
}

pub fn word_count(text: &str) -> usize {
    word_spans(text).len()
}

/// Longest prefix of `text` holding at most `max_words` words. The prefix
/// ends at the end of the last retained word.
pub fn truncate_words(text: &str, max_words: usize) -> &str {
    let spans = word_spans(text);
    if spans.len() <= max_words {
        return text;
    }
    if max_words == 0 {
        return "";
    }
    &text[..spans[max_words - 1].end]
}

pub fn truncate_chars(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((i, _)) => &text[..i],
        None => text,
    }
}

/// Tokenization applied before BLEU.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenize {
    Whitespace,
    /// One token per non-whitespace character.
    #[default]
    Character,
}

impl std::str::FromStr for Tokenize {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "whitespace" | "ws" => Ok(Tokenize::Whitespace),
            "character" | "char" => Ok(Tokenize::Character),
            other => Err(format!("unknown tokenization `{other}` (whitespace|character)")),
        }
    }
}

pub fn tokenize(text: &str, mode: Tokenize) -> Vec<&str> {
    match mode {
        Tokenize::Whitespace => text.split_whitespace().collect(),
        Tokenize::Character => text
            .char_indices()
            .filter(|(_, c)| !c.is_whitespace())
            .map(|(i, c)| &text[i..i + c.len_utf8()])
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn english_counts_whitespace_tokens() {
        assert_eq!(word_count("the cat  sat\ton the mat"), 6);
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("   "), 0);
        assert_eq!(word_count("hello"), 1);
    }

    #[test]
    fn unsegmented_chinese_counts_characters() {
        assert_eq!(word_count("你好世界"), 4);
        // a Latin run inside CJK text counts once
        assert_eq!(word_count("我爱自然语言NLP。"), 7);
        assert_eq!(word_count("我爱NLP。"), 1);
    }

    #[test]
    fn segmented_chinese_counts_tokens() {
        assert_eq!(word_count("我 爱 自然语言 处理"), 4);
    }

    #[test]
    fn mostly_latin_without_spaces_is_one_token() {
        assert_eq!(word_count("abcdef你"), 1);
    }

    #[test]
    fn truncation_keeps_prefix() {
        assert_eq!(truncate_words("a b  c d", 2), "a b");
        assert_eq!(truncate_words("a b", 5), "a b");
        assert_eq!(truncate_words("你好世界", 3), "你好世");
        assert_eq!(truncate_chars("你好世界", 2), "你好");
        assert_eq!(truncate_chars("ab", 5), "ab");
    }

    #[test]
    fn character_tokens_skip_spaces() {
        assert_eq!(tokenize("你 好a", Tokenize::Character), vec!["你", "好", "a"]);
        assert_eq!(tokenize(" a  b ", Tokenize::Whitespace), vec!["a", "b"]);
    }
}
