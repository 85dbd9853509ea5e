//! Do-not-translate masking: URLs and emoticons are swapped for indexed
//! placeholders before translation and restored afterwards.

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DntError {
    #[error("pattern `{name}`: {source}")]
    Pattern {
        name: String,
        #[source]
        source: Box<regex::Error>,
    },
    #[error("pattern config: {0}")]
    Config(String),
    #[error("pattern set is empty")]
    NoPatterns,
}

/// Shape of the placeholder tokens: `{open}{label}{n}{close}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaceholderStyle {
    pub open: String,
    pub label: String,
    pub close: String,
}

impl Default for PlaceholderStyle {
    fn default() -> Self {
        PlaceholderStyle {
            open: "⟦".into(),
            label: "DNT".into(),
            close: "⟧".into(),
        }
    }
}

impl PlaceholderStyle {
    pub fn token(&self, index: usize) -> String {
        format!("{}{}{}{}", self.open, self.label, index, self.close)
    }

    fn literal_pattern(&self) -> String {
        format!(
            "{}{}[0-9]+{}",
            regex::escape(&self.open),
            regex::escape(&self.label),
            regex::escape(&self.close)
        )
    }
}

pub const DEFAULT_EMOTICONS: &[&str] = &[
    ":-)", ":)", ":-(", ":(", ":-D", ":D", ";-)", ";)", ":-P", ":P", ":-p", ":p", ":'(", ":-O", ":O", "<3", "^_^",
    "^^", "T_T", "-_-", "o_O", "O_o",
];

/// URL forms `scheme://…` and `www.…`. Trailing sentence punctuation is
/// left outside the match; `extra_stop` lists characters a URL may not
/// contain (the placeholder brackets).
fn url_pattern(extra_stop: &str) -> String {
    let stop = regex::escape(extra_stop);
    format!(r#"(?i:[a-z][a-z0-9+.\-]*://|www\.)[^\s<>"{stop}]*[^\s<>"{stop}.,;:!?)\]}}'"]"#)
}

const EMOJI_PATTERN: &str = r"(?:\p{Emoji_Presentation}|\p{Extended_Pictographic}\x{FE0F})[\x{FE0F}\x{1F3FB}-\x{1F3FF}]*(?:\x{200D}\p{Extended_Pictographic}[\x{FE0F}\x{1F3FB}-\x{1F3FF}]*)*";

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternFile {
    #[serde(default)]
    placeholder: Option<PlaceholderStyle>,
    #[serde(default = "yes")]
    urls: bool,
    #[serde(default = "yes")]
    emoji: bool,
    #[serde(default)]
    emoticons: Option<Vec<String>>,
    #[serde(default)]
    pattern: Vec<NamedPattern>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedPattern {
    name: String,
    regex: String,
}

/// Ordered span patterns plus the placeholder style. Text that already
/// looks like a placeholder is always masked so restoration stays exact.
#[derive(Clone, Debug)]
pub struct PatternSet {
    style: PlaceholderStyle,
    patterns: Vec<(String, Regex)>,
}

fn compile(name: &str, re: &str) -> Result<(String, Regex), DntError> {
    Regex::new(re)
        .map(|r| (name.to_string(), r))
        .map_err(|e| DntError::Pattern {
            name: name.to_string(),
            source: Box::new(e),
        })
}

impl PatternSet {
    pub fn new(style: PlaceholderStyle) -> Result<Self, DntError> {
        if style.open.is_empty() || style.close.is_empty() {
            return Err(DntError::Config("placeholder brackets must be non-empty".into()));
        }
        let literal = style.literal_pattern();
        Ok(PatternSet {
            patterns: vec![compile("placeholder", &literal)?],
            style,
        })
    }

    pub fn with_urls(mut self) -> Result<Self, DntError> {
        let stop = format!("{}{}", self.style.open, self.style.close);
        self.patterns.push(compile("url", &url_pattern(&stop))?);
        Ok(self)
    }

    pub fn with_emoji(mut self) -> Result<Self, DntError> {
        self.patterns.push(compile("emoji", EMOJI_PATTERN)?);
        Ok(self)
    }

    pub fn with_emoticons<S: AsRef<str>>(mut self, emoticons: &[S]) -> Result<Self, DntError> {
        if emoticons.is_empty() {
            return Ok(self);
        }
        let mut list: Vec<&str> = emoticons.iter().map(AsRef::as_ref).filter(|e| !e.is_empty()).collect();
        list.sort_by_key(|e| std::cmp::Reverse(e.len()));
        let alt = list.iter().map(|e| regex::escape(e)).collect::<Vec<_>>().join("|");
        self.patterns.push(compile("emoticon", &alt)?);
        Ok(self)
    }

    pub fn with_pattern(mut self, name: &str, re: &str) -> Result<Self, DntError> {
        self.patterns.push(compile(name, re)?);
        Ok(self)
    }

    /// URLs, emoji and the default emoticon list.
    pub fn default_set() -> Self {
        Self::new(PlaceholderStyle::default())
            .and_then(Self::with_urls)
            .and_then(Self::with_emoji)
            .and_then(|s| s.with_emoticons(DEFAULT_EMOTICONS))
            .expect("built-in patterns compile")
    }

    /// Loads a TOML pattern file. Keys: `placeholder` (open/label/close),
    /// `urls`, `emoji` (booleans, default true), `emoticons` (list,
    /// default built-in) and `[[pattern]]` tables with `name` and `regex`.
    pub fn from_toml(text: &str) -> Result<Self, DntError> {
        let file: PatternFile = toml::from_str(text).map_err(|e| DntError::Config(e.to_string()))?;
        let mut set = Self::new(file.placeholder.unwrap_or_default())?;
        if file.urls {
            set = set.with_urls()?;
        }
        if file.emoji {
            set = set.with_emoji()?;
        }
        match &file.emoticons {
            Some(list) => set = set.with_emoticons(list)?,
            None => set = set.with_emoticons(DEFAULT_EMOTICONS)?,
        }
        for p in &file.pattern {
            set = set.with_pattern(&p.name, &p.regex)?;
        }
        if set.patterns.len() == 1 {
            return Err(DntError::NoPatterns);
        }
        Ok(set)
    }

    pub fn style(&self) -> &PlaceholderStyle {
        &self.style
    }

    /// Regex of the named pattern, if present.
    pub fn pattern(&self, name: &str) -> Option<&Regex> {
        self.patterns.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }
}

impl Default for PatternSet {
    fn default() -> Self {
        Self::default_set()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub placeholder: String,
    pub text: String,
    /// Byte offsets of the span in the original text.
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DntSegment {
    pub original: String,
    pub masked: String,
    pub slots: Vec<Slot>,
}

/// Replaces matched spans left to right. At each point the earliest match
/// wins, ties going to the longest, then to the earlier pattern.
pub fn mask(text: &str, patterns: &PatternSet) -> DntSegment {
    let mut next: Vec<Option<(usize, usize)>> = vec![None; patterns.patterns.len()];
    let mut stale = vec![true; patterns.patterns.len()];
    let mut pos = 0;
    let mut masked = String::with_capacity(text.len());
    let mut slots = Vec::new();
    loop {
        let mut best: Option<(usize, usize)> = None;
        for (i, (_, re)) in patterns.patterns.iter().enumerate() {
            if stale[i] || next[i].is_some_and(|(s, _)| s < pos) {
                next[i] = find_non_empty(re, text, pos);
                stale[i] = false;
            }
            if let Some((s, e)) = next[i] {
                let better = match best {
                    None => true,
                    Some((bs, be)) => s < bs || (s == bs && e > be),
                };
                if better {
                    best = Some((s, e));
                }
            }
        }
        let Some((start, end)) = best else { break };
        masked.push_str(&text[pos..start]);
        let placeholder = patterns.style.token(slots.len() + 1);
        masked.push_str(&placeholder);
        slots.push(Slot {
            placeholder,
            text: text[start..end].to_string(),
            start,
            end,
        });
        pos = end;
    }
    masked.push_str(&text[pos..]);
    DntSegment {
        original: text.to_string(),
        masked,
        slots,
    }
}

fn find_non_empty(re: &Regex, text: &str, mut from: usize) -> Option<(usize, usize)> {
    while from <= text.len() {
        let m = re.find_at(text, from)?;
        if m.end() > m.start() {
            return Some((m.start(), m.end()));
        }
        // skip an empty match by one character
        from = m.start() + text[m.start()..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmaskReport {
    /// Placeholders absent from the translation (their spans are appended).
    pub missing: usize,
    /// Extra occurrences of placeholders the translation repeated.
    pub duplicated: usize,
}

/// Restores every placeholder occurrence in `translated`. Spans whose
/// placeholder was lost are appended, space-separated, in slot order.
pub fn unmask(translated: &str, segment: &DntSegment) -> (String, UnmaskReport) {
    let mut seen = vec![0usize; segment.slots.len()];
    let mut out = String::with_capacity(translated.len());
    let mut rest = translated;
    'scan: while !rest.is_empty() {
        let mut hit: Option<usize> = None;
        for (i, slot) in segment.slots.iter().enumerate() {
            if rest.starts_with(slot.placeholder.as_str())
                && hit.is_none_or(|h| slot.placeholder.len() > segment.slots[h].placeholder.len())
            {
                hit = Some(i);
            }
        }
        if let Some(i) = hit {
            out.push_str(&segment.slots[i].text);
            seen[i] += 1;
            rest = &rest[segment.slots[i].placeholder.len()..];
            continue 'scan;
        }
        let c = rest.chars().next().expect("non-empty");
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    let mut report = UnmaskReport::default();
    for (slot, n) in segment.slots.iter().zip(&seen) {
        match n {
            0 => {
                out.push(' ');
                out.push_str(&slot.text);
                report.missing += 1;
            }
            n => report.duplicated += n - 1,
        }
    }
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set() -> PatternSet {
        PatternSet::default_set()
    }

    #[test]
    fn single_url() {
        let seg = mask("see https://a.b/c now", &set());
        assert_eq!(seg.masked, "see ⟦DNT1⟧ now");
        assert_eq!(seg.slots.len(), 1);
        assert_eq!(seg.slots[0].placeholder, "⟦DNT1⟧");
        assert_eq!(seg.slots[0].text, "https://a.b/c");
        assert_eq!((seg.slots[0].start, seg.slots[0].end), (4, 17));
    }

    #[test]
    fn no_match_is_identity() {
        let seg = mask("hello", &set());
        assert_eq!(seg.masked, "hello");
        assert!(seg.slots.is_empty());
    }

    #[test]
    fn emoji_and_www() {
        let seg = mask("😀 visit www.x.y 😀", &set());
        assert_eq!(seg.masked, "⟦DNT1⟧ visit ⟦DNT2⟧ ⟦DNT3⟧");
        let spans: Vec<&str> = seg.slots.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(spans, vec!["😀", "www.x.y", "😀"]);
    }

    #[test]
    fn trailing_punctuation_stays_outside() {
        let seg = mask("Go to www.example.com/path. Thanks :)", &set());
        assert_eq!(seg.masked, "Go to ⟦DNT1⟧. Thanks ⟦DNT2⟧");
        assert_eq!(seg.slots[0].text, "www.example.com/path");
    }

    #[test]
    fn zwj_sequences_and_modifiers_are_one_span() {
        let seg = mask("fam 👨\u{200D}👩\u{200D}👧 ok 👍🏽 ❤\u{FE0F}", &set());
        let spans: Vec<&str> = seg.slots.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(spans, vec!["👨\u{200D}👩\u{200D}👧", "👍🏽", "❤\u{FE0F}"]);
    }

    #[test]
    fn literal_placeholders_in_input_are_protected() {
        let text = "keep ⟦DNT1⟧ and https://x.y";
        let seg = mask(text, &set());
        assert_eq!(seg.masked, "keep ⟦DNT1⟧ and ⟦DNT2⟧");
        assert_eq!(unmask(&seg.masked, &seg).0, text);
    }

    #[test]
    fn direct_substitution() {
        let seg = mask("look https://a.b", &set());
        let (out, rep) = unmask("请看 ⟦DNT1⟧", &seg);
        assert_eq!(out, "请看 https://a.b");
        assert_eq!(rep, UnmaskReport::default());
    }

    #[test]
    fn lost_placeholder_is_appended() {
        let seg = mask("look https://a.b", &set());
        let (out, rep) = unmask("请看", &seg);
        assert_eq!(out, "请看 https://a.b");
        assert_eq!(rep.missing, 1);
    }

    #[test]
    fn repeated_placeholder_is_replaced_everywhere() {
        let seg = mask("a :) b", &set());
        let (out, rep) = unmask("⟦DNT1⟧ x ⟦DNT1⟧", &seg);
        assert_eq!(out, ":) x :)");
        assert_eq!(rep.duplicated, 1);
    }

    #[test]
    fn many_slots_do_not_collide() {
        let text = (0..12).map(|i| format!("www.s{i}.com")).collect::<Vec<_>>().join(" ");
        let seg = mask(&text, &set());
        assert_eq!(seg.slots.len(), 12);
        assert_eq!(unmask(&seg.masked, &seg).0, text);
    }

    #[test]
    fn pattern_file() {
        let set = PatternSet::from_toml(
            "urls = true\nemoji = false\nemoticons = [\":)\"]\n[placeholder]\nopen = \"<<\"\nlabel = \"X\"\nclose = \">>\"\n[[pattern]]\nname = \"hashtag\"\nregex = \"#[a-z]+\"\n",
        )
        .unwrap();
        let seg = mask("hi #rust :) 😀 www.a.b", &set);
        assert_eq!(seg.masked, "hi <<X1>> <<X2>> 😀 <<X3>>");
        assert!(PatternSet::from_toml("urls = false\nemoji = false\nemoticons = []").is_err());
        assert!(PatternSet::from_toml("bogus = 1").is_err());
        assert!(PatternSet::from_toml("[[pattern]]\nname = \"bad\"\nregex = \"(\"").is_err());
    }

    fn fuzz_text() -> impl Strategy<Value = String> {
        let piece = prop_oneof![
            "[a-zA-Z0-9 .,:;/()!?-]{0,8}",
            "[\u{4E00}-\u{4E40}，。 ]{0,6}",
            Just("https://ex.com/a?b=1".to_string()),
            Just("www.test.org.".to_string()),
            Just("😀".to_string()),
            Just("👍🏽".to_string()),
            Just(":)".to_string()),
            Just("⟦DNT3⟧".to_string()),
            Just("⟦".to_string()),
        ];
        proptest::collection::vec(piece, 0..8).prop_map(|v| v.concat())
    }

    proptest! {
        #[test]
        fn round_trip_and_no_residual_urls(text in fuzz_text()) {
            let s = set();
            let seg = mask(&text, &s);
            prop_assert_eq!(&unmask(&seg.masked, &seg).0, &text);
            prop_assert!(!s.pattern("url").unwrap().is_match(&seg.masked));
            for (i, slot) in seg.slots.iter().enumerate() {
                prop_assert_eq!(&slot.placeholder, &s.style().token(i + 1));
                prop_assert_eq!(seg.masked.matches(slot.placeholder.as_str()).count(), 1);
                prop_assert_eq!(&text[slot.start..slot.end], slot.text.as_str());
            }
        }
    }
}
