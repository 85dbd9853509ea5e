use serde::{Deserialize, Serialize};

use super::PreprocessError;

fn default_max_words() -> usize {
    150
}

fn default_similarity() -> f64 {
    0.7
}

fn default_src_lang() -> String {
    "en".into()
}

fn default_tgt_lang() -> String {
    "zh".into()
}

/// Filter thresholds and optional external tool commands.
///
/// `langid_threshold` and `align_threshold` have no defaults: a chain that
/// uses the `lang` or `align` stage must set them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "default_max_words")]
    pub max_words: usize,
    #[serde(default = "default_similarity")]
    pub similarity_threshold: f64,
    #[serde(default)]
    pub langid_threshold: Option<f64>,
    #[serde(default)]
    pub align_threshold: Option<f64>,
    #[serde(default = "default_src_lang")]
    pub expected_src_lang: String,
    #[serde(default = "default_tgt_lang")]
    pub expected_tgt_lang: String,
    /// Subword vocabulary size, recorded in the manifest only.
    #[serde(default)]
    pub subword_vocab_size: Option<u32>,
    /// Command (argv) run by the `zhseg` stage; reads and writes pair records.
    #[serde(default)]
    pub zh_segment_cmd: Option<Vec<String>>,
    /// Command (argv) run by the `punct` stage.
    #[serde(default)]
    pub en_punct_cmd: Option<Vec<String>>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_words: default_max_words(),
            similarity_threshold: default_similarity(),
            langid_threshold: None,
            align_threshold: None,
            expected_src_lang: default_src_lang(),
            expected_tgt_lang: default_tgt_lang(),
            subword_vocab_size: None,
            zh_segment_cmd: None,
            en_punct_cmd: None,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        let bad = |m: String| Err(PreprocessError::Config(m));
        if self.max_words < 1 {
            return bad("max_words must be at least 1".into());
        }
        let unit = |name: &str, v: f64| {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(PreprocessError::Config(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        unit("similarity_threshold", self.similarity_threshold)?;
        if let Some(t) = self.langid_threshold {
            unit("langid_threshold", t)?;
        }
        if let Some(t) = self.align_threshold {
            if !t.is_finite() {
                return bad(format!("align_threshold = {t} is not finite"));
            }
        }
        for (name, cmd) in [
            ("zh_segment_cmd", &self.zh_segment_cmd),
            ("en_punct_cmd", &self.en_punct_cmd),
        ] {
            if cmd.as_ref().is_some_and(|c| c.is_empty()) {
                return bad(format!("{name} is empty"));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, PreprocessError> {
        let cfg: FilterConfig = toml::from_str(text).map_err(|e| PreprocessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_system_description() {
        let cfg = FilterConfig::from_toml("").unwrap();
        assert_eq!(cfg.max_words, 150);
        assert_eq!(cfg.similarity_threshold, 0.7);
        assert_eq!(cfg.langid_threshold, None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = FilterConfig::from_toml("max_word = 10").unwrap_err();
        assert!(err.to_string().contains("max_word"), "{err}");
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(FilterConfig::from_toml("max_words = 0").is_err());
        assert!(FilterConfig::from_toml("similarity_threshold = 1.2").is_err());
        assert!(FilterConfig::from_toml("langid_threshold = -0.1").is_err());
        assert!(FilterConfig::from_toml("zh_segment_cmd = []").is_err());
        let cfg = FilterConfig::from_toml("langid_threshold = 0.9\nalign_threshold = 0.5").unwrap();
        assert_eq!(cfg.align_threshold, Some(0.5));
    }
}
