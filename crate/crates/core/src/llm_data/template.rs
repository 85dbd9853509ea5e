use serde::{Deserialize, Serialize};

use super::LlmDataError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateStage {
    Cpt,
    Sft,
    Cpo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Src,
    Tgt,
    SrcLang,
    TgtLang,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::Src => "src",
            Field::Tgt => "tgt",
            Field::SrcLang => "src_lang",
            Field::TgtLang => "tgt_lang",
        }
    }

    fn parse(name: &str) -> Option<Field> {
        Some(match name {
            "src" => Field::Src,
            "tgt" => Field::Tgt,
            "src_lang" => Field::SrcLang,
            "tgt_lang" => Field::TgtLang,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Part {
    Text(String),
    Slot(Field),
}

/// Values available to a template. Unset fields are errors only if the
/// template uses them.
#[derive(Clone, Copy, Debug, Default)]
pub struct RenderFields<'a> {
    pub src: Option<&'a str>,
    pub tgt: Option<&'a str>,
    pub src_lang: Option<&'a str>,
    pub tgt_lang: Option<&'a str>,
}

impl<'a> RenderFields<'a> {
    fn get(&self, f: Field) -> Option<&'a str> {
        match f {
            Field::Src => self.src,
            Field::Tgt => self.tgt,
            Field::SrcLang => self.src_lang,
            Field::TgtLang => self.tgt_lang,
        }
    }
}

/// A prompt template with `{src}`, `{tgt}`, `{src_lang}` and `{tgt_lang}`
/// placeholders. `{{` and `}}` render as literal braces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub stage: TemplateStage,
    parts: Vec<Part>,
}

impl PromptTemplate {
    pub fn parse(stage: TemplateStage, text: &str) -> Result<Self, LlmDataError> {
        let err = |m: String| LlmDataError::Template(m);
        let mut parts = Vec::new();
        let mut lit = String::new();
        let mut chars = text.char_indices().peekable();
        while let Some((at, c)) = chars.next() {
            match c {
                '{' if chars.peek().map(|(_, c)| *c) == Some('{') => {
                    chars.next();
                    lit.push('{');
                }
                '}' if chars.peek().map(|(_, c)| *c) == Some('}') => {
                    chars.next();
                    lit.push('}');
                }
                '{' => {
                    let rest = &text[at + 1..];
                    let end = rest
                        .find('}')
                        .ok_or_else(|| err(format!("unclosed `{{` at byte {at}")))?;
                    let name = &rest[..end];
                    let field = Field::parse(name).ok_or_else(|| err(format!("unknown placeholder {{{name}}}")))?;
                    if !lit.is_empty() {
                        parts.push(Part::Text(std::mem::take(&mut lit)));
                    }
                    parts.push(Part::Slot(field));
                    while chars.next_if(|(i, _)| *i <= at + 1 + end).is_some() {}
                }
                '}' => return Err(err(format!("unmatched `}}` at byte {at}"))),
                c => lit.push(c),
            }
        }
        if !lit.is_empty() {
            parts.push(Part::Text(lit));
        }
        let tpl = PromptTemplate { stage, parts };
        if matches!(stage, TemplateStage::Sft | TemplateStage::Cpo) && !tpl.uses(Field::Src) {
            return Err(err("sft and cpo templates must contain {src}".into()));
        }
        Ok(tpl)
    }

    /// Built-in template for a stage. The wording is a neutral default and
    /// is expected to be replaced by a template file.
    pub fn default_for(stage: TemplateStage) -> Self {
        let text = match stage {
            TemplateStage::Cpt => "{src}",
            TemplateStage::Sft => {
                "Translate the following text from {src_lang} to {tgt_lang}.\n{src_lang}: {src}\n{tgt_lang}: {tgt}"
            }
            TemplateStage::Cpo => {
                "Translate the following text from {src_lang} to {tgt_lang}.\n{src_lang}: {src}\n{tgt_lang}:"
            }
        };
        Self::parse(stage, text).expect("built-in template parses")
    }

    pub fn uses(&self, field: Field) -> bool {
        self.parts.contains(&Part::Slot(field))
    }

    pub fn render(&self, fields: &RenderFields<'_>) -> Result<String, LlmDataError> {
        let mut out = String::new();
        for part in &self.parts {
            match part {
                Part::Text(t) => out.push_str(t),
                Part::Slot(f) => out.push_str(fields.get(*f).ok_or(LlmDataError::Unbound(f.name()))?),
            }
        }
        Ok(out)
    }

    #[cfg(test)]
    fn scan_regex(&self) -> (regex::Regex, Vec<Field>) {
        let mut pat = String::from("^");
        let mut order = Vec::new();
        for part in &self.parts {
            match part {
                Part::Text(t) => pat.push_str(&regex::escape(t)),
                Part::Slot(f) => {
                    pat.push_str("(.*?)");
                    order.push(*f);
                }
            }
        }
        pat.push('$');
        (
            regex::RegexBuilder::new(&pat)
                .dot_matches_new_line(true)
                .build()
                .unwrap(),
            order,
        )
    }
}
