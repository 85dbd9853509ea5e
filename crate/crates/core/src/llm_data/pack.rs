use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::LlmDataError;
use crate::corpus::MonolingualRecord;
use crate::text::{truncate_chars, truncate_words, word_count};

pub const DEFAULT_CAP: usize = 4096;

/// Unit in which the pack cap is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapUnit {
    #[default]
    Words,
    Characters,
}

impl CapUnit {
    pub fn size(self, text: &str) -> usize {
        match self {
            CapUnit::Words => word_count(text),
            CapUnit::Characters => text.chars().count(),
        }
    }

    fn truncate(self, text: &str, cap: usize) -> &str {
        match self {
            CapUnit::Words => {
                let mut cut = truncate_words(text, cap);
                // A prefix can switch counting mode; shrink until it fits.
                let mut limit = cap;
                while word_count(cut) > cap && limit > 0 {
                    limit -= 1;
                    cut = truncate_words(cut, limit);
                }
                cut
            }
            CapUnit::Characters => truncate_chars(text, cap),
        }
    }
}

impl std::str::FromStr for CapUnit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "words" | "word" => Ok(CapUnit::Words),
            "characters" | "chars" | "char" => Ok(CapUnit::Characters),
            other => Err(format!("unknown cap unit `{other}` (words|characters)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub record_id: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedDocument {
    pub id: String,
    pub segments: Vec<Segment>,
    /// Total size in the pack's cap unit.
    pub word_count: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

impl PackedDocument {
    pub fn text(&self, separator: &str) -> String {
        self.segments
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(separator)
    }
}

/// Makes records of each document contiguous. Documents are ordered by
/// first appearance; records keep their relative order; records without a
/// doc id stay where they are as single-record documents.
fn group_documents(records: Vec<MonolingualRecord>) -> Vec<MonolingualRecord> {
    let mut slot_of: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<Vec<MonolingualRecord>> = Vec::new();
    for rec in records {
        match rec.doc_id.clone() {
            Some(doc) => {
                let next = groups.len();
                let slot = *slot_of.entry(doc).or_insert(next);
                if slot == next {
                    groups.push(Vec::new());
                }
                groups[slot].push(rec);
            }
            None => groups.push(vec![rec]),
        }
    }
    groups.into_iter().flatten().collect()
}

/// Greedy in-order packing: a record joins the open pack when the pack
/// stays within `cap`, otherwise the pack is closed and a new one begins.
/// A record larger than `cap` is truncated to `cap` and packed alone.
pub fn pack_cpt(
    records: Vec<MonolingualRecord>,
    cap: usize,
    unit: CapUnit,
) -> Result<Vec<PackedDocument>, LlmDataError> {
    if cap == 0 {
        return Err(LlmDataError::ZeroCap);
    }
    let mut packs: Vec<PackedDocument> = Vec::new();
    let mut open = PackedDocument {
        id: String::new(),
        segments: Vec::new(),
        word_count: 0,
        truncated: false,
    };
    let close = |open: &mut PackedDocument, packs: &mut Vec<PackedDocument>| {
        if !open.segments.is_empty() {
            let mut done = std::mem::replace(
                open,
                PackedDocument {
                    id: String::new(),
                    segments: Vec::new(),
                    word_count: 0,
                    truncated: false,
                },
            );
            done.id = format!("cpt-{:06}", packs.len());
            packs.push(done);
        }
    };

    for rec in group_documents(records) {
        let size = unit.size(&rec.text);
        if size > cap {
            close(&mut open, &mut packs);
            let text = unit.truncate(&rec.text, cap).to_string();
            open.word_count = unit.size(&text);
            open.segments.push(Segment {
                record_id: rec.id,
                text,
            });
            open.truncated = true;
            close(&mut open, &mut packs);
            continue;
        }
        if open.word_count + size > cap {
            close(&mut open, &mut packs);
        }
        open.word_count += size;
        open.segments.push(Segment {
            record_id: rec.id,
            text: rec.text,
        });
    }
    close(&mut open, &mut packs);
    Ok(packs)
}
