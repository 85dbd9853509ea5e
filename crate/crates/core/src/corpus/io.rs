use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use super::model::{Hypothesis, Lang, MonolingualRecord, Origin, ScoreRecord, SentencePair, META_TAG};
use super::CorpusError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusKind {
    Pairs,
    Mono,
    Hyps,
    Scores,
}

#[derive(Clone, Copy)]
enum Ty {
    Str,
    OptStr,
    Num,
    OptNum,
    Obj,
    OneOf(&'static [&'static str]),
    OptOneOf(&'static [&'static str]),
}

struct FieldSpec {
    name: &'static str,
    ty: Ty,
    required: bool,
}

const fn req(name: &'static str, ty: Ty) -> FieldSpec {
    FieldSpec {
        name,
        ty,
        required: true,
    }
}

const fn opt(name: &'static str, ty: Ty) -> FieldSpec {
    FieldSpec {
        name,
        ty,
        required: false,
    }
}

const ORIGINS: &[&str] = &[
    "authentic",
    "forward_synthetic",
    "backward_synthetic",
    "diversified",
    "tel_synthetic",
];

/// A line-delimited record type.
pub trait Record: Serialize + DeserializeOwned + Sized {
    const KIND: CorpusKind;
    #[doc(hidden)]
    fn fields() -> &'static [FieldSpecRef];
    /// Record-level invariants beyond field types.
    fn check(&self) -> Result<(), (String, String)> {
        Ok(())
    }
    /// Key that must be unique within one file, if any.
    fn unique_key(&self) -> Option<String> {
        None
    }
    fn key_name() -> &'static str {
        "id"
    }
}

#[doc(hidden)]
pub struct FieldSpecRef(FieldSpec);

macro_rules! fields {
    ($($f:expr),* $(,)?) => {{
        const F: &[FieldSpecRef] = &[$(FieldSpecRef($f)),*];
        F
    }};
}

fn non_blank(field: &str, s: &str) -> Result<(), (String, String)> {
    if s.trim().is_empty() {
        Err((field.to_string(), "must be non-empty".to_string()))
    } else {
        Ok(())
    }
}

impl Record for SentencePair {
    const KIND: CorpusKind = CorpusKind::Pairs;
    fn fields() -> &'static [FieldSpecRef] {
        fields![
            req("id", Ty::Str),
            req("src", Ty::Str),
            req("tgt", Ty::Str),
            opt("origin", Ty::OneOf(ORIGINS)),
            opt("scores", Ty::Obj),
            opt("meta", Ty::Obj),
        ]
    }
    fn check(&self) -> Result<(), (String, String)> {
        non_blank("id", &self.id)?;
        non_blank("src", &self.src)?;
        non_blank("tgt", &self.tgt)?;
        for (k, v) in &self.scores {
            if !v.is_finite() {
                return Err(("scores".into(), format!("score `{k}` is not finite")));
            }
        }
        if self.origin == Origin::Authentic && self.meta.contains_key(META_TAG) {
            return Err(("origin".into(), "authentic pair carries a back-translation tag".into()));
        }
        Ok(())
    }
    fn unique_key(&self) -> Option<String> {
        Some(self.id.clone())
    }
}

impl Record for MonolingualRecord {
    const KIND: CorpusKind = CorpusKind::Mono;
    fn fields() -> &'static [FieldSpecRef] {
        fields![
            req("id", Ty::Str),
            req("text", Ty::Str),
            req("lang", Ty::OneOf(&["en", "zh"])),
            opt("doc_id", Ty::OptStr),
        ]
    }
    fn check(&self) -> Result<(), (String, String)> {
        non_blank("id", &self.id)
    }
    fn unique_key(&self) -> Option<String> {
        Some(self.id.clone())
    }
}

impl Record for Hypothesis {
    const KIND: CorpusKind = CorpusKind::Hyps;
    fn fields() -> &'static [FieldSpecRef] {
        fields![
            req("src_id", Ty::Str),
            req("system", Ty::OneOf(&["nmt", "llm"])),
            opt("method", Ty::OptOneOf(&["beam", "sampled"])),
            req("text", Ty::Str),
            opt("score", Ty::OptNum),
        ]
    }
    fn check(&self) -> Result<(), (String, String)> {
        non_blank("src_id", &self.src_id)?;
        match self.score {
            Some(s) if !s.is_finite() => Err(("score".into(), "not finite".into())),
            _ => Ok(()),
        }
    }
}

impl Record for ScoreRecord {
    const KIND: CorpusKind = CorpusKind::Scores;
    fn fields() -> &'static [FieldSpecRef] {
        fields![req("record_id", Ty::Str), req("scorer", Ty::Str), req("value", Ty::Num),]
    }
    fn check(&self) -> Result<(), (String, String)> {
        non_blank("record_id", &self.record_id)?;
        non_blank("scorer", &self.scorer)?;
        if !self.value.is_finite() {
            return Err(("value".into(), "not finite".into()));
        }
        if ScoreRecord::is_unit_interval(&self.scorer) && !(0.0..=1.0).contains(&self.value) {
            return Err((
                "value".into(),
                format!("{} score {} outside [0, 1]", self.scorer, self.value),
            ));
        }
        Ok(())
    }
}

fn check_fields(obj: &Map<String, Value>, specs: &[FieldSpecRef], line: usize) -> Result<(), CorpusError> {
    for FieldSpecRef(spec) in specs {
        let bad = |message: String| CorpusError::Field {
            line,
            field: spec.name.to_string(),
            message,
        };
        let Some(v) = obj.get(spec.name) else {
            if spec.required {
                return Err(bad("missing".into()));
            }
            continue;
        };
        let ok = match spec.ty {
            Ty::Str => v.is_string(),
            Ty::OptStr => v.is_string() || v.is_null(),
            Ty::Num => v.is_number(),
            Ty::OptNum => v.is_number() || v.is_null(),
            Ty::Obj => v.is_object(),
            Ty::OneOf(allowed) => v.as_str().is_some_and(|s| allowed.contains(&s)),
            Ty::OptOneOf(allowed) => v.is_null() || v.as_str().is_some_and(|s| allowed.contains(&s)),
        };
        if !ok {
            let expected = match spec.ty {
                Ty::Str | Ty::OptStr => "a string".to_string(),
                Ty::Num | Ty::OptNum => "a number".to_string(),
                Ty::Obj => "an object".to_string(),
                Ty::OneOf(a) | Ty::OptOneOf(a) => format!("one of {}", a.join("|")),
            };
            return Err(bad(format!("expected {expected}, got {v}")));
        }
    }
    for key in obj.keys() {
        if !specs.iter().any(|FieldSpecRef(s)| s.name == key) {
            return Err(CorpusError::Field {
                line,
                field: key.clone(),
                message: "unknown field".into(),
            });
        }
    }
    Ok(())
}

/// Streams typed records from a line-delimited JSON source. Blank lines
/// are skipped; every other line must be one record.
pub struct RecordReader<R, T> {
    lines: io::Lines<R>,
    line: usize,
    seen: HashSet<String>,
    done: bool,
    _marker: PhantomData<T>,
}

impl<R: BufRead, T: Record> RecordReader<R, T> {
    pub fn new(reader: R) -> Self {
        RecordReader {
            lines: reader.lines(),
            line: 0,
            seen: HashSet::new(),
            done: false,
            _marker: PhantomData,
        }
    }

    fn parse(&mut self, raw: &str) -> Result<T, CorpusError> {
        let line = self.line;
        let value: Value = serde_json::from_str(raw).map_err(|e| CorpusError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let Value::Object(obj) = &value else {
            return Err(CorpusError::Malformed {
                line,
                message: "expected a JSON object".into(),
            });
        };
        check_fields(obj, T::fields(), line)?;
        let record: T = serde_json::from_value(value).map_err(|e| CorpusError::Malformed {
            line,
            message: e.to_string(),
        })?;
        record
            .check()
            .map_err(|(field, message)| CorpusError::Field { line, field, message })?;
        if let Some(key) = record.unique_key() {
            if !self.seen.insert(key.clone()) {
                return Err(CorpusError::Duplicate {
                    line,
                    what: T::key_name(),
                    key,
                });
            }
        }
        Ok(record)
    }
}

impl<R: BufRead, T: Record> Iterator for RecordReader<R, T> {
    type Item = Result<T, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let raw = match self.lines.next()? {
                Ok(raw) => raw,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            };
            self.line += 1;
            if raw.trim().is_empty() {
                continue;
            }
            let out = self.parse(&raw);
            if out.is_err() {
                self.done = true;
            }
            return Some(out);
        }
    }
}

/// Opens a path for reading; "-" is standard input.
pub fn open_input(path: &str) -> Result<Box<dyn BufRead>, CorpusError> {
    if path == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let file = File::open(path).map_err(|source| CorpusError::Open {
        path: path.to_string(),
        source,
    })?;
    Ok(Box::new(BufReader::new(file)))
}

/// Opens a path for writing; "-" is standard output. Parent directories
/// are not created.
pub fn open_output(path: &str) -> Result<Box<dyn Write>, CorpusError> {
    if path == "-" {
        return Ok(Box::new(BufWriter::new(io::stdout())));
    }
    let file = File::create(Path::new(path)).map_err(|source| CorpusError::Open {
        path: path.to_string(),
        source,
    })?;
    Ok(Box::new(BufWriter::new(file)))
}

pub fn read_corpus<T: Record>(path: &str) -> Result<RecordReader<Box<dyn BufRead>, T>, CorpusError> {
    Ok(RecordReader::new(open_input(path)?))
}

pub fn read_all<T: Record>(path: &str) -> Result<Vec<T>, CorpusError> {
    read_corpus::<T>(path)?.collect()
}

pub fn read_pairs(path: &str) -> Result<Vec<SentencePair>, CorpusError> {
    read_all(path)
}

pub fn read_hypotheses(path: &str) -> Result<Vec<Hypothesis>, CorpusError> {
    read_all(path)
}

pub fn read_scores(path: &str) -> Result<Vec<ScoreRecord>, CorpusError> {
    read_all(path)
}

/// Reads monolingual records, checking each against `expected` when given.
pub fn read_mono(path: &str, expected: Option<Lang>) -> Result<Vec<MonolingualRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, rec) in read_corpus::<MonolingualRecord>(path)?.enumerate() {
        let rec = rec?;
        if let Some(lang) = expected {
            if rec.lang != lang {
                return Err(CorpusError::Field {
                    line: i + 1,
                    field: "lang".into(),
                    message: format!("expected {}, got {}", lang.as_str(), rec.lang.as_str()),
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Writes one JSON object per line.
pub fn write_records<'a, T, W, I>(mut writer: W, records: I) -> Result<usize, CorpusError>
where
    T: Serialize + 'a,
    W: Write,
    I: IntoIterator<Item = &'a T>,
{
    let mut n = 0;
    for rec in records {
        serde_json::to_writer(&mut writer, rec)?;
        writer.write_all(b"\n")?;
        n += 1;
    }
    writer.flush()?;
    Ok(n)
}

/// Writes a single pretty-printed JSON document.
pub fn write_json<T: Serialize>(path: &str, value: &T) -> Result<(), CorpusError> {
    let mut w = open_output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
