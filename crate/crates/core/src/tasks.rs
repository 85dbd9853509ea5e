//! File-level operations shared by the command line and the pipeline
//! runner. Each operation is named `module.op`, reads named inputs, writes
//! named outputs and takes a table of typed parameters.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::augment::{self, PhaseKind, TranslationBatch};
use crate::corpus::{
    self, attach_scores, open_output, read_hypotheses, read_mono, read_pairs, read_scores, write_json, write_records,
    CorpusManifest, Hypothesis, SentencePair,
};
use crate::curriculum::{self, CurriculumError, SamplingPlan, ScoredInput, SCORE_LOGP_IN, SCORE_LOGP_OUT};
use crate::dnt::{self, DntSegment, PatternSet};
use crate::llm_data::{self, CapUnit, PromptTemplate, RenderFields, TemplateStage};
use crate::mbr::{self, ExternalMatrix, MatrixEntry, NamedUtility, UtilitySource};
use crate::metrics;
use crate::preprocess::{self, FilterConfig, Stage};
use crate::text::{tokenize, word_count, Tokenize};
use crate::{Error, Exec, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamType {
    Int,
    Float,
    Bool,
    Str,
    /// A list of strings, or one comma-separated string.
    List,
}

impl ParamType {
    fn describe(self) -> &'static str {
        match self {
            ParamType::Int => "a non-negative integer",
            ParamType::Float => "a number",
            ParamType::Bool => "a boolean",
            ParamType::Str => "a string",
            ParamType::List => "a list of strings",
        }
    }

    fn accepts(self, v: &toml::Value) -> bool {
        use toml::Value as V;
        match (self, v) {
            (ParamType::Int, V::Integer(i)) => *i >= 0,
            (ParamType::Float, V::Float(f)) => f.is_finite(),
            (ParamType::Float, V::Integer(_)) => true,
            (ParamType::Bool, V::Boolean(_)) => true,
            (ParamType::Str, V::String(_)) => true,
            (ParamType::List, V::String(_)) => true,
            (ParamType::List, V::Array(a)) => a.iter().all(|x| x.is_str()),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Port {
    pub name: &'static str,
    pub required: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct Param {
    pub name: &'static str,
    pub ty: ParamType,
    pub required: bool,
}

/// Signature of one operation.
#[derive(Clone, Copy, Debug)]
pub struct OpSpec {
    pub name: &'static str,
    pub inputs: &'static [Port],
    pub outputs: &'static [Port],
    pub params: &'static [Param],
    /// Inputs named `<prefix><label>` are accepted in any number.
    pub input_prefix: Option<&'static str>,
}

const fn req(name: &'static str) -> Port {
    Port { name, required: true }
}

const fn opt(name: &'static str) -> Port {
    Port { name, required: false }
}

const fn p(name: &'static str, ty: ParamType) -> Param {
    Param {
        name,
        ty,
        required: false,
    }
}

const fn must(name: &'static str, ty: ParamType) -> Param {
    Param {
        name,
        ty,
        required: true,
    }
}

use ParamType::*;

const FILTER_PARAMS: &[Param] = &[
    must("stages", List),
    p("max_words", Int),
    p("similarity_threshold", Float),
    p("langid_threshold", Float),
    p("align_threshold", Float),
    p("expected_src_lang", Str),
    p("expected_tgt_lang", Str),
    p("subword_vocab_size", Int),
    p("zh_segment_cmd", List),
    p("en_punct_cmd", List),
];

pub const MODEL_PREFIX: &str = "model:";

pub const OPS: &[OpSpec] = &[
    OpSpec {
        name: "corpus.attach",
        inputs: &[req("in"), req("scores")],
        outputs: &[req("out")],
        params: &[],
        input_prefix: None,
    },
    OpSpec {
        name: "preprocess.run",
        inputs: &[req("in"), opt("scores"), opt("config")],
        outputs: &[req("out"), opt("manifest")],
        params: FILTER_PARAMS,
        input_prefix: None,
    },
    OpSpec {
        name: "augment.bit",
        inputs: &[req("in")],
        outputs: &[req("out")],
        params: &[],
        input_prefix: None,
    },
    OpSpec {
        name: "augment.dd",
        inputs: &[req("in"), req("forward"), req("backward")],
        outputs: &[req("out")],
        params: &[],
        input_prefix: None,
    },
    OpSpec {
        name: "augment.sample",
        inputs: &[req("in")],
        outputs: &[req("out")],
        params: &[must("n", Int), p("seed", Int)],
        input_prefix: None,
    },
    OpSpec {
        name: "augment.ft",
        inputs: &[req("mono"), req("translations"), opt("authentic")],
        outputs: &[req("out")],
        params: &[],
        input_prefix: None,
    },
    OpSpec {
        name: "augment.bt_tag",
        inputs: &[req("in")],
        outputs: &[req("out")],
        params: &[p("tag", Str)],
        input_prefix: None,
    },
    OpSpec {
        name: "augment.bt_untag",
        inputs: &[req("in")],
        outputs: &[req("out")],
        params: &[p("tag", Str)],
        input_prefix: None,
    },
    OpSpec {
        name: "augment.at_schedule",
        inputs: &[],
        outputs: &[req("out")],
        params: &[
            must("total_steps", Int),
            must("synthetic", Int),
            must("authentic", Int),
            p("start", Str),
        ],
        input_prefix: None,
    },
    OpSpec {
        name: "augment.tel",
        inputs: &[req("sources")],
        outputs: &[req("out")],
        params: &[],
        input_prefix: Some(MODEL_PREFIX),
    },
    OpSpec {
        name: "curriculum.score",
        inputs: &[req("in"), opt("scores")],
        outputs: &[req("out")],
        params: &[p("buckets", Int)],
        input_prefix: None,
    },
    OpSpec {
        name: "curriculum.sample",
        inputs: &[req("in"), req("plan")],
        outputs: &[req("out")],
        params: &[must("steps", Int)],
        input_prefix: None,
    },
    OpSpec {
        name: "llm_data.pack",
        inputs: &[req("in")],
        outputs: &[req("out")],
        params: &[p("cap", Int), p("unit", Str)],
        input_prefix: None,
    },
    OpSpec {
        name: "llm_data.sft",
        inputs: &[req("in"), opt("template")],
        outputs: &[req("out"), opt("rendered")],
        params: &[p("threshold", Float), p("src_lang", Str), p("tgt_lang", Str)],
        input_prefix: None,
    },
    OpSpec {
        name: "llm_data.cpo",
        inputs: &[req("in"), req("nbest")],
        outputs: &[req("out")],
        params: &[p("n", Int)],
        input_prefix: None,
    },
    OpSpec {
        name: "mbr.select",
        inputs: &[req("hyps"), opt("matrix"), opt("sources")],
        outputs: &[req("out")],
        params: &[p("utility", Str), p("multiplicity", Bool)],
        input_prefix: None,
    },
    OpSpec {
        name: "dnt.mask",
        inputs: &[req("in"), opt("patterns")],
        outputs: &[req("out"), req("slots")],
        params: &[],
        input_prefix: None,
    },
    OpSpec {
        name: "dnt.unmask",
        inputs: &[req("in"), req("slots")],
        outputs: &[req("out")],
        params: &[],
        input_prefix: None,
    },
    OpSpec {
        name: "metrics.chrf",
        inputs: &[req("hyp"), req("ref")],
        outputs: &[opt("out")],
        params: &[p("order", Int), p("beta", Float)],
        input_prefix: None,
    },
    OpSpec {
        name: "metrics.bleu",
        inputs: &[req("hyp"), req("ref")],
        outputs: &[opt("out")],
        params: &[p("order", Int), p("tokenize", Str), p("corpus", Bool)],
        input_prefix: None,
    },
];

pub fn find_op(name: &str) -> Option<&'static OpSpec> {
    OPS.iter().find(|o| o.name == name)
}

/// One invocation: operation name, named paths and parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageIo {
    pub op: String,
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
    #[serde(default)]
    pub params: toml::Table,
}

impl StageIo {
    pub fn new(op: &str) -> Self {
        StageIo {
            op: op.to_string(),
            ..Default::default()
        }
    }

    pub fn input(mut self, name: &str, path: impl Into<String>) -> Self {
        self.inputs.insert(name.to_string(), path.into());
        self
    }

    pub fn output(mut self, name: &str, path: impl Into<String>) -> Self {
        self.outputs.insert(name.to_string(), path.into());
        self
    }

    pub fn param(mut self, name: &str, value: impl Into<toml::Value>) -> Self {
        self.params.insert(name.to_string(), value.into());
        self
    }

    fn path(&self, name: &str) -> Option<&str> {
        self.inputs
            .get(name)
            .or_else(|| self.outputs.get(name))
            .map(String::as_str)
    }

    fn need(&self, name: &str) -> Result<&str> {
        self.path(name)
            .ok_or_else(|| Error::Invalid(format!("{}: `{name}` path is required", self.op)))
    }
}

/// Problems with one invocation, found without reading any data.
pub fn validate_stage(io: &StageIo) -> Vec<String> {
    let Some(spec) = find_op(&io.op) else {
        let known: Vec<&str> = OPS.iter().map(|o| o.name).collect();
        return vec![format!("unknown operation `{}` (known: {})", io.op, known.join(", "))];
    };
    let mut out = Vec::new();
    for (ports, given, what) in [
        (spec.inputs, &io.inputs, "input"),
        (spec.outputs, &io.outputs, "output"),
    ] {
        for port in ports.iter().filter(|p| p.required) {
            if !given.contains_key(port.name) {
                out.push(format!("missing {what} `{}`", port.name));
            }
        }
        for (name, path) in given {
            let prefixed = what == "input" && spec.input_prefix.is_some_and(|pre| name.starts_with(pre));
            if !prefixed && !ports.iter().any(|p| p.name == name) {
                out.push(format!("unknown {what} `{name}`"));
            }
            if path.is_empty() {
                out.push(format!("{what} `{name}` has an empty path"));
            }
        }
    }
    if let Some(pre) = spec.input_prefix {
        if !io.inputs.keys().any(|k| k.starts_with(pre) && k.len() > pre.len()) {
            out.push(format!("at least one `{pre}<name>` input is required"));
        }
    }
    for param in spec.params.iter().filter(|p| p.required) {
        if !io.params.contains_key(param.name) {
            out.push(format!("missing parameter `{}`", param.name));
        }
    }
    for (name, value) in &io.params {
        match spec.params.iter().find(|p| p.name == name) {
            None => out.push(format!("unknown parameter `{name}`")),
            Some(p) if !p.ty.accepts(value) => out.push(format!("parameter `{name}` must be {}", p.ty.describe())),
            Some(_) => {}
        }
    }
    if out.is_empty() {
        out.extend(check_values(io));
    }
    out
}

/// Parameter values that type-check but cannot be valid.
fn check_values(io: &StageIo) -> Vec<String> {
    let prm = Params(&io.params);
    let mut out = Vec::new();
    let mut check = |r: std::result::Result<(), String>| {
        if let Err(e) = r {
            out.push(e);
        }
    };
    match io.op.as_str() {
        "preprocess.run" => {
            let stages = prm.list("stages").unwrap_or_default().join(",");
            check(Stage::parse_list(&stages).map(|_| ()).map_err(|e| e.to_string()));
            if io.inputs.contains_key("config") && io.params.len() > 1 {
                check(Err(
                    "filter settings come from either the `config` input or parameters, not both".into(),
                ));
            }
        }
        "augment.at_schedule" => {
            if let Some(s) = prm.str("start") {
                check(PhaseKind::from_str(s).map(|_| ()));
            }
        }
        "llm_data.pack" => {
            if let Some(u) = prm.str("unit") {
                check(CapUnit::from_str(u).map(|_| ()));
            }
            if prm.int("cap") == Some(0) {
                check(Err("cap must be at least 1".into()));
            }
        }
        "llm_data.sft" => {
            if let Some(t) = prm.float("threshold") {
                if !(0.0..=1.0).contains(&t) {
                    check(Err(format!("threshold {t} is outside [0, 1]")));
                }
            }
        }
        "mbr.select" => {
            if let Some(u) = prm.str("utility") {
                check(NamedUtility::from_str(u).map(|_| ()).map_err(|e| e.to_string()));
            }
        }
        "metrics.bleu" => {
            if let Some(t) = prm.str("tokenize") {
                check(Tokenize::from_str(t).map(|_| ()));
            }
        }
        _ => {}
    }
    for name in ["buckets", "order", "steps"] {
        if prm.int(name) == Some(0) {
            out.push(format!("parameter `{name}` must be at least 1"));
        }
    }
    out
}

struct Params<'a>(&'a toml::Table);

impl Params<'_> {
    fn int(&self, name: &str) -> Option<u64> {
        self.0
            .get(name)
            .and_then(toml::Value::as_integer)
            .map(|i| i.max(0) as u64)
    }

    fn usize(&self, name: &str) -> Option<usize> {
        self.int(name).map(|i| i as usize)
    }

    fn float(&self, name: &str) -> Option<f64> {
        match self.0.get(name)? {
            toml::Value::Float(f) => Some(*f),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn bool(&self, name: &str) -> Option<bool> {
        self.0.get(name).and_then(toml::Value::as_bool)
    }

    fn str(&self, name: &str) -> Option<&str> {
        self.0.get(name).and_then(toml::Value::as_str)
    }

    fn list(&self, name: &str) -> Option<Vec<String>> {
        match self.0.get(name)? {
            toml::Value::String(s) => Some(
                s.split(',')
                    .map(str::trim)
                    .filter(|x| !x.is_empty())
                    .map(String::from)
                    .collect(),
            ),
            toml::Value::Array(a) => Some(a.iter().filter_map(|v| v.as_str().map(String::from)).collect()),
            _ => None,
        }
    }
}

/// Settings that apply to a whole run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunContext {
    pub exec: Exec,
    /// Seed for operations that draw random numbers and have no seed of
    /// their own.
    pub seed: u64,
}

impl Default for RunContext {
    fn default() -> Self {
        RunContext {
            exec: Exec::Parallel,
            seed: 0,
        }
    }
}

/// What one operation did.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub op: String,
    pub counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<CorpusManifest>,
}

impl StageReport {
    fn new(op: &str) -> Self {
        StageReport {
            op: op.to_string(),
            ..Default::default()
        }
    }

    fn count(&mut self, key: &str, n: usize) -> &mut Self {
        self.counts.insert(key.to_string(), n);
        self
    }

    fn warn_if(&mut self, n: usize, message: impl FnOnce(usize) -> String) {
        if n > 0 {
            self.warnings.push(message(n));
        }
    }
}

/// Validates and runs one operation.
pub fn run_op(io: &StageIo, ctx: &RunContext) -> Result<StageReport> {
    let problems = validate_stage(io);
    if !problems.is_empty() {
        return Err(Error::Invalid(format!("{}: {}", io.op, problems.join("; "))));
    }
    let prm = Params(&io.params);
    let mut rep = StageReport::new(&io.op);
    match io.op.as_str() {
        "corpus.attach" => {
            let pairs = read_pairs(io.need("in")?)?;
            let (pairs, ar) = attach_scores(pairs, read_scores(io.need("scores")?)?)?;
            write_pairs(io.need("out")?, &pairs)?;
            rep.count("pairs", pairs.len())
                .count("attached", ar.attached)
                .count("orphans", ar.orphans);
            rep.warn_if(ar.orphans, |n| format!("{n} score records reference unknown ids"));
        }
        "preprocess.run" => {
            let cfg = match io.inputs.get("config") {
                Some(path) => FilterConfig::from_toml(&read_text(path)?)?,
                None => {
                    let mut table = io.params.clone();
                    table.remove("stages");
                    let cfg: FilterConfig = toml::Value::Table(table)
                        .try_into()
                        .map_err(|e: toml::de::Error| preprocess::PreprocessError::Config(e.to_string()))?;
                    cfg.validate()?;
                    cfg
                }
            };
            let stages = Stage::parse_list(&prm.list("stages").unwrap_or_default().join(","))?;
            let (pairs, orphans) = load_scored(io)?;
            let (clean, mut manifest) = preprocess::run_chain(pairs, &cfg, &stages, ctx.exec)?;
            manifest.count_origins(&clean);
            if orphans > 0 {
                manifest.bump("orphan_scores", orphans);
            }
            write_pairs(io.need("out")?, &clean)?;
            if let Some(path) = io.outputs.get("manifest") {
                write_json(path, &manifest)?;
            }
            rep.count("in", manifest.stages.first().map_or(clean.len(), |s| s.input))
                .count("out", clean.len());
            for (k, v) in &manifest.counters {
                rep.warn_if(*v, |n| format!("{k}: {n}"));
            }
            rep.manifest = Some(manifest);
        }
        "augment.bit" => {
            let pairs = read_pairs(io.need("in")?)?;
            let n = pairs.len();
            let out = augment::bit_reconstruct(pairs);
            write_pairs(io.need("out")?, &out)?;
            rep.count("in", n).count("out", out.len());
        }
        "augment.dd" => {
            let pairs = read_pairs(io.need("in")?)?;
            let n = pairs.len();
            let fwd = batch_from(io.need("forward")?, "forward")?;
            let bwd = batch_from(io.need("backward")?, "backward")?;
            let (out, dd) = augment::dd_merge(pairs, &fwd, &bwd)?;
            write_pairs(io.need("out")?, &out)?;
            rep.count("in", n)
                .count("out", out.len())
                .count("forward_added", dd.forward_added)
                .count("backward_added", dd.backward_added)
                .count("duplicates_dropped", dd.duplicates_dropped);
        }
        "augment.sample" => {
            let n = prm.usize("n").unwrap_or(0);
            let seed = prm.int("seed").unwrap_or(ctx.seed);
            let reader = corpus::read_corpus::<corpus::MonolingualRecord>(io.need("in")?)?;
            let mut seen = 0usize;
            let mut failure = None;
            let sample = augment::mono_sample(
                reader.map_while(|r| match r {
                    Ok(r) => {
                        seen += 1;
                        Some(r)
                    }
                    Err(e) => {
                        failure = Some(e);
                        None
                    }
                }),
                n,
                seed,
            );
            if let Some(e) = failure {
                return Err(e.into());
            }
            write_out(io.need("out")?, &sample)?;
            rep.count("in", seen).count("out", sample.len());
        }
        "augment.ft" => {
            let mono = read_mono(io.need("mono")?, None)?;
            let batch = batch_from(io.need("translations")?, "teacher")?;
            let authentic = match io.inputs.get("authentic") {
                Some(p) => read_pairs(p)?,
                None => Vec::new(),
            };
            let n_auth = authentic.len();
            let out = augment::ft_build(&mono, &batch, authentic)?;
            write_pairs(io.need("out")?, &out)?;
            rep.count("synthetic", mono.len())
                .count("authentic", n_auth)
                .count("out", out.len());
        }
        "augment.bt_tag" | "augment.bt_untag" => {
            let tag = prm.str("tag").unwrap_or(augment::DEFAULT_BT_TAG);
            let pairs = read_pairs(io.need("in")?)?;
            let out = if io.op == "augment.bt_tag" {
                augment::bt_tag(pairs, tag)?
            } else {
                augment::bt_untag(pairs, tag)?
            };
            write_pairs(io.need("out")?, &out)?;
            rep.count("out", out.len());
        }
        "augment.at_schedule" => {
            let start = PhaseKind::from_str(prm.str("start").unwrap_or("synthetic")).map_err(Error::Invalid)?;
            let sched = augment::at_schedule(
                prm.int("total_steps").unwrap_or(0),
                prm.int("synthetic").unwrap_or(0),
                prm.int("authentic").unwrap_or(0),
                start,
            )?;
            write_out(io.need("out")?, &sched.phases)?;
            rep.count("phases", sched.phases.len());
        }
        "augment.tel" => {
            let sources = read_mono(io.need("sources")?, None)?;
            let mut batches = Vec::new();
            for (key, path) in &io.inputs {
                if let Some(model) = key.strip_prefix(MODEL_PREFIX) {
                    batches.push(batch_from(path, model)?);
                }
            }
            let out = augment::tel_build(&sources, &batches)?;
            write_pairs(io.need("out")?, &out)?;
            rep.count("sources", sources.len())
                .count("models", batches.len())
                .count("out", out.len());
        }
        "curriculum.score" => {
            let (pairs, orphans) = load_scored(io)?;
            let inputs = pairs
                .iter()
                .map(|p| {
                    let get = |scorer: &'static str| {
                        p.score(scorer).ok_or_else(|| CurriculumError::MissingScore {
                            id: p.id.clone(),
                            scorer,
                        })
                    };
                    Ok(ScoredInput {
                        pair_id: p.id.clone(),
                        logp_in: get(SCORE_LOGP_IN)?,
                        logp_out: get(SCORE_LOGP_OUT)?,
                        tgt_len: word_count(&p.tgt),
                    })
                })
                .collect::<std::result::Result<Vec<_>, CurriculumError>>()?;
            let items = curriculum::rank_and_bucket(inputs, prm.usize("buckets").unwrap_or(1))?;
            write_out(io.need("out")?, &items)?;
            rep.count("items", items.len());
            rep.warn_if(orphans, |n| format!("{n} score records reference unknown ids"));
        }
        "curriculum.sample" => {
            let items: Vec<curriculum::CurriculumItem> = read_jsonl(io.need("in")?)?;
            let plan_path = io.need("plan")?;
            let plan: SamplingPlan = serde_json::from_str(&read_text(plan_path)?).map_err(|e| Error::Config {
                path: plan_path.to_string(),
                message: e.to_string(),
            })?;
            let steps = prm.int("steps").unwrap_or(0);
            let batches = curriculum::sample_batches(&items, &plan, steps)?;
            let records: Vec<BatchRecord> = batches
                .into_iter()
                .enumerate()
                .map(|(step, ids)| BatchRecord { step: step as u64, ids })
                .collect();
            write_out(io.need("out")?, &records)?;
            rep.count("batches", records.len());
        }
        "llm_data.pack" => {
            let mono = read_mono(io.need("in")?, None)?;
            let n = mono.len();
            let unit = CapUnit::from_str(prm.str("unit").unwrap_or("words")).map_err(Error::Invalid)?;
            let packs = llm_data::pack_cpt(mono, prm.usize("cap").unwrap_or(llm_data::DEFAULT_CAP), unit)?;
            write_out(io.need("out")?, &packs)?;
            let truncated = packs.iter().filter(|p| p.truncated).count();
            rep.count("records", n)
                .count("packs", packs.len())
                .count("truncated", truncated);
            rep.warn_if(truncated, |n| format!("{n} oversize records truncated"));
        }
        "llm_data.sft" => {
            let pairs = read_pairs(io.need("in")?)?;
            let n = pairs.len();
            let threshold = prm.float("threshold").unwrap_or(llm_data::DEFAULT_SFT_THRESHOLD);
            let sft = llm_data::filter_sft(pairs, threshold, ctx.exec);
            write_pairs(io.need("out")?, &sft.kept)?;
            if let Some(path) = io.outputs.get("rendered") {
                let template = match io.inputs.get("template") {
                    Some(t) => PromptTemplate::parse(TemplateStage::Sft, &read_text(t)?)?,
                    None => PromptTemplate::default_for(TemplateStage::Sft),
                };
                let (sl, tl) = (prm.str("src_lang").unwrap_or("en"), prm.str("tgt_lang").unwrap_or("zh"));
                let rendered = crate::par::try_map(ctx.exec, &sft.kept, |p| {
                    template
                        .render(&RenderFields {
                            src: Some(&p.src),
                            tgt: Some(&p.tgt),
                            src_lang: Some(sl),
                            tgt_lang: Some(tl),
                        })
                        .map(|text| RenderedRecord { id: p.id.clone(), text })
                })?;
                write_out(path, &rendered)?;
            }
            rep.count("in", n)
                .count("out", sft.kept.len())
                .count("missing_score", sft.missing_score);
            rep.warn_if(sft.missing_score, |n| format!("{n} pairs lack a qe score"));
        }
        "llm_data.cpo" => {
            let sources = read_pairs(io.need("in")?)?;
            let hyps = read_hypotheses(io.need("nbest")?)?;
            let (triplets, cr) = llm_data::build_cpo_triplets(&sources, &hyps, prm.usize("n").unwrap_or(10))?;
            write_out(io.need("out")?, &triplets)?;
            rep.count("triplets", triplets.len())
                .count("skipped_identical", cr.skipped_identical)
                .count("skipped_degenerate", cr.skipped_degenerate)
                .count("without_hypotheses", cr.without_hypotheses)
                .count("size_mismatch", cr.size_mismatch)
                .count("unknown_source", cr.unknown_source);
            rep.warn_if(cr.size_mismatch, |n| {
                format!("{n} sources have an unexpected N-best size")
            });
            rep.warn_if(cr.unknown_source, |n| {
                format!("{n} hypotheses reference sources not in the input")
            });
        }
        "mbr.select" => {
            let hyps = read_hypotheses(io.need("hyps")?)?;
            let n_hyps = hyps.len();
            let order: Option<Vec<String>> = match io.inputs.get("sources") {
                Some(p) => Some(read_pairs(p)?.into_iter().map(|p| p.id).collect()),
                None => None,
            };
            let by_mult = prm.bool("multiplicity").unwrap_or(true);
            let named = NamedUtility::from_str(prm.str("utility").unwrap_or("chrf"))?;
            let matrix = match io.inputs.get("matrix") {
                Some(p) => Some(ExternalMatrix::from_entries(read_jsonl::<MatrixEntry>(p)?)?),
                None => None,
            };
            let source = match &matrix {
                Some(m) => UtilitySource::External(m),
                None => UtilitySource::Computed(&named),
            };
            let out = mbr::select_corpus(hyps, order.as_deref(), source, by_mult, ctx.exec)?;
            write_out(io.need("out")?, &out)?;
            rep.count("hypotheses", n_hyps).count("selections", out.len());
        }
        "dnt.mask" => {
            let patterns = match io.inputs.get("patterns") {
                Some(p) => PatternSet::from_toml(&read_text(p)?)?,
                None => PatternSet::default_set(),
            };
            let lines = read_lines(io.need("in")?)?;
            let segs = crate::par::map(ctx.exec, &lines, |l| dnt::mask(l, &patterns));
            let slots: Vec<SlotRecord> = segs
                .into_iter()
                .enumerate()
                .map(|(i, segment)| SlotRecord { line: i + 1, segment })
                .collect();
            write_lines(io.need("out")?, slots.iter().map(|s| s.segment.masked.as_str()))?;
            write_out(io.need("slots")?, &slots)?;
            rep.count("lines", slots.len())
                .count("spans", slots.iter().map(|s| s.segment.slots.len()).sum());
        }
        "dnt.unmask" => {
            let lines = read_lines(io.need("in")?)?;
            let slots: Vec<SlotRecord> = read_jsonl(io.need("slots")?)?;
            let by_line: HashMap<usize, &DntSegment> = slots.iter().map(|s| (s.line, &s.segment)).collect();
            if slots.len() != lines.len() || (1..=lines.len()).any(|i| !by_line.contains_key(&i)) {
                return Err(Error::Invalid(format!(
                    "slots file covers {} lines but the translation has {}",
                    slots.len(),
                    lines.len()
                )));
            }
            let restored: Vec<(String, dnt::UnmaskReport)> = lines
                .iter()
                .enumerate()
                .map(|(i, l)| dnt::unmask(l, by_line[&(i + 1)]))
                .collect();
            write_lines(io.need("out")?, restored.iter().map(|(s, _)| s.as_str()))?;
            let missing = restored.iter().map(|(_, r)| r.missing).sum();
            let duplicated = restored.iter().map(|(_, r)| r.duplicated).sum();
            rep.count("lines", lines.len())
                .count("missing", missing)
                .count("duplicated", duplicated);
            rep.warn_if(missing, |n| {
                format!("{n} placeholders were lost in translation and appended")
            });
        }
        "metrics.chrf" => {
            let (hyps, refs) = parallel_lines(io)?;
            let order = prm.usize("order").unwrap_or(metrics::CHRF_ORDER);
            let beta = prm.float("beta").unwrap_or(metrics::CHRF_BETA);
            let pairs: Vec<(&String, &String)> = hyps.iter().zip(&refs).collect();
            let scores = crate::par::try_map(ctx.exec, &pairs, |(h, r)| metrics::chrf(h, r, order, beta))?;
            write_lines(
                io.outputs.get("out").map_or("-", String::as_str),
                scores.iter().map(|s| format!("{s:.6}")),
            )?;
            rep.count("lines", scores.len());
        }
        "metrics.bleu" => {
            let (hyps, refs) = parallel_lines(io)?;
            let order = prm.usize("order").unwrap_or(4);
            let mode = Tokenize::from_str(prm.str("tokenize").unwrap_or("character")).map_err(Error::Invalid)?;
            let out = io.outputs.get("out").map_or("-", String::as_str);
            let tok = |lines: &[String]| -> Vec<Vec<String>> {
                lines
                    .iter()
                    .map(|l| tokenize(l, mode).into_iter().map(String::from).collect())
                    .collect()
            };
            let (h, r) = (tok(&hyps), tok(&refs));
            if prm.bool("corpus").unwrap_or(false) {
                let score = metrics::corpus_bleu(&h, &r, order)?;
                write_lines(out, std::iter::once(format!("{score:.6}")))?;
            } else {
                let pairs: Vec<(&Vec<String>, &Vec<String>)> = h.iter().zip(&r).collect();
                let scores = crate::par::try_map(ctx.exec, &pairs, |(a, b)| metrics::sentence_bleu(a, b, order))?;
                write_lines(out, scores.iter().map(|s| format!("{s:.6}")))?;
            }
            rep.count("lines", hyps.len());
        }
        other => return Err(Error::Invalid(format!("operation `{other}` has no runner"))),
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub step: u64,
    pub ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderedRecord {
    pub id: String,
    pub text: String,
}

/// Line of a slots file: the masking of line `line` (1-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub line: usize,
    #[serde(flatten)]
    pub segment: DntSegment,
}

fn load_scored(io: &StageIo) -> Result<(Vec<SentencePair>, usize)> {
    let pairs = read_pairs(io.need("in")?)?;
    match io.inputs.get("scores") {
        Some(path) => {
            let (pairs, ar) = attach_scores(pairs, read_scores(path)?)?;
            Ok((pairs, ar.orphans))
        }
        None => Ok((pairs, 0)),
    }
}

fn batch_from(path: &str, fallback_name: &str) -> Result<TranslationBatch> {
    let hyps: Vec<Hypothesis> = read_hypotheses(path)?;
    let name = if fallback_name.is_empty() {
        hyps.first().map_or("", |h| h.system.as_str())
    } else {
        fallback_name
    };
    Ok(TranslationBatch::from_hypotheses(name, hyps)?)
}

fn write_pairs(path: &str, pairs: &[SentencePair]) -> Result<()> {
    write_out(path, pairs)
}

fn write_out<T: Serialize>(path: &str, records: &[T]) -> Result<()> {
    write_records(open_output(path)?, records)?;
    Ok(())
}

fn read_text(path: &str) -> Result<String> {
    if path == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_string(),
        source,
    })
}

/// Lines of a plain-text file without their terminators.
pub fn read_lines(path: &str) -> Result<Vec<String>> {
    Ok(read_text(path)?.lines().map(String::from).collect())
}

fn write_lines<S: AsRef<str>>(path: &str, lines: impl IntoIterator<Item = S>) -> Result<()> {
    let mut w = open_output(path)?;
    let io_err = |source| Error::Io {
        path: path.to_string(),
        source,
    };
    for l in lines {
        w.write_all(l.as_ref().as_bytes()).map_err(io_err)?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads line-delimited JSON of any deserializable type.
pub fn read_jsonl<T: DeserializeOwned>(path: &str) -> Result<Vec<T>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                Error::Corpus(corpus::CorpusError::Malformed {
                    line: i + 1,
                    message: format!("{path}: {e}"),
                })
            })
        })
        .collect()
}

fn parallel_lines(io: &StageIo) -> Result<(Vec<String>, Vec<String>)> {
    let hyps = read_lines(io.need("hyp")?)?;
    let refs = read_lines(io.need("ref")?)?;
    if hyps.len() != refs.len() {
        return Err(Error::Invalid(format!(
            "hypothesis file has {} lines, reference file {}",
            hyps.len(),
            refs.len()
        )));
    }
    Ok((hyps, refs))
}
