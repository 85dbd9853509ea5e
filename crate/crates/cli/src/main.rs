use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand};
use mtforge::pipeline::{self, PipelineConfig, RunStatus};
use mtforge::tasks::{self, RunContext, StageIo, StageReport, MODEL_PREFIX};
use mtforge::Exec;

/// Corpus tooling for an MT training and decoding pipeline.
#[derive(Parser, Debug)]
#[command(name = "mtforge", version)]
struct Cli {
    /// Worker threads for record-parallel work; 1 disables parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for operations that sample and have no seed of their own.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Record files and score joins.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Bitext cleaning chain.
    #[command(subcommand)]
    Preprocess(PreprocessCmd),
    /// Synthetic-data assembly.
    #[command(subcommand)]
    Augment(AugmentCmd),
    /// Domain-feature ranking and batch sampling.
    #[command(subcommand)]
    Curriculum(CurriculumCmd),
    /// LLM training data: packing, SFT filtering, CPO triplets.
    #[command(subcommand, name = "llm-data")]
    LlmData(LlmDataCmd),
    /// Minimum Bayes risk selection.
    #[command(subcommand)]
    Mbr(MbrCmd),
    /// Do-not-translate span masking.
    #[command(subcommand)]
    Dnt(DntCmd),
    /// Lexical metrics.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Run a stage chain from a config file.
    Pipeline {
        #[arg(long)]
        config: String,
        /// Overrides the config's worker count.
        #[arg(long)]
        shards: Option<usize>,
        /// Only validate the config.
        #[arg(long)]
        check: bool,
    },
    /// List operations usable in pipeline configs.
    Ops,
}

#[derive(Args, Debug)]
struct InOut {
    #[arg(long = "in", default_value = "-")]
    input: String,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Subcommand, Debug)]
enum CorpusCmd {
    /// Join a score file onto pairs by id.
    Attach {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        scores: String,
    },
}

#[derive(Subcommand, Debug)]
enum PreprocessCmd {
    /// Apply cleaning stages in order.
    Run {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        config: Option<String>,
        #[arg(long)]
        scores: Option<String>,
        #[arg(long)]
        manifest: Option<String>,
        /// Comma-separated: dedup,normwidth,lang,len,align,sim,zhseg,punct
        #[arg(long)]
        stages: String,
    },
}

#[derive(Subcommand, Debug)]
enum AugmentCmd {
    /// Append the reversed copy of every pair.
    Bit {
        #[command(flatten)]
        io: InOut,
    },
    /// Merge forward and backward translations into the original pairs.
    Dd {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        forward: String,
        #[arg(long)]
        backward: String,
    },
    /// Combine translated monolingual sources with authentic pairs.
    Ft {
        #[arg(long)]
        mono: String,
        #[arg(long)]
        translations: String,
        #[arg(long)]
        authentic: Option<String>,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Uniform reservoir sample of monolingual records.
    Sample {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        n: usize,
        /// Defaults to the global --seed.
        #[arg(long = "sample-seed")]
        sample_seed: Option<u64>,
    },
    /// Prefix back-translated sources with a tag.
    BtTag {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        tag: Option<String>,
    },
    /// Remove a back-translation tag.
    BtUntag {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        tag: Option<String>,
    },
    /// Alternating synthetic/authentic phase schedule.
    AtSchedule {
        #[arg(long)]
        total: u64,
        #[arg(long)]
        synthetic: u64,
        #[arg(long)]
        authentic: u64,
        /// synthetic | authentic
        #[arg(long, default_value = "synthetic")]
        start: String,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Pair test sources with every ensemble member's translation.
    Tel {
        #[arg(long)]
        sources: String,
        /// NAME=PATH of one model's hypothesis file; repeatable.
        #[arg(long = "model", required = true)]
        models: Vec<String>,
        #[arg(long, default_value = "-")]
        out: String,
    },
}

#[derive(Subcommand, Debug)]
enum CurriculumCmd {
    /// Compute q for each pair and assign rank buckets.
    Score {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        scores: Option<String>,
        #[arg(long, default_value_t = 1)]
        buckets: usize,
    },
    /// Draw id batches according to a sampling plan.
    Sample {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        plan: String,
        #[arg(long)]
        steps: u64,
    },
}

#[derive(Subcommand, Debug)]
enum LlmDataCmd {
    /// Greedy document packing for continued pre-training.
    Pack {
        #[command(flatten)]
        io: InOut,
        #[arg(long, default_value_t = 4096)]
        cap: usize,
        /// words | characters
        #[arg(long, default_value = "words")]
        unit: String,
    },
    /// QE filter for fine-tuning pairs, optionally rendering prompts.
    Sft {
        #[command(flatten)]
        io: InOut,
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
        #[arg(long)]
        template: Option<String>,
        #[arg(long)]
        rendered: Option<String>,
        #[arg(long, default_value = "en")]
        src_lang: String,
        #[arg(long, default_value = "zh")]
        tgt_lang: String,
    },
    /// Preference triplets from scored N-best lists.
    Cpo {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        nbest: String,
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
}

#[derive(Subcommand, Debug)]
enum MbrCmd {
    /// Select one hypothesis per source.
    Select {
        #[arg(long)]
        hyps: String,
        /// chrf | bleu | bleu-ws | indicator
        #[arg(long, default_value = "chrf")]
        utility: String,
        #[arg(long, default_value = "-")]
        out: String,
        /// External utility matrix (overrides --utility).
        #[arg(long)]
        matrix: Option<String>,
        /// Pair file fixing output order.
        #[arg(long)]
        sources: Option<String>,
        #[arg(long)]
        no_multiplicity: bool,
    },
}

#[derive(Subcommand, Debug)]
enum DntCmd {
    Mask {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        slots: String,
        #[arg(long)]
        patterns: Option<String>,
    },
    Unmask {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        slots: String,
    },
}

#[derive(Subcommand, Debug)]
enum MetricsCmd {
    Chrf {
        #[arg(long)]
        hyp: String,
        #[arg(long = "ref")]
        reference: String,
        #[arg(long, default_value_t = 6)]
        order: usize,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value = "-")]
        out: String,
    },
    Bleu {
        #[arg(long)]
        hyp: String,
        #[arg(long = "ref")]
        reference: String,
        #[arg(long, default_value_t = 4)]
        order: usize,
        /// whitespace | character
        #[arg(long, default_value = "character")]
        tokenize: String,
        #[arg(long)]
        corpus: bool,
        #[arg(long, default_value = "-")]
        out: String,
    },
}

fn io_stage(op: &str, io: InOut) -> StageIo {
    StageIo::new(op).input("in", io.input).output("out", io.out)
}

fn with_opt(s: StageIo, name: &str, v: Option<String>, output: bool) -> StageIo {
    match (v, output) {
        (Some(v), true) => s.output(name, v),
        (Some(v), false) => s.input(name, v),
        (None, _) => s,
    }
}

fn to_int(n: impl TryInto<i64>) -> anyhow::Result<i64> {
    n.try_into().map_err(|_| anyhow::anyhow!("number too large"))
}

fn build(cmd: Command) -> anyhow::Result<StageIo> {
    Ok(match cmd {
        Command::Corpus(CorpusCmd::Attach { io, scores }) => io_stage("corpus.attach", io).input("scores", scores),
        Command::Preprocess(PreprocessCmd::Run {
            io,
            config,
            scores,
            manifest,
            stages,
        }) => {
            let s = io_stage("preprocess.run", io).param("stages", stages);
            let s = with_opt(s, "config", config, false);
            let s = with_opt(s, "scores", scores, false);
            with_opt(s, "manifest", manifest, true)
        }
        Command::Augment(a) => match a {
            AugmentCmd::Bit { io } => io_stage("augment.bit", io),
            AugmentCmd::Dd { io, forward, backward } => io_stage("augment.dd", io)
                .input("forward", forward)
                .input("backward", backward),
            AugmentCmd::Ft {
                mono,
                translations,
                authentic,
                out,
            } => with_opt(
                StageIo::new("augment.ft")
                    .input("mono", mono)
                    .input("translations", translations)
                    .output("out", out),
                "authentic",
                authentic,
                false,
            ),
            AugmentCmd::Sample { io, n, sample_seed } => {
                let s = io_stage("augment.sample", io).param("n", to_int(n)?);
                match sample_seed {
                    Some(seed) => s.param("seed", to_int(seed)?),
                    None => s,
                }
            }
            AugmentCmd::BtTag { io, tag } => {
                let s = io_stage("augment.bt_tag", io);
                match tag {
                    Some(t) => s.param("tag", t),
                    None => s,
                }
            }
            AugmentCmd::BtUntag { io, tag } => {
                let s = io_stage("augment.bt_untag", io);
                match tag {
                    Some(t) => s.param("tag", t),
                    None => s,
                }
            }
            AugmentCmd::AtSchedule {
                total,
                synthetic,
                authentic,
                start,
                out,
            } => StageIo::new("augment.at_schedule")
                .output("out", out)
                .param("total_steps", to_int(total)?)
                .param("synthetic", to_int(synthetic)?)
                .param("authentic", to_int(authentic)?)
                .param("start", start),
            AugmentCmd::Tel { sources, models, out } => {
                let mut s = StageIo::new("augment.tel").input("sources", sources).output("out", out);
                for m in models {
                    let Some((name, path)) = m.split_once('=') else {
                        bail!("--model expects NAME=PATH, got `{m}`");
                    };
                    let key = format!("{MODEL_PREFIX}{name}");
                    if s.inputs.contains_key(&key) {
                        bail!("model `{name}` given twice");
                    }
                    s = s.input(&key, path);
                }
                s
            }
        },
        Command::Curriculum(c) => match c {
            CurriculumCmd::Score { io, scores, buckets } => with_opt(
                io_stage("curriculum.score", io).param("buckets", to_int(buckets)?),
                "scores",
                scores,
                false,
            ),
            CurriculumCmd::Sample { io, plan, steps } => io_stage("curriculum.sample", io)
                .input("plan", plan)
                .param("steps", to_int(steps)?),
        },
        Command::LlmData(l) => match l {
            LlmDataCmd::Pack { io, cap, unit } => io_stage("llm_data.pack", io)
                .param("cap", to_int(cap)?)
                .param("unit", unit),
            LlmDataCmd::Sft {
                io,
                threshold,
                template,
                rendered,
                src_lang,
                tgt_lang,
            } => {
                let s = io_stage("llm_data.sft", io)
                    .param("threshold", threshold)
                    .param("src_lang", src_lang)
                    .param("tgt_lang", tgt_lang);
                let s = with_opt(s, "template", template, false);
                with_opt(s, "rendered", rendered, true)
            }
            LlmDataCmd::Cpo { io, nbest, n } => io_stage("llm_data.cpo", io)
                .input("nbest", nbest)
                .param("n", to_int(n)?),
        },
        Command::Mbr(MbrCmd::Select {
            hyps,
            utility,
            out,
            matrix,
            sources,
            no_multiplicity,
        }) => {
            let s = StageIo::new("mbr.select")
                .input("hyps", hyps)
                .output("out", out)
                .param("utility", utility)
                .param("multiplicity", !no_multiplicity);
            let s = with_opt(s, "matrix", matrix, false);
            with_opt(s, "sources", sources, false)
        }
        Command::Dnt(DntCmd::Mask { io, slots, patterns }) => with_opt(
            io_stage("dnt.mask", io).output("slots", slots),
            "patterns",
            patterns,
            false,
        ),
        Command::Dnt(DntCmd::Unmask { io, slots }) => io_stage("dnt.unmask", io).input("slots", slots),
        Command::Metrics(MetricsCmd::Chrf {
            hyp,
            reference,
            order,
            beta,
            out,
        }) => StageIo::new("metrics.chrf")
            .input("hyp", hyp)
            .input("ref", reference)
            .output("out", out)
            .param("order", to_int(order)?)
            .param("beta", beta),
        Command::Metrics(MetricsCmd::Bleu {
            hyp,
            reference,
            order,
            tokenize,
            corpus,
            out,
        }) => StageIo::new("metrics.bleu")
            .input("hyp", hyp)
            .input("ref", reference)
            .output("out", out)
            .param("order", to_int(order)?)
            .param("tokenize", tokenize)
            .param("corpus", corpus),
        Command::Pipeline { .. } | Command::Ops => unreachable!("handled before build"),
    })
}

fn print_report(rep: &StageReport) {
    let counts: Vec<String> = rep.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("{}: {}", rep.op, counts.join(" "));
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
}

fn run_pipeline(config: &str, shards: Option<usize>, check: bool) -> ExitCode {
    let cfg = match PipelineConfig::load(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if check {
        let diags = pipeline::validate(&cfg);
        for d in &diags {
            eprintln!("error: {d}");
        }
        return ExitCode::from(if diags.is_empty() { 0 } else { 2 });
    }
    let report = pipeline::run_pipeline(&cfg, shards);
    for d in &report.diagnostics {
        eprintln!("error: {d}");
    }
    for s in &report.stages {
        let counts: Vec<String> = s.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        eprintln!("[{}] {} {:.1}ms {}", s.index, s.op, s.duration_ms, counts.join(" "));
        for w in &s.warnings {
            eprintln!("warning: {w}");
        }
        if let Some(e) = &s.error {
            eprintln!("error: stage {} ({}): {e}", s.index, s.op);
        }
    }
    if report.status == RunStatus::Ok && cfg.report.is_none() {
        match serde_json::to_string_pretty(&report) {
            Ok(text) => println!("{text}"),
            Err(e) => eprintln!("error: {e}"),
        }
    }
    ExitCode::from(report.status.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.unwrap_or(0);
    let exec = if threads == 1 || !cfg!(feature = "parallel") {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let stage = match cli.cmd {
        Command::Pipeline { config, shards, check } => return run_pipeline(&config, shards.or(cli.threads), check),
        Command::Ops => {
            for op in tasks::OPS {
                let ports = |ps: &[tasks::Port]| {
                    ps.iter()
                        .map(|p| {
                            if p.required {
                                p.name.to_string()
                            } else {
                                format!("[{}]", p.name)
                            }
                        })
                        .collect::<Vec<_>>()
                        .join(",")
                };
                println!(
                    "{:<22} in: {:<28} out: {}",
                    op.name,
                    ports(op.inputs),
                    ports(op.outputs)
                );
            }
            return ExitCode::SUCCESS;
        }
        cmd => match build(cmd) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
    };
    let problems = tasks::validate_stage(&stage);
    if !problems.is_empty() {
        for p in problems {
            eprintln!("error: {p}");
        }
        return ExitCode::from(2);
    }
    let ctx = RunContext { exec, seed: cli.seed };
    let run = || tasks::run_op(&stage, &ctx);
    let result = if threads > 1 {
        mtforge::par::with_threads(threads, run)
    } else {
        run()
    };
    match result {
        Ok(rep) => {
            print_report(&rep);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}: {e}", stage.op);
            ExitCode::from(1)
        }
    }
}
