use std::io::Cursor;

use mtforge::augment::{ft_build, tel_build, TranslationBatch};
use mtforge::corpus::{
    write_records, Hypothesis, Lang, Method, MonolingualRecord, Origin, RecordReader, SentencePair, System,
};
use mtforge::curriculum::{rank_and_bucket, ScoredInput};
use mtforge::mbr::{select_corpus, ChrfUtility, ExternalMatrix, MatrixEntry, UtilitySource};
use mtforge::pipeline::{run_pipeline, validate, PipelineConfig, RunStatus};
use mtforge::preprocess::{run_chain, FilterConfig, Stage};
use mtforge::tasks::StageIo;
use mtforge::Exec;
use proptest::prelude::*;

fn arb_pair() -> impl Strategy<Value = SentencePair> {
    (
        "[a-z0-9]{1,8}",
        "\\PC{0,12}x\\PC{0,12}",
        "\\PC{0,12}字\\PC{0,12}",
        prop::sample::select(Origin::ALL.to_vec()),
        prop::collection::btree_map("[a-z_]{1,6}", 0.0f64..1.0, 0..3),
    )
        .prop_map(|(id, src, tgt, origin, scores)| {
            let mut p = SentencePair::new(id, src, tgt).with_origin(origin);
            p.scores = scores;
            p
        })
}

proptest! {
    #[test]
    fn corpus_round_trip(pairs in prop::collection::vec(arb_pair(), 0..12)) {
        let mut seen = std::collections::HashSet::new();
        let pairs: Vec<SentencePair> = pairs.into_iter().filter(|p| seen.insert(p.id.clone())).collect();
        let mut buf = Vec::new();
        write_records(&mut buf, &pairs).unwrap();
        let back: Vec<SentencePair> = RecordReader::new(Cursor::new(&buf)).collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(&back, &pairs);
        let mut again = Vec::new();
        write_records(&mut again, &back).unwrap();
        prop_assert_eq!(again, buf);
    }
}

#[test]
fn chain_composes_dedup_and_length() {
    let long = vec!["w"; 151].join(" ");
    let pairs = vec![
        SentencePair::new("1", "a b", "甲"),
        SentencePair::new("2", "a b", "甲"),
        SentencePair::new("3", long, "乙"),
    ];
    let (out, manifest) = run_chain(
        pairs,
        &FilterConfig::default(),
        &[Stage::Dedup, Stage::Length],
        Exec::Sequential,
    )
    .unwrap();
    assert_eq!(out.len(), 1);
    let counts: Vec<_> = manifest
        .stages
        .iter()
        .map(|s| (s.stage.as_str(), s.input, s.output))
        .collect();
    assert_eq!(counts, [("dedup", 3, 2), ("filter_length", 2, 1)]);
}

#[test]
fn rank_and_bucket_splits_by_q() {
    // q = [1.0, 0.0, -1.0, 0.5] with tgt_len 1
    let items = [
        ("a", -1.0, -2.0),
        ("b", -3.0, -3.0),
        ("c", -4.0, -3.0),
        ("d", -1.5, -2.0),
    ]
    .map(|(id, i, o)| ScoredInput {
        pair_id: id.into(),
        logp_in: i,
        logp_out: o,
        tgt_len: 1,
    })
    .to_vec();
    let ranked = rank_and_bucket(items, 2).unwrap();
    let buckets: Vec<_> = ranked.iter().map(|c| (c.pair_id.as_str(), c.bucket)).collect();
    assert_eq!(buckets, [("a", 0), ("d", 0), ("b", 1), ("c", 1)]);
}

#[test]
fn external_matrix_overrides_chrf() {
    // chrF prefers the "abc" pair, the matrix row means prefer "xyz"
    let hyps: Vec<Hypothesis> = ["abc", "abd", "xyz"]
        .iter()
        .map(|t| Hypothesis::new("s1", System::Nmt, Method::Beam, *t))
        .collect();
    let chrf = select_corpus(
        hyps.clone(),
        None,
        UtilitySource::Computed(&ChrfUtility),
        true,
        Exec::Sequential,
    )
    .unwrap();
    assert_ne!(chrf[0].text, "xyz");

    let rows = [[1.0, 0.1, 0.1], [0.1, 1.0, 0.1], [0.9, 0.9, 1.0]];
    let entries = (0..3).flat_map(|h| {
        (0..3).map(move |r| MatrixEntry {
            src_id: "s1".into(),
            hyp_index: h,
            ref_index: r,
            value: rows[h][r],
        })
    });
    let m = ExternalMatrix::from_entries(entries).unwrap();
    let sel = select_corpus(hyps.clone(), None, UtilitySource::External(&m), true, Exec::Sequential).unwrap();
    assert_eq!(sel[0].text, "xyz");
    assert!((sel[0].expected_utility - 2.8 / 3.0).abs() < 1e-12);

    let partial = ExternalMatrix::from_entries(vec![MatrixEntry {
        src_id: "s1".into(),
        hyp_index: 0,
        ref_index: 0,
        value: 1.0,
    }])
    .unwrap();
    let err = select_corpus(hyps, None, UtilitySource::External(&partial), true, Exec::Sequential).unwrap_err();
    assert!(err.to_string().contains("s1"), "{err}");
}

#[test]
fn synthetic_builders_keep_source_text() {
    let mono: Vec<_> = ["one", "two", "three"]
        .iter()
        .enumerate()
        .map(|(i, t)| MonolingualRecord::new(format!("m{i}"), *t, Lang::En))
        .collect();
    let mut batch = TranslationBatch::new("teacher", Method::Beam);
    for (i, t) in ["一", "二", "三"].iter().enumerate() {
        batch.push(format!("m{i}"), *t);
    }
    let authentic = vec![SentencePair::new("a1", "x", "甲"), SentencePair::new("a2", "y", "乙")];
    let ft = ft_build(&mono, &batch, authentic).unwrap();
    assert_eq!(ft.len(), 5);
    assert_eq!(ft.iter().filter(|p| p.origin == Origin::ForwardSynthetic).count(), 3);
    for (rec, pair) in mono.iter().zip(&ft) {
        assert_eq!(rec.text, pair.src);
    }

    let mut other = TranslationBatch::new("student", Method::Sampled);
    for i in 0..3 {
        other.push(format!("m{i}"), "译");
    }
    let tel = tel_build(&mono, &[batch, other]).unwrap();
    assert_eq!(tel.len(), 6);
    for (k, pair) in tel.iter().enumerate() {
        assert_eq!(pair.src, mono[k / 2].text);
        assert_eq!(pair.origin, Origin::TelSynthetic);
    }
}

fn write_pairs(path: &std::path::Path, n: usize) {
    use std::fmt::Write as _;
    let mut s = String::new();
    for i in 0..n {
        let src = if i == 9 {
            "sentence 8".to_string()
        } else {
            format!("sentence {i}")
        };
        let tgt = if i == 9 { "句8".to_string() } else { format!("句{i}") };
        let qe = [0.9, 0.5][i % 2];
        let line = serde_json::json!({"id": format!("p{i}"), "src": src, "tgt": tgt, "scores": {"qe": qe}});
        writeln!(s, "{line}").unwrap();
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn two_stage_pipeline_telescopes() {
    let dir = tempfile::tempdir().unwrap();
    write_pairs(&dir.path().join("pairs.jsonl"), 10);
    let text = r#"
        seed = 7
        report = "out/report.json"

        [[stage]]
        op = "preprocess.run"
        inputs = { in = "pairs.jsonl" }
        outputs = { out = "out/clean.jsonl", manifest = "out/manifest.json" }
        params = { stages = "dedup,len" }

        [[stage]]
        op = "llm_data.sft"
        inputs = { in = "out/clean.jsonl" }
        outputs = { out = "out/sft.jsonl" }
    "#;
    let cfg_path = dir.path().join("pipeline.toml");
    std::fs::write(&cfg_path, text).unwrap();
    let cfg = PipelineConfig::load(cfg_path.to_str().unwrap()).unwrap();
    assert!(validate(&cfg).is_empty());

    let report = run_pipeline(&cfg, Some(2));
    assert_eq!(report.status, RunStatus::Ok, "{report:?}");
    assert_eq!(report.stages.len(), 2);
    let (pre, sft) = (&report.stages[0].counts, &report.stages[1].counts);
    assert_eq!((pre["in"], pre["out"]), (10, 9));
    // p0..p8 survive; even ids carry qe 0.9
    assert_eq!((sft["in"], sft["out"]), (9, 5));
    assert!(dir.path().join("out/report.json").exists());
    let kept = std::fs::read_to_string(dir.path().join("out/sft.jsonl")).unwrap();
    assert_eq!(kept.lines().count(), 5);
}

#[test]
fn validation_diagnostics() {
    let empty = PipelineConfig::from_toml("seed = 1").unwrap();
    let d = validate(&empty);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].message, "empty pipeline");
    assert_eq!(run_pipeline(&empty, Some(1)).status.exit_code(), 2);

    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pairs.jsonl");
    write_pairs(&input, 3);
    let i = input.to_str().unwrap();
    let out = dir.path().join("o.jsonl");
    let o = out.to_str().unwrap();

    let unknown = PipelineConfig {
        seed: 1,
        report: None,
        shards: None,
        stages: vec![
            StageIo::new("augment.bit").input("in", i).output("out", o),
            StageIo::new("augment.nope").input("in", i).output("out", "x.jsonl"),
        ],
    };
    let d = validate(&unknown);
    assert_eq!(d.len(), 1, "{d:?}");
    assert_eq!(d[0].stage, Some(1));

    let clash = PipelineConfig {
        stages: vec![
            StageIo::new("augment.bit").input("in", i).output("out", o),
            StageIo::new("augment.bit").input("in", i).output("out", o),
        ],
        ..unknown.clone()
    };
    let d = validate(&clash);
    assert_eq!(d.len(), 1, "{d:?}");
    assert!(d[0].message.contains("stages 0 and 1"), "{}", d[0]);

    let missing = PipelineConfig {
        stages: vec![StageIo::new("augment.bit")
            .input("in", "/no/such/file.jsonl")
            .output("out", o)],
        ..unknown
    };
    let d = validate(&missing);
    assert!(d[0].message.contains("/no/such/file.jsonl"), "{}", d[0]);
}
