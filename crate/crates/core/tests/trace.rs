mod common;

use std::io::BufReader;

use common::*;
use vgd_core::backends::AlignScorer;
use vgd_core::engine::{DecodeTrace, TRACE_VERSION};
use vgd_core::templates::Bindings;
use vgd_core::{DecodeConfig, DecodeOutput, TargetSpec, VgdError};

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/golden_trace.jsonl");

fn golden_run() -> DecodeOutput {
    let toy = toy_small();
    let served = serve(&toy, Via::Toy);
    let target = TargetSpec::image(toy.embed_image(b"fixture:sunset").unwrap()).unwrap();
    let config = DecodeConfig {
        beam_width: 4,
        max_clip_tokens: 8,
        ..Default::default()
    };
    served.decoder.decode(&target, &config, &Bindings::new()).unwrap()
}

/// Set `VGD_BLESS=1` to rewrite the fixture after an intended change.
#[test]
fn golden_trace_is_stable() {
    let out = golden_run();
    let text = out.trace.to_jsonl().unwrap();
    if std::env::var_os("VGD_BLESS").is_some() {
        std::fs::write(GOLDEN, &text).unwrap();
    }
    let want = std::fs::read_to_string(GOLDEN).unwrap();
    assert_eq!(text, want);
    assert_eq!(
        out.best.combined_score,
        out.trace.records.last().unwrap().best_score_so_far
    );
}

#[test]
fn golden_trace_replays() {
    let trace = DecodeTrace::load(GOLDEN).unwrap();
    assert!(trace.records.iter().all(|r| r.trace_version == TRACE_VERSION));
    assert!(trace.replay().unwrap() > 0);
}

#[test]
fn jsonl_round_trip_is_lossless() {
    let out = golden_run();
    let text = out.trace.to_jsonl().unwrap();
    assert_eq!(text.lines().count(), out.trace.records.len());
    let back = DecodeTrace::from_jsonl(BufReader::new(text.as_bytes())).unwrap();
    assert_eq!(back, out.trace);
    assert_eq!(back.to_jsonl().unwrap(), text);
}

#[test]
fn every_recorded_score_recomputes_exactly() {
    for seed in 0..30 {
        let inst = instance(&small_params(8), seed);
        for mode in ["full", "llm-only", "clip-only"] {
            let config = DecodeConfig {
                mode: mode.parse().unwrap(),
                max_clip_tokens: 5,
                alpha: 0.1 + seed as f64 * 0.05,
                ..Default::default()
            };
            let out = inst.decoder.decode(&inst.target, &config, &Bindings::new()).unwrap();
            let text = out.trace.to_jsonl().unwrap();
            let back = DecodeTrace::from_jsonl(BufReader::new(text.as_bytes())).unwrap();
            back.replay().unwrap();
        }
    }
}

#[test]
fn tampered_traces_fail_replay() {
    let mut trace = golden_run().trace;
    let h = &mut trace.records[1].survivors[0];
    h.combined_score = f64::from_bits(h.combined_score.to_bits() + 1);
    assert!(matches!(trace.replay(), Err(VgdError::Trace(_))));

    let mut trace = golden_run().trace;
    trace.records[1].best_score_so_far += 1.0;
    assert!(matches!(trace.replay(), Err(VgdError::Trace(_))));

    let mut trace = golden_run().trace;
    trace.records[1].alpha = 0.5;
    assert!(matches!(trace.replay(), Err(VgdError::Trace(_))));
}

#[test]
fn malformed_jsonl_is_rejected() {
    let bad = "{\"trace_version\":1,\"step\":0}\n";
    assert!(DecodeTrace::from_jsonl(BufReader::new(bad.as_bytes())).is_err());
    let mut text = golden_run().trace.to_jsonl().unwrap();
    text = text.replacen("\"trace_version\":1", "\"trace_version\":9", 1);
    assert!(DecodeTrace::from_jsonl(BufReader::new(text.as_bytes())).is_err());
}
