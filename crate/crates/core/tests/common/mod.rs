#![allow(dead_code)]

pub mod mock_gateway;

use std::collections::BTreeSet;

use vgd_core::backends::random::{random_toy_config, RandomToyParams};
use vgd_core::backends::{AlignScorer, GatewayClient, InitIndex, LmScorer, ScorerSession, ToyBackend};
use vgd_core::score::{target_alignment, Objective};
use vgd_core::templates::Bindings;
use vgd_core::{DecodeConfig, Decoder, Mode, TargetSpec};

use mock_gateway::MockGateway;

pub const TOY_SMALL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/toy_small.json");

pub fn toy_small() -> ToyBackend {
    ToyBackend::load(TOY_SMALL).unwrap()
}

/// How the engine reaches the scorers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Via {
    Toy,
    Gateway,
}

pub const BOTH: [Via; 2] = [Via::Toy, Via::Gateway];

/// A decoder over `toy`, either in-process or through a mock gateway. The
/// init cache is built through the same scorer the engine uses.
pub struct Served {
    pub decoder: Decoder,
    pub gateway: Option<MockGateway>,
}

pub fn serve(toy: &ToyBackend, via: Via) -> Served {
    let (session, gateway) = match via {
        Via::Toy => (ScorerSession::from_backend(toy.clone()), None),
        Via::Gateway => {
            let gw = MockGateway::start(toy.clone());
            let client = GatewayClient::connect(&gw.url).unwrap();
            (ScorerSession::from_backend(client), Some(gw))
        }
    };
    let index = InitIndex::build(session.align.as_ref(), toy.backend_id(), &toy.vocabulary()).unwrap();
    Served {
        decoder: Decoder::new(session).with_init_index(index),
        gateway,
    }
}

/// A random toy instance ready to decode.
pub struct Instance {
    pub toy: ToyBackend,
    pub decoder: Decoder,
    pub target: TargetSpec,
    pub gateway: Option<MockGateway>,
}

pub fn instance(params: &RandomToyParams, seed: u64) -> Instance {
    instance_via(params, seed, Via::Toy)
}

pub fn instance_via(params: &RandomToyParams, seed: u64, via: Via) -> Instance {
    let toy = ToyBackend::from_config(random_toy_config(params, seed)).unwrap();
    let target = TargetSpec::image(toy.embed_image(b"fixture:target").unwrap()).unwrap();
    let Served { decoder, gateway } = serve(&toy, via);
    Instance {
        toy,
        decoder,
        target,
        gateway,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBest {
    pub score: f64,
    pub text: String,
    pub ids: Vec<u32>,
}

/// Best vocabulary token for the target by embedding each token on its own.
pub fn scan_top_tokens(toy: &ToyBackend, target: &TargetSpec, scale: f64, m: usize) -> Vec<String> {
    let mut scored: Vec<(f64, u32, String)> = toy
        .vocabulary()
        .entries()
        .iter()
        .map(|(id, s)| {
            let e = toy.embed_text(std::slice::from_ref(s)).unwrap().remove(0);
            (target_alignment(&e, target, scale).unwrap(), *id, s.clone())
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(m).map(|(_, _, s)| s).collect()
}

struct Scored {
    ids: Vec<u32>,
    text: String,
    lm: f64,
    score: f64,
}

fn oracle_setup(inst: &Instance, config: &DecodeConfig) -> (Vec<u32>, Vec<u32>, BTreeSet<u32>) {
    let toy = &inst.toy;
    let context = inst.decoder.render_context(config, &Bindings::new()).unwrap();
    let m = if config.mode == Mode::LlmOnly { 0 } else { config.init_tokens };
    let ranked = scan_top_tokens(toy, &inst.target, config.logit_scale, usize::MAX);
    let mut words: Vec<String> = Vec::new();
    for w in ranked {
        if words.len() == m {
            break;
        }
        let mut trial = words.clone();
        trial.push(w);
        if toy.count_tokens(&[trial.join(" ")]).unwrap()[0] <= config.max_clip_tokens {
            words = trial;
        }
    }
    let prefix = toy.tokenize(&words.join(" ")).unwrap();
    let mut banned: BTreeSet<u32> = toy.banned_token_ids();
    banned.extend(config.banned_token_ids.iter().copied());
    if let Some(e) = toy.eos_token_id() {
        banned.insert(e);
    }
    (context, prefix, banned)
}

fn score_seq(inst: &Instance, config: &DecodeConfig, ids: Vec<u32>, lm: f64) -> Option<Scored> {
    let toy = &inst.toy;
    let text = toy.detokenize(&ids).unwrap();
    if toy.count_tokens(std::slice::from_ref(&text)).unwrap()[0] > config.max_clip_tokens {
        return None;
    }
    let emb = toy.embed_text(std::slice::from_ref(&text)).unwrap().remove(0);
    let align = target_alignment(&emb, &inst.target, config.logit_scale).unwrap();
    let score = Objective::new(config.alpha, config.mode).score(align, lm).unwrap();
    Some(Scored { ids, text, lm, score })
}

/// Exhaustive search that follows the engine's stopping rule: sequences are
/// enumerated one length at a time and the walk stops at the first length
/// whose best score does not beat every shorter one. Meaningful when the
/// beam is wide enough to hold every sequence of a length and every token
/// costs one alignment token.
pub fn layered_oracle(inst: &Instance, config: &DecodeConfig) -> OracleBest {
    let toy = &inst.toy;
    let (context, prefix, banned) = oracle_setup(inst, config);
    let root = score_seq(inst, config, prefix, 0.0).expect("prefix fits the budget");
    let mut best = OracleBest {
        score: root.score,
        text: root.text.clone(),
        ids: root.ids.clone(),
    };
    let mut layer = vec![root];
    loop {
        let mut next = Vec::new();
        for parent in &layer {
            let mut ctx = context.clone();
            ctx.extend_from_slice(&parent.ids);
            for cand in toy.next_logprobs(&ctx, toy.vocab_size(), &banned).unwrap() {
                let mut ids = parent.ids.clone();
                ids.push(cand.id);
                next.extend(score_seq(inst, config, ids, parent.lm + cand.logprob));
            }
        }
        let Some(top) = next.iter().max_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then(b.ids.last().cmp(&a.ids.last()))
                .then(b.ids.cmp(&a.ids))
        }) else {
            return best;
        };
        if top.score <= best.score {
            return best;
        }
        best = OracleBest {
            score: top.score,
            text: top.text.clone(),
            ids: top.ids.clone(),
        };
        layer = next;
    }
}

/// Exhaustive maximum of `align + alpha * sum(logprob)` over every
/// continuation of the init prefix whose alignment length stays within the
/// budget, the empty continuation included.
pub fn brute_force_best(inst: &Instance, config: &DecodeConfig) -> OracleBest {
    let toy = &inst.toy;
    let (context, prefix, banned) = oracle_setup(inst, config);
    let mut best: Option<OracleBest> = None;
    // depth-first; the LM sum is accumulated left to right
    let mut stack: Vec<(Vec<u32>, f64)> = vec![(prefix, 0.0)];
    while let Some((ids, lm)) = stack.pop() {
        let Some(s) = score_seq(inst, config, ids, lm) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| s.score > b.score) {
            best = Some(OracleBest {
                score: s.score,
                text: s.text.clone(),
                ids: s.ids.clone(),
            });
        }
        let mut ctx = context.clone();
        ctx.extend_from_slice(&s.ids);
        for cand in toy.next_logprobs(&ctx, toy.vocab_size(), &banned).unwrap() {
            let mut child = s.ids.clone();
            child.push(cand.id);
            stack.push((child, s.lm + cand.logprob));
        }
    }
    best.unwrap()
}

pub fn small_params(vocab_size: usize) -> RandomToyParams {
    RandomToyParams {
        vocab_size,
        dim: 6,
        ..Default::default()
    }
}
