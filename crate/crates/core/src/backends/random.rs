//! Seeded generator for random toy backends.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::toy::{ToyConfig, MAX_TOY_VOCAB};
use crate::templates::ChatFormat;

const LEXICON: &[&str] = &[
    "sun", "cat", "red", "sky", "tree", "dog", "blue", "sea", "girl", "city", "night", "oil",
    "paint", "moon", "rain", "gold", "forest", "castle", "river", "snow", "robot", "flower",
    "portrait", "sunset", "mountain", "neon", "street", "horse", "glass", "cloud", "fire",
    "garden", "bird", "old", "dark", "bright", "tiny", "huge", "soft", "sharp",
];

const SUFFIXES: &[&str] = &["-lit", ",", "'s", "-like", "."];

#[derive(Debug, Clone, PartialEq)]
pub struct RandomToyParams {
    pub vocab_size: usize,
    pub dim: usize,
    /// Adds an end-of-sequence token the LM can emit.
    pub with_eos: bool,
    /// Makes every third token span several alignment tokens (`sun-lit`, `cat,`).
    pub punctuated: bool,
    /// Share of bigram entries forced to zero probability.
    pub zero_prob_fraction: f64,
    /// Exponent applied to uniform draws; larger values give peakier rows.
    pub peakiness: i32,
}

impl Default for RandomToyParams {
    fn default() -> Self {
        Self {
            vocab_size: 8,
            dim: 6,
            with_eos: false,
            punctuated: false,
            zero_prob_fraction: 0.0,
            peakiness: 2,
        }
    }
}

fn token_name(i: usize, punctuated: bool) -> String {
    let base = if i < LEXICON.len() {
        LEXICON[i].to_string()
    } else {
        format!("w{i}")
    };
    if punctuated && i % 3 == 2 {
        format!("{base}{}", SUFFIXES[(i / 3) % SUFFIXES.len()])
    } else {
        base
    }
}

/// A reproducible toy backend: the same params and seed always give the
/// same config. Fixtures `target` and `target2` hold random image vectors.
pub fn random_toy_config(params: &RandomToyParams, seed: u64) -> ToyConfig {
    assert!((1..=MAX_TOY_VOCAB).contains(&params.vocab_size));
    assert!(params.dim >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.vocab_size;
    let vocab: Vec<String> = (0..n).map(|i| token_name(i, params.punctuated)).collect();
    let unk = n;
    let eos = params.with_eos.then_some(n + 1);
    let total = n + 1 + eos.is_some() as usize;

    let mut bigram_probs = Vec::with_capacity(total);
    for _ in 0..total {
        let mut row = vec![0.0; total];
        for (col, p) in row.iter_mut().enumerate() {
            if col == unk {
                continue;
            }
            let u: f64 = rng.random();
            let zeroed = rng.random::<f64>() < params.zero_prob_fraction;
            if !zeroed {
                *p = u.powi(params.peakiness).max(1e-6);
            }
            if Some(col) == eos {
                *p *= 0.3;
            }
        }
        if row.iter().all(|&p| p == 0.0) {
            row[rng.random_range(0..n)] = 1.0;
        }
        bigram_probs.push(row);
    }

    let mut gaussian = |len: usize| -> Vec<f64> {
        (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let embeddings = (0..n).map(|_| gaussian(params.dim)).collect();
    let empty_text_embedding = gaussian(params.dim);
    let fixtures = BTreeMap::from([
        ("target".to_string(), gaussian(params.dim)),
        ("target2".to_string(), gaussian(params.dim)),
    ]);

    ToyConfig {
        backend_id: format!("toy-random-{seed}"),
        vocab,
        unk_token: Some("<unk>".into()),
        eos_token: params.with_eos.then(|| "</s>".into()),
        banned: vec![],
        bigram_probs,
        embeddings,
        empty_text_embedding,
        fixtures,
        logit_scale: 100.0,
        max_text_tokens: 77,
        max_context: 4096,
        chat_format: ChatFormat::default(),
    }
}
