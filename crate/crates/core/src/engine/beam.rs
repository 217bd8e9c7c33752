use std::collections::{BTreeSet, HashMap};

use crate::backends::{InitIndex, ScorerSession};
use crate::config::{DecodeConfig, Mode};
use crate::error::{Result, VgdError};
use crate::hypothesis::{rank_cmp, Hypothesis};
use crate::score::{target_alignment, Objective};
use crate::target::TargetSpec;

/// Everything a search step needs besides the beam state.
pub struct SearchContext<'a> {
    pub session: &'a ScorerSession,
    pub target: &'a TargetSpec,
    pub config: &'a DecodeConfig,
    pub objective: Objective,
    /// Rendered chat template ids; hypothesis ids are appended to these.
    pub context_ids: &'a [u32],
    /// Ids never appended. Does not contain EOS.
    pub banned: &'a BTreeSet<u32>,
}

impl SearchContext<'_> {
    fn scale(&self) -> f64 {
        self.config.logit_scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamState {
    pub step: usize,
    /// Live beams, best first, at most K.
    pub beams: Vec<Hypothesis>,
    pub terminated_pool: Vec<Hypothesis>,
    pub best_score_so_far: f64,
}

impl BeamState {
    pub fn new(initial: Hypothesis) -> Self {
        Self {
            step: 0,
            best_score_so_far: initial.combined_score,
            beams: vec![initial],
            terminated_pool: Vec::new(),
        }
    }

    /// Moves a live beam into the terminated pool.
    pub fn terminate(&mut self, beam: usize) {
        let mut h = self.beams[beam].clone();
        h.terminated = true;
        self.terminated_pool.push(h);
    }

    /// Highest-ranked hypothesis over live beams and the terminated pool.
    pub fn best(&self) -> Option<&Hypothesis> {
        self.beams
            .iter()
            .chain(&self.terminated_pool)
            .min_by(|a, b| rank_cmp(a, b))
    }
}

/// A child of a live beam before alignment scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub parent: usize,
    pub lm_token_ids: Vec<u32>,
    pub text: String,
    pub lm_logprob_sum: f64,
    pub clip_token_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndCause {
    Eos,
    Budget,
    /// The LM offered no allowed continuation.
    Exhausted,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expansion {
    pub candidates: Vec<Candidate>,
    /// Live beams (by index) that end here, with the first cause seen.
    pub ended: Vec<(usize, EndCause)>,
}

/// Scores texts against the target in one embedding batch.
fn align_scores(texts: &[String], ctx: &SearchContext<'_>) -> Result<Vec<f64>> {
    let embeddings = ctx.session.align.embed_text(texts)?;
    embeddings
        .iter()
        .map(|e| target_alignment(e, ctx.target, ctx.scale()))
        .collect()
}

/// The starting hypothesis: the `M` tokens best aligned with the target, as
/// a prefix that contributes alignment but no LM log-probability. Tokens
/// that would push the prefix past the budget are skipped in favour of the
/// next best. LLM-only runs never consult the target, so they start from the
/// empty prefix.
pub fn init_beams(ctx: &SearchContext<'_>, index: Option<&InitIndex>) -> Result<Hypothesis> {
    let m = match ctx.config.mode {
        Mode::LlmOnly => 0,
        _ => ctx.config.init_tokens,
    };
    let lm = &ctx.session.lm;
    let align = &ctx.session.align;
    let mut words: Vec<String> = Vec::new();
    if m > 0 {
        let index = index.ok_or_else(|| {
            VgdError::InvalidConfig("beam initialization needs a vocabulary cache".into())
        })?;
        if index.cache().dim() != ctx.target.dim() {
            return Err(VgdError::DimensionMismatch {
                expected: ctx.target.dim(),
                found: index.cache().dim(),
            });
        }
        if m > index.cache().len() {
            return Err(VgdError::InvalidConfig(format!(
                "{m} init tokens requested but the cache holds {}",
                index.cache().len()
            )));
        }
        let ranked = index.top_tokens(ctx.target, ctx.scale(), index.cache().len())?;
        for word in ranked {
            let mut trial = words.clone();
            trial.push(word);
            let text = lm.detokenize(&lm.tokenize(&trial.join(" "))?)?;
            if align.count_tokens(&[text])?[0] <= ctx.config.max_clip_tokens {
                words = trial;
                if words.len() == m {
                    break;
                }
            }
        }
    }
    let lm_token_ids = lm.tokenize(&words.join(" "))?;
    let text = lm.detokenize(&lm_token_ids)?;

    let texts = [text];
    let clip_token_count = align.count_tokens(&texts)?[0];
    let align_score = align_scores(&texts, ctx)?[0];
    let [text] = texts;
    Ok(Hypothesis {
        lm_token_ids,
        text,
        lm_logprob_sum: 0.0,
        align_score,
        combined_score: ctx.objective.score(align_score, 0.0)?,
        terminated: false,
        clip_token_count,
    })
}

/// Appends each live beam's K most likely allowed next tokens.
///
/// Children that would exceed the alignment-token budget are dropped and
/// their parent ends; an EOS continuation likewise ends the parent.
pub fn expand(state: &BeamState, ctx: &SearchContext<'_>) -> Result<Expansion> {
    if state.beams.is_empty() {
        return Err(VgdError::InvalidInput("no live beams to expand".into()));
    }
    let lm = &ctx.session.lm;
    let eos = lm.eos_token_id();
    let k = ctx.config.beam_width;

    let mut ended: Vec<(usize, EndCause)> = Vec::new();
    fn end(beam: usize, cause: EndCause, ended: &mut Vec<(usize, EndCause)>) {
        if !ended.iter().any(|(b, _)| *b == beam) {
            ended.push((beam, cause));
        }
    }

    let mut raw: Vec<(usize, Vec<u32>, f64)> = Vec::new();
    let mut offered = 0usize;
    for (b, beam) in state.beams.iter().enumerate() {
        let mut context = Vec::with_capacity(ctx.context_ids.len() + beam.lm_token_ids.len());
        context.extend_from_slice(ctx.context_ids);
        context.extend_from_slice(&beam.lm_token_ids);
        let next = lm.next_logprobs(&context, k, ctx.banned)?;
        offered += next.len();
        if next.is_empty() {
            end(b, EndCause::Exhausted, &mut ended);
        }
        for cand in next {
            if Some(cand.id) == eos {
                end(b, EndCause::Eos, &mut ended);
                continue;
            }
            let mut ids = beam.lm_token_ids.clone();
            ids.push(cand.id);
            raw.push((b, ids, beam.lm_logprob_sum + cand.logprob));
        }
    }
    if offered == 0 {
        return Err(VgdError::ExpansionExhausted);
    }

    let texts = raw
        .iter()
        .map(|(_, ids, _)| lm.detokenize(ids))
        .collect::<Result<Vec<_>>>()?;
    let counts = ctx.session.align.count_tokens(&texts)?;

    let mut candidates: Vec<Candidate> = Vec::with_capacity(raw.len());
    let mut seen: HashMap<(usize, String), usize> = HashMap::new();
    for ((parent, lm_token_ids, lm_logprob_sum), (text, count)) in
        raw.into_iter().zip(texts.into_iter().zip(counts))
    {
        if count > ctx.config.max_clip_tokens {
            end(parent, EndCause::Budget, &mut ended);
            continue;
        }
        let cand = Candidate {
            parent,
            lm_token_ids,
            text,
            lm_logprob_sum,
            clip_token_count: count,
        };
        // tokenizer aliasing: keep the likelier of two same-text siblings
        match seen.get(&(parent, cand.text.clone())) {
            Some(&i) => {
                let old = &candidates[i];
                let better = cand.lm_logprob_sum > old.lm_logprob_sum
                    || (cand.lm_logprob_sum == old.lm_logprob_sum
                        && cand.lm_token_ids.last() < old.lm_token_ids.last());
                if better {
                    candidates[i] = cand;
                }
            }
            None => {
                seen.insert((parent, cand.text.clone()), candidates.len());
                candidates.push(cand);
            }
        }
    }
    Ok(Expansion { candidates, ended })
}

/// Scores every candidate and keeps the best K.
pub fn prune(candidates: Vec<Candidate>, ctx: &SearchContext<'_>) -> Result<Vec<Hypothesis>> {
    if candidates.is_empty() {
        return Err(VgdError::InvalidInput("nothing to prune".into()));
    }
    let texts: Vec<String> = candidates.iter().map(|c| c.text.clone()).collect();
    let aligns = align_scores(&texts, ctx)?;
    let mut scored = candidates
        .into_iter()
        .zip(aligns)
        .map(|(c, align_score)| {
            Ok(Hypothesis {
                combined_score: ctx.objective.score(align_score, c.lm_logprob_sum)?,
                lm_token_ids: c.lm_token_ids,
                text: c.text,
                lm_logprob_sum: c.lm_logprob_sum,
                align_score,
                terminated: false,
                clip_token_count: c.clip_token_count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(rank_cmp);
    scored.truncate(ctx.config.beam_width);
    Ok(scored)
}
