//! Visually guided beam search.
//!
//! The LM proposes continuations, the alignment scorer ranks them against
//! the target, and the search keeps the K best under
//! `align + alpha * sum(logprob)`. It stops on the first step whose best
//! candidate fails to beat the best score seen so far, or when every beam
//! has ended.

use std::collections::BTreeSet;

use crate::backends::{InitIndex, ScorerSession};
use crate::config::{DecodeConfig, MAX_CLIP_TOKENS_CAP};
use crate::error::{Result, VgdError};
use crate::hypothesis::Hypothesis;
use crate::score::Objective;
use crate::target::TargetSpec;
use crate::templates::{Bindings, TemplateRegistry};

mod beam;
pub mod trace;

pub use beam::{expand, init_beams, prune, BeamState, Candidate, EndCause, Expansion, SearchContext};
pub use trace::{DecodeTrace, StepRecord, TerminationReason, TRACE_VERSION};

/// Upper bound on search steps, for LMs whose tokens can add zero
/// alignment tokens.
pub const MAX_STEPS: usize = 4 * MAX_CLIP_TOKENS_CAP;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    pub best: Hypothesis,
    pub trace: DecodeTrace,
    pub reason: TerminationReason,
}

impl DecodeOutput {
    pub fn prompt(&self) -> &str {
        &self.best.text
    }

    pub fn steps(&self) -> usize {
        self.trace.records.len().saturating_sub(1)
    }
}

pub struct Decoder {
    session: ScorerSession,
    templates: TemplateRegistry,
    init_index: Option<InitIndex>,
}

impl Decoder {
    pub fn new(session: ScorerSession) -> Self {
        Self {
            session,
            templates: TemplateRegistry::builtin(),
            init_index: None,
        }
    }

    pub fn with_templates(mut self, templates: TemplateRegistry) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_init_index(mut self, index: InitIndex) -> Self {
        self.init_index = Some(index);
        self
    }

    pub fn session(&self) -> &ScorerSession {
        &self.session
    }

    pub fn templates(&self) -> &TemplateRegistry {
        &self.templates
    }

    pub fn init_index(&self) -> Option<&InitIndex> {
        self.init_index.as_ref()
    }

    /// LM ids the chat template renders to. `max_length` is bound to the
    /// token budget unless `bindings` sets it.
    pub fn render_context(&self, config: &DecodeConfig, bindings: &Bindings) -> Result<Vec<u32>> {
        let mut bindings = bindings.clone();
        bindings
            .entry("max_length".into())
            .or_insert_with(|| config.max_clip_tokens.to_string());
        let lm = self.session.lm.as_ref();
        self.templates
            .render_context(&config.template_id, &bindings, &lm.chat_format(), lm)
    }

    pub fn decode(
        &self,
        target: &TargetSpec,
        config: &DecodeConfig,
        bindings: &Bindings,
    ) -> Result<DecodeOutput> {
        config.validate()?;
        let align = &self.session.align;
        if target.dim() != align.dim() {
            return Err(VgdError::DimensionMismatch {
                expected: align.dim(),
                found: target.dim(),
            });
        }
        if config.max_clip_tokens > align.max_content_tokens() {
            return Err(VgdError::InvalidConfig(format!(
                "budget {} exceeds the encoder's {} content tokens",
                config.max_clip_tokens,
                align.max_content_tokens()
            )));
        }

        let context_ids = self.render_context(config, bindings)?;
        let lm = &self.session.lm;
        let mut banned: BTreeSet<u32> = lm.banned_token_ids();
        banned.extend(config.banned_token_ids.iter().copied());
        if let Some(eos) = lm.eos_token_id() {
            banned.remove(&eos);
        }
        let ctx = SearchContext {
            session: &self.session,
            target,
            config,
            objective: Objective::new(config.alpha, config.mode),
            context_ids: &context_ids,
            banned: &banned,
        };

        let initial = init_beams(&ctx, self.init_index.as_ref())?;
        let mut state = BeamState::new(initial);
        let mut trace = DecodeTrace::default();
        let record = |state: &BeamState, expanded, survivors, termination| StepRecord {
            trace_version: TRACE_VERSION,
            step: state.step,
            alpha: config.alpha,
            mode: config.mode,
            expanded,
            survivors,
            best_score_so_far: state.best_score_so_far,
            termination,
        };
        trace.push(record(&state, 0, state.beams.clone(), None));

        let reason = loop {
            state.step += 1;
            if state.step > MAX_STEPS {
                trace.push(record(&state, 0, Vec::new(), Some(TerminationReason::StepLimit)));
                break TerminationReason::StepLimit;
            }
            let expansion = match expand(&state, &ctx) {
                Ok(e) => e,
                Err(VgdError::ExpansionExhausted) if state.step == 1 => {
                    return Err(VgdError::EmptySearch)
                }
                Err(VgdError::ExpansionExhausted) => Expansion {
                    candidates: Vec::new(),
                    ended: (0..state.beams.len()).map(|b| (b, EndCause::Exhausted)).collect(),
                },
                Err(e) => return Err(e),
            };
            let all_budget = expansion.ended.len() == state.beams.len()
                && expansion.ended.iter().all(|(_, c)| *c == EndCause::Budget);
            for (beam, _) in &expansion.ended {
                state.terminate(*beam);
            }

            if expansion.candidates.is_empty() {
                let reason = if all_budget {
                    TerminationReason::BudgetReached
                } else {
                    TerminationReason::AllTerminated
                };
                state.beams.clear();
                trace.push(record(&state, 0, Vec::new(), Some(reason)));
                break reason;
            }

            let expanded = expansion.candidates.len();
            let survivors = prune(expansion.candidates, &ctx)?;
            let best_expanded = survivors[0].combined_score;
            if best_expanded <= state.best_score_so_far {
                trace.push(record(
                    &state,
                    expanded,
                    survivors,
                    Some(TerminationReason::NoImprovement),
                ));
                break TerminationReason::NoImprovement;
            }
            state.best_score_so_far = best_expanded;
            state.beams = survivors;
            trace.push(record(&state, expanded, state.beams.clone(), None));
        };

        let best = state
            .best()
            .cloned()
            .expect("initial hypothesis is always present");
        Ok(DecodeOutput {
            best,
            trace,
            reason,
        })
    }
}
