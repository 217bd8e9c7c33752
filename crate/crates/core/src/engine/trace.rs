//! Step-by-step decode records, stored as JSON lines.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Mode;
use crate::error::{Result, VgdError};
use crate::hypothesis::Hypothesis;
use crate::score::Objective;

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// The best expanded candidate did not beat the best score so far.
    NoImprovement,
    /// Every live beam hit the alignment-token budget.
    BudgetReached,
    /// Every live beam ended through EOS, the budget or an empty expansion.
    AllTerminated,
    /// Safety cap on the number of steps.
    StepLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub trace_version: u32,
    pub step: usize,
    pub alpha: f64,
    pub mode: Mode,
    /// Candidates produced by expansion in this step (0 for the initial step).
    pub expanded: usize,
    /// Pruned survivors, best first. Step 0 holds the initial hypothesis.
    pub survivors: Vec<Hypothesis>,
    pub best_score_so_far: f64,
    pub termination: Option<TerminationReason>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub records: Vec<StepRecord>,
}

impl DecodeTrace {
    pub fn push(&mut self, record: StepRecord) {
        self.records.push(record);
    }

    pub fn final_reason(&self) -> Option<TerminationReason> {
        self.records.last().and_then(|r| r.termination)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_jsonl()?.as_bytes())?;
        Ok(())
    }

    pub fn from_jsonl(r: impl BufRead) -> Result<Self> {
        let mut records = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: StepRecord = serde_json::from_str(&line)
                .map_err(|e| VgdError::Trace(format!("line {}: {e}", n + 1)))?;
            if rec.trace_version != TRACE_VERSION {
                return Err(VgdError::Trace(format!(
                    "line {}: unsupported trace_version {}",
                    n + 1,
                    rec.trace_version
                )));
            }
            records.push(rec);
        }
        Ok(Self { records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_jsonl(std::io::BufReader::new(f))
    }

    /// Recomputes every recorded combined score from its parts and checks the
    /// best-score bookkeeping. Returns the number of hypotheses checked.
    pub fn replay(&self) -> Result<usize> {
        let mut checked = 0;
        let mut best: Option<f64> = None;
        for rec in &self.records {
            let objective = Objective::new(rec.alpha, rec.mode);
            for h in &rec.survivors {
                let recomputed = objective.score(h.align_score, h.lm_logprob_sum)?;
                if recomputed.to_bits() != h.combined_score.to_bits() {
                    return Err(VgdError::Trace(format!(
                        "step {}: {:?} recorded {} but recomputes to {recomputed}",
                        rec.step, h.text, h.combined_score
                    )));
                }
                checked += 1;
            }
            let step_best = rec.survivors.first().map(|h| h.combined_score);
            let expected = match (best, step_best) {
                (None, Some(s)) => s,
                (Some(b), Some(s)) if s > b => s,
                (Some(b), _) => b,
                (None, None) => {
                    return Err(VgdError::Trace(format!("step {} has no hypotheses", rec.step)))
                }
            };
            if expected.to_bits() != rec.best_score_so_far.to_bits() {
                return Err(VgdError::Trace(format!(
                    "step {}: best_score_so_far {} but survivors imply {expected}",
                    rec.step, rec.best_score_so_far
                )));
            }
            best = Some(expected);
        }
        Ok(checked)
    }
}
