//! Negation linking for the target term "flu".
//!
//! A negation governs the target when the nearest following occurrence of
//! the target lies in the same clause and at most `window` tokens away.
//! Clauses break at commas, semicolons and colons (which close the current
//! clause) and at "but", "so" and "because" (which open a new one).

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::filters::{Evidence, ReasonCode, StageDecision, StageId};
use crate::textproc::{Sentence, Span, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NegationConfig {
    /// Token norms treated as negation markers.
    pub negators: Vec<String>,
    /// Target terms a negation must govern.
    pub terms: Vec<String>,
    /// Largest token distance from negation to target.
    pub window: usize,
    /// Punctuation closes a clause; words open a new one.
    pub clause_breakers: Vec<String>,
}

impl Default for NegationConfig {
    fn default() -> Self {
        NegationConfig {
            negators: vec!["not".into(), "n't".into(), "never".into()],
            terms: vec!["flu".into()],
            window: 6,
            clause_breakers: [",", ";", ":", "but", "so", "because"].map(String::from).to_vec(),
        }
    }
}

impl NegationConfig {
    /// Default configuration with "no" added to the negators.
    pub fn with_no() -> Self {
        let mut cfg = Self::default();
        cfg.negators.push("no".into());
        cfg
    }

    fn is_negator(&self, tok: &Token<'_>) -> bool {
        tok.kind == TokenKind::Word && self.negators.iter().any(|n| n == tok.norm.as_ref())
    }

    fn is_target(&self, tok: &Token<'_>) -> bool {
        tok.kind == TokenKind::Word && self.terms.iter().any(|t| t == tok.norm.as_ref())
    }
}

/// A run of tokens within one sentence, as indices into that sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub tokens: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NegationRule {
    Governed,
    NoFollowingTarget,
    ClauseBoundary,
    WindowExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NegationVerdict {
    pub governed: bool,
    pub negation_span: Option<Span>,
    pub target_span: Option<Span>,
    pub rule_fired: NegationRule,
}

/// Partitions a sentence's tokens into clauses.
pub fn clauses(tokens: &[Token<'_>], breakers: &[String]) -> Vec<Clause> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, tok) in tokens.iter().enumerate() {
        if !breakers.iter().any(|b| b == tok.norm.as_ref()) {
            continue;
        }
        if tok.kind == TokenKind::Word {
            if i > start {
                out.push(Clause { tokens: start..i });
                start = i;
            }
        } else {
            out.push(Clause { tokens: start..i + 1 });
            start = i + 1;
        }
    }
    if start < tokens.len() {
        out.push(Clause { tokens: start..tokens.len() });
    }
    out
}

/// Indices of negation markers in `tokens`.
pub fn find_negations(tokens: &[Token<'_>], cfg: &NegationConfig) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| cfg.is_negator(t))
        .map(|(i, _)| i)
        .collect()
}

fn clause_of(clauses: &[Clause], idx: usize) -> Option<usize> {
    clauses.iter().position(|c| c.tokens.contains(&idx))
}

/// Decides whether the negation at `negation` governs a target term.
///
/// `tokens` and `clauses` describe a single sentence.
pub fn governs(
    tokens: &[Token<'_>],
    clauses: &[Clause],
    negation: usize,
    cfg: &NegationConfig,
) -> NegationVerdict {
    let negation_span = tokens.get(negation).map(|t| t.span);
    let Some(target) = (negation + 1..tokens.len()).find(|&j| cfg.is_target(&tokens[j])) else {
        return NegationVerdict {
            governed: false,
            negation_span,
            target_span: None,
            rule_fired: NegationRule::NoFollowingTarget,
        };
    };
    let rule_fired = if clause_of(clauses, negation) != clause_of(clauses, target) {
        NegationRule::ClauseBoundary
    } else if target - negation > cfg.window {
        NegationRule::WindowExceeded
    } else {
        NegationRule::Governed
    };
    NegationVerdict {
        governed: rule_fired == NegationRule::Governed,
        negation_span,
        target_span: Some(tokens[target].span),
        rule_fired,
    }
}

/// Verdicts for every negation in sentences that mention a target term.
pub fn sentence_verdicts(
    tokens: &[Token<'_>],
    sentences: &[Sentence],
    cfg: &NegationConfig,
) -> Vec<NegationVerdict> {
    let mut out = Vec::new();
    for sentence in sentences {
        let toks = &tokens[sentence.tokens.clone()];
        if !toks.iter().any(|t| cfg.is_target(t)) {
            continue;
        }
        let cl = clauses(toks, &cfg.clause_breakers);
        for neg in find_negations(toks, cfg) {
            out.push(governs(toks, &cl, neg, cfg));
        }
    }
    out
}

/// Drops the tweet when any negation governs a target term.
pub fn negation_stage(tokens: &[Token<'_>], sentences: &[Sentence], cfg: &NegationConfig) -> StageDecision {
    let evidence: Vec<Evidence> = sentence_verdicts(tokens, sentences, cfg)
        .into_iter()
        .filter(|v| v.governed)
        .map(|v| {
            let neg = v.negation_span.expect("governed verdict has spans");
            let target = v.target_span.expect("governed verdict has spans");
            Evidence::new(ReasonCode::NegatedTarget, Some(neg.cover(&target)))
        })
        .collect();
    StageDecision::from_evidence(StageId::Negation, evidence)
}
