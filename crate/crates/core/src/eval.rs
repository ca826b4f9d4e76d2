//! Threshold sweeps: WERR on correction pairs, false-alarm rate on the rest.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifier::{decide, rewrite_distance};
use crate::datagen::TurnPair;
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, Utterance};
use crate::phonetics::ConfusionMatrix;
use crate::rewriter::{Rewrite, Rewriter};
use crate::textmetrics::{corpus_wer, werr};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub far: f64,
    pub werr: f64,
    pub n_fired_pos: usize,
    pub n_fired_neg: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub engine: String,
    /// Sorted by ascending threshold.
    pub curve: Vec<CurvePoint>,
    pub max_werr: f64,
    pub far_at_max_werr: f64,
}

/// A pair's rewrite and its trigger distance, computed once per pair.
#[derive(Clone, Debug)]
pub struct ScoredPair {
    pub rewrite: Rewrite,
    pub distance: f64,
}

/// 41 thresholds evenly spaced over `[0, 2]`.
pub fn default_thresholds() -> Vec<f64> {
    (0..=40).map(|i| i as f64 / 20.0).collect()
}

/// Rewrites every pair and measures its trigger distance.
pub fn score_corpus(corpus: &[TurnPair], rewriter: &dyn Rewriter, lex: &Lexicon, m: &ConfusionMatrix) -> Result<Vec<ScoredPair>> {
    corpus
        .iter()
        .map(|pair| {
            let rewrite = rewriter.rewrite(&pair.first_asr, &pair.followup)?;
            let distance = rewrite_distance(&pair.first_asr, &rewrite.utterance, lex, m)?;
            Ok(ScoredPair { rewrite, distance })
        })
        .collect()
}

/// Builds the curve from precomputed rewrites. For each threshold, a fired
/// correction pair is scored on its rewrite and an unfired one on its first
/// turn; WER is pooled over all correction pairs.
pub fn sweep(corpus: &[TurnPair], scored: &[ScoredPair], thresholds: &[f64], engine: &str) -> Result<EvalReport> {
    if corpus.len() != scored.len() {
        return Err(Error::Validation("one score per pair is required".into()));
    }
    if thresholds.is_empty() {
        return Err(Error::Validation("at least one threshold is required".into()));
    }
    let positives: Vec<usize> = (0..corpus.len()).filter(|&i| corpus[i].is_correction).collect();
    let negatives: Vec<usize> = (0..corpus.len()).filter(|&i| !corpus[i].is_correction).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::MissingClass);
    }
    let original = corpus_wer(positives.iter().map(|&i| (&corpus[i].first_asr, &corpus[i].reference)))?;

    let mut sorted = thresholds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut curve = Vec::with_capacity(sorted.len());
    for threshold in sorted {
        let fired = |i: usize| decide(scored[i].distance, threshold).fire;
        let hyps: Vec<&Utterance> =
            positives.iter().map(|&i| if fired(i) { &scored[i].rewrite.utterance } else { &corpus[i].first_asr }).collect();
        let rewritten = corpus_wer(hyps.into_iter().zip(positives.iter().map(|&i| &corpus[i].reference)))?;
        let n_fired_pos = positives.iter().filter(|&&i| fired(i)).count();
        let n_fired_neg = negatives.iter().filter(|&&i| fired(i)).count();
        curve.push(CurvePoint {
            threshold,
            far: n_fired_neg as f64 / negatives.len() as f64,
            werr: werr(rewritten.wer, original.wer)?,
            n_fired_pos,
            n_fired_neg,
        });
    }
    let best = curve
        .iter()
        .min_by(|a, b| b.werr.total_cmp(&a.werr).then(a.far.total_cmp(&b.far)))
        .expect("non-empty curve");
    Ok(EvalReport { engine: engine.to_string(), max_werr: best.werr, far_at_max_werr: best.far, curve })
}

/// Scores the corpus with `rewriter` and sweeps `thresholds`.
pub fn evaluate(
    corpus: &[TurnPair],
    rewriter: &dyn Rewriter,
    lex: &Lexicon,
    m: &ConfusionMatrix,
    thresholds: &[f64],
) -> Result<EvalReport> {
    if !corpus.iter().any(|p| p.is_correction) || corpus.iter().all(|p| p.is_correction) {
        return Err(Error::MissingClass);
    }
    let scored = score_corpus(corpus, rewriter, lex, m)?;
    sweep(corpus, &scored, thresholds, rewriter.engine())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveFormat {
    Csv,
    Json,
}

/// CSV with header `threshold,far,werr` and six decimals, or the whole
/// report as JSON.
pub fn emit_curve(report: &EvalReport, format: CurveFormat) -> Result<String> {
    match format {
        CurveFormat::Csv => {
            let mut out = String::from("threshold,far,werr\n");
            for p in &report.curve {
                writeln!(out, "{:.6},{:.6},{:.6}", p.threshold, p.far, p.werr).expect("writing to a string");
            }
            Ok(out)
        }
        CurveFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
    }
}
