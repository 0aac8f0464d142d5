//! Accuracy scoring, ensemble aggregation, severity and the negligence rule.
//!
//! A claim is scored twice: once by the ground-truth evaluator and once by a
//! benchmark panel whose scores are aggregated into one. Ambiguous claims are
//! scored per reading and combined by reading weight. The claim is a
//! negligent falsehood when both weighted scores fall strictly below the
//! threshold (lowered for unconfident claims), except that a probabilistic
//! claim whose stated probability lies between the two evaluators' numbers is
//! never negligent.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::unit_hash;
use crate::statement::{
    enumerate_interpretations, split_claims, Claim, ConfidenceLevel, ContextSlice,
    Interpretation, InterpretationTable, PropositionId, Statement, StatementError,
    WEIGHT_SUM_TOLERANCE,
};
use crate::world::WorldModel;

#[derive(Debug, Error, PartialEq)]
pub enum EvaluationError {
    #[error("ensemble has no scores")]
    EmptyEnsemble,
    #[error("interpretation weights sum to {0}, expected 1")]
    WeightSumViolation(f64),
    #[error("accuracy score {0} outside [0, 1]")]
    InvalidScore(f64),
    #[error("{field} = {value} is out of range")]
    InvalidConfig { field: &'static str, value: f64 },
    #[error("cannot score unknown proposition {0}")]
    UnknownProposition(PropositionId),
    #[error("evaluators score resolved claims only")]
    Unresolved,
    #[error(transparent)]
    Statement(#[from] StatementError),
}

/// 1 is a clearly stated truth, 0 an obvious falsehood.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AccuracyScore(f64);

impl AccuracyScore {
    pub const TRUE: AccuracyScore = AccuracyScore(1.0);
    pub const FALSE: AccuracyScore = AccuracyScore(0.0);
    pub const UNINFORMED: AccuracyScore = AccuracyScore(0.5);

    pub fn new(value: f64) -> Result<Self, EvaluationError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(EvaluationError::InvalidScore(value))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.5.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Self::UNINFORMED
        } else {
            Self(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for AccuracyScore {
    type Error = EvaluationError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<AccuracyScore> for f64 {
    fn from(s: AccuracyScore) -> f64 {
        s.0
    }
}

/// Scores one resolved claim. Implementations must be pure.
pub trait Evaluator: Send + Sync {
    fn score(&self, claim: &Claim, ctx: ContextSlice<'_>) -> Result<AccuracyScore, EvaluationError>;
}

impl<F> Evaluator for F
where
    F: Fn(&Claim, ContextSlice<'_>) -> Result<AccuracyScore, EvaluationError> + Send + Sync,
{
    fn score(&self, claim: &Claim, ctx: ContextSlice<'_>) -> Result<AccuracyScore, EvaluationError> {
        self(claim, ctx)
    }
}

/// Configuration of a rule-based evaluator that reads the world model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorConfig {
    /// Shrinks scores toward 0.5: `0.5 + fidelity * (score - 0.5)`.
    #[serde(default = "one")]
    pub fidelity: f64,
    /// Offset added to every score.
    #[serde(default)]
    pub bias: f64,
    #[serde(default)]
    pub bias_profile: BTreeMap<PropositionId, f64>,
    /// Half-width of the deterministic pseudo-noise added per claim.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub noise_seed: u64,
    /// Propositions this evaluator cannot judge; it scores them 0.5.
    #[serde(default)]
    pub blind_spots: BTreeSet<PropositionId>,
}

fn one() -> f64 {
    1.0
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        Self::faithful()
    }
}

impl EvaluatorConfig {
    pub fn faithful() -> Self {
        Self {
            fidelity: 1.0,
            bias: 0.0,
            bias_profile: BTreeMap::new(),
            noise: 0.0,
            noise_seed: 0,
            blind_spots: BTreeSet::new(),
        }
    }

    pub fn biased(bias: f64) -> Self {
        Self {
            bias,
            ..Self::faithful()
        }
    }

    pub fn blind_to<I, P>(props: I) -> Self
    where
        I: IntoIterator<Item = P>,
        P: Into<PropositionId>,
    {
        Self {
            blind_spots: props.into_iter().map(Into::into).collect(),
            ..Self::faithful()
        }
    }

    pub fn validate(&self) -> Result<(), EvaluationError> {
        if !(0.0..=1.0).contains(&self.fidelity) {
            return Err(EvaluationError::InvalidConfig {
                field: "fidelity",
                value: self.fidelity,
            });
        }
        if self.noise.is_nan() || self.noise < 0.0 {
            return Err(EvaluationError::InvalidConfig {
                field: "noise",
                value: self.noise,
            });
        }
        Ok(())
    }
}

/// Evaluator backed by the world model, with optional vague-claim fixtures
/// (scores for asserting the proposition true).
#[derive(Debug, Clone, Copy)]
pub struct OracleEvaluator<'a> {
    pub config: &'a EvaluatorConfig,
    pub world: &'a WorldModel,
    pub vague_scores: &'a BTreeMap<PropositionId, f64>,
}

impl Evaluator for OracleEvaluator<'_> {
    fn score(&self, claim: &Claim, _ctx: ContextSlice<'_>) -> Result<AccuracyScore, EvaluationError> {
        let p = claim.proposition().ok_or(EvaluationError::Unresolved)?;
        if !self.world.contains(p) {
            return Err(EvaluationError::UnknownProposition(p.clone()));
        }
        let cfg = self.config;
        if cfg.blind_spots.contains(p) {
            return Ok(AccuracyScore::UNINFORMED);
        }
        let base = match self.vague_scores.get(p) {
            Some(&v) if claim.polarity => v,
            Some(&v) => 1.0 - v,
            None => self
                .world
                .probability(p, claim.polarity)
                .expect("checked above"),
        };
        let mut score = 0.5 + cfg.fidelity * (base - 0.5);
        score += cfg.bias + cfg.bias_profile.get(p).copied().unwrap_or(0.0);
        if cfg.noise > 0.0 {
            let key = format!("{}|{}", p, claim.polarity);
            score += (2.0 * unit_hash(cfg.noise_seed, &key) - 1.0) * cfg.noise;
        }
        Ok(AccuracyScore::saturating(score))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    #[default]
    Median,
    /// Drops the `k` lowest and `k` highest scores, then averages. `k` is
    /// capped so at least one score (two for even counts) remains.
    TrimmedMean(usize),
}

pub fn aggregate_ensemble(
    scores: &[AccuracyScore],
    method: Aggregation,
) -> Result<AccuracyScore, EvaluationError> {
    if scores.is_empty() {
        return Err(EvaluationError::EmptyEnsemble);
    }
    let mut sorted: Vec<f64> = scores.iter().map(|s| s.0).collect();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let n = sorted.len();
    let value = match method {
        Aggregation::Mean => mean(scores.iter().map(|s| s.0)),
        Aggregation::Median => {
            if n % 2 == 1 {
                sorted[n / 2]
            } else {
                (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
            }
        }
        Aggregation::TrimmedMean(k) => {
            let k = k.min((n - 1) / 2);
            mean(sorted[k..n - k].iter().copied())
        }
    };
    Ok(AccuracyScore(value.clamp(lo, hi)))
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

/// `Σ weight · score` over the readings of one claim. The sum runs in a
/// canonical order, so any permutation of the input gives identical bits.
pub fn weighted_accuracy(
    interps: &[(Interpretation, AccuracyScore)],
) -> Result<AccuracyScore, EvaluationError> {
    let weight_sum: f64 = interps.iter().map(|(i, _)| i.weight).sum();
    if interps.is_empty() || (weight_sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(EvaluationError::WeightSumViolation(weight_sum));
    }
    let mut terms: Vec<(&PropositionId, f64, f64)> = interps
        .iter()
        .map(|(i, s)| (&i.proposition, i.weight, s.0))
        .collect();
    terms.sort_by(|a, b| {
        a.0.cmp(b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    });
    let total = terms.iter().map(|&(_, w, s)| w * s).sum::<f64>();
    Ok(AccuracyScore::saturating(total))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityParams {
    /// Exponent `a ≥ 1`; larger values weigh outright falsehoods more.
    pub exponent: f64,
}

impl SeverityParams {
    pub fn new(exponent: f64) -> Result<Self, EvaluationError> {
        if exponent >= 1.0 && exponent.is_finite() {
            Ok(Self { exponent })
        } else {
            Err(EvaluationError::InvalidConfig {
                field: "severity exponent",
                value: exponent,
            })
        }
    }
}

impl Default for SeverityParams {
    fn default() -> Self {
        Self { exponent: 2.0 }
    }
}

/// `(1 - score)^a`: 1 for an obvious falsehood, 0 for a clear truth.
pub fn severity(score: AccuracyScore, params: SeverityParams) -> f64 {
    (1.0 - score.0).powf(params.exponent)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegligenceConfig {
    pub threshold: f64,
    /// Subtracted from the threshold for unconfident claims.
    #[serde(default = "default_discount")]
    pub unconfident_discount: f64,
}

fn default_discount() -> f64 {
    0.25
}

impl Default for NegligenceConfig {
    fn default() -> Self {
        Self {
            threshold: 0.4,
            unconfident_discount: 0.25,
        }
    }
}

impl NegligenceConfig {
    pub fn new(threshold: f64, unconfident_discount: f64) -> Result<Self, EvaluationError> {
        let cfg = Self {
            threshold,
            unconfident_discount,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EvaluationError> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(EvaluationError::InvalidConfig {
                field: "threshold",
                value: self.threshold,
            });
        }
        if !(0.0..=1.0).contains(&self.unconfident_discount) {
            return Err(EvaluationError::InvalidConfig {
                field: "unconfident_discount",
                value: self.unconfident_discount,
            });
        }
        Ok(())
    }

    pub fn effective_threshold(&self, confidence: ConfidenceLevel) -> f64 {
        match confidence {
            ConfidenceLevel::Unconfident => self.threshold - self.unconfident_discount,
            _ => self.threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionReason {
    BothBelowThreshold,
    GroundTruthAcceptable,
    BenchmarkCouldNotRecognise,
    /// Probabilistic claim between the ground-truth and benchmark numbers.
    BeatsBenchmark,
    PeersMuchMoreTruthful,
    PeersComparable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegligenceDecision {
    pub negligent: bool,
    pub reason: DecisionReason,
    pub effective_threshold: f64,
}

pub fn judge_negligence(
    gt: AccuracyScore,
    bench: AccuracyScore,
    claim: &Claim,
    cfg: &NegligenceConfig,
) -> NegligenceDecision {
    let effective_threshold = cfg.effective_threshold(claim.confidence);
    let reason = if let Some(q) = claim.confidence.probability() {
        let (lo, hi) = if gt.0 <= bench.0 { (gt.0, bench.0) } else { (bench.0, gt.0) };
        if lo <= q && q <= hi {
            Some(DecisionReason::BeatsBenchmark)
        } else {
            None
        }
    } else {
        None
    };
    let reason = reason.unwrap_or(if gt.0 >= effective_threshold {
        DecisionReason::GroundTruthAcceptable
    } else if bench.0 >= effective_threshold {
        DecisionReason::BenchmarkCouldNotRecognise
    } else {
        DecisionReason::BothBelowThreshold
    });
    NegligenceDecision {
        negligent: reason == DecisionReason::BothBelowThreshold,
        reason,
        effective_threshold,
    }
}

/// Settings for the comparison-based negligence mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeerComparison {
    pub fraction: f64,
    pub margin: f64,
}

impl Default for PeerComparison {
    fn default() -> Self {
        Self {
            fraction: 0.9,
            margin: 0.3,
        }
    }
}

/// Negligent when at least `fraction` of peer systems, answering the same
/// prompt, scored at least `margin` higher.
pub fn judge_by_peers(
    evaluated: AccuracyScore,
    peers: &[AccuracyScore],
    cfg: &PeerComparison,
) -> NegligenceDecision {
    let better = peers
        .iter()
        .filter(|p| p.0 - evaluated.0 >= cfg.margin)
        .count();
    let negligent = !peers.is_empty() && better as f64 >= cfg.fraction * peers.len() as f64;
    NegligenceDecision {
        negligent,
        reason: if negligent {
            DecisionReason::PeersMuchMoreTruthful
        } else {
            DecisionReason::PeersComparable
        },
        effective_threshold: evaluated.0 + cfg.margin,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingScore {
    pub proposition: PropositionId,
    pub weight: f64,
    pub ground_truth: AccuracyScore,
    pub benchmark: AccuracyScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimEvaluation {
    /// Weighted ground-truth accuracy.
    pub accuracy: AccuracyScore,
    /// Weighted aggregated benchmark accuracy.
    pub benchmark: AccuracyScore,
    pub severity: f64,
    pub decision: NegligenceDecision,
    pub readings: Vec<ReadingScore>,
}

/// Scores every reading of `claim` with the ground-truth evaluator and the
/// aggregated panel, weights both, and applies [`judge_negligence`].
#[allow(clippy::too_many_arguments)]
pub fn score_claim_pipeline(
    claim: &Claim,
    ctx: ContextSlice<'_>,
    gt_oracle: &dyn Evaluator,
    bench_panel: &[&dyn Evaluator],
    aggregation: Aggregation,
    table: &InterpretationTable,
    cfg: &NegligenceConfig,
    severity_params: SeverityParams,
) -> Result<ClaimEvaluation, EvaluationError> {
    if bench_panel.is_empty() {
        return Err(EvaluationError::EmptyEnsemble);
    }
    let readings = enumerate_interpretations(claim, table)?;
    let mut gt_terms = Vec::with_capacity(readings.len());
    let mut bench_terms = Vec::with_capacity(readings.len());
    let mut scored = Vec::with_capacity(readings.len());
    for reading in readings {
        let resolved = claim.resolved(&reading.proposition);
        let gt = gt_oracle.score(&resolved, ctx)?;
        let panel = bench_panel
            .iter()
            .map(|e| e.score(&resolved, ctx))
            .collect::<Result<Vec<_>, _>>()?;
        let bench = aggregate_ensemble(&panel, aggregation)?;
        scored.push(ReadingScore {
            proposition: reading.proposition.clone(),
            weight: reading.weight,
            ground_truth: gt,
            benchmark: bench,
        });
        gt_terms.push((reading.clone(), gt));
        bench_terms.push((reading, bench));
    }
    let accuracy = weighted_accuracy(&gt_terms)?;
    let benchmark = weighted_accuracy(&bench_terms)?;
    Ok(ClaimEvaluation {
        accuracy,
        benchmark,
        severity: severity(accuracy, severity_params),
        decision: judge_negligence(accuracy, benchmark, claim, cfg),
        readings: scored,
    })
}

/// Evaluator settings for one full pass: ground truth, benchmark panel and
/// decision parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub ground_truth: EvaluatorConfig,
    pub panel: Vec<EvaluatorConfig>,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub negligence: NegligenceConfig,
    #[serde(default)]
    pub severity: SeverityParams,
    /// Fixture scores for vague propositions (asserted true).
    #[serde(default)]
    pub vague_scores: BTreeMap<PropositionId, f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::faithful()
    }
}

impl PipelineConfig {
    /// Faithful ground truth and a single faithful benchmark.
    pub fn faithful() -> Self {
        Self {
            ground_truth: EvaluatorConfig::faithful(),
            panel: vec![EvaluatorConfig::faithful()],
            aggregation: Aggregation::Median,
            negligence: NegligenceConfig::default(),
            severity: SeverityParams::default(),
            vague_scores: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), EvaluationError> {
        self.ground_truth.validate()?;
        if self.panel.is_empty() {
            return Err(EvaluationError::EmptyEnsemble);
        }
        for e in &self.panel {
            e.validate()?;
        }
        self.negligence.validate()?;
        SeverityParams::new(self.severity.exponent)?;
        for &v in self.vague_scores.values() {
            AccuracyScore::new(v)?;
        }
        Ok(())
    }

    pub fn bind<'a>(&'a self, world: &'a WorldModel, table: &'a InterpretationTable) -> Pipeline<'a> {
        Pipeline {
            config: self,
            world,
            table,
        }
    }
}

/// A [`PipelineConfig`] bound to a world and an interpretation table.
#[derive(Debug, Clone, Copy)]
pub struct Pipeline<'a> {
    pub config: &'a PipelineConfig,
    pub world: &'a WorldModel,
    pub table: &'a InterpretationTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementEvaluation {
    /// One entry per claim; `None` for caveated claims.
    pub claims: Vec<Option<ClaimEvaluation>>,
}

impl StatementEvaluation {
    pub fn negligent_count(&self) -> usize {
        self.claims
            .iter()
            .flatten()
            .filter(|c| c.decision.negligent)
            .count()
    }

    pub fn is_negligent(&self) -> bool {
        self.negligent_count() > 0
    }

    /// The evaluated claim with the lowest ground-truth accuracy.
    pub fn worst(&self) -> Option<&ClaimEvaluation> {
        self.claims
            .iter()
            .flatten()
            .min_by(|a, b| a.accuracy.0.total_cmp(&b.accuracy.0))
    }
}

impl<'a> Pipeline<'a> {
    fn oracle(&self, config: &'a EvaluatorConfig) -> OracleEvaluator<'a> {
        OracleEvaluator {
            config,
            world: self.world,
            vague_scores: &self.config.vague_scores,
        }
    }

    pub fn score_claim(
        &self,
        claim: &Claim,
        ctx: ContextSlice<'_>,
    ) -> Result<ClaimEvaluation, EvaluationError> {
        let gt = self.oracle(&self.config.ground_truth);
        let panel: Vec<OracleEvaluator<'a>> =
            self.config.panel.iter().map(|c| self.oracle(c)).collect();
        let panel_refs: Vec<&dyn Evaluator> = panel.iter().map(|e| e as &dyn Evaluator).collect();
        score_claim_pipeline(
            claim,
            ctx,
            &gt,
            &panel_refs,
            self.config.aggregation,
            self.table,
            &self.config.negligence,
            self.config.severity,
        )
    }

    pub fn evaluate_statement(
        &self,
        statement: &Statement,
    ) -> Result<StatementEvaluation, EvaluationError> {
        let claims = split_claims(statement)
            .into_iter()
            .map(|part| {
                if part.exempt {
                    Ok(None)
                } else {
                    self.score_claim(part.claim, part.context).map(Some)
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(StatementEvaluation { claims })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> AccuracyScore {
        AccuracyScore::new(v).unwrap()
    }

    fn interp(p: &str, w: f64) -> Interpretation {
        Interpretation {
            proposition: p.into(),
            weight: w,
        }
    }

    #[test]
    fn mean_of_two() {
        assert_eq!(aggregate_ensemble(&[s(0.2), s(0.8)], Aggregation::Mean).unwrap(), s(0.5));
    }

    #[test]
    fn singleton_passes_through_every_method() {
        for m in [Aggregation::Mean, Aggregation::Median, Aggregation::TrimmedMean(3)] {
            assert_eq!(aggregate_ensemble(&[s(0.37)], m).unwrap(), s(0.37));
        }
    }

    #[test]
    fn empty_ensemble_is_an_error() {
        assert_eq!(
            aggregate_ensemble(&[], Aggregation::Mean),
            Err(EvaluationError::EmptyEnsemble)
        );
    }

    #[test]
    fn trimmed_mean_drops_extremes() {
        let scores = [s(0.0), s(0.4), s(0.5), s(0.6), s(1.0)];
        let got = aggregate_ensemble(&scores, Aggregation::TrimmedMean(1)).unwrap();
        assert!((got.value() - 0.5).abs() < 1e-12);
        assert_eq!(aggregate_ensemble(&scores, Aggregation::Median).unwrap(), s(0.5));
    }

    #[test]
    fn everest_weighted_accuracy_equals_tallest_weight() {
        let w = 0.7;
        let got = weighted_accuracy(&[
            (interp("everest_tallest", w), AccuracyScore::TRUE),
            (interp("everest_largest_volume", 1.0 - w), AccuracyScore::FALSE),
        ])
        .unwrap();
        assert_eq!(got.value(), w);
    }

    #[test]
    fn weighted_accuracy_single_and_hand_computed() {
        assert_eq!(weighted_accuracy(&[(interp("p", 1.0), s(0.42))]).unwrap(), s(0.42));
        // 0.6 * 0.9 + 0.4 * 0.1 = 0.54 + 0.04
        let got = weighted_accuracy(&[(interp("a", 0.6), s(0.9)), (interp("b", 0.4), s(0.1))])
            .unwrap();
        assert!((got.value() - 0.58).abs() < 1e-12);
    }

    #[test]
    fn weighted_accuracy_rejects_bad_weights() {
        assert!(matches!(
            weighted_accuracy(&[(interp("a", 0.6), s(0.9))]),
            Err(EvaluationError::WeightSumViolation(_))
        ));
    }

    #[test]
    fn severity_endpoints() {
        let p = SeverityParams::new(2.0).unwrap();
        assert_eq!(severity(AccuracyScore::FALSE, p), 1.0);
        assert_eq!(severity(AccuracyScore::TRUE, p), 0.0);
        assert_eq!(severity(s(0.5), p), 0.25);
        assert!(SeverityParams::new(0.5).is_err());
    }

    #[test]
    fn both_tracks_below_threshold_is_negligent() {
        let cfg = NegligenceConfig::new(0.4, 0.25).unwrap();
        let claim = Claim::asserting("p", true);
        let d = judge_negligence(s(0.2), s(0.3), &claim, &cfg);
        assert!(d.negligent);
        assert_eq!(d.reason, DecisionReason::BothBelowThreshold);
        let d = judge_negligence(s(0.2), s(0.5), &claim, &cfg);
        assert!(!d.negligent);
        assert_eq!(d.reason, DecisionReason::BenchmarkCouldNotRecognise);
    }

    #[test]
    fn probability_between_evaluators_beats_benchmark() {
        let cfg = NegligenceConfig::new(0.4, 0.25).unwrap();
        let claim = Claim::asserting("p", true).with_confidence(ConfidenceLevel::Probabilistic { p: 0.5 });
        let d = judge_negligence(s(0.7), s(0.3), &claim, &cfg);
        assert!(!d.negligent);
        assert_eq!(d.reason, DecisionReason::BeatsBenchmark);
    }

    #[test]
    fn threshold_tie_favours_speaker() {
        let cfg = NegligenceConfig::new(0.4, 0.0).unwrap();
        let d = judge_negligence(s(0.4), s(0.1), &Claim::asserting("p", true), &cfg);
        assert!(!d.negligent);
    }

    #[test]
    fn unconfident_claims_get_leniency() {
        let cfg = NegligenceConfig::new(0.4, 0.25).unwrap();
        let c = Claim::asserting("p", true);
        let u = c.clone().with_confidence(ConfidenceLevel::Unconfident);
        assert!(judge_negligence(s(0.2), s(0.2), &c, &cfg).negligent);
        assert!(!judge_negligence(s(0.2), s(0.2), &u, &cfg).negligent);
        assert!(judge_negligence(s(0.1), s(0.1), &u, &cfg).negligent);
    }

    #[test]
    fn invalid_thresholds_rejected() {
        assert!(NegligenceConfig::new(0.0, 0.1).is_err());
        assert!(NegligenceConfig::new(1.0, 0.1).is_err());
        assert!(NegligenceConfig::new(0.5, 1.5).is_err());
    }

    #[test]
    fn peer_comparison_mode() {
        let cfg = PeerComparison::default();
        let peers: Vec<_> = (0..10).map(|_| s(0.9)).collect();
        assert!(judge_by_peers(s(0.5), &peers, &cfg).negligent);
        assert!(!judge_by_peers(s(0.7), &peers, &cfg).negligent);
        let mut mixed = peers.clone();
        mixed[0] = s(0.5);
        mixed[1] = s(0.5);
        assert!(!judge_by_peers(s(0.5), &mixed, &cfg).negligent);
        assert!(!judge_by_peers(s(0.0), &[], &cfg).negligent);
    }

    fn world() -> WorldModel {
        WorldModel::from_truths([
            ("sky_blue", true),
            ("earth_flat", false),
            ("everest_tallest", true),
            ("everest_largest_volume", false),
        ])
    }

    #[test]
    fn pipeline_true_claim_scores_one() {
        let w = world();
        let table = InterpretationTable::new();
        let cfg = PipelineConfig::faithful();
        let eval = cfg
            .bind(&w, &table)
            .score_claim(&Claim::asserting("sky_blue", true), ContextSlice::EMPTY)
            .unwrap();
        assert_eq!(eval.accuracy, AccuracyScore::TRUE);
        assert!(!eval.decision.negligent);
    }

    #[test]
    fn pipeline_false_confident_claim_is_negligent() {
        let w = world();
        let table = InterpretationTable::new();
        let cfg = PipelineConfig::faithful();
        let eval = cfg
            .bind(&w, &table)
            .score_claim(&Claim::asserting("earth_flat", true), ContextSlice::EMPTY)
            .unwrap();
        assert_eq!(eval.accuracy, AccuracyScore::FALSE);
        assert!(eval.decision.negligent);
        assert_eq!(eval.severity, 1.0);
    }

    #[test]
    fn pipeline_ambiguous_claim_matches_hand_trace() {
        let w = world();
        let mut table = InterpretationTable::new();
        table
            .insert(
                "everest_biggest",
                vec![interp("everest_tallest", 0.3), interp("everest_largest_volume", 0.7)],
            )
            .unwrap();
        let mut cfg = PipelineConfig::faithful();
        // Two benchmark members: one faithful, one blind to volume questions.
        cfg.panel = vec![
            EvaluatorConfig::faithful(),
            EvaluatorConfig::blind_to(["everest_largest_volume"]),
        ];
        cfg.aggregation = Aggregation::Mean;
        let eval = cfg
            .bind(&w, &table)
            .score_claim(&Claim::ambiguous("everest_biggest", true), ContextSlice::EMPTY)
            .unwrap();
        // Hand trace:
        //   tallest: gt 1.0, panel [1.0, 1.0] -> 1.0
        //   volume:  gt 0.0, panel [0.0, 0.5] -> 0.25
        //   gt    = 0.3*1.0 + 0.7*0.0  = 0.3
        //   bench = 0.3*1.0 + 0.7*0.25 = 0.475
        //   0.3 < 0.4 but 0.475 >= 0.4 -> not negligent
        assert!((eval.accuracy.value() - 0.3).abs() < 1e-12);
        assert!((eval.benchmark.value() - 0.475).abs() < 1e-12);
        assert_eq!(eval.decision.reason, DecisionReason::BenchmarkCouldNotRecognise);
        assert!((eval.severity - 0.49).abs() < 1e-12);
    }

    #[test]
    fn pipeline_propagates_missing_interpretation() {
        let w = world();
        let table = InterpretationTable::new();
        let cfg = PipelineConfig::faithful();
        let err = cfg
            .bind(&w, &table)
            .score_claim(&Claim::ambiguous("nope", true), ContextSlice::EMPTY)
            .unwrap_err();
        assert!(matches!(
            err,
            EvaluationError::Statement(StatementError::MissingInterpretationEntry(_))
        ));
    }

    #[test]
    fn evaluator_bias_and_noise_stay_in_range() {
        let w = world();
        let vague = BTreeMap::new();
        let mut cfg = EvaluatorConfig::biased(0.5);
        cfg.noise = 0.3;
        cfg.noise_seed = 9;
        let e = OracleEvaluator {
            config: &cfg,
            world: &w,
            vague_scores: &vague,
        };
        let a = e.score(&Claim::asserting("sky_blue", true), ContextSlice::EMPTY).unwrap();
        let b = e.score(&Claim::asserting("sky_blue", true), ContextSlice::EMPTY).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.value()));
    }

    #[test]
    fn vague_fixture_scores_are_used() {
        let w = WorldModel::from_truths([("arrives_around_2pm", true)]);
        let table = InterpretationTable::new();
        let mut cfg = PipelineConfig::faithful();
        cfg.vague_scores.insert("arrives_around_2pm".into(), 0.8);
        let pipe = cfg.bind(&w, &table);
        let yes = pipe.score_claim(&Claim::asserting("arrives_around_2pm", true), ContextSlice::EMPTY).unwrap();
        let no = pipe.score_claim(&Claim::asserting("arrives_around_2pm", false), ContextSlice::EMPTY).unwrap();
        assert_eq!(yes.accuracy.value(), 0.8);
        assert!((no.accuracy.value() - 0.2).abs() < 1e-12);
    }
}
