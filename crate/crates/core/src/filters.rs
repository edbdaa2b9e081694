//! Filter definitions, the prefix-causal early-exit decision rule, the
//! leave-one-question evaluation harness, and retained-accuracy metrics.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::corpus::{Corpus, Trace};
use crate::error::{Error, Result};
use crate::events::{burst_partition, burst_stats, event_count, qualifying_events, BurstStats};
use crate::profiles::{
    bin_profile, late_mean, profile_similarity, profile_slope, DirectionVector,
};
use crate::stats::{
    fit_logistic, select_cutoff, standardization_params, standardize, sigmoid, FilterModel,
    QuestionScores,
};
use crate::BINS;

/// Checkpoint depths for the online prefix filter.
pub const DEFAULT_CHECKPOINTS: [u64; 4] = [2000, 5000, 8000, 12000];

/// Depth at which the early-correction guard applies.
pub const GUARD_DEPTH: u64 = 2000;

/// Minimum qualifying-event count at the guard depth before a trace may be
/// flagged there.
pub const GUARD_MIN_EVENTS: u64 = 2;

/// Harness-level configuration shared by every learned filter.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub gap: u64,
    pub ridge: f64,
    pub checkpoints: Vec<u64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            gap: 500,
            ridge: 1e-4,
            checkpoints: DEFAULT_CHECKPOINTS.to_vec(),
        }
    }
}

/// A filter to evaluate: one hard cutoff or one learned template.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FilterSpec {
    /// Keep a trace when total reasoning length is at most the limit;
    /// `None` keeps everything.
    HardCutoff { limit: Option<u64> },
    CompletedHybrid,
    BurstOnly,
    RateOnly,
    CountOnly,
    OnlinePrefix { depth: u64 },
}

impl FilterSpec {
    pub fn method_name(&self) -> &'static str {
        match self {
            FilterSpec::HardCutoff { .. } => "hard_cutoff",
            FilterSpec::CompletedHybrid => "completed_hybrid",
            FilterSpec::BurstOnly => "burst_only",
            FilterSpec::RateOnly => "rate_only",
            FilterSpec::CountOnly => "count_only",
            FilterSpec::OnlinePrefix { .. } => "online_prefix",
        }
    }

    pub fn is_learned(&self) -> bool {
        !matches!(self, FilterSpec::HardCutoff { .. })
    }

    pub fn depth_or_limit(&self) -> Option<u64> {
        match self {
            FilterSpec::HardCutoff { limit } => *limit,
            FilterSpec::OnlinePrefix { depth } => Some(*depth),
            _ => None,
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        let names: &[&str] = match self {
            FilterSpec::HardCutoff { .. } => &[],
            FilterSpec::CompletedHybrid => &[
                "prob_slope_20",
                "prob_late_mean_50",
                "profile_similarity_50",
                "rate_20",
                "s2_20",
                "rho_40",
                "m_max_20",
            ],
            FilterSpec::BurstOnly => &["s2_20", "rho_40", "m_max_20"],
            FilterSpec::RateOnly => &["rate_20"],
            FilterSpec::CountOnly => &["count_20"],
            FilterSpec::OnlinePrefix { .. } => {
                &["rate_20", "s2_20", "rho_40", "m_max_20", "h_50", "b_40"]
            }
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn validate(&self, checkpoints: &[u64]) -> Result<()> {
        match self {
            FilterSpec::HardCutoff { limit: Some(0) } => {
                Err(Error::domain("hard cutoff limit must be positive"))
            }
            FilterSpec::OnlinePrefix { depth } if !checkpoints.contains(depth) => {
                Err(Error::domain(format!(
                    "online prefix depth {depth} is not in the configured checkpoint set {checkpoints:?}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Keep a trace when its reasoning length satisfies D <= L.
pub fn hard_cutoff(trace: &Trace, limit: Option<u64>) -> bool {
    match limit {
        Some(l) => trace.total_words <= l,
        None => true,
    }
}

fn whole_trace_stats(trace: &Trace, tau: f64, gap: u64, depth_limit: Option<u64>) -> BurstStats {
    let depths: Vec<u64> = qualifying_events(trace, tau, depth_limit)
        .iter()
        .map(|e| e.depth)
        .collect();
    let partition = burst_partition(&depths, gap)
        .expect("event depths within one trace are strictly increasing");
    burst_stats(&partition)
}

fn full_trace_rate(trace: &Trace, tau: f64) -> f64 {
    if trace.total_words == 0 {
        return 0.0;
    }
    1000.0 * event_count(trace, tau, None) as f64 / trace.total_words as f64
}

/// The seven completed-hybrid features:
/// (slope@20, late_mean@50, similarity@50, rate@20, S2@20, rho@40, m_max@20).
///
/// The direction vector must have been built with this trace's question
/// excluded; anything else is a leakage error.
pub fn hybrid_features(
    trace: &Trace,
    direction: &DirectionVector,
    gap: u64,
) -> Result<[f64; 7]> {
    if direction.excluded_question != trace.question_id {
        return Err(Error::Leakage {
            question_id: trace.question_id.clone(),
        });
    }
    Ok(hybrid_features_with(trace, Some(&direction.u), gap))
}

/// Hybrid features with an optional direction; a missing direction (one
/// class empty after exclusion) contributes similarity 0.
pub(crate) fn hybrid_features_with(
    trace: &Trace,
    direction: Option<&[f64; BINS]>,
    gap: u64,
) -> [f64; 7] {
    if trace.total_words == 0 {
        return [0.0; 7];
    }
    let p20 = bin_profile(trace, 20.0).expect("total_words > 0");
    let p50 = bin_profile(trace, 50.0).expect("total_words > 0");
    let similarity = direction
        .map(|u| {
            profile_similarity(
                &p50.probs,
                &DirectionVector {
                    u: *u,
                    excluded_question: trace.question_id.clone(),
                    tau: 50.0,
                },
            )
        })
        .unwrap_or(0.0);
    let stats20 = whole_trace_stats(trace, 20.0, gap, None);
    let stats40 = whole_trace_stats(trace, 40.0, gap, None);
    [
        profile_slope(&p20),
        late_mean(&p50),
        similarity,
        full_trace_rate(trace, 20.0),
        stats20.s2,
        stats40.rho,
        stats20.m_max as f64,
    ]
}

/// Burst-only features: (S2@20, rho@40, m_max@20) over the full trace.
pub fn burst_only_features(trace: &Trace, gap: u64) -> [f64; 3] {
    let stats20 = whole_trace_stats(trace, 20.0, gap, None);
    let stats40 = whole_trace_stats(trace, 40.0, gap, None);
    [stats20.s2, stats40.rho, stats20.m_max as f64]
}

/// Rate-only feature: r_20 over the full trace.
pub fn rate_only_features(trace: &Trace) -> [f64; 1] {
    [full_trace_rate(trace, 20.0)]
}

/// Count-only feature: N_20 over the full trace.
pub fn count_only_features(trace: &Trace) -> [f64; 1] {
    [event_count(trace, 20.0, None) as f64]
}

/// The six prefix-causal features at checkpoint `d`:
/// (rate@20, S2@20, rho@40, m_max@20, h_50, b_40), all computed from
/// segments with start depth strictly below `d`. Absent first-event and
/// first-multi-burst depths are imputed as `d`.
pub fn prefix_features(trace: &Trace, d: u64, gap: u64) -> Result<[f64; 6]> {
    if d == 0 {
        return Err(Error::domain("prefix checkpoint must be positive"));
    }
    let events20 = qualifying_events(trace, 20.0, Some(d));
    let rate = 1000.0 * events20.len() as f64 / d as f64;
    let depths20: Vec<u64> = events20.iter().map(|e| e.depth).collect();
    let stats20 = burst_stats(
        &burst_partition(&depths20, gap).expect("depths from one trace strictly increase"),
    );

    let depths40: Vec<u64> = qualifying_events(trace, 40.0, Some(d))
        .iter()
        .map(|e| e.depth)
        .collect();
    let partition40 =
        burst_partition(&depths40, gap).expect("depths from one trace strictly increase");
    let stats40 = burst_stats(&partition40);

    let h50 = qualifying_events(trace, 50.0, Some(d))
        .first()
        .map(|e| e.depth)
        .unwrap_or(d);
    let b40 = partition40
        .bursts
        .iter()
        .find(|b| b.len() >= 2)
        .map(|b| b[0])
        .unwrap_or(d);

    Ok([
        rate,
        stats20.s2,
        stats40.rho,
        stats20.m_max as f64,
        h50 as f64,
        b40 as f64,
    ])
}

/// Outcome of one checkpoint evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OnlineAction {
    Continue,
    Flag,
}

/// Replay the prefix-causal decision rule at checkpoint `d`.
///
/// At d = 2000 a trace with fewer than two T>=20 events is never flagged,
/// regardless of model or cutoff. The model must not have been trained on
/// this trace's question.
pub fn online_decide(
    trace: &Trace,
    d: u64,
    model: &FilterModel,
    gap: u64,
) -> Result<OnlineAction> {
    if model.trained_on.contains(&trace.question_id) {
        return Err(Error::Leakage {
            question_id: trace.question_id.clone(),
        });
    }
    if d == GUARD_DEPTH && event_count(trace, 20.0, Some(d)) < GUARD_MIN_EVENTS {
        return Ok(OnlineAction::Continue);
    }
    let features = prefix_features(trace, d, gap)?;
    let p_wrong = model.score(&features)?;
    if p_wrong >= model.cutoff {
        Ok(OnlineAction::Flag)
    } else {
        Ok(OnlineAction::Continue)
    }
}

/// Keep/drop decision for one trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub trace_id: String,
    pub question_id: String,
    pub keep: bool,
    pub score: Option<f64>,
    /// Depth at which generation stops for depth-rule drops (hard cutoffs
    /// and flagged online traces). Completed learned drops retain nothing.
    pub stop_depth: Option<u64>,
}

/// Per-question evaluation row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionRow {
    pub question_id: String,
    pub total: usize,
    pub kept: usize,
    pub kept_correct: usize,
    pub retained_accuracy: Option<f64>,
    pub drop_rate: f64,
}

/// Retained accuracy, drop rate, word savings, and per-question rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: String,
    pub split: String,
    pub depth_or_limit: Option<u64>,
    pub retained_acc_pooled: Option<f64>,
    pub retained_acc_perq: Option<f64>,
    pub drop_rate: f64,
    pub word_save: f64,
    pub per_question: Vec<QuestionRow>,
}

/// Aggregate decisions into an [`EvalReport`]. Words retained by a dropped
/// trace are capped at its stop depth (zero without one), so depth-rule
/// drops only save the words beyond the stopping point.
pub fn retained_metrics(
    decisions: &[Decision],
    corpus: &Corpus,
    method: impl Into<String>,
    depth_or_limit: Option<u64>,
) -> Result<EvalReport> {
    if decisions.len() != corpus.traces.len() {
        return Err(Error::domain(format!(
            "expected one decision per trace: {} decisions for {} traces",
            decisions.len(),
            corpus.traces.len()
        )));
    }
    let by_id: BTreeMap<&str, &Decision> =
        decisions.iter().map(|d| (d.trace_id.as_str(), d)).collect();

    let mut kept = 0usize;
    let mut kept_correct = 0usize;
    let mut total_words = 0u64;
    let mut retained_words = 0u64;
    let mut per_question: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();

    for trace in &corpus.traces {
        let decision = by_id.get(trace.trace_id.as_str()).ok_or_else(|| {
            Error::domain(format!("no decision for trace {}", trace.trace_id))
        })?;
        total_words += trace.total_words;
        let entry = per_question.entry(trace.question_id.as_str()).or_insert((0, 0, 0));
        entry.0 += 1;
        if decision.keep {
            kept += 1;
            retained_words += trace.total_words;
            entry.1 += 1;
            if trace.correct {
                kept_correct += 1;
                entry.2 += 1;
            }
        } else {
            retained_words += decision.stop_depth.unwrap_or(0).min(trace.total_words);
        }
    }

    let total = corpus.traces.len();
    let rows: Vec<QuestionRow> = per_question
        .into_iter()
        .map(|(question_id, (q_total, q_kept, q_kept_correct))| QuestionRow {
            question_id: question_id.to_string(),
            total: q_total,
            kept: q_kept,
            kept_correct: q_kept_correct,
            retained_accuracy: (q_kept > 0).then(|| q_kept_correct as f64 / q_kept as f64),
            drop_rate: (q_total - q_kept) as f64 / q_total as f64,
        })
        .collect();

    let retained_acc_pooled = (kept > 0).then(|| kept_correct as f64 / kept as f64);
    let retained_acc_perq = (kept > 0).then(|| {
        rows.iter()
            .map(|r| r.retained_accuracy.unwrap_or(0.0))
            .sum::<f64>()
            / rows.len() as f64
    });
    let word_save = if total_words == 0 {
        0.0
    } else {
        1.0 - retained_words as f64 / total_words as f64
    };

    Ok(EvalReport {
        method: method.into(),
        split: corpus.name.clone(),
        depth_or_limit,
        retained_acc_pooled,
        retained_acc_perq,
        drop_rate: (total - kept) as f64 / total as f64,
        word_save,
        per_question: rows,
    })
}

/// Evaluation output: the report plus the decisions and per-fold models
/// needed for leakage audits.
#[derive(Debug, Clone)]
pub struct LoqoOutcome {
    pub report: EvalReport,
    pub decisions: Vec<Decision>,
    /// Held-out question (or "question@depth" in multi-checkpoint mode)
    /// mapped to the model scored against it.
    pub fold_models: BTreeMap<String, FilterModel>,
}

/// Per-trace cached p(50) profiles used to assemble direction vectors
/// without recomputing bins for every fold.
struct ProfileCache {
    entries: Vec<(bool, String, [f64; BINS])>,
}

impl ProfileCache {
    fn build(corpus: &Corpus) -> Result<ProfileCache> {
        let mut entries = Vec::with_capacity(corpus.traces.len());
        for trace in &corpus.traces {
            let probs = if trace.total_words == 0 {
                [0.0; BINS]
            } else {
                bin_profile(trace, 50.0)?.probs
            };
            entries.push((trace.correct, trace.question_id.clone(), probs));
        }
        Ok(ProfileCache { entries })
    }

    /// Wrong-minus-correct mean profile over traces whose question is not
    /// in `excluded`; `None` when either class is empty.
    fn direction(&self, excluded: &[&str]) -> Option<[f64; BINS]> {
        let mut correct_sum = [0.0f64; BINS];
        let mut wrong_sum = [0.0f64; BINS];
        let mut correct_n = 0usize;
        let mut wrong_n = 0usize;
        for (correct, question, probs) in &self.entries {
            if excluded.contains(&question.as_str()) {
                continue;
            }
            let (sum, n) = if *correct {
                (&mut correct_sum, &mut correct_n)
            } else {
                (&mut wrong_sum, &mut wrong_n)
            };
            for b in 0..BINS {
                sum[b] += probs[b];
            }
            *n += 1;
        }
        if correct_n == 0 || wrong_n == 0 {
            return None;
        }
        let mut u = [0.0f64; BINS];
        for b in 0..BINS {
            u[b] = wrong_sum[b] / wrong_n as f64 - correct_sum[b] / correct_n as f64;
        }
        Some(u)
    }
}

fn completed_features(
    spec: &FilterSpec,
    trace: &Trace,
    config: &EvalConfig,
    cache: &ProfileCache,
    fold_question: &str,
) -> Result<Vec<f64>> {
    let features = match spec {
        FilterSpec::CompletedHybrid => {
            // every trace's similarity excludes its own question on top of
            // the fold holdout
            let direction = cache.direction(&[fold_question, trace.question_id.as_str()]);
            hybrid_features_with(trace, direction.as_ref(), config.gap).to_vec()
        }
        FilterSpec::BurstOnly => burst_only_features(trace, config.gap).to_vec(),
        FilterSpec::RateOnly => rate_only_features(trace).to_vec(),
        FilterSpec::CountOnly => count_only_features(trace).to_vec(),
        FilterSpec::OnlinePrefix { depth } => prefix_features(trace, *depth, config.gap)?.to_vec(),
        FilterSpec::HardCutoff { .. } => Vec::new(),
    };
    Ok(features)
}

/// Fit standardization, coefficients, and cutoff on every question except
/// `held_out`.
fn fit_fold_model(
    corpus: &Corpus,
    spec: &FilterSpec,
    config: &EvalConfig,
    cache: &ProfileCache,
    held_out: &str,
) -> Result<FilterModel> {
    let training: Vec<&Trace> = corpus
        .traces
        .iter()
        .filter(|t| t.question_id != held_out)
        .collect();
    let mut features = Vec::with_capacity(training.len());
    let mut labels = Vec::with_capacity(training.len());
    for trace in &training {
        features.push(completed_features(spec, trace, config, cache, held_out)?);
        labels.push(!trace.correct);
    }
    let (mu, sigma) = standardization_params(&features);
    let standardized: Vec<Vec<f64>> = features
        .iter()
        .map(|row| standardize(row, &mu, &sigma).expect("dimensions match"))
        .collect();
    let beta = fit_logistic(&standardized, &labels, config.ridge)?;

    let mut groups: BTreeMap<&str, Vec<(f64, bool)>> = BTreeMap::new();
    for (trace, z) in training.iter().zip(standardized.iter()) {
        let mut logit = beta[0];
        for (j, zj) in z.iter().enumerate() {
            logit += beta[j + 1] * zj;
        }
        groups
            .entry(trace.question_id.as_str())
            .or_default()
            .push((sigmoid(logit), trace.correct));
    }
    let cutoff = select_cutoff(
        &groups
            .into_iter()
            .map(|(question_id, scores)| QuestionScores {
                question_id: question_id.to_string(),
                scores,
            })
            .collect::<Vec<_>>(),
    )?;

    let trained_on: BTreeSet<String> = training.iter().map(|t| t.question_id.clone()).collect();
    Ok(FilterModel {
        feature_names: spec.feature_names(),
        mu,
        sigma,
        beta,
        cutoff,
        trained_on,
    })
}

fn assert_no_leakage(model: &FilterModel, question: &str) -> Result<()> {
    if model.trained_on.contains(question) {
        return Err(Error::Leakage {
            question_id: question.to_string(),
        });
    }
    Ok(())
}

/// Evaluate one filter under the leave-one-question protocol: for every
/// question, standardization, fitting, cutoff selection, and any direction
/// vectors are built from the other questions only.
pub fn loqo_evaluate(corpus: &Corpus, spec: &FilterSpec, config: &EvalConfig) -> Result<LoqoOutcome> {
    spec.validate(&config.checkpoints)?;
    if corpus.traces.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    if let FilterSpec::HardCutoff { limit } = spec {
        let decisions: Vec<Decision> = corpus
            .traces
            .iter()
            .map(|trace| {
                let keep = hard_cutoff(trace, *limit);
                Decision {
                    trace_id: trace.trace_id.clone(),
                    question_id: trace.question_id.clone(),
                    keep,
                    score: None,
                    stop_depth: if keep {
                        None
                    } else {
                        limit.map(|l| l.min(trace.total_words))
                    },
                }
            })
            .collect();
        let report = retained_metrics(&decisions, corpus, spec.method_name(), *limit)?;
        return Ok(LoqoOutcome {
            report,
            decisions,
            fold_models: BTreeMap::new(),
        });
    }

    if corpus.questions.len() < 2 {
        return Err(Error::domain(
            "learned filters need at least two questions for leave-one-question evaluation",
        ));
    }

    let cache = ProfileCache::build(corpus)?;
    let mut decisions = Vec::with_capacity(corpus.traces.len());
    let mut fold_models = BTreeMap::new();
    for question in &corpus.questions {
        let model = fit_fold_model(corpus, spec, config, &cache, question)?;
        for trace in corpus.traces.iter().filter(|t| &t.question_id == question) {
            assert_no_leakage(&model, &trace.question_id)?;
            let decision = match spec {
                FilterSpec::OnlinePrefix { depth } => {
                    let action = online_decide(trace, *depth, &model, config.gap)?;
                    let score = if *depth == GUARD_DEPTH
                        && event_count(trace, 20.0, Some(*depth)) < GUARD_MIN_EVENTS
                    {
                        None
                    } else {
                        Some(model.score(&prefix_features(trace, *depth, config.gap)?)?)
                    };
                    let keep = action == OnlineAction::Continue;
                    Decision {
                        trace_id: trace.trace_id.clone(),
                        question_id: trace.question_id.clone(),
                        keep,
                        score,
                        stop_depth: (!keep).then(|| (*depth).min(trace.total_words)),
                    }
                }
                _ => {
                    let features = completed_features(spec, trace, config, &cache, question)?;
                    let score = model.score(&features)?;
                    Decision {
                        trace_id: trace.trace_id.clone(),
                        question_id: trace.question_id.clone(),
                        keep: model.keeps(score),
                        score: Some(score),
                        stop_depth: None,
                    }
                }
            };
            decisions.push(decision);
        }
        fold_models.insert(question.clone(), model);
    }

    let report = retained_metrics(&decisions, corpus, spec.method_name(), spec.depth_or_limit())?;
    Ok(LoqoOutcome {
        report,
        decisions,
        fold_models,
    })
}

/// Multi-checkpoint replay: a trace is dropped at the first checkpoint that
/// flags it, with per-depth models trained under the same holdout.
pub fn loqo_evaluate_multi(
    corpus: &Corpus,
    depths: &[u64],
    config: &EvalConfig,
) -> Result<LoqoOutcome> {
    if corpus.traces.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if corpus.questions.len() < 2 {
        return Err(Error::domain(
            "learned filters need at least two questions for leave-one-question evaluation",
        ));
    }
    let mut sorted_depths = depths.to_vec();
    sorted_depths.sort_unstable();
    sorted_depths.dedup();
    if sorted_depths.is_empty() || sorted_depths[0] == 0 {
        return Err(Error::domain("multi-checkpoint replay needs positive depths"));
    }

    let cache = ProfileCache::build(corpus)?;
    let mut decisions = Vec::with_capacity(corpus.traces.len());
    let mut fold_models = BTreeMap::new();
    for question in &corpus.questions {
        let mut models = Vec::with_capacity(sorted_depths.len());
        for &depth in &sorted_depths {
            let spec = FilterSpec::OnlinePrefix { depth };
            let model = fit_fold_model(corpus, &spec, config, &cache, question)?;
            fold_models.insert(format!("{question}@{depth}"), model.clone());
            models.push((depth, model));
        }
        for trace in corpus.traces.iter().filter(|t| &t.question_id == question) {
            let mut flagged_at = None;
            let mut flag_score = None;
            for (depth, model) in &models {
                assert_no_leakage(model, &trace.question_id)?;
                if online_decide(trace, *depth, model, config.gap)? == OnlineAction::Flag {
                    flagged_at = Some(*depth);
                    flag_score = Some(model.score(&prefix_features(trace, *depth, config.gap)?)?);
                    break;
                }
            }
            decisions.push(Decision {
                trace_id: trace.trace_id.clone(),
                question_id: trace.question_id.clone(),
                keep: flagged_at.is_none(),
                score: flag_score,
                stop_depth: flagged_at.map(|d| d.min(trace.total_words)),
            });
        }
    }
    let report = retained_metrics(&decisions, corpus, "online_prefix_multi", None)?;
    Ok(LoqoOutcome {
        report,
        decisions,
        fold_models,
    })
}
