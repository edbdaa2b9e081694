//! Plot-ready CSV and JSON artifact writers. All numbers use fixed
//! formatting so identical inputs yield byte-identical files.

use std::io::Write;

use crate::corpus::{Class, Corpus, CorpusSummary};
use crate::error::Result;
use crate::events::{class_means, trace_burst_stats};
use crate::filters::EvalReport;
use crate::profiles::{
    burst_start_profile, first_event_depth, pooled_bin_probability, severity_buckets,
};
use crate::stats::LrResult;
use crate::util;
use crate::BINS;

/// Percent with one decimal: 0.806 -> "80.6".
pub fn format_percent(fraction: f64) -> String {
    format!("{:.1}", fraction * 100.0)
}

/// Three-decimal probability / summary value.
pub fn format_prob(value: f64) -> String {
    format!("{value:.3}")
}

/// `digits` significant digits, switching to scientific notation for
/// very small or very large magnitudes.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let magnitude = value.abs().log10().floor() as i32;
    if !(-4..6).contains(&magnitude) {
        format!("{:.*e}", digits.saturating_sub(1), value)
    } else {
        let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
        format!("{value:.decimals$}")
    }
}

fn option_percent(value: Option<f64>) -> String {
    value.map(format_percent).unwrap_or_default()
}

/// Per-trace burst statistics at each threshold:
/// trace_id, question_id, correct, tau, gap, n, J, K2, K3, S2, S3, rho, m_max.
pub fn write_burst_stats_csv<W: Write>(
    writer: W,
    corpus: &Corpus,
    taus: &[f64],
    gap: u64,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "trace_id",
        "question_id",
        "correct",
        "tau",
        "gap",
        "n",
        "J",
        "K2",
        "K3",
        "S2",
        "S3",
        "rho",
        "m_max",
    ])?;
    for &tau in taus {
        for trace in &corpus.traces {
            let stats = trace_burst_stats(trace, tau, gap, None)?;
            csv.write_record([
                trace.trace_id.as_str(),
                trace.question_id.as_str(),
                if trace.correct { "true" } else { "false" },
                &format!("{tau}"),
                &format!("{gap}"),
                &stats.n.to_string(),
                &stats.j.to_string(),
                &stats.k2.to_string(),
                &stats.k3.to_string(),
                &format_prob(stats.s2),
                &format_prob(stats.s3),
                &format_prob(stats.rho),
                &stats.m_max.to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// Class means of the burst statistics over a (tau, gap) grid.
pub fn write_class_means_csv<W: Write>(
    writer: W,
    corpus: &Corpus,
    taus: &[f64],
    gaps: &[u64],
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "tau", "gap", "class", "traces", "n", "J", "K2", "K3", "S2", "S3", "rho", "m_max",
    ])?;
    for &tau in taus {
        for &gap in gaps {
            let means = class_means(corpus, tau, gap)?;
            for class in Class::BOTH {
                if let Some(mean) = means.class(class) {
                    csv.write_record([
                        &format!("{tau}"),
                        &format!("{gap}"),
                        class.as_str(),
                        &mean.traces.to_string(),
                        &format_prob(mean.n),
                        &format_prob(mean.j),
                        &format_prob(mean.k2),
                        &format_prob(mean.k3),
                        &format_prob(mean.s2),
                        &format_prob(mean.s3),
                        &format_prob(mean.rho),
                        &format_prob(mean.m_max),
                    ])?;
                }
            }
        }
    }
    csv.flush()?;
    Ok(())
}

/// Event rate and median first qualifying depth per threshold and class.
pub fn write_timing_csv<W: Write>(writer: W, corpus: &Corpus, taus: &[f64]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["tau", "class", "traces", "event_rate", "median_first_depth"])?;
    for &tau in taus {
        for class in Class::BOTH {
            let traces: Vec<&crate::Trace> = corpus.traces_in_class(class).collect();
            if traces.is_empty() {
                continue;
            }
            let with_events = traces
                .iter()
                .filter(|t| first_event_depth(t, tau).is_some())
                .count();
            let mut firsts: Vec<f64> = traces
                .iter()
                .filter_map(|t| first_event_depth(t, tau).map(|d| d as f64))
                .collect();
            let median = util::median(&mut firsts);
            csv.write_record([
                &format!("{tau}"),
                class.as_str(),
                &traces.len().to_string(),
                &format_percent(with_events as f64 / traces.len() as f64),
                &median.map(|m| format!("{m:.1}")).unwrap_or_default(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// Pooled per-bin probabilities with the per-class support filter:
/// class, tau, bin, C, M, p, reported.
pub fn write_pooled_profiles_csv<W: Write>(
    writer: W,
    corpus: &Corpus,
    taus: &[f64],
    min_support_correct: u64,
    min_support_wrong: u64,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["class", "tau", "bin", "C", "M", "p", "reported"])?;
    let traces: Vec<&crate::Trace> = corpus.traces.iter().collect();
    for &tau in taus {
        for class in Class::BOTH {
            let min_support = match class {
                Class::Correct => min_support_correct,
                Class::Wrong => min_support_wrong,
            };
            let pooled = pooled_bin_probability(&traces, tau, class, min_support)?;
            for b in 0..BINS {
                csv.write_record([
                    class.as_str(),
                    &format!("{tau}"),
                    &(b + 1).to_string(),
                    &pooled.counts[b].to_string(),
                    &pooled.supports[b].to_string(),
                    &pooled.probs[b].map(format_prob).unwrap_or_default(),
                    if pooled.probs[b].is_some() { "true" } else { "false" },
                ])?;
            }
        }
    }
    csv.flush()?;
    Ok(())
}

/// Class-mean multi-burst start counts per progress bin.
pub fn write_burst_start_csv<W: Write>(
    writer: W,
    corpus: &Corpus,
    taus: &[f64],
    gap: u64,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["class", "tau", "gap", "bin", "mean_count"])?;
    for &tau in taus {
        for class in Class::BOTH {
            let traces: Vec<&crate::Trace> = corpus.traces_in_class(class).collect();
            if traces.is_empty() {
                continue;
            }
            let mut sums = [0.0f64; BINS];
            for trace in &traces {
                let bins = burst_start_profile(trace, tau, gap);
                for b in 0..BINS {
                    sums[b] += bins[b] as f64;
                }
            }
            for b in 0..BINS {
                csv.write_record([
                    class.as_str(),
                    &format!("{tau}"),
                    &gap.to_string(),
                    &(b + 1).to_string(),
                    &format_prob(sums[b] / traces.len() as f64),
                ])?;
            }
        }
    }
    csv.flush()?;
    Ok(())
}

/// Severity buckets: lo, hi, segments, correct, wrong, median_score,
/// median_words.
pub fn write_severity_csv<W: Write>(writer: W, corpus: &Corpus, bucket_width: f64) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "lo",
        "hi",
        "segments",
        "correct",
        "wrong",
        "median_score",
        "median_words",
    ])?;
    for bucket in severity_buckets(corpus, bucket_width) {
        csv.write_record([
            &format!("{:.0}", bucket.lo),
            &format!("{:.0}", bucket.hi),
            &bucket.segment_count.to_string(),
            &bucket.correct_count.to_string(),
            &bucket.wrong_count.to_string(),
            &format!("{:.1}", bucket.median_score),
            &format!("{:.1}", bucket.median_words),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn summary_to_json(summary: &CorpusSummary) -> Result<String> {
    Ok(serde_json::to_string_pretty(summary)?)
}

/// Flat evaluation table: method, split, depth_or_limit,
/// retained_acc_pooled, retained_acc_perq, drop_rate, word_save.
pub fn write_eval_reports_csv<W: Write>(writer: W, reports: &[EvalReport]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "method",
        "split",
        "depth_or_limit",
        "retained_acc_pooled",
        "retained_acc_perq",
        "drop_rate",
        "word_save",
    ])?;
    for report in reports {
        csv.write_record([
            report.method.as_str(),
            report.split.as_str(),
            &report
                .depth_or_limit
                .map(|v| v.to_string())
                .unwrap_or_default(),
            &option_percent(report.retained_acc_pooled),
            &option_percent(report.retained_acc_perq),
            &format_percent(report.drop_rate),
            &format_percent(report.word_save),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn eval_reports_to_json(reports: &[EvalReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

/// One prefix-eval grid row: matched hard cutoff versus the online policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixGridRow {
    pub depth: u64,
    pub hard_acc: Option<f64>,
    pub hard_drop: f64,
    pub online_acc: Option<f64>,
    pub online_drop: f64,
    pub online_word_save: f64,
}

pub fn write_prefix_grid_csv<W: Write>(writer: W, rows: &[PrefixGridRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "depth",
        "hard_cutoff_acc",
        "hard_cutoff_drop",
        "online_acc",
        "online_drop",
        "online_word_save",
    ])?;
    for row in rows {
        csv.write_record([
            &row.depth.to_string(),
            &option_percent(row.hard_acc),
            &format_percent(row.hard_drop),
            &option_percent(row.online_acc),
            &format_percent(row.online_drop),
            &format_percent(row.online_word_save),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Likelihood-ratio test table rows.
pub fn write_lr_results_csv<W: Write>(
    writer: W,
    rows: &[(u64, f64, LrResult)],
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["depth", "tau", "lr_stat", "df", "p_value"])?;
    for (depth, tau, result) in rows {
        csv.write_record([
            &depth.to_string(),
            &format!("{tau}"),
            &format_prob(result.stat),
            &result.df.to_string(),
            &format_significant(result.p_value, 4),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Leakage-free per-trace features for downstream analysis: burden, burst,
/// and profile-shape columns (similarity is omitted because it depends on
/// the evaluation fold).
pub fn write_feature_dump_csv<W: Write>(writer: W, corpus: &Corpus, gap: u64) -> Result<()> {
    use crate::events::event_count;
    use crate::profiles::{bin_profile, late_mean, profile_slope};

    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "trace_id",
        "question_id",
        "correct",
        "total_words",
        "rate_20",
        "count_20",
        "s2_20",
        "rho_40",
        "m_max_20",
        "prob_slope_20",
        "prob_late_mean_50",
    ])?;
    for trace in &corpus.traces {
        let stats20 = trace_burst_stats(trace, 20.0, gap, None)?;
        let stats40 = trace_burst_stats(trace, 40.0, gap, None)?;
        let rate = if trace.total_words == 0 {
            0.0
        } else {
            1000.0 * event_count(trace, 20.0, None) as f64 / trace.total_words as f64
        };
        let (slope, late) = if trace.total_words == 0 {
            (0.0, 0.0)
        } else {
            let p20 = bin_profile(trace, 20.0)?;
            let p50 = bin_profile(trace, 50.0)?;
            (profile_slope(&p20), late_mean(&p50))
        };
        csv.write_record([
            trace.trace_id.as_str(),
            trace.question_id.as_str(),
            if trace.correct { "true" } else { "false" },
            &trace.total_words.to_string(),
            &format_prob(rate),
            &event_count(trace, 20.0, None).to_string(),
            &format_prob(stats20.s2),
            &format_prob(stats40.rho),
            &stats20.m_max.to_string(),
            &format_prob(slope),
            &format_prob(late),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
