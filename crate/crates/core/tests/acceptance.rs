//! Acceptance suite. Each test prints one pass/fail line; tolerances and
//! runtime budgets are pinned in the assertions.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use burstlab_core::corpus::{corpus_summary, Class, Corpus};
use burstlab_core::events::{burst_partition, burst_stats, event_count, qualifying_events};
use burstlab_core::filters::{
    hybrid_features, loqo_evaluate, online_decide, prefix_features, EvalConfig, FilterSpec,
    OnlineAction, DEFAULT_CHECKPOINTS,
};
use burstlab_core::profiles::{
    bin_profile, burst_start_profile, late_mean, profile_similarity, profile_slope,
    wrong_direction_vector,
};
use burstlab_core::report::{
    write_burst_stats_csv, write_eval_reports_csv, write_pooled_profiles_csv, write_timing_csv,
};
use burstlab_core::stats::{
    chi_square_tail, fit_logistic_full, gradient, log_likelihood, lr_test, sigmoid, FilterModel,
};
use burstlab_core::synth::{scored_trace, synth_corpus, SynthParams};
use burstlab_core::Trace;

fn random_parts(rng: &mut ChaCha8Rng, max_segments: usize) -> Vec<(u64, Option<f64>)> {
    let n = rng.gen_range(1..=max_segments);
    (0..n)
        .map(|_| {
            let wc = rng.gen_range(10..=80u64);
            let score = if rng.gen_bool(0.8) {
                Some((rng.gen_range(0.0..=100.0f64) * 10.0).round() / 10.0)
            } else {
                None
            };
            (wc, score)
        })
        .collect()
}

#[test]
fn acceptance_01_chi_square_anchor() {
    // warm-up excluded from the timed runs
    let _ = chi_square_tail(1.0, 3).unwrap();
    let start = Instant::now();
    let p1 = chi_square_tail(16.133, 3).unwrap();
    let p2 = chi_square_tail(40.969, 3).unwrap();
    let elapsed = start.elapsed();

    assert!((p1 - 0.001065).abs() <= 1e-6, "p(16.133, 3) = {p1}");
    assert!((p2 - 6.64e-9).abs() / 6.64e-9 <= 0.02, "p(40.969, 3) = {p2}");
    assert!(elapsed.as_micros() < 1000, "runtime {elapsed:?} exceeded 1 ms");
    println!("ACCEPTANCE 01 chi-square anchor: PASS (p1={p1:.6}, p2={p2:.3e}, {elapsed:?})");
}

/// Independent reference: split the sorted list at every gap > g.
fn split_at_large_gaps(depths: &[u64], gap: u64) -> Vec<Vec<u64>> {
    let breaks: Vec<usize> = (1..depths.len())
        .filter(|&i| depths[i] - depths[i - 1] > gap)
        .collect();
    let mut chunks = Vec::new();
    let mut start = 0;
    for &b in &breaks {
        chunks.push(depths[start..b].to_vec());
        start = b;
    }
    if start < depths.len() {
        chunks.push(depths[start..].to_vec());
    }
    chunks
}

#[test]
fn acceptance_02_burst_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    for case in 0..10_000 {
        let len = rng.gen_range(0..=50usize);
        let mut set = BTreeSet::new();
        while set.len() < len {
            set.insert(rng.gen_range(0..50_000u64));
        }
        let depths: Vec<u64> = set.into_iter().collect();
        let gap = rng.gen_range(1..=2000u64);
        let greedy = burst_partition(&depths, gap).unwrap();
        assert_eq!(
            greedy.bursts,
            split_at_large_gaps(&depths, gap),
            "mismatch on case {case} (gap {gap})"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "runtime {elapsed:?} exceeded 5 s");
    println!("ACCEPTANCE 02 burst oracle equivalence: PASS (10000 cases, {elapsed:?})");
}

#[test]
fn acceptance_03_zero_event_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        // scores stay strictly below the threshold
        let parts: Vec<(u64, Option<f64>)> = (0..rng.gen_range(1..=60usize))
            .map(|_| {
                let wc = rng.gen_range(5..=80u64);
                let score = if rng.gen_bool(0.7) {
                    Some(rng.gen_range(0.0..19.9f64))
                } else {
                    None
                };
                (wc, score)
            })
            .collect();
        let trace = scored_trace("t", "q", true, &parts);
        for gap in [250, 500, 1000] {
            let depths: Vec<u64> = qualifying_events(&trace, 20.0, None)
                .iter()
                .map(|e| e.depth)
                .collect();
            let stats = burst_stats(&burst_partition(&depths, gap).unwrap());
            assert_eq!(stats.n, 0);
            assert_eq!(stats.j, 0);
            assert_eq!(stats.k2, 0);
            assert_eq!(stats.k3, 0);
            assert_eq!(stats.s2, 0.0);
            assert_eq!(stats.s3, 0.0);
            assert_eq!(stats.rho, 0.0);
            assert_eq!(stats.m_max, 0);
        }
    }
    println!("ACCEPTANCE 03 zero-event rule: PASS (1000 traces, all fields exactly 0)");
}

fn random_prefix_model(rng: &mut ChaCha8Rng, held_out: &str) -> FilterModel {
    let spec = FilterSpec::OnlinePrefix { depth: 2000 };
    FilterModel {
        feature_names: spec.feature_names(),
        mu: (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        sigma: (0..6).map(|_| rng.gen_range(0.1..3.0)).collect(),
        beta: (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        cutoff: rng.gen_range(0.0..=1.0),
        trained_on: ["qa", "qb", "qc"]
            .iter()
            .filter(|q| **q != held_out)
            .map(|q| q.to_string())
            .collect(),
    }
}

#[test]
fn acceptance_04_prefix_causality() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0usize;
    for _ in 0..1000 {
        let parts = random_parts(&mut rng, 300);
        let base = scored_trace("t", "held", true, &parts);
        let model = random_prefix_model(&mut rng, "held");
        for d in DEFAULT_CHECKPOINTS {
            // rescore everything at depth >= d, pad to the checkpoint with
            // an unscored filler, then append new scored segments
            let mut depth = 0u64;
            let mut mutated: Vec<(u64, Option<f64>)> = Vec::new();
            for &(wc, score) in &parts {
                mutated.push((wc, if depth >= d { Some(99.0) } else { score }));
                depth += wc;
            }
            if depth < d {
                mutated.push((d - depth, None));
            }
            mutated.push((rng.gen_range(100..3000), Some(99.0)));
            let mutated = scored_trace("t", "held", true, &mutated);

            if prefix_features(&base, d, 500).unwrap() != prefix_features(&mutated, d, 500).unwrap()
            {
                violations += 1;
            }
            if online_decide(&base, d, &model, 500).unwrap()
                != online_decide(&mutated, d, &model, 500).unwrap()
            {
                violations += 1;
            }
        }
    }
    assert_eq!(violations, 0);
    println!("ACCEPTANCE 04 prefix causality: PASS (1000 traces x 4 checkpoints, 0 violations)");
}

#[test]
fn acceptance_05_guard_at_2k() {
    let config = EvalConfig::default();
    let mut models = Vec::new();
    for seed in 100..105 {
        let params = SynthParams {
            seed,
            questions: 10,
            traces_per_question: 8,
            ..SynthParams::default()
        };
        let corpus = synth_corpus(&params).unwrap();
        let outcome =
            loqo_evaluate(&corpus, &FilterSpec::OnlinePrefix { depth: 2000 }, &config).unwrap();
        models.extend(outcome.fold_models.into_values());
    }
    assert_eq!(models.len(), 50);

    let eval_params = SynthParams {
        seed: 999,
        questions: 6,
        traces_per_question: 20,
        ..SynthParams::default()
    };
    let eval_corpus = synth_corpus(&eval_params).unwrap();
    let guarded: Vec<Trace> = eval_corpus
        .traces
        .iter()
        .filter(|t| event_count(t, 20.0, Some(2000)) < 2)
        .map(|t| {
            let mut t = t.clone();
            t.question_id = "held-out-question".to_string();
            t
        })
        .collect();
    assert!(
        guarded.len() >= 20,
        "need a meaningful guarded population, got {}",
        guarded.len()
    );
    for model in &models {
        for trace in &guarded {
            assert_eq!(
                online_decide(trace, 2000, model, config.gap).unwrap(),
                OnlineAction::Continue,
                "guarded trace {} was flagged",
                trace.trace_id
            );
        }
    }
    println!(
        "ACCEPTANCE 05 2k guard: PASS ({} models x {} guarded traces, none flagged)",
        models.len(),
        guarded.len()
    );
}

fn finite_difference_gradient(
    x: &[Vec<f64>],
    y: &[bool],
    beta: &[f64],
    ridge: f64,
    step: f64,
) -> Vec<f64> {
    let penalized = |b: &[f64]| -> f64 {
        let penalty: f64 = b[1..].iter().map(|v| v * v).sum();
        log_likelihood(x, y, b) - ridge * penalty
    };
    (0..beta.len())
        .map(|k| {
            let mut plus = beta.to_vec();
            plus[k] += step;
            let mut minus = beta.to_vec();
            minus[k] -= step;
            (penalized(&plus) - penalized(&minus)) / (2.0 * step)
        })
        .collect()
}

#[test]
fn acceptance_06_logistic_fit_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..100 {
        let n = rng.gen_range(20..=120usize);
        let d = rng.gen_range(1..=5usize);
        let ridge = [0.0, 1e-4, 1e-2][case % 3];
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let mut y: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        // unpenalized fits need both labels present
        y[0] = true;
        y[1] = false;

        let fit = fit_logistic_full(&x, &y, ridge).unwrap();
        assert!(
            fit.grad_norm <= 1e-8,
            "case {case}: gradient norm {} at optimum",
            fit.grad_norm
        );
        let analytic = gradient(&x, &y, &fit.beta, ridge);
        let numeric = finite_difference_gradient(&x, &y, &fit.beta, ridge, 1e-6);
        let max_diff = analytic
            .iter()
            .zip(numeric.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let scale = numeric.iter().map(|v| v.abs()).fold(1.0f64, f64::max);
        assert!(
            max_diff <= 1e-5 * scale,
            "case {case}: finite-difference disagreement {max_diff:e} (scale {scale:e})"
        );

        // same check away from the optimum, where gradients are large
        let probe: Vec<f64> = (0..=d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let analytic = gradient(&x, &y, &probe, ridge);
        let numeric = finite_difference_gradient(&x, &y, &probe, ridge, 1e-6);
        for (a, b) in analytic.iter().zip(numeric.iter()) {
            assert!(
                (a - b).abs() <= 1e-5 * b.abs().max(1.0),
                "case {case}: probe gradient mismatch {a} vs {b}"
            );
        }
    }

    // separable 1-D fixture reaches training accuracy 1.0
    let x: Vec<Vec<f64>> = (0..20).map(|i| vec![if i < 10 { -1.0 } else { 1.0 }]).collect();
    let y: Vec<bool> = (0..20).map(|i| i >= 10).collect();
    let fit = fit_logistic_full(&x, &y, 1e-4).unwrap();
    let correct = x
        .iter()
        .zip(y.iter())
        .filter(|(row, &label)| (sigmoid(fit.beta[0] + fit.beta[1] * row[0]) >= 0.5) == label)
        .count();
    assert_eq!(correct, 20);
    println!("ACCEPTANCE 06 logistic fit: PASS (100 instances, grad <= 1e-8, FD agreement <= 1e-5)");
}

#[test]
fn acceptance_07_lr_null_calibration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let start = Instant::now();
    let replicates = 200;
    let rows = 2000;
    let mut p_values = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let mut reduced = Vec::with_capacity(rows);
        let mut full = Vec::with_capacity(rows);
        let mut y = Vec::with_capacity(rows);
        for _ in 0..rows {
            let x1: f64 = rng.gen_range(-1.0..1.0);
            let x2: f64 = rng.gen_range(-1.0..1.0);
            let noise: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = sigmoid(0.8 * x1 - 0.5 * x2);
            y.push(rng.gen_bool(p));
            reduced.push(vec![x1, x2]);
            full.push(vec![x1, x2, noise[0], noise[1], noise[2]]);
        }
        let result = lr_test(&full, &reduced, &y).unwrap();
        assert_eq!(result.df, 3);
        assert!(result.stat >= -1e-9);
        p_values.push(result.p_value);
    }
    p_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = p_values.len() as f64;
    let ks = p_values
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let upper = ((i + 1) as f64 / n - p).abs();
            let lower = (p - i as f64 / n).abs();
            upper.max(lower)
        })
        .fold(0.0f64, f64::max);
    let elapsed = start.elapsed();
    assert!(ks < 0.1, "KS distance {ks} >= 0.1");
    assert!(elapsed.as_secs_f64() < 60.0, "runtime {elapsed:?} exceeded 60 s");
    println!("ACCEPTANCE 07 LR null calibration: PASS (KS={ks:.4}, {elapsed:?})");
}

#[test]
fn acceptance_08_leakage_audit() {
    let params = SynthParams {
        seed: 8,
        questions: 20,
        traces_per_question: 10,
        ..SynthParams::default()
    };
    let corpus = synth_corpus(&params).unwrap();
    let config = EvalConfig::default();
    let specs = [
        FilterSpec::BurstOnly,
        FilterSpec::RateOnly,
        FilterSpec::CountOnly,
        FilterSpec::CompletedHybrid,
        FilterSpec::OnlinePrefix { depth: 2000 },
    ];
    let mut audited = 0usize;
    for spec in &specs {
        let outcome = loqo_evaluate(&corpus, spec, &config).unwrap();
        assert_eq!(outcome.decisions.len(), corpus.traces.len());
        assert_eq!(outcome.fold_models.len(), corpus.questions.len());
        for (held_out, model) in &outcome.fold_models {
            assert!(
                !model.trained_on.contains(held_out),
                "{}: fold {held_out} trained on itself",
                spec.method_name()
            );
            let expected: BTreeSet<String> = corpus
                .questions
                .iter()
                .filter(|q| *q != held_out)
                .cloned()
                .collect();
            assert_eq!(&model.trained_on, &expected);
        }
        for decision in &outcome.decisions {
            let model = &outcome.fold_models[&decision.question_id];
            assert!(!model.trained_on.contains(&decision.question_id));
            audited += 1;
        }
    }

    // the harness-level check is always on: a deliberately leaky model errors
    let leaky = FilterModel {
        feature_names: FilterSpec::OnlinePrefix { depth: 2000 }.feature_names(),
        mu: vec![0.0; 6],
        sigma: vec![1.0; 6],
        beta: vec![0.0; 7],
        cutoff: 0.5,
        trained_on: corpus.questions.iter().cloned().collect(),
    };
    let err = online_decide(&corpus.traces[0], 2000, &leaky, 500);
    assert!(matches!(err, Err(burstlab_core::Error::Leakage { .. })));
    println!("ACCEPTANCE 08 leakage audit: PASS ({audited} decisions across {} specs)", specs.len());
}

#[test]
fn acceptance_09_conservation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let parts = random_parts(&mut rng, 120);
        let trace = scored_trace("t", "q", true, &parts);
        let tau = rng.gen_range(0.0..=100.0f64);
        let gap = [250, 500, 1000][rng.gen_range(0..3usize)];

        let profile = bin_profile(&trace, tau).unwrap();
        assert_eq!(
            profile.counts.iter().sum::<u64>(),
            event_count(&trace, tau, None),
            "bin counts must sum to the event count"
        );
        assert_eq!(
            profile.supports.iter().sum::<u64>(),
            trace.scored_segments().count() as u64
        );

        let depths: Vec<u64> = qualifying_events(&trace, tau, None)
            .iter()
            .map(|e| e.depth)
            .collect();
        let k2 = burst_stats(&burst_partition(&depths, gap).unwrap()).k2;
        assert_eq!(
            burst_start_profile(&trace, tau, gap).iter().sum::<u64>(),
            k2,
            "burst starts must sum to K2"
        );
    }
    println!("ACCEPTANCE 09 conservation: PASS (1000 traces, exact equality)");
}

fn golden_path(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn load_golden_corpus() -> Corpus {
    let file = std::fs::File::open(golden_path("golden_corpus.jsonl")).unwrap();
    Corpus::read_jsonl(std::io::BufReader::new(file), "golden").unwrap()
}

#[test]
fn acceptance_10_golden_fixture() {
    let corpus = load_golden_corpus();

    let summary = corpus_summary(&corpus).unwrap();
    assert_eq!(summary.question_count, 2);
    assert_eq!(summary.trace_count, 20);
    assert_eq!(summary.traces_per_question, 10.0);
    assert_eq!(summary.baseline_accuracy, 0.7);
    assert_eq!(summary.mean_words, 2200.0);
    assert_eq!(summary.median_words, 2000.0);
    // sorted segment counts: 1,1 then seven 3s, so ranks 10 and 11 are both 4
    assert_eq!(summary.median_segments_per_trace, 4.0);

    // byte-identical artifacts against the hand-computed goldens, twice
    for run in 0..2 {
        let mut bursts = Vec::new();
        write_burst_stats_csv(&mut bursts, &corpus, &[20.0, 50.0], 500).unwrap();
        assert_eq!(
            String::from_utf8(bursts).unwrap(),
            std::fs::read_to_string(golden_path("golden_bursts.csv")).unwrap(),
            "bursts mismatch on run {run}"
        );

        let mut timing = Vec::new();
        write_timing_csv(&mut timing, &corpus, &[20.0, 50.0]).unwrap();
        assert_eq!(
            String::from_utf8(timing).unwrap(),
            std::fs::read_to_string(golden_path("golden_timing.csv")).unwrap(),
            "timing mismatch on run {run}"
        );

        let mut profiles = Vec::new();
        write_pooled_profiles_csv(&mut profiles, &corpus, &[20.0], 0, 0).unwrap();
        assert_eq!(
            String::from_utf8(profiles).unwrap(),
            std::fs::read_to_string(golden_path("golden_profiles.csv")).unwrap(),
            "profiles mismatch on run {run}"
        );

        let outcome = loqo_evaluate(
            &corpus,
            &FilterSpec::HardCutoff { limit: Some(2000) },
            &EvalConfig::default(),
        )
        .unwrap();
        let mut eval = Vec::new();
        write_eval_reports_csv(&mut eval, &[outcome.report.clone()]).unwrap();
        assert_eq!(
            String::from_utf8(eval).unwrap(),
            std::fs::read_to_string(golden_path("golden_eval.csv")).unwrap(),
            "eval mismatch on run {run}"
        );
        // hand-computed report values: 14 kept, 11 correct, 6 drops at 3000
        // words each stopping at 2000
        assert_eq!(outcome.report.retained_acc_pooled, Some(11.0 / 14.0));
        assert_eq!(outcome.report.retained_acc_perq, Some((0.75 + 5.0 / 6.0) / 2.0));
        assert_eq!(outcome.report.drop_rate, 0.3);
        assert_eq!(outcome.report.word_save, 1.0 - 38_000.0 / 44_000.0);
    }

    // hand-verified hybrid features for a08: profile mass in bins
    // 5,6,7,10,15 at tau 20 gives slope -0.225/1.6625; only bin 15 is hot
    // at tau 50
    let a08 = corpus.traces.iter().find(|t| t.trace_id == "a08").unwrap();
    let training: Vec<&Trace> = corpus.traces_excluding_question("q1");
    let direction = wrong_direction_vector(&training, "q1", 50.0).unwrap();
    let features = hybrid_features(a08, &direction, 500).unwrap();
    assert!((features[0] - (-0.225 / 1.6625)).abs() < 1e-12);
    assert_eq!(features[1], 0.1);
    let p50 = bin_profile(a08, 50.0).unwrap();
    assert_eq!(features[2], profile_similarity(&p50.probs, &direction));
    assert_eq!(features[3], 2.5);
    assert_eq!(features[4], 1.0);
    assert_eq!(features[5], 2.0);
    assert_eq!(features[6], 5.0);
    let p20 = bin_profile(a08, 20.0).unwrap();
    assert_eq!(features[0], profile_slope(&p20));
    assert_eq!(features[1], late_mean(&p50));

    // event-free trace maps to the all-zero feature vector
    let a03 = corpus.traces.iter().find(|t| t.trace_id == "a03").unwrap();
    let direction_a03 = wrong_direction_vector(&training, "q1", 50.0).unwrap();
    assert_eq!(hybrid_features(a03, &direction_a03, 500).unwrap(), [0.0; 7]);

    // hand-verified prefix features for a08 at the 2k checkpoint
    let prefix = prefix_features(a08, 2000, 500).unwrap();
    assert_eq!(prefix, [2.5, 1.0, 2.0, 5.0, 500.0, 500.0]);

    println!("ACCEPTANCE 10 golden fixture: PASS (byte-identical CSVs, hand-checked values)");
}

#[test]
fn acceptance_11_directional_replication() {
    let params = SynthParams {
        seed: 11,
        questions: 25,
        traces_per_question: 80,
        ..SynthParams::default()
    };
    let corpus = synth_corpus(&params).unwrap();
    let mut cells = 0usize;
    for tau in [20.0, 50.0] {
        for gap in [250, 500, 1000] {
            let means = burstlab_core::events::class_means(&corpus, tau, gap).unwrap();
            let correct = means.class(Class::Correct).unwrap();
            let wrong = means.class(Class::Wrong).unwrap();
            assert!(
                wrong.k2 > correct.k2,
                "K2 ordering failed at tau={tau} gap={gap}: {} vs {}",
                wrong.k2,
                correct.k2
            );
            assert!(
                wrong.s2 > correct.s2,
                "S2 ordering failed at tau={tau} gap={gap}: {} vs {}",
                wrong.s2,
                correct.s2
            );
            assert!(
                wrong.m_max > correct.m_max,
                "m_max ordering failed at tau={tau} gap={gap}: {} vs {}",
                wrong.m_max,
                correct.m_max
            );
            cells += 3;
        }
    }
    println!("ACCEPTANCE 11 directional replication: PASS ({cells} ordered class-mean cells)");
}
