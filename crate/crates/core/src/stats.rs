//! Feature standardization, logistic filter fitting and scoring, cutoff
//! selection, chi-square tail probabilities, and likelihood-ratio tests.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trained logistic filter: standardization parameters, coefficients
/// (intercept first), decision cutoff, and the questions it saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterModel {
    pub feature_names: Vec<String>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub beta: Vec<f64>,
    pub cutoff: f64,
    pub trained_on: BTreeSet<String>,
}

impl FilterModel {
    pub fn validate(&self) -> Result<()> {
        let d = self.feature_names.len();
        if self.mu.len() != d || self.sigma.len() != d || self.beta.len() != d + 1 {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.mu.len().min(self.sigma.len()),
            });
        }
        if self.sigma.iter().any(|&s| s < 0.0) {
            return Err(Error::domain("sigma entries must be non-negative"));
        }
        Ok(())
    }

    /// Wrong-trace score: logistic of the intercept plus the dot product of
    /// the coefficients with the standardized features.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.validate()?;
        let z = standardize(x, &self.mu, &self.sigma)?;
        let mut logit = self.beta[0];
        for (j, zj) in z.iter().enumerate() {
            logit += self.beta[j + 1] * zj;
        }
        Ok(sigmoid(logit))
    }

    /// A trace is kept when its score is strictly below the cutoff.
    pub fn keeps(&self, score: f64) -> bool {
        score < self.cutoff
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else if z < -30.0 {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

/// z_j = (x_j - mu_j) / sigma_j, with z_j = 0 for constant features.
pub fn standardize(x: &[f64], mu: &[f64], sigma: &[f64]) -> Result<Vec<f64>> {
    if x.len() != mu.len() || x.len() != sigma.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: x.len(),
        });
    }
    Ok(x.iter()
        .zip(mu.iter().zip(sigma.iter()))
        .map(|(&xj, (&mj, &sj))| if sj == 0.0 { 0.0 } else { (xj - mj) / sj })
        .collect())
}

/// Per-column mean and population standard deviation of a feature matrix.
pub fn standardization_params(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    if rows.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mut mu = vec![0.0; d];
    for row in rows {
        for (j, &v) in row.iter().enumerate() {
            mu[j] += v;
        }
    }
    for m in &mut mu {
        *m /= n;
    }
    let mut sigma = vec![0.0; d];
    for row in rows {
        for (j, &v) in row.iter().enumerate() {
            sigma[j] += (v - mu[j]) * (v - mu[j]);
        }
    }
    for s in &mut sigma {
        *s = (*s / n).sqrt();
    }
    (mu, sigma)
}

const MAX_ITERATIONS: usize = 10_000;
const GRAD_TOLERANCE: f64 = 1e-8;

/// Converged fit with its penalized and unpenalized log-likelihood.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub beta: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Ridge-penalized logistic regression on an already-standardized matrix.
///
/// Maximizes the log-likelihood minus `ridge` times the squared slope norm
/// (the intercept is unpenalized) by damped Newton iteration from zero
/// initialization, stopping when the gradient infinity-norm falls to 1e-8.
pub fn fit_logistic(x: &[Vec<f64>], y: &[bool], ridge: f64) -> Result<Vec<f64>> {
    fit_logistic_full(x, y, ridge).map(|outcome| outcome.beta)
}

pub fn fit_logistic_full(x: &[Vec<f64>], y: &[bool], ridge: f64) -> Result<FitOutcome> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: x.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::domain("fit_logistic requires at least one row"));
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("fit_logistic requires finite features"));
        }
    }
    if ridge < 0.0 {
        return Err(Error::domain("ridge penalty must be non-negative"));
    }
    if ridge == 0.0 {
        let positives = y.iter().filter(|&&v| v).count();
        if positives == 0 || positives == y.len() {
            return Err(Error::domain(
                "unpenalized fit requires at least one example of each label",
            ));
        }
    }

    let width = d + 1;
    let mut beta = vec![0.0; width];
    let mut objective = penalized_ll(x, y, &beta, ridge);
    let mut damping = 0.0f64;
    for iteration in 0..MAX_ITERATIONS {
        let grad = gradient(x, y, &beta, ridge);
        let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm <= GRAD_TOLERANCE {
            return Ok(FitOutcome {
                log_likelihood: log_likelihood(x, y, &beta),
                beta,
                iterations: iteration,
                grad_norm,
            });
        }
        let hessian = hessian(x, &beta, ridge);
        let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut accepted = false;
        loop {
            let mut damped = hessian.clone();
            if damping > 0.0 {
                for j in 0..width {
                    damped[j][j] -= damping;
                }
            }
            let direction = solve_linear(damped, &neg_grad)
                .filter(|step| step.iter().all(|v| v.is_finite()));
            if let Some(direction) = direction {
                let step_norm = direction.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if damping == 0.0 && step_norm <= 1e-3 {
                    // near the optimum the objective is flat at f64
                    // resolution while the gradient is not; trust small
                    // undamped Newton steps instead of a noise-limited
                    // line search
                    for (b, s) in beta.iter_mut().zip(direction.iter()) {
                        *b += s;
                    }
                    objective = penalized_ll(x, y, &beta, ridge);
                    accepted = true;
                } else {
                    let slack = 1e-10 * (1.0 + objective.abs());
                    let mut step = 1.0;
                    for _ in 0..50 {
                        let candidate: Vec<f64> = beta
                            .iter()
                            .zip(direction.iter())
                            .map(|(b, s)| b + step * s)
                            .collect();
                        let value = penalized_ll(x, y, &candidate, ridge);
                        if value.is_finite() && value >= objective - slack {
                            beta = candidate;
                            objective = value;
                            accepted = true;
                            break;
                        }
                        step *= 0.5;
                    }
                }
            }
            if accepted {
                damping = if damping > 1e-10 { damping / 4.0 } else { 0.0 };
                break;
            }
            damping = if damping == 0.0 { 1e-6 } else { damping * 10.0 };
            if damping > 1e12 {
                return Err(Error::NonConvergence {
                    grad_norm,
                    iterations: iteration,
                });
            }
        }
    }
    let grad = gradient(x, y, &beta, ridge);
    let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if grad_norm <= GRAD_TOLERANCE {
        return Ok(FitOutcome {
            log_likelihood: log_likelihood(x, y, &beta),
            beta,
            iterations: MAX_ITERATIONS,
            grad_norm,
        });
    }
    Err(Error::NonConvergence {
        grad_norm,
        iterations: MAX_ITERATIONS,
    })
}

fn logit(beta: &[f64], row: &[f64]) -> f64 {
    let mut z = beta[0];
    for (j, &v) in row.iter().enumerate() {
        z += beta[j + 1] * v;
    }
    z
}

/// Unpenalized Bernoulli log-likelihood.
pub fn log_likelihood(x: &[Vec<f64>], y: &[bool], beta: &[f64]) -> f64 {
    x.iter()
        .zip(y.iter())
        .map(|(row, &label)| {
            let z = logit(beta, row);
            if label {
                -softplus(-z)
            } else {
                -softplus(z)
            }
        })
        .sum()
}

fn penalized_ll(x: &[Vec<f64>], y: &[bool], beta: &[f64], ridge: f64) -> f64 {
    let penalty: f64 = beta[1..].iter().map(|b| b * b).sum();
    log_likelihood(x, y, beta) - ridge * penalty
}

/// Gradient of the penalized log-likelihood.
pub fn gradient(x: &[Vec<f64>], y: &[bool], beta: &[f64], ridge: f64) -> Vec<f64> {
    let mut grad = vec![0.0; beta.len()];
    for (row, &label) in x.iter().zip(y.iter()) {
        let residual = (label as u8 as f64) - sigmoid(logit(beta, row));
        grad[0] += residual;
        for (j, &v) in row.iter().enumerate() {
            grad[j + 1] += residual * v;
        }
    }
    for j in 1..beta.len() {
        grad[j] -= 2.0 * ridge * beta[j];
    }
    grad
}

fn hessian(x: &[Vec<f64>], beta: &[f64], ridge: f64) -> Vec<Vec<f64>> {
    let width = beta.len();
    let mut h = vec![vec![0.0; width]; width];
    for row in x {
        let p = sigmoid(logit(beta, row));
        let w = p * (1.0 - p);
        for a in 0..width {
            let xa = if a == 0 { 1.0 } else { row[a - 1] };
            for b in a..width {
                let xb = if b == 0 { 1.0 } else { row[b - 1] };
                h[a][b] -= w * xa * xb;
            }
        }
    }
    for a in 0..width {
        for b in 0..a {
            h[a][b] = h[b][a];
        }
    }
    for j in 1..width {
        h[j][j] -= 2.0 * ridge;
    }
    h
}

/// Gaussian elimination with partial pivoting; `None` on a singular system.
fn solve_linear(mut a: Vec<Vec<f64>>, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut x: Vec<f64> = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())?;
        if a[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        x.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        for k in col + 1..n {
            x[col] -= a[col][k] * x[k];
        }
        x[col] /= a[col][col];
    }
    Some(x)
}

/// Per-question scores with correctness labels, for cutoff selection.
#[derive(Debug, Clone)]
pub struct QuestionScores {
    pub question_id: String,
    /// (wrong-trace score, correct flag) pairs.
    pub scores: Vec<(f64, bool)>,
}

/// Pick the cutoff maximizing mean per-question retained accuracy.
///
/// Candidates are 0, 1, and every midpoint between consecutive sorted
/// unique scores; a question that keeps nothing contributes accuracy 0;
/// ties break toward the largest cutoff.
pub fn select_cutoff(groups: &[QuestionScores]) -> Result<f64> {
    let populated: Vec<&QuestionScores> = groups.iter().filter(|g| !g.scores.is_empty()).collect();
    if populated.is_empty() {
        return Err(Error::domain("select_cutoff requires at least one scored question"));
    }
    let mut unique: Vec<f64> = populated
        .iter()
        .flat_map(|g| g.scores.iter().map(|(s, _)| *s))
        .collect();
    unique.sort_by(|a, b| a.partial_cmp(b).expect("scores must be finite"));
    unique.dedup();

    let mut candidates = vec![0.0];
    for pair in unique.windows(2) {
        candidates.push((pair[0] + pair[1]) / 2.0);
    }
    candidates.push(1.0);

    let mut best_cutoff = 0.0;
    let mut best_value = f64::NEG_INFINITY;
    for &cutoff in &candidates {
        let mut total = 0.0;
        for group in &populated {
            let kept: Vec<bool> = group
                .scores
                .iter()
                .filter(|(s, _)| *s < cutoff)
                .map(|(_, correct)| *correct)
                .collect();
            if !kept.is_empty() {
                total += kept.iter().filter(|&&c| c).count() as f64 / kept.len() as f64;
            }
        }
        let value = total / populated.len() as f64;
        if value >= best_value {
            best_value = value;
            best_cutoff = cutoff;
        }
    }
    Ok(best_cutoff)
}

/// Upper-tail probability of a chi-square distribution via the regularized
/// upper incomplete gamma function.
pub fn chi_square_tail(stat: f64, df: u64) -> Result<f64> {
    if df == 0 {
        return Err(Error::domain("chi_square_tail requires df >= 1"));
    }
    if !stat.is_finite() || stat < 0.0 {
        return Err(Error::domain("chi_square_tail requires a finite stat >= 0"));
    }
    if stat == 0.0 {
        return Ok(1.0);
    }
    Ok(statrs::function::gamma::gamma_ur(df as f64 / 2.0, stat / 2.0))
}

/// Likelihood-ratio test outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrResult {
    pub stat: f64,
    pub df: u64,
    pub p_value: f64,
}

/// Likelihood-ratio test of a reduced feature set nested in a full one.
/// Both models are pure maximum likelihood (ridge 0).
pub fn lr_test(full: &[Vec<f64>], reduced: &[Vec<f64>], y: &[bool]) -> Result<LrResult> {
    if full.len() != y.len() || reduced.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: full.len().min(reduced.len()),
        });
    }
    if full.is_empty() {
        return Err(Error::domain("lr_test requires at least one row"));
    }
    let full_width = full[0].len();
    let reduced_width = reduced[0].len();
    if !is_nested(full, reduced) {
        return Err(Error::domain("reduced feature set is not nested in the full set"));
    }
    let df = (full_width - reduced_width) as u64;
    if df == 0 {
        return Ok(LrResult {
            stat: 0.0,
            df: 0,
            p_value: 1.0,
        });
    }
    let full_fit = fit_logistic_full(&standardize_matrix(full), y, 0.0)?;
    let reduced_fit = fit_logistic_full(&standardize_matrix(reduced), y, 0.0)?;
    let mut stat = 2.0 * (full_fit.log_likelihood - reduced_fit.log_likelihood);
    if stat < -1e-9 {
        return Err(Error::domain(format!(
            "likelihood-ratio statistic {stat} is negative beyond tolerance"
        )));
    }
    stat = stat.max(0.0);
    let p_value = chi_square_tail(stat, df)?;
    Ok(LrResult { stat, df, p_value })
}

/// Every column of `reduced` must appear verbatim among `full`'s columns.
fn is_nested(full: &[Vec<f64>], reduced: &[Vec<f64>]) -> bool {
    let full_width = full[0].len();
    let reduced_width = reduced[0].len();
    if reduced_width > full_width {
        return false;
    }
    (0..reduced_width).all(|rj| {
        (0..full_width).any(|fj| full.iter().zip(reduced.iter()).all(|(f, r)| f[fj] == r[rj]))
    })
}

fn standardize_matrix(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (mu, sigma) = standardization_params(rows);
    rows.iter()
        .map(|row| standardize(row, &mu, &sigma).expect("dimensions match by construction"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize(&[1.0, 2.0], &[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(standardize(&[3.0], &[1.0], &[2.0]).unwrap(), vec![1.0]);
        assert_eq!(standardize(&[5.0], &[1.0], &[0.0]).unwrap(), vec![0.0]);
        assert!(standardize(&[1.0], &[1.0, 2.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn params_population_sigma() {
        let rows = vec![vec![1.0], vec![3.0]];
        let (mu, sigma) = standardization_params(&rows);
        assert_eq!(mu, vec![2.0]);
        assert_eq!(sigma, vec![1.0]);
    }

    #[test]
    fn fit_one_class_drives_probability_down() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        let y = vec![false; 10];
        let beta = fit_logistic(&x, &y, 1e-4).unwrap();
        for row in &x {
            let p = sigmoid(beta[0] + beta[1] * row[0]);
            assert!(p < 0.5, "one-class fit should predict p < 0.5, got {p}");
        }
    }

    #[test]
    fn fit_separable_one_dimensional() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![if i < 10 { -1.0 } else { 1.0 }]).collect();
        let y: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let beta = fit_logistic(&x, &y, 1e-4).unwrap();
        assert!(beta[1] > 0.0);
        let accurate = x
            .iter()
            .zip(y.iter())
            .filter(|(row, &label)| (sigmoid(beta[0] + beta[1] * row[0]) >= 0.5) == label)
            .count();
        assert_eq!(accurate, 20);
    }

    #[test]
    fn fit_gradient_vanishes_at_optimum() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64) / 30.0, ((i * 7 % 13) as f64) / 13.0])
            .collect();
        let y: Vec<bool> = (0..30).map(|i| (i * 3 + 1) % 4 == 0 || i > 20).collect();
        let beta = fit_logistic(&x, &y, 1e-3).unwrap();
        let grad = gradient(&x, &y, &beta, 1e-3);
        assert!(grad.iter().all(|g| g.abs() <= 1e-8));
    }

    #[test]
    fn fit_rejects_unlabeled_mle() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(fit_logistic(&x, &[false, false], 0.0).is_err());
        assert!(fit_logistic(&x, &[false, false], 1e-4).is_ok());
    }

    #[test]
    fn fit_rejects_non_finite() {
        let x = vec![vec![f64::NAN]];
        assert!(fit_logistic(&x, &[true], 1e-4).is_err());
    }

    #[test]
    fn score_closed_forms() {
        let flat = FilterModel {
            feature_names: vec!["a".to_string()],
            mu: vec![0.0],
            sigma: vec![1.0],
            beta: vec![0.0, 0.0],
            cutoff: 0.5,
            trained_on: BTreeSet::new(),
        };
        assert_eq!(flat.score(&[3.0]).unwrap(), 0.5);

        let centered = FilterModel {
            feature_names: vec!["a".to_string()],
            mu: vec![2.0],
            sigma: vec![1.0],
            beta: vec![0.0, 1.0],
            cutoff: 0.5,
            trained_on: BTreeSet::new(),
        };
        assert_eq!(centered.score(&[2.0]).unwrap(), 0.5);

        let intercept_only = FilterModel {
            feature_names: vec![],
            mu: vec![],
            sigma: vec![],
            beta: vec![1.0],
            cutoff: 0.5,
            trained_on: BTreeSet::new(),
        };
        assert_relative_eq!(intercept_only.score(&[]).unwrap(), 0.7310585786300049, epsilon = 1e-12);
    }

    #[test]
    fn model_json_round_trip() {
        let model = FilterModel {
            feature_names: vec!["rate".to_string(), "m_max".to_string()],
            mu: vec![1.0, 2.0],
            sigma: vec![0.5, 1.5],
            beta: vec![0.1, -0.2, 0.3],
            cutoff: 0.4,
            trained_on: ["q1", "q2"].iter().map(|s| s.to_string()).collect(),
        };
        let json = serde_json::to_string(&model).unwrap();
        let back: FilterModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
    }

    fn groups(scores: &[(&str, f64, bool)]) -> Vec<QuestionScores> {
        let mut by_question: std::collections::BTreeMap<String, Vec<(f64, bool)>> =
            std::collections::BTreeMap::new();
        for &(q, s, c) in scores {
            by_question.entry(q.to_string()).or_default().push((s, c));
        }
        by_question
            .into_iter()
            .map(|(question_id, scores)| QuestionScores { question_id, scores })
            .collect()
    }

    #[test]
    fn cutoff_separable_scores() {
        let cutoff = select_cutoff(&groups(&[
            ("q1", 0.2, true),
            ("q1", 0.8, false),
            ("q2", 0.2, true),
            ("q2", 0.8, false),
        ]))
        .unwrap();
        assert_eq!(cutoff, 0.5);
    }

    #[test]
    fn cutoff_all_correct_keeps_everything() {
        let cutoff = select_cutoff(&groups(&[("q1", 0.3, true), ("q1", 0.6, true)])).unwrap();
        assert_eq!(cutoff, 1.0);
    }

    #[test]
    fn cutoff_identical_scores_keeps_all() {
        let cutoff = select_cutoff(&groups(&[
            ("q1", 0.7, true),
            ("q1", 0.7, false),
            ("q2", 0.7, true),
        ]))
        .unwrap();
        assert_eq!(cutoff, 1.0);
    }

    #[test]
    fn cutoff_empty_errors() {
        assert!(select_cutoff(&[]).is_err());
    }

    #[test]
    fn chi_square_paper_anchors() {
        let p1 = chi_square_tail(16.133, 3).unwrap();
        assert!((p1 - 0.001065).abs() <= 1e-6, "got {p1}");
        let p2 = chi_square_tail(40.969, 3).unwrap();
        assert!((p2 - 6.64e-9).abs() / 6.64e-9 <= 0.02, "got {p2}");
        assert_eq!(chi_square_tail(0.0, 7).unwrap(), 1.0);
        assert!(chi_square_tail(1.0, 0).is_err());
        assert!(chi_square_tail(-1.0, 1).is_err());
    }

    #[test]
    fn chi_square_df_three_uniquely_matches_anchor() {
        // the printed tail 0.001065 for stat 16.133 identifies df = 3
        for df in [1u64, 2, 4, 5, 6] {
            let p = chi_square_tail(16.133, df).unwrap();
            assert!((p - 0.001065).abs() > 1e-4, "df {df} also matches: {p}");
        }
        assert!((chi_square_tail(16.133, 3).unwrap() - 0.001065).abs() <= 1e-6);
    }

    #[test]
    fn score_increasing_in_positive_coefficient_feature() {
        let model = FilterModel {
            feature_names: vec!["a".to_string(), "b".to_string()],
            mu: vec![0.0, 0.0],
            sigma: vec![1.0, 1.0],
            beta: vec![0.2, 1.5, -0.4],
            cutoff: 0.5,
            trained_on: BTreeSet::new(),
        };
        let mut last = f64::NEG_INFINITY;
        for step in 0..20 {
            let score = model.score(&[step as f64 * 0.3, 1.0]).unwrap();
            assert!(score > last);
            last = score;
        }
    }

    #[test]
    fn chi_square_monotone_in_stat() {
        let mut last = 1.0;
        for i in 1..50 {
            let p = chi_square_tail(i as f64 * 0.5, 3).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn lr_identical_sets() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 7) as f64]).collect();
        let y: Vec<bool> = (0..40).map(|i| i % 3 == 0).collect();
        let result = lr_test(&x, &x, &y).unwrap();
        assert_eq!(result.stat, 0.0);
        assert_eq!(result.p_value, 1.0);
    }

    #[test]
    fn lr_rejects_non_nested() {
        let full: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let reduced: Vec<Vec<f64>> = (0..10).map(|i| vec![(i * 2) as f64]).collect();
        let y: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        assert!(lr_test(&full, &reduced, &y).is_err());
    }

    #[test]
    fn lr_informative_added_feature_is_significant() {
        // the added column separates labels almost perfectly
        let n = 200;
        let full: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let noise = ((i * 13 % 17) as f64) / 17.0;
                let signal = if i % 2 == 0 { 1.0 } else { -1.0 };
                vec![noise, signal + noise * 0.01]
            })
            .collect();
        let reduced: Vec<Vec<f64>> = full.iter().map(|r| vec![r[0]]).collect();
        let y: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let result = lr_test(&full, &reduced, &y).unwrap();
        assert_eq!(result.df, 1);
        assert!(result.stat > 10.0);
        assert!(result.p_value < 0.01);
    }
}
