//! Utility metrics comparing a true database `A` with an anonymized `B`, and
//! the policy that gates the anonymization loop.
//!
//! Three families:
//!
//! * matrix norms of the standardized difference `d_ij = |a_ij − b_ij| / σ_j`
//!   (sum of entries, worst-record row sum, Frobenius);
//! * Pearson correlation of the row-major flattenings of `A` and `B`;
//! * KL divergence between Gaussians fitted to the rows of `A` and `B`.
//!
//! Norms work on standardized values (statistics from `A`). Correlation and
//! KL are computed on the data in original units. Norms and KL pass when
//! `value ≤ threshold`; correlation passes when `value ≥ threshold`. Both
//! comparisons are inclusive.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{column_stats, standardize, Dataset, StandardizedDataset};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_log_det, cholesky_solve, symmetric_eigen, Matrix};
use crate::scalar::Real;

/// Condition number above which the regularized covariance of `B` is treated
/// as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Default relative ridge added to both covariances before evaluating KL.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Element-wise `|â_ij − b̂_ij|` of two datasets standardized with the same
/// statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceMatrix<T> {
    entries: Matrix<T>,
}

impl<T: Real> DifferenceMatrix<T> {
    /// Wraps a matrix of non-negative entries.
    pub fn new(entries: Matrix<T>) -> Result<Self> {
        if entries.as_slice().iter().any(|&v| !(v >= T::zero())) {
            return Err(Error::InvalidParameter(
                "difference matrix entries must be non-negative".into(),
            ));
        }
        Ok(DifferenceMatrix { entries })
    }

    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }
}

pub fn difference_matrix<T: Real>(
    a_std: &StandardizedDataset<T>,
    b_std: &StandardizedDataset<T>,
) -> Result<DifferenceMatrix<T>> {
    if a_std.shape() != b_std.shape() {
        return Err(Error::shape(a_std.shape(), b_std.shape()));
    }
    if a_std.stats() != b_std.stats() {
        return Err(Error::InvalidParameter(
            "both datasets must be standardized with the same column statistics".into(),
        ));
    }
    let (n, m) = a_std.shape();
    let (a, b) = (a_std.values(), b_std.values());
    Ok(DifferenceMatrix {
        entries: Matrix::from_fn(n, m, |i, j| (a[(i, j)] - b[(i, j)]).abs()),
    })
}

/// Sum of every entry.
pub fn norm_sum<T: Real>(d: &DifferenceMatrix<T>) -> T {
    d.entries.as_slice().iter().copied().sum()
}

/// Largest per-record row sum: the most distorted record.
pub fn norm_l1_adapted<T: Real>(d: &DifferenceMatrix<T>) -> T {
    d.entries
        .row_iter()
        .map(|row| row.iter().copied().sum::<T>())
        .fold(T::zero(), T::max)
}

pub fn norm_frobenius<T: Real>(d: &DifferenceMatrix<T>) -> T {
    d.entries
        .as_slice()
        .iter()
        .map(|&v| v * v)
        .sum::<T>()
        .sqrt()
}

/// Reads a matrix row by row into a vector of length `n·m`.
pub fn flatten_row_major<T: Real>(x: &Matrix<T>) -> Vec<T> {
    x.as_slice().to_vec()
}

/// Pearson correlation of two equal-length vectors (two-pass form).
pub fn pearson<T: Real>(v: &[T], w: &[T]) -> Result<T> {
    if v.len() != w.len() || v.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} elements", v.len()),
            found: format!("{}", w.len()),
        });
    }
    let len = T::from_usize_lossy(v.len());
    let mv = v.iter().copied().sum::<T>() / len;
    let mw = w.iter().copied().sum::<T>() / len;
    let (mut svw, mut svv, mut sww) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in v.iter().zip(w) {
        let (dx, dy) = (x - mv, y - mw);
        svw += dx * dy;
        svv += dx * dx;
        sww += dy * dy;
    }
    if !(svv > T::zero()) {
        return Err(Error::UndefinedCorrelation("A"));
    }
    if !(sww > T::zero()) {
        return Err(Error::UndefinedCorrelation("B"));
    }
    let rho = svw / (svv * sww).sqrt();
    Ok(rho.max(-T::one()).min(T::one()))
}

/// Correlation between the row-major flattenings of `a` and `b`.
pub fn correlation<T: Real>(a: &Dataset<T>, b: &Dataset<T>) -> Result<T> {
    if a.shape() != b.shape() {
        return Err(Error::shape(a.shape(), b.shape()));
    }
    pearson(
        &flatten_row_major(a.values()),
        &flatten_row_major(b.values()),
    )
}

/// Row mean vector and population covariance matrix of a sample.
pub fn sample_moments<T: Real>(x: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let (n, m) = x.shape();
    let nf = T::from_usize_lossy(n);
    let mut mean = vec![T::zero(); m];
    for row in x.row_iter() {
        for (acc, &v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= nf;
    }
    let mut cov = Matrix::zeros(m, m);
    let mut centered = vec![T::zero(); m];
    for row in x.row_iter() {
        for ((c, &v), &mu) in centered.iter_mut().zip(row).zip(&mean) {
            *c = v - mu;
        }
        for i in 0..m {
            let ci = centered[i];
            for j in i..m {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    for i in 0..m {
        for j in i..m {
            let v = cov[(i, j)] / nf;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (mean, cov)
}

/// `R + ridge · (tr(R)/m) · I`.
pub fn regularize<T: Real>(r: &Matrix<T>, ridge: T) -> Matrix<T> {
    let m = r.rows();
    let mut out = r.clone();
    if ridge > T::zero() && m > 0 {
        let shift = ridge * r.trace() / T::from_usize_lossy(m);
        for i in 0..m {
            out[(i, i)] += shift;
        }
    }
    out
}

fn condition_number<T: Real>(r: &Matrix<T>) -> Result<f64> {
    let (vals, _) = symmetric_eigen(r)?;
    let max = vals.first().copied().unwrap_or_else(T::zero);
    let min = vals.last().copied().unwrap_or_else(T::zero);
    if !(min > T::zero()) {
        return Ok(f64::INFINITY);
    }
    Ok((max / min).to_f64_lossy())
}

/// Closed-form `KL(N(mean_a, cov_a) ‖ N(mean_b, cov_b))` for given moments:
///
/// `½[tr(R_a R_b⁻¹) − ln(|R_a|/|R_b|) − m] + ½ (ā−b̄)ᵀ R_b⁻¹ (ā−b̄)`.
pub fn gaussian_kl_moments<T: Real>(
    mean_a: &[T],
    cov_a: &Matrix<T>,
    mean_b: &[T],
    cov_b: &Matrix<T>,
) -> Result<T> {
    let m = mean_a.len();
    if mean_b.len() != m || cov_a.shape() != (m, m) || cov_b.shape() != (m, m) {
        return Err(Error::DimensionMismatch {
            expected: format!("dimension {m}"),
            found: format!(
                "means {} / {}, covariances {:?} / {:?}",
                m,
                mean_b.len(),
                cov_a.shape(),
                cov_b.shape()
            ),
        });
    }
    let cond = condition_number(cov_b)?;
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularCovariance {
            which: "B",
            condition: cond,
        });
    }
    let lb = cholesky(cov_b).map_err(|_| Error::SingularCovariance {
        which: "B",
        condition: cond,
    })?;
    let la = cholesky(cov_a).map_err(|_| Error::SingularCovariance {
        which: "A",
        condition: f64::INFINITY,
    })?;

    let mut trace = T::zero();
    for j in 0..m {
        let col = cov_a.column(j);
        trace += cholesky_solve(&lb, &col)[j];
    }
    let log_ratio = cholesky_log_det(&la) - cholesky_log_det(&lb);
    let delta: Vec<T> = mean_a.iter().zip(mean_b).map(|(&x, &y)| x - y).collect();
    let solved = cholesky_solve(&lb, &delta);
    let mahalanobis: T = delta.iter().zip(&solved).map(|(&x, &y)| x * y).sum();
    let half = T::lit(0.5);
    Ok(half * (trace - log_ratio - T::from_usize_lossy(m)) + half * mahalanobis)
}

/// KL divergence of Gaussians estimated from the rows of `a` (reference) and
/// `b`. Both covariances get the same relative ridge.
pub fn gaussian_kl<T: Real>(a: &Dataset<T>, b: &Dataset<T>, ridge: T) -> Result<T> {
    if a.shape() != b.shape() {
        return Err(Error::shape(a.shape(), b.shape()));
    }
    if !(ridge >= T::zero()) || !ridge.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ridge must be finite and non-negative, got {ridge}"
        )));
    }
    let (n, m) = a.shape();
    if n <= m {
        log::warn!("KL estimate from {n} records in {m} dimensions is poorly conditioned");
    }
    let (mean_a, cov_a) = sample_moments(a.values());
    let (mean_b, cov_b) = sample_moments(b.values());
    gaussian_kl_moments(
        &mean_a,
        &regularize(&cov_a, ridge),
        &mean_b,
        &regularize(&cov_b, ridge),
    )
}

/// The five utility metrics a policy can enable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    NormSum,
    #[serde(rename = "norm_l1")]
    NormL1,
    NormFrobenius,
    Correlation,
    Kl,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::NormSum,
        Metric::NormL1,
        Metric::NormFrobenius,
        Metric::Correlation,
        Metric::Kl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::NormSum => "norm_sum",
            Metric::NormL1 => "norm_l1",
            Metric::NormFrobenius => "norm_frobenius",
            Metric::Correlation => "correlation",
            Metric::Kl => "kl",
        }
    }

    /// Correlation is a similarity (higher is better); the rest are distances.
    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Correlation)
    }

    pub fn passes<T: Real>(self, value: T, threshold: T) -> bool {
        if self.higher_is_better() {
            value >= threshold
        } else {
            value <= threshold
        }
    }

    fn is_norm(self) -> bool {
        matches!(self, Metric::NormSum | Metric::NormL1 | Metric::NormFrobenius)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMetric(s.to_owned()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRule<T> {
    pub enabled: bool,
    pub threshold: T,
}

/// Per-metric thresholds. Metrics absent from the map are disabled.
///
/// Serialized as `{"metric_name": {"enabled": bool, "threshold": number}}`.
/// The KL ridge is a run parameter and is not part of the JSON form.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilityPolicy<T> {
    rules: BTreeMap<Metric, MetricRule<T>>,
    ridge: T,
}

impl<T: Real> Default for UtilityPolicy<T> {
    fn default() -> Self {
        UtilityPolicy {
            rules: BTreeMap::new(),
            ridge: T::lit(DEFAULT_RIDGE),
        }
    }
}

impl<T: Real> UtilityPolicy<T> {
    /// An empty policy. Enable at least one metric before use.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, metric: Metric, threshold: T) -> Self {
        self.rules.insert(
            metric,
            MetricRule {
                enabled: true,
                threshold,
            },
        );
        self
    }

    pub fn with_ridge(mut self, ridge: T) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn ridge(&self) -> T {
        self.ridge
    }

    pub fn rule(&self, metric: Metric) -> Option<&MetricRule<T>> {
        self.rules.get(&metric)
    }

    pub fn is_enabled(&self, metric: Metric) -> bool {
        self.rules.get(&metric).is_some_and(|r| r.enabled)
    }

    pub fn enabled(&self) -> impl Iterator<Item = (Metric, T)> + '_ {
        self.rules
            .iter()
            .filter(|(_, r)| r.enabled)
            .map(|(&m, r)| (m, r.threshold))
    }

    /// A policy every pair passes: all metrics enabled with unreachable bounds.
    pub fn permissive() -> Self {
        let huge = T::max_value();
        Self::new()
            .with(Metric::NormSum, huge)
            .with(Metric::NormL1, huge)
            .with(Metric::NormFrobenius, huge)
            .with(Metric::Correlation, -T::one())
            .with(Metric::Kl, huge)
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled().next().is_none() {
            return Err(Error::InvalidPolicy("no metric enabled".into()));
        }
        for (metric, rule) in &self.rules {
            if !rule.threshold.is_finite() {
                return Err(Error::InvalidPolicy(format!(
                    "threshold for {metric} is not finite"
                )));
            }
            if *metric == Metric::Correlation
                && (rule.threshold < -T::one() || rule.threshold > T::one())
            {
                return Err(Error::InvalidPolicy(format!(
                    "correlation threshold {} outside [-1, 1]",
                    rule.threshold
                )));
            }
        }
        if !(self.ridge >= T::zero()) || !self.ridge.is_finite() {
            return Err(Error::InvalidPolicy(format!("ridge {} invalid", self.ridge)));
        }
        Ok(())
    }

    /// Parses and validates the JSON form. Unknown metric names are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, MetricRule<T>> = serde_json::from_str(text)
            .map_err(|e| Error::InvalidPolicy(e.to_string()))?;
        let mut policy = Self::new();
        for (name, rule) in raw {
            policy.rules.insert(name.parse()?, rule);
        }
        policy.validate()?;
        Ok(policy)
    }

    pub fn to_json(&self) -> String {
        let raw: BTreeMap<&str, &MetricRule<T>> =
            self.rules.iter().map(|(m, r)| (m.name(), r)).collect();
        serde_json::to_string_pretty(&raw).expect("policy serializes")
    }
}

/// Value and verdict for one enabled metric. `value` is `None` when the
/// metric is undefined for the pair (e.g. constant `B` for correlation), in
/// which case `pass` is false.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricOutcome<T> {
    pub value: Option<T>,
    pub threshold: T,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport<T> {
    pub metrics: BTreeMap<Metric, MetricOutcome<T>>,
    pub pass: bool,
}

impl<T: Real> UtilityReport<T> {
    pub fn value(&self, metric: Metric) -> Option<T> {
        self.metrics.get(&metric).and_then(|o| o.value)
    }

    pub fn passed(&self, metric: Metric) -> Option<bool> {
        self.metrics.get(&metric).map(|o| o.pass)
    }

    pub fn norm_sum(&self) -> Option<T> {
        self.value(Metric::NormSum)
    }

    pub fn norm_l1_adapted(&self) -> Option<T> {
        self.value(Metric::NormL1)
    }

    pub fn norm_frobenius(&self) -> Option<T> {
        self.value(Metric::NormFrobenius)
    }

    pub fn correlation(&self) -> Option<T> {
        self.value(Metric::Correlation)
    }

    pub fn kl_divergence(&self) -> Option<T> {
        self.value(Metric::Kl)
    }
}

/// Computes every enabled metric for `(a, b)` and checks it against the policy.
pub fn evaluate<T: Real>(
    a: &Dataset<T>,
    b: &Dataset<T>,
    policy: &UtilityPolicy<T>,
) -> Result<UtilityReport<T>> {
    policy.validate()?;
    if a.shape() != b.shape() {
        return Err(Error::shape(a.shape(), b.shape()));
    }

    let diff = if policy.enabled().any(|(m, _)| m.is_norm()) {
        let stats = column_stats(a)?;
        Some(difference_matrix(
            &standardize(a, &stats)?,
            &standardize(b, &stats)?,
        )?)
    } else {
        None
    };

    let mut metrics = BTreeMap::new();
    for (metric, threshold) in policy.enabled() {
        let computed: Result<T> = match metric {
            Metric::NormSum => Ok(norm_sum(diff.as_ref().expect("norms computed"))),
            Metric::NormL1 => Ok(norm_l1_adapted(diff.as_ref().expect("norms computed"))),
            Metric::NormFrobenius => Ok(norm_frobenius(diff.as_ref().expect("norms computed"))),
            Metric::Correlation => correlation(a, b),
            Metric::Kl => gaussian_kl(a, b, policy.ridge()),
        };
        let outcome = match computed {
            Ok(value) => MetricOutcome {
                value: Some(value),
                threshold,
                pass: metric.passes(value, threshold),
                note: None,
            },
            Err(e @ (Error::UndefinedCorrelation(_) | Error::SingularCovariance { .. })) => {
                MetricOutcome {
                    value: None,
                    threshold,
                    pass: false,
                    note: Some(e.to_string()),
                }
            }
            Err(e) => return Err(e),
        };
        metrics.insert(metric, outcome);
    }
    let pass = metrics.values().all(|o| o.pass);
    Ok(UtilityReport { metrics, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ds(rows: &[&[f64]]) -> Dataset<f64> {
        Dataset::from_matrix(Matrix::from_rows(rows)).unwrap()
    }

    fn dm(rows: &[&[f64]]) -> DifferenceMatrix<f64> {
        DifferenceMatrix::new(Matrix::from_rows(rows)).unwrap()
    }

    /// Element `k` (1-based) of the flattening comes from row
    /// `⌊(k−1)/m⌋ + 1`, column `k − (r−1)·m`.
    fn flatten_by_index_map(x: &Matrix<f64>) -> Vec<f64> {
        let (n, m) = x.shape();
        (1..=n * m)
            .map(|k| {
                let r = (k - 1) / m + 1;
                let c = k - (r - 1) * m;
                x[(r - 1, c - 1)]
            })
            .collect()
    }

    #[test]
    fn norms_examples() {
        let z = dm(&[&[0.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(norm_sum(&z), 0.0);
        assert_eq!(norm_l1_adapted(&z), 0.0);
        assert_eq!(norm_frobenius(&z), 0.0);

        let d = dm(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(norm_sum(&d), 10.0);
        assert_eq!(norm_l1_adapted(&d), 7.0);
        let swapped = dm(&[&[3.0, 4.0], &[1.0, 2.0]]);
        assert_eq!(norm_l1_adapted(&swapped), 7.0);
        assert_eq!(norm_frobenius(&dm(&[&[3.0, 4.0], &[0.0, 0.0]])), 5.0);

        let scaled = DifferenceMatrix::new(d.entries().map(|v| 2.5 * v)).unwrap();
        assert_abs_diff_eq!(norm_sum(&scaled), 25.0, epsilon = 1e-12);
        assert!(DifferenceMatrix::new(Matrix::from_rows(&[[-1.0]])).is_err());
    }

    #[test]
    fn frobenius_is_euclidean_norm_of_flattening() {
        let d = dm(&[&[0.5, 1.5, 2.0], &[0.0, 3.0, 1.0]]);
        let flat = flatten_row_major(d.entries());
        let euclid = flat.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_abs_diff_eq!(norm_frobenius(&d), euclid, epsilon = 1e-15);
    }

    #[test]
    fn difference_matrix_examples() {
        let a = ds(&[&[1.0, 10.0], &[2.0, 30.0], &[3.0, 20.0]]);
        let stats = column_stats(&a).unwrap();
        let a_std = standardize(&a, &stats).unwrap();
        let d = difference_matrix(&a_std, &a_std).unwrap();
        assert_eq!(norm_sum(&d), 0.0);

        // Shift column 1 by one standard deviation.
        let sigma = stats.std_devs[1];
        let shifted = Matrix::from_fn(3, 2, |i, j| {
            a.values()[(i, j)] + if j == 1 { sigma } else { 0.0 }
        });
        let b = a.with_values(shifted).unwrap();
        let b_std = standardize(&b, &stats).unwrap();
        let d = difference_matrix(&a_std, &b_std).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(d.entries()[(i, 0)], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(d.entries()[(i, 1)], 1.0, epsilon = 1e-12);
        }
        assert_eq!(difference_matrix(&b_std, &a_std).unwrap(), d);

        // Standardized with its own statistics instead of A's.
        let own = standardize(&b, &column_stats(&b).unwrap()).unwrap();
        assert!(difference_matrix(&a_std, &own).is_err());
        let short = ds(&[&[1.0, 10.0], &[2.0, 30.0]]);
        assert!(difference_matrix(&a_std, &standardize(&short, &stats).unwrap()).is_err());
    }

    #[test]
    fn flatten_examples() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(flatten_row_major(&x), vec![1.0, 2.0, 3.0, 4.0]);
        let row = Matrix::from_rows(&[[5.0, 6.0, 7.0]]);
        assert_eq!(flatten_row_major(&row), vec![5.0, 6.0, 7.0]);
        let col = Matrix::from_rows(&[[5.0], [6.0], [7.0]]);
        assert_eq!(flatten_row_major(&col), vec![5.0, 6.0, 7.0]);
        let wide = Matrix::from_fn(3, 4, |i, j| (i * 10 + j) as f64);
        assert_eq!(flatten_row_major(&wide), flatten_by_index_map(&wide));
    }

    #[test]
    fn correlation_examples() {
        let a = ds(&[&[1.0, -2.0], &[3.0, 0.5], &[-2.0, -0.5]]);
        assert_abs_diff_eq!(correlation(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        let neg = a.with_values(a.values().map(|v| -v)).unwrap();
        assert_abs_diff_eq!(correlation(&a, &neg).unwrap(), -1.0, epsilon = 1e-12);
        let constant = a.with_values(Matrix::from_fn(3, 2, |_, _| 4.0)).unwrap();
        assert!(matches!(
            correlation(&a, &constant),
            Err(Error::UndefinedCorrelation("B"))
        ));
    }

    #[test]
    fn kl_identity_and_unit_shift() {
        let a = ds(&[&[1.0, 2.0], &[2.0, 1.0], &[4.0, 3.5], &[0.0, -1.0], &[3.0, 0.0]]);
        assert!(gaussian_kl(&a, &a, 0.0).unwrap().abs() <= 1e-9);
        assert!(gaussian_kl(&a, &a, 1e-6).unwrap().abs() <= 1e-9);

        // Moments fixed analytically.
        let one = Matrix::from_rows(&[[1.0]]);
        let kl = gaussian_kl_moments(&[0.0], &one, &[1.0], &one).unwrap();
        assert_abs_diff_eq!(kl, 0.5, epsilon = 1e-12);

        // Estimated: samples {-1, 1} and {0, 2} have unit population variance.
        let a1 = ds(&[&[-1.0], &[1.0]]);
        let b1 = ds(&[&[0.0], &[2.0]]);
        assert_abs_diff_eq!(gaussian_kl(&a1, &b1, 0.0).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn kl_is_asymmetric() {
        let a = ds(&[&[-1.0], &[1.0]]);
        let b = ds(&[&[-3.0], &[5.0]]);
        let ab = gaussian_kl(&a, &b, 0.0).unwrap();
        let ba = gaussian_kl(&b, &a, 0.0).unwrap();
        // Variances 1 and 16, means 0 and 1.
        let expect_ab = 0.5 * (1.0 / 16.0 - (1.0f64 / 16.0).ln() - 1.0) + 0.5 / 16.0;
        let expect_ba = 0.5 * (16.0 - 16.0f64.ln() - 1.0) + 0.5;
        assert_abs_diff_eq!(ab, expect_ab, epsilon = 1e-12);
        assert_abs_diff_eq!(ba, expect_ba, epsilon = 1e-12);
        assert!((ab - ba).abs() > 1.0);
    }

    #[test]
    fn kl_singular_without_ridge() {
        let a = ds(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.5], &[0.5, -1.0]]);
        // Collinear B: rank-one covariance.
        let b = ds(&[&[1.0, 1.0], &[0.0, 0.0], &[-1.0, -1.0], &[0.5, 0.5]]);
        assert!(matches!(
            gaussian_kl(&a, &b, 0.0),
            Err(Error::SingularCovariance { which: "B", .. })
        ));
        assert!(gaussian_kl(&a, &b, 1e-6).unwrap().is_finite());
        assert!(gaussian_kl(&a, &b, -1.0).is_err());
    }

    #[test]
    fn policy_json_round_trip_and_validation() {
        let text = r#"{"norm_frobenius": {"enabled": true, "threshold": 2.5},
                       "correlation": {"enabled": true, "threshold": 0.9},
                       "kl": {"enabled": false, "threshold": 1.0}}"#;
        let p: UtilityPolicy<f64> = UtilityPolicy::from_json(text).unwrap();
        assert!(p.is_enabled(Metric::NormFrobenius));
        assert!(!p.is_enabled(Metric::Kl));
        assert!(!p.is_enabled(Metric::NormSum));
        let back = UtilityPolicy::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);

        assert!(matches!(
            UtilityPolicy::<f64>::from_json(r#"{"psnr": {"enabled": true, "threshold": 1}}"#),
            Err(Error::UnknownMetric(_))
        ));
        assert!(matches!(
            UtilityPolicy::<f64>::from_json(r#"{"kl": {"enabled": false, "threshold": 1}}"#),
            Err(Error::InvalidPolicy(_))
        ));
        assert!(matches!(
            UtilityPolicy::<f64>::from_json(
                r#"{"correlation": {"enabled": true, "threshold": 1.5}}"#
            ),
            Err(Error::InvalidPolicy(_))
        ));
        assert!(UtilityPolicy::<f64>::from_json("[1, 2]").is_err());
    }

    #[test]
    fn evaluate_identity_passes_everything() {
        let a = ds(&[&[1.0, 5.0], &[2.0, 3.0], &[4.0, 4.0], &[0.0, 1.0]]);
        let policy = UtilityPolicy::new()
            .with(Metric::NormSum, 0.0)
            .with(Metric::NormL1, 0.0)
            .with(Metric::NormFrobenius, 0.0)
            .with(Metric::Correlation, 1.0)
            .with(Metric::Kl, 1e-9);
        let r = evaluate(&a, &a, &policy).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.norm_sum(), Some(0.0));
        assert_abs_diff_eq!(r.correlation().unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_strict_norms_fail_on_change() {
        let a = ds(&[&[1.0, 5.0], &[2.0, 3.0], &[4.0, 4.0]]);
        let b = ds(&[&[1.0, 5.0], &[2.0, 3.0], &[4.0, 4.5]]);
        let policy = UtilityPolicy::new().with(Metric::NormSum, 0.0);
        let r = evaluate(&a, &b, &policy).unwrap();
        assert!(!r.pass);
        assert_eq!(r.metrics.len(), 1);
        assert!(r.correlation().is_none());
    }

    #[test]
    fn evaluate_kl_boundary_inclusive() {
        let a = ds(&[&[-1.0], &[1.0]]);
        let b = ds(&[&[0.0], &[2.0]]);
        let kl = gaussian_kl(&a, &b, DEFAULT_RIDGE).unwrap();
        let r = evaluate(&a, &b, &UtilityPolicy::new().with(Metric::Kl, kl)).unwrap();
        assert_eq!(r.kl_divergence(), Some(kl));
        assert!(r.pass);
    }

    #[test]
    fn evaluate_undefined_correlation_is_a_failure_not_an_error() {
        let a = ds(&[&[1.0], &[2.0], &[3.0]]);
        let b = ds(&[&[2.0], &[2.0], &[2.0]]);
        let r = evaluate(&a, &b, &UtilityPolicy::new().with(Metric::Correlation, 0.0)).unwrap();
        assert!(!r.pass);
        assert_eq!(r.passed(Metric::Correlation), Some(false));
        assert!(r.correlation().is_none());
        assert!(r.metrics[&Metric::Correlation].note.is_some());
    }

    #[test]
    fn report_json_omits_disabled_metrics() {
        let a = ds(&[&[1.0], &[2.0], &[3.0]]);
        let r = evaluate(&a, &a, &UtilityPolicy::new().with(Metric::NormSum, 1.0)).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        let metrics = json["metrics"].as_object().unwrap();
        assert_eq!(metrics.keys().collect::<Vec<_>>(), ["norm_sum"]);
        assert_eq!(json["pass"], true);
    }

    fn pair() -> impl Strategy<Value = (Matrix<f64>, Matrix<f64>)> {
        (3usize..8, 1usize..4).prop_flat_map(|(n, p)| {
            (
                proptest::collection::vec(-10.0f64..10.0, n * p),
                proptest::collection::vec(-10.0f64..10.0, n * p),
            )
                .prop_map(move |(a, b)| {
                    (Matrix::new(n, p, a).unwrap(), Matrix::new(n, p, b).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn norm_inequalities((a, b) in pair()) {
            let d = DifferenceMatrix::new(Matrix::from_fn(a.rows(), a.cols(), |i, j| (a[(i, j)] - b[(i, j)]).abs())).unwrap();
            prop_assert!(norm_frobenius(&d) <= norm_sum(&d) + 1e-12);
            prop_assert!(norm_l1_adapted(&d) <= norm_sum(&d) + 1e-12);
            let zero = norm_sum(&d) <= 1e-12;
            prop_assert_eq!(zero, norm_frobenius(&d) <= 1e-12);
            prop_assert_eq!(zero, norm_l1_adapted(&d) <= 1e-12);
        }

        #[test]
        fn correlation_affine_invariant((a, b) in pair(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
            let (da, db) = (Dataset::from_matrix(a).unwrap(), Dataset::from_matrix(b).unwrap());
            let Ok(rho) = correlation(&da, &db) else { return Ok(()); };
            prop_assert!((-1.0..=1.0).contains(&rho));
            let ta = da.with_values(da.values().map(|v| scale * v + shift)).unwrap();
            let tb = db.with_values(db.values().map(|v| scale * v + shift)).unwrap();
            prop_assert!((correlation(&ta, &tb).unwrap() - rho).abs() <= 1e-9);
        }

        #[test]
        fn kl_self_zero_and_non_negative((a, b) in pair()) {
            prop_assume!(a.rows() > a.cols() + 1);
            let (da, db) = (Dataset::from_matrix(a).unwrap(), Dataset::from_matrix(b).unwrap());
            let ridge = 1e-3;
            prop_assert!(gaussian_kl(&da, &da, ridge).unwrap().abs() <= 1e-9);
            if let Ok(kl) = gaussian_kl(&da, &db, ridge) {
                prop_assert!(kl >= -1e-9);
            }
        }
    }
}
