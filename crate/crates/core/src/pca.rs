//! Correlation-matrix PCA and anonymization by removal of the leading
//! principal components.
//!
//! Removing components "from the top" and re-expressing the remainder in the
//! original attribute axes is the anonymization step: the released table keeps
//! its columns (height stays height, income stays income) but loses the
//! directions of largest joint variation. The loop removes one more component
//! at a time and stops as soon as the utility policy is violated, releasing the
//! last table that still satisfied it.

use serde::{Deserialize, Serialize};

use crate::dataset::{column_stats, destandardize, standardize, Dataset, StandardizedDataset};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::metrics::{evaluate, UtilityPolicy, UtilityReport};
use crate::scalar::Real;

/// Eigenvalues in descending order with unit eigenvectors as matrix columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Matrix<T>,
}

impl<T: Real> EigenSystem<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> Vec<T> {
        self.eigenvectors.column(k)
    }
}

/// `(1/n) XᵀX`; for data standardized with its own statistics this is the
/// correlation matrix.
pub fn covariance<T: Real>(s: &StandardizedDataset<T>) -> Result<Matrix<T>> {
    let n = s.shape().0;
    if n < 2 {
        return Err(Error::InvalidDataset(format!("need at least 2 rows, found {n}")));
    }
    Ok(scatter(s.values(), n))
}

/// `(1/n) XᵀX` with the symmetric half mirrored rather than recomputed.
pub(crate) fn scatter<T: Real>(x: &Matrix<T>, n: usize) -> Matrix<T> {
    let p = x.cols();
    let mut c = Matrix::zeros(p, p);
    for row in x.row_iter() {
        for i in 0..p {
            let ri = row[i];
            if ri == T::zero() {
                continue;
            }
            for j in i..p {
                c[(i, j)] += ri * row[j];
            }
        }
    }
    let nf = T::from_usize_lossy(n);
    for i in 0..p {
        for j in i..p {
            let v = c[(i, j)] / nf;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Symmetric eigendecomposition with descending eigenvalues and the
/// largest-entry-positive sign convention.
pub fn eig_sym<T: Real>(c: &Matrix<T>) -> Result<EigenSystem<T>> {
    if !c.is_square() {
        return Err(Error::shape((c.rows(), c.rows()), c.shape()));
    }
    let scale = c
        .as_slice()
        .iter()
        .fold(T::one(), |acc, v| acc.max(v.abs()));
    let asym = c.max_asymmetry();
    if asym > T::lit(1e-9) * scale {
        return Err(Error::NotSymmetric(asym.to_f64_lossy()));
    }
    let (eigenvalues, eigenvectors) = symmetric_eigen(c)?;
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// `X − (X W_k) W_kᵀ` where `W_k` holds the first `k` eigenvector columns.
/// Equal to `X W_r W_rᵀ` over the retained columns `W_r`, since `W` is
/// orthonormal.
pub(crate) fn project_out_top<T: Real>(
    x: &Matrix<T>,
    vectors: &Matrix<T>,
    k: usize,
) -> Matrix<T> {
    let mut out = x.clone();
    if k == 0 {
        return out;
    }
    let p = x.cols();
    let mut scores = vec![T::zero(); k];
    for i in 0..x.rows() {
        let row = x.row(i);
        for (c, score) in scores.iter_mut().enumerate() {
            *score = (0..p).map(|j| row[j] * vectors[(j, c)]).sum();
        }
        let out_row = out.row_mut(i);
        for (j, o) in out_row.iter_mut().enumerate() {
            let back: T = scores
                .iter()
                .enumerate()
                .map(|(c, &s)| s * vectors[(j, c)])
                .sum();
            *o -= back;
        }
    }
    out
}

fn check_k(k: usize, p: usize) -> Result<()> {
    if k + 1 > p {
        return Err(Error::OutOfRange {
            what: "components to remove",
            value: k.to_string(),
            range: format!("0..={}", p.saturating_sub(1)),
        });
    }
    Ok(())
}

/// Removes the `k` largest principal components and expresses the result in
/// the original (standardized) attribute axes.
pub fn remove_top_components<T: Real>(
    s: &StandardizedDataset<T>,
    es: &EigenSystem<T>,
    k: usize,
) -> Result<StandardizedDataset<T>> {
    let p = s.shape().1;
    if es.dim() != p || es.eigenvectors.shape() != (p, p) {
        return Err(Error::DimensionMismatch {
            expected: format!("eigensystem of dimension {p}"),
            found: format!("{}", es.dim()),
        });
    }
    check_k(k, p)?;
    s.with_values(project_out_top(s.values(), &es.eigenvectors, k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    PolicyViolated,
    AllButOneRemoved,
    MaxKReached,
}

/// How the component basis evolves over the removal loop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Decompose `A` once; step `k` removes the top-`k` subspace of that basis.
    #[default]
    Fixed,
    /// Re-run the decomposition on the already reduced data at every step and
    /// remove its single largest component.
    Recomputed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AnonymizeOptions {
    /// Upper bound on components removed; clamped to `p − 1`.
    pub max_k: Option<usize>,
    pub basis: Basis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry<T> {
    pub k: usize,
    pub report: UtilityReport<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnonymizationResult<T> {
    /// The release, in original units: the last `k` whose report passed.
    pub anonymized: Dataset<T>,
    pub components_removed: usize,
    /// One entry per loop iteration, `k = 1, 2, …`.
    pub history: Vec<HistoryEntry<T>>,
    pub stopped_reason: StopReason,
    /// Eigenvalues of the correlation matrix of `A`, descending.
    pub eigenvalues: Vec<T>,
}

/// Standardizes, decomposes, and returns `(A standardized, eigensystem)`.
pub fn decompose<T: Real>(d: &Dataset<T>) -> Result<(StandardizedDataset<T>, EigenSystem<T>)> {
    let stats = column_stats(d)?;
    let x = standardize(d, &stats)?;
    let es = eig_sym(&covariance(&x)?)?;
    Ok((x, es))
}

/// `A` with its `k` largest components removed, back in original units.
pub fn reduce<T: Real>(d: &Dataset<T>, k: usize) -> Result<Dataset<T>> {
    let (x, es) = decompose(d)?;
    destandardize(&remove_top_components(&x, &es, k)?)
}

pub fn anonymize<T: Real>(
    d: &Dataset<T>,
    policy: &UtilityPolicy<T>,
    max_k: Option<usize>,
) -> Result<AnonymizationResult<T>> {
    anonymize_with(
        d,
        policy,
        &AnonymizeOptions {
            max_k,
            basis: Basis::Fixed,
        },
    )
}

/// The removal loop: standardize, decompose, drop the largest remaining
/// component, rotate back, evaluate; continue while the policy passes.
pub fn anonymize_with<T: Real>(
    d: &Dataset<T>,
    policy: &UtilityPolicy<T>,
    options: &AnonymizeOptions,
) -> Result<AnonymizationResult<T>> {
    policy.validate()?;
    let p = d.n_cols();
    let (x, es) = decompose(d)?;
    let ceiling = p - 1;
    let limit = options.max_k.map_or(ceiling, |m| m.min(ceiling));

    let mut history = Vec::new();
    let mut released = d.clone();
    let mut removed = 0;
    let mut current = x.values().clone();
    let mut stopped_reason = if limit == ceiling {
        StopReason::AllButOneRemoved
    } else {
        StopReason::MaxKReached
    };

    for k in 1..=limit {
        let reduced = match options.basis {
            Basis::Fixed => project_out_top(x.values(), &es.eigenvectors, k),
            Basis::Recomputed => {
                let local = eig_sym(&scatter(&current, d.n_rows()))?;
                project_out_top(&current, &local.eigenvectors, 1)
            }
        };
        let candidate = destandardize(&x.with_values(reduced.clone())?)?;
        let report = evaluate(d, &candidate, policy)?;
        let pass = report.pass;
        log::debug!("k = {k}: policy {}", if pass { "passed" } else { "violated" });
        history.push(HistoryEntry { k, report });
        if !pass {
            stopped_reason = StopReason::PolicyViolated;
            break;
        }
        released = candidate;
        removed = k;
        current = reduced;
    }

    Ok(AnonymizationResult {
        anonymized: released,
        components_removed: removed,
        history,
        stopped_reason,
        eigenvalues: es.eigenvalues,
    })
}
