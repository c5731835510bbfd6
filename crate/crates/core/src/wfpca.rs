//! Weighted functional principal component decomposition.
//!
//! The transformed series is row-scaled by its observation weights before
//! the decomposition, so the eigenfunctions are driven by the years the
//! weights emphasize. Writing `B` for the years-by-ages matrix of centered
//! log values and `W = diag(w)`, eigenfunctions come from the singular
//! value decomposition of `W B`, equivalent to the eigendecomposition of
//! its age-by-age Gram matrix over years without ever forming it.
//!
//! Inner products over age are discrete sums on the observed grid with
//! unit spacing. Eigenvalues are the squared singular values of `W B`.
//!
//! Scores can be taken against the raw series (`gamma = <beta_t, phi_k>`,
//! the default, which keeps score dynamics on the scale of the data and
//! reduces to ordinary principal component scores when the weights are
//! uniform) or against the weighted series. Residuals are always relative
//! to the scored matrix, so the reconstruction identity
//! `scored_t = sum_k gamma_{t,k} phi_k + omega_t` holds for either basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::clr::ClrDecomposition;
use crate::error::{CodaError, Result};

/// Which matrix the scores (and residuals) are computed against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreBasis {
    /// Project the unweighted centered series onto the eigenfunctions.
    #[default]
    Unweighted,
    /// Project the weight-scaled series onto the eigenfunctions.
    Weighted,
}

/// Rule for choosing how many components to retain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KRule {
    /// Retain exactly this many components.
    Fixed(usize),
    /// Eigenvalue-ratio criterion; `None` caps the search at half the
    /// available components.
    Evr { max_k: Option<usize> },
}

impl Default for KRule {
    fn default() -> Self {
        KRule::Fixed(6)
    }
}

/// A fitted decomposition: eigenfunctions, scores, and residuals.
#[derive(Debug, Clone)]
pub struct FpcaModel {
    phi: DMatrix<f64>,        // K x ages
    scores: DMatrix<f64>,     // n x K
    eigenvalues: Vec<f64>,    // K, nonincreasing
    residuals: DMatrix<f64>,  // n x ages
    basis: ScoreBasis,
}

impl FpcaModel {
    /// Retained eigenfunctions, one per row, orthonormal over the age grid.
    pub fn eigenfunctions(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Principal component scores, years by components.
    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    /// Squared singular values of the weighted matrix, nonincreasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Residual curves of the scored matrix, years by ages.
    pub fn residuals(&self) -> &DMatrix<f64> {
        &self.residuals
    }

    pub fn k(&self) -> usize {
        self.phi.nrows()
    }

    pub fn basis(&self) -> ScoreBasis {
        self.basis
    }

    pub fn n_years(&self) -> usize {
        self.scores.nrows()
    }

    pub fn n_ages(&self) -> usize {
        self.phi.ncols()
    }

    /// One component's score series over the years.
    pub fn score_series(&self, k: usize) -> Vec<f64> {
        self.scores.column(k).iter().copied().collect()
    }
}

/// Fits the weighted decomposition with the default score basis.
pub fn fit_wfpca(decomp: &ClrDecomposition, k_rule: KRule) -> Result<FpcaModel> {
    fit_wfpca_with_basis(decomp, k_rule, ScoreBasis::default())
}

/// Fits the weighted decomposition with an explicit score basis.
pub fn fit_wfpca_with_basis(
    decomp: &ClrDecomposition,
    k_rule: KRule,
    basis: ScoreBasis,
) -> Result<FpcaModel> {
    let beta = decomp.beta();
    let n = beta.nrows();
    let n_ages = beta.ncols();
    if n < 2 {
        return Err(CodaError::domain(format!(
            "need at least 2 years to fit, got {n}"
        )));
    }
    let rank_cap = n.min(n_ages);

    let weights = decomp.scheme().weights();
    let mut weighted = beta.clone();
    for t in 0..n {
        for i in 0..n_ages {
            weighted[(t, i)] *= weights[t];
        }
    }

    let total_energy: f64 = weighted.iter().map(|v| v * v).sum();
    let (all_eigenvalues, mut phi_full) = if total_energy == 0.0 {
        // Degenerate input: orthonormal canonical directions with zero
        // eigenvalues keep every downstream identity valid.
        let mut phi = DMatrix::zeros(rank_cap, n_ages);
        for k in 0..rank_cap {
            phi[(k, k)] = 1.0;
        }
        (vec![0.0; rank_cap], phi)
    } else {
        svd_rows(&weighted)?
    };

    let k = match k_rule {
        KRule::Fixed(k) => {
            if k > rank_cap {
                return Err(CodaError::domain(format!(
                    "requested {k} components exceeds the available rank {rank_cap}"
                )));
            }
            k
        }
        KRule::Evr { max_k } => {
            if total_energy == 0.0 {
                1
            } else {
                let cap = max_k.unwrap_or_else(|| (rank_cap / 2).max(1));
                select_k_evr(&all_eigenvalues, cap)?
            }
        }
    };

    // Deterministic sign convention: each eigenfunction has a nonnegative
    // sum over the age grid.
    for mut row in phi_full.row_iter_mut() {
        if row.iter().sum::<f64>() < 0.0 {
            row.neg_mut();
        }
    }

    let phi = phi_full.rows(0, k).into_owned();
    let scored: DMatrix<f64> = match basis {
        ScoreBasis::Unweighted => beta.clone(),
        ScoreBasis::Weighted => weighted,
    };
    let scores = &scored * phi.transpose();
    let residuals = &scored - &scores * &phi;

    Ok(FpcaModel {
        phi,
        scores,
        eigenvalues: all_eigenvalues[..k].to_vec(),
        residuals,
        basis,
    })
}

/// One-sided Jacobi orthogonalization of the columns of a tall matrix.
///
/// Rotates column pairs until they are mutually orthogonal, accumulating
/// the rotations in `r`, so that `a_in = q * r^T` with the columns of `q`
/// orthogonal and of norm equal to the singular values. Keeps full
/// relative accuracy on rank-deficient inputs; the centered matrix here
/// always is one, since its rows sum to zero.
fn one_sided_jacobi(mut a: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = a.ncols();
    let mut r = DMatrix::<f64>::identity(k, k);
    let tol = 1e-14;
    for _sweep in 0..64 {
        let mut rotated = false;
        for i in 0..k {
            for j in (i + 1)..k {
                let aii = a.column(i).dot(&a.column(i));
                let ajj = a.column(j).dot(&a.column(j));
                let aij = a.column(i).dot(&a.column(j));
                if aij.abs() <= tol * (aii * ajj).sqrt() {
                    continue;
                }
                let theta = (ajj - aii) / (2.0 * aij);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in 0..a.nrows() {
                    let ai = a[(row, i)];
                    let aj = a[(row, j)];
                    a[(row, i)] = c * ai - s * aj;
                    a[(row, j)] = s * ai + c * aj;
                }
                for row in 0..k {
                    let ri = r[(row, i)];
                    let rj = r[(row, j)];
                    r[(row, i)] = c * ri - s * rj;
                    r[(row, j)] = s * ri + c * rj;
                }
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }
    (a, r)
}

/// Extends `kept` orthonormal age-space vectors with deterministic
/// completions: the canonical basis vector with the largest residual
/// after projection, orthogonalized twice for stability.
fn complete_orthonormal(kept: &mut Vec<DVector<f64>>, needed: usize, dim: usize) {
    let residual = |candidate: usize, kept: &[DVector<f64>]| {
        let mut v = DVector::<f64>::zeros(dim);
        v[candidate] = 1.0;
        for _ in 0..2 {
            for basis in kept {
                let proj = basis.dot(&v);
                v -= basis * proj;
            }
        }
        v
    };
    while kept.len() < needed {
        let best = (0..dim)
            .map(|candidate| (candidate, residual(candidate, kept).norm()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite norms"))
            .expect("nonzero dimension");
        if best.1 <= 1e-8 {
            break; // span already covers the space
        }
        let v = residual(best.0, kept);
        let norm = v.norm();
        kept.push(v / norm);
    }
}

/// Singular value decomposition of a rows-by-ages matrix, returning the
/// squared singular values (descending) and the matching right singular
/// vectors as rows.
fn svd_rows(matrix: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n_ages = matrix.ncols();
    let rank_cap = matrix.nrows().min(n_ages);
    let tall = matrix.nrows() >= n_ages;

    // Work on the tall orientation so every column pair is visited.
    let work = if tall {
        matrix.clone()
    } else {
        matrix.transpose()
    };
    let (q, r) = one_sided_jacobi(work);

    let mut order: Vec<(f64, usize)> = (0..q.ncols())
        .map(|i| (q.column(i).norm(), i))
        .collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite norms"));
    let sigma_max = order[0].0;

    let mut eigenvalues = Vec::with_capacity(rank_cap);
    let mut vectors: Vec<DVector<f64>> = Vec::with_capacity(rank_cap);
    for &(sigma, idx) in order.iter().take(rank_cap) {
        eigenvalues.push(sigma * sigma);
        if tall {
            // right singular vectors are the accumulated rotations,
            // orthonormal by construction even for null directions
            vectors.push(r.column(idx).into_owned());
        } else if sigma > 1e-13 * sigma_max {
            vectors.push(q.column(idx) / sigma);
        }
    }
    if !tall {
        // null directions of a wide matrix carry no information; fill
        // them with deterministic orthonormal completions
        for value in eigenvalues.iter_mut().skip(vectors.len()) {
            *value = 0.0;
        }
        complete_orthonormal(&mut vectors, rank_cap, n_ages);
    }
    if vectors.len() != rank_cap {
        return Err(CodaError::domain(
            "singular value decomposition failed to produce a basis",
        ));
    }

    let mut phi = DMatrix::zeros(rank_cap, n_ages);
    for (row, v) in vectors.iter().enumerate() {
        phi.row_mut(row).copy_from(&v.transpose());
    }
    Ok((eigenvalues, phi))
}

/// Eigenvalue-ratio choice of the component count: the `k` maximizing
/// `lambda_k / lambda_{k+1}`, ties broken toward the smallest `k`.
pub fn select_k_evr(eigenvalues: &[f64], max_k: usize) -> Result<usize> {
    if eigenvalues.len() < 2 {
        return Err(CodaError::domain(
            "eigenvalue-ratio selection needs at least 2 eigenvalues",
        ));
    }
    if eigenvalues.iter().filter(|&&v| v > 0.0).count() < 2 {
        return Err(CodaError::domain(
            "eigenvalue-ratio selection needs at least 2 positive eigenvalues",
        ));
    }
    for pair in eigenvalues.windows(2) {
        if pair[1] > pair[0] {
            return Err(CodaError::domain("eigenvalues must be nonincreasing"));
        }
    }
    let cap = max_k.min(eigenvalues.len() - 1).max(1);
    let mut best_k = 1;
    let mut best_ratio = f64::NEG_INFINITY;
    for k in 1..=cap {
        let num = eigenvalues[k - 1];
        let den = eigenvalues[k];
        if num <= 0.0 {
            continue;
        }
        let ratio = if den > 0.0 { num / den } else { f64::INFINITY };
        if ratio > best_ratio {
            best_ratio = ratio;
            best_k = k;
        }
    }
    Ok(best_k)
}
