//! Dense linear algebra: sorted SVD, minimal-norm controls under a residual
//! budget, and a small Cholesky kernel usable at any [`Scalar`] precision.

use nalgebra::{DMatrix, DVector};

use super::scalar::Scalar;
use crate::error::{param, Error, Result};

/// Thin SVD `A = U Σ Vᵀ` with nonincreasing singular values.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.singular_values) * self.v.transpose()
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

pub fn svd(matrix: &DMatrix<f64>) -> Result<Svd> {
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(param("svd input has non-finite entries"));
    }
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return Err(param("svd input is empty"));
    }
    let raw = matrix.clone().svd(true, true);
    let u = raw.u.ok_or_else(|| Error::Numeric("svd (U)".into()))?;
    let vt = raw.v_t.ok_or_else(|| Error::Numeric("svd (Vᵀ)".into()))?;
    let sv = raw.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let k = order.len();
    let mut u_sorted = DMatrix::zeros(u.nrows(), k);
    let mut v_sorted = DMatrix::zeros(vt.ncols(), k);
    let mut s_sorted = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &vt.row(src).transpose());
        s_sorted[dst] = sv[src];
    }
    Ok(Svd {
        u: u_sorted,
        singular_values: s_sorted,
        v: v_sorted,
    })
}

/// Result of [`min_norm_with_budget`].
#[derive(Clone, Debug)]
pub struct MinNormSolution {
    pub x: DVector<f64>,
    pub residual: f64,
    /// Tikhonov parameter at the accepted iterate (0 when unregularized).
    pub lambda: f64,
}

impl MinNormSolution {
    pub fn norm(&self) -> f64 {
        self.x.norm()
    }
}

/// Relative singular-value cutoff below which directions are treated as noise.
pub const NOISE_FLOOR: f64 = 1e-14;

/// Spectral data of one or more decoupled least-squares systems sharing a
/// single Tikhonov parameter.
#[derive(Clone, Debug)]
pub struct TikhonovProfile {
    sigma: Vec<f64>,
    coeffs: Vec<f64>,
    orth2: f64,
    rhs_norm: f64,
}

impl TikhonovProfile {
    /// Collects `(SVD, right-hand side)` pairs of block-diagonal systems.
    pub fn from_blocks<'a, I>(blocks: I) -> Self
    where
        I: IntoIterator<Item = (&'a Svd, &'a DVector<f64>)>,
    {
        let blocks: Vec<_> = blocks.into_iter().collect();
        let top = blocks
            .iter()
            .flat_map(|(d, _)| d.singular_values.iter().cloned())
            .fold(0.0, f64::max);
        let mut sigma = Vec::new();
        let mut coeffs = Vec::new();
        let mut captured = 0.0;
        let mut total = 0.0;
        for (d, rhs) in blocks {
            total += rhs.norm_squared();
            for (i, &s) in d.singular_values.iter().enumerate() {
                if s > NOISE_FLOOR * top {
                    let c = d.u.column(i).dot(rhs);
                    captured += c * c;
                    sigma.push(s);
                    coeffs.push(c);
                }
            }
        }
        TikhonovProfile {
            sigma,
            coeffs,
            orth2: (total - captured).max(0.0),
            rhs_norm: total.sqrt(),
        }
    }

    /// Adds a residual component that no column can reach.
    pub fn with_unreachable(mut self, norm_squared: f64) -> Self {
        self.orth2 += norm_squared;
        self.rhs_norm = (self.rhs_norm.powi(2) + norm_squared).sqrt();
        self
    }

    pub fn residual_at(&self, lambda: f64) -> f64 {
        if lambda.is_infinite() {
            return self.rhs_norm;
        }
        let mut r2 = self.orth2;
        for (s, c) in self.sigma.iter().zip(&self.coeffs) {
            let f = lambda / (s * s + lambda);
            r2 += (f * c).powi(2);
        }
        r2.sqrt()
    }

    /// Tikhonov parameter whose residual lies in `[(1 − rel_tol)·budget, budget]`.
    /// Returns `f64::INFINITY` when the zero control already meets the budget.
    pub fn choose_lambda(&self, budget: f64, rel_tol: f64) -> Result<(f64, f64)> {
        if !(budget > 0.0) {
            return Err(param(format!(
                "residual budget must be positive, got {budget}"
            )));
        }
        if self.rhs_norm <= budget {
            return Ok((f64::INFINITY, self.rhs_norm));
        }
        let best = self.residual_at(0.0);
        if best > budget {
            return Err(Error::Infeasible {
                budget,
                achieved: best,
            });
        }
        let floor = (1.0 - rel_tol) * budget;
        if best >= floor {
            return Ok((0.0, best));
        }
        let top = self.sigma.iter().cloned().fold(0.0, f64::max);
        let mut lo = (top * NOISE_FLOOR).powi(2).max(1e-300);
        let mut hi = top * top * 1e4 + 1.0;
        while self.residual_at(lo) > budget {
            lo *= 1e-4;
            if lo < 1e-300 {
                return Ok((0.0, best));
            }
        }
        while self.residual_at(hi) < floor {
            hi *= 1e4;
        }
        for _ in 0..400 {
            let mid = (lo * hi).sqrt();
            let r = self.residual_at(mid);
            if r > budget {
                hi = mid;
            } else if r < floor {
                lo = mid;
            } else {
                return Ok((mid, r));
            }
        }
        Ok((lo, self.residual_at(lo)))
    }
}

/// Regularized solution `Σ σ/(σ² + λ) (uᵢ·b) vᵢ` of one block.
pub fn tikhonov_solution(decomposition: &Svd, rhs: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let mut x = DVector::zeros(decomposition.v.nrows());
    if lambda.is_infinite() {
        return x;
    }
    let top = decomposition
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    for (i, &s) in decomposition.singular_values.iter().enumerate() {
        if s > NOISE_FLOOR * top {
            let c = decomposition.u.column(i).dot(rhs);
            x.axpy(s / (s * s + lambda) * c, &decomposition.v.column(i), 1.0);
        }
    }
    x
}

/// Smallest-norm `x` with `‖A x − b‖ ≤ budget`, located by bisection on the
/// Tikhonov parameter until the residual lies in `[(1 − rel_tol)·budget, budget]`.
pub fn min_norm_with_budget(
    decomposition: &Svd,
    rhs: &DVector<f64>,
    budget: f64,
    rel_tol: f64,
) -> Result<MinNormSolution> {
    let profile = TikhonovProfile::from_blocks([(decomposition, rhs)]);
    let (lambda, residual) = profile.choose_lambda(budget, rel_tol)?;
    Ok(MinNormSolution {
        x: tikhonov_solution(decomposition, rhs, lambda),
        residual,
        lambda,
    })
}

/// Square matrix stored row-major, for precision-generic kernels.
pub type Dense<T> = Vec<Vec<T>>;

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`.
pub fn cholesky<T: Scalar>(a: &Dense<T>) -> Option<Dense<T>> {
    let n = a.len();
    let mut l = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j].clone();
            for k in 0..j {
                sum = sum - l[i][k].clone() * l[j][k].clone();
            }
            if i == j {
                if !(sum > T::zero()) {
                    return None;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j].clone();
            }
        }
    }
    Some(l)
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
pub fn spd_inverse<T: Scalar>(a: &Dense<T>) -> Option<Dense<T>> {
    let l = cholesky(a)?;
    let n = a.len();
    // Invert L by forward substitution, then form L⁻ᵀ L⁻¹.
    let mut linv = vec![vec![T::zero(); n]; n];
    for c in 0..n {
        for i in c..n {
            let mut sum = if i == c { T::one() } else { T::zero() };
            for k in c..i {
                sum = sum - l[i][k].clone() * linv[k][c].clone();
            }
            linv[i][c] = sum / l[i][i].clone();
        }
    }
    let mut inv = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = T::zero();
            for k in i.max(j)..n {
                sum = sum + linv[k][i].clone() * linv[k][j].clone();
            }
            inv[i][j] = sum.clone();
            inv[j][i] = sum;
        }
    }
    Some(inv)
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1<T: Scalar>(a: &Dense<T>) -> T {
    let n = a.len();
    let mut best = T::zero();
    for j in 0..n {
        let col = (0..n).fold(T::zero(), |acc, i| acc + a[i][j].abs());
        best = T::max_of(best, col);
    }
    best
}

/// 1-norm condition number of an SPD matrix, infinite when it is not numerically SPD.
pub fn spd_condition<T: Scalar>(a: &Dense<T>) -> f64 {
    match spd_inverse(a) {
        Some(inv) => (norm1(a) * norm1(&inv)).to_f64(),
        None => f64::INFINITY,
    }
}

/// Smallest eigenvalue of the symmetric-definite pencil `(A, B)`.
pub fn generalized_min_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(generalized_min_eigenpair(a, b)?.0)
}

/// Smallest eigenpair of `(A, B)`; the vector is `B`-normalized.
pub fn generalized_min_eigenpair(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(f64, DVector<f64>)> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| param("mass matrix is not positive definite"))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("mass factor inverse".into()))?;
    let mut c = &linv * a * linv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(c);
    let (pos, lambda) =
        eig.eigenvalues
            .iter()
            .cloned()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |best, (i, v)| if v < best.1 { (i, v) } else { best },
            );
    let y = eig.eigenvectors.column(pos).into_owned();
    Ok((lambda, linv.transpose() * y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svd_of_diagonal_is_sorted() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let d = svd(&a).unwrap();
        assert_eq!(d.singular_values.as_slice(), &[3.0, 2.0, 1.0]);
        let id = svd(&DMatrix::<f64>::identity(3, 3)).unwrap();
        assert_eq!(id.singular_values.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn svd_reconstructs_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = DMatrix::from_fn(20, 20, |_, _| rng.gen_range(-1.0..1.0));
        let d = svd(&a).unwrap();
        assert!((d.reconstruct() - &a).norm() / a.norm() < 1e-12);
        let utu = d.u.transpose() * &d.u;
        assert!((utu - DMatrix::identity(20, 20)).norm() < 1e-12);
    }

    #[test]
    fn svd_rejects_nan() {
        let a = DMatrix::from_element(2, 2, f64::NAN);
        assert!(svd(&a).is_err());
    }

    #[test]
    fn min_norm_hits_budget() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-3, 1e-6]));
        let b = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let d = svd(&a).unwrap();
        let sol = min_norm_with_budget(&d, &b, 0.5, 0.01).unwrap();
        assert!(sol.residual <= 0.5 && sol.residual >= 0.495);
        // Budget 0 is rejected; budget above ‖b‖ gives zero.
        assert!(min_norm_with_budget(&d, &b, 0.0, 0.01).is_err());
        let zero = min_norm_with_budget(&d, &b, 2.0, 0.01).unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn min_norm_reports_infeasible_budget() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let b = DVector::from_vec(vec![0.0, 1.0]);
        let d = svd(&a).unwrap();
        let err = min_norm_with_budget(&d, &b, 0.5, 0.01).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }

    #[test]
    fn spd_inverse_and_condition() {
        let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let inv = spd_inverse(&a).unwrap();
        let det = 11.0;
        assert!((inv[0][0] - 3.0 / det).abs() < 1e-15);
        assert!((inv[0][1] + 1.0 / det).abs() < 1e-15);
        assert!((spd_condition(&a) - 5.0 * 5.0 / det).abs() < 1e-14);
        assert!(spd_condition(&vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_infinite());
    }
}
