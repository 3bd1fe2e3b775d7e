//! Dense symmetric eigendecomposition and exact functional calculus `φ(H)`.
//!
//! Eigenvectors are stored orthonormal in the weighted inner product
//! `⟨u, v⟩ = Σ u_i v_i w`, so `φ(H) f = V φ(Λ) Vᵀ W f` with `W = w·I`, and the
//! kernel of `φ(H)` is `K = V φ(Λ) Vᵀ`, acting as `(Tf)_i = Σ_j K_ij f_j w`.

use std::io::Write;
use std::sync::Arc;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exponent::{weighted_lp, Exponent};
use crate::grid::{DirichletOperator, Grid, GridFunction};

/// Relative eigen-residual bound `‖A v − λ v‖ ≤ tol · λ_max` for unit `v`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Default dense-kernel budget: 8000² entries.
pub const DEFAULT_KERNEL_BUDGET: usize = 8000 * 8000;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    operator: Arc<DirichletOperator>,
    eigenvalues: Vec<f64>,
    vectors: Mat<f64>,
    max_residual: f64,
}

/// Full eigendecomposition of a Dirichlet operator.
pub fn decompose(op: DirichletOperator) -> Result<SpectralDecomposition> {
    SpectralDecomposition::new(op)
}

impl SpectralDecomposition {
    pub fn new(op: DirichletOperator) -> Result<Self> {
        let n = op.len();
        let dense = op.to_dense();
        let evd = dense
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let eigenvalues: Vec<f64> = evd.S().column_vector().iter().copied().collect();
        let mut unit = evd.U().to_owned();
        drop(evd);
        drop(dense);

        let lambda_max = eigenvalues.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
        let mut max_residual = 0.0_f64;
        for k in 0..n {
            let u = unit.col_as_slice(k);
            let au = op.apply(u);
            let r = au
                .iter()
                .zip(u)
                .map(|(a, x)| (a - eigenvalues[k] * x).powi(2))
                .sum::<f64>()
                .sqrt();
            max_residual = max_residual.max(r);
        }
        if !(max_residual <= EIGEN_RESIDUAL_TOL * lambda_max.max(f64::MIN_POSITIVE)) {
            return Err(Error::Solver(format!(
                "eigen residual {max_residual:e} exceeds {EIGEN_RESIDUAL_TOL:e} * {lambda_max:e}"
            )));
        }

        let scale = 1.0 / op.grid().weight().sqrt();
        for k in 0..n {
            for v in unit.col_as_slice_mut(k) {
                *v *= scale;
            }
        }
        Ok(Self {
            operator: Arc::new(op),
            eigenvalues,
            vectors: unit,
            max_residual,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.operator.grid()
    }

    pub fn operator(&self) -> &DirichletOperator {
        &self.operator
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.len() - 1]
    }

    /// Largest unnormalized eigen-residual seen during construction.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// Column `k` of the weighted-orthonormal eigenvector matrix.
    pub fn eigenvector_values(&self, k: usize) -> &[f64] {
        self.vectors.col_as_slice(k)
    }

    pub fn eigenvector(&self, k: usize) -> GridFunction {
        GridFunction::from_parts(self.grid(), self.eigenvector_values(k).to_vec())
    }

    /// `max |w VᵀV − I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let w = self.grid().weight();
        let gram = self.vectors.transpose() * &self.vectors;
        let n = self.len();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((w * gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Spectral coefficients `c_k = ⟨v_k, f⟩_w`.
    pub fn coefficients(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len(), "grid function length");
        let w = self.grid().weight();
        (0..self.len())
            .map(|k| {
                let v = self.vectors.col_as_slice(k);
                v.iter().zip(values).map(|(a, b)| a * b).sum::<f64>() * w
            })
            .collect()
    }

    /// `Σ_k c_k v_k`, skipping zero coefficients.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len(), "coefficient length");
        let mut out = vec![0.0; self.len()];
        for (k, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                for (o, v) in out.iter_mut().zip(self.vectors.col_as_slice(k)) {
                    *o += c * v;
                }
            }
        }
        out
    }

    /// `φ(λ_k)` for every eigenvalue; fails on a non-finite value.
    pub fn multiplier_values(&self, phi: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &l)| {
                let v = phi(l);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Multiplier(format!(
                        "multiplier is {v} at lambda_{} = {l}",
                        k + 1
                    )))
                }
            })
            .collect()
    }

    /// Apply precomputed multiplier values `m_k` to `f`.
    pub fn apply_multiplier(&self, multiplier: &[f64], f: &GridFunction) -> GridFunction {
        let c = self.coefficients(f.values());
        GridFunction::from_parts(self.grid(), self.synthesize(&scaled(&c, multiplier)))
    }

    /// `φ(H) f`.
    pub fn apply_function(
        &self,
        phi: impl Fn(f64) -> f64,
        f: &GridFunction,
    ) -> Result<GridFunction> {
        let m = self.multiplier_values(phi)?;
        Ok(self.apply_multiplier(&m, f))
    }

    /// `e^{-tH} f`.
    pub fn heat_apply(&self, t: f64, f: &GridFunction) -> Result<GridFunction> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!(
                "heat time {t} must be finite and >= 0"
            )));
        }
        self.apply_function(|l| (-t * l).exp(), f)
    }

    /// Kernel of `φ(H)` under the default memory budget.
    pub fn operator_matrix(&self, phi: impl Fn(f64) -> f64) -> Result<OperatorKernel> {
        self.operator_matrix_with_budget(phi, DEFAULT_KERNEL_BUDGET)
    }

    pub fn operator_matrix_with_budget(
        &self,
        phi: impl Fn(f64) -> f64,
        budget: usize,
    ) -> Result<OperatorKernel> {
        let m = self.multiplier_values(phi)?;
        self.kernel_from_multiplier(&m, budget)
    }

    /// `K = V diag(m) Vᵀ` built only from eigenpairs with `m_k ≠ 0`, then
    /// mirrored so that `K` is bitwise symmetric.
    pub fn kernel_from_multiplier(
        &self,
        multiplier: &[f64],
        budget: usize,
    ) -> Result<OperatorKernel> {
        let n = self.len();
        let entries = n * n;
        if entries > budget {
            return Err(Error::KernelBudget { entries, budget });
        }
        let support: Vec<usize> = (0..n).filter(|&k| multiplier[k] != 0.0).collect();
        let mut matrix = if support.is_empty() {
            Mat::<f64>::zeros(n, n)
        } else {
            let m = support.len();
            let left = Mat::<f64>::from_fn(n, m, |i, c| {
                self.vectors[(i, support[c])] * multiplier[support[c]]
            });
            let right = Mat::<f64>::from_fn(n, m, |i, c| self.vectors[(i, support[c])]);
            &left * right.transpose()
        };
        for j in 0..n {
            for i in 0..j {
                matrix[(i, j)] = matrix[(j, i)];
            }
        }
        Ok(OperatorKernel {
            grid: Arc::clone(self.grid()),
            matrix,
            spectrum: Some(multiplier.to_vec()),
        })
    }

    /// Per-axis gradient norms of `φ(H)` as `L^p → L^p` operators.
    pub fn grad_operator_norms(
        &self,
        phi: impl Fn(f64) -> f64,
        p: Exponent,
    ) -> Result<GradientNorms> {
        let kernel = self.operator_matrix(phi)?;
        kernel.gradient_norms(p)
    }
}

fn scaled(c: &[f64], m: &[f64]) -> Vec<f64> {
    c.iter()
        .zip(m)
        .map(|(a, b)| if *b == 0.0 { 0.0 } else { a * b })
        .collect()
}

/// Gradient operator norms, one per axis, and their componentwise maximum.
/// The Euclidean-gradient norm lies within a factor `√n` of `max`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientNorms {
    pub per_axis: Vec<f64>,
    pub max: f64,
}

/// Dense kernel of a linear operator on grid functions.
#[derive(Debug, Clone)]
pub struct OperatorKernel {
    grid: Arc<Grid>,
    matrix: Mat<f64>,
    /// Multiplier values on the spectrum when the kernel is some `φ(H)`.
    spectrum: Option<Vec<f64>>,
}

impl OperatorKernel {
    /// Wrap an arbitrary kernel matrix (no spectral information).
    pub fn from_matrix(grid: &Arc<Grid>, matrix: Mat<f64>) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(Error::Grid(format!(
                "kernel is {}x{} on a grid of {} points",
                matrix.nrows(),
                matrix.ncols(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            matrix,
            spectrum: None,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// `(Tf)_i = Σ_j K_ij f_j w`.
    pub fn apply(&self, f: &GridFunction) -> GridFunction {
        GridFunction::from_parts(&self.grid, self.apply_values(f.values()))
    }

    pub fn apply_values(&self, values: &[f64]) -> Vec<f64> {
        let w = self.grid.weight();
        let n = self.len();
        let mut out = vec![0.0; n];
        for (j, &fj) in values.iter().enumerate() {
            if fj != 0.0 {
                let c = fj * w;
                for (o, k) in out.iter_mut().zip(self.matrix.col_as_slice(j)) {
                    *o += c * k;
                }
            }
        }
        out
    }

    /// `(Σ_j |K_ij|^{p'} w)^{1/p'}` for row `i`.
    pub fn row_norm(&self, i: usize, p_conj: Exponent) -> f64 {
        let row: Vec<f64> = (0..self.len()).map(|j| self.matrix[(i, j)]).collect();
        weighted_lp(&row, self.grid.weight(), p_conj)
    }

    /// `‖T‖_{L^p → L^∞}` as the largest kernel-row `L^{p'}` norm.
    pub fn norm_p_to_infty(&self, p: Exponent) -> f64 {
        let pc = p.conjugate();
        let w = self.grid.weight();
        let n = self.len();
        let value = pc.value();
        // Accumulate row norms column by column to stay cache friendly.
        let mut acc = vec![0.0_f64; n];
        for j in 0..n {
            let col = self.matrix.col_as_slice(j);
            if pc.is_infinite() {
                for (a, k) in acc.iter_mut().zip(col) {
                    *a = a.max(k.abs());
                }
            } else if value == 1.0 {
                for (a, k) in acc.iter_mut().zip(col) {
                    *a += k.abs();
                }
            } else if value == 2.0 {
                for (a, k) in acc.iter_mut().zip(col) {
                    *a += k * k;
                }
            } else {
                for (a, k) in acc.iter_mut().zip(col) {
                    *a += k.abs().powf(value);
                }
            }
        }
        let finish = |a: f64| {
            if pc.is_infinite() {
                a
            } else if value == 1.0 {
                a * w
            } else {
                (a * w).powf(1.0 / value)
            }
        };
        acc.into_iter().map(finish).fold(0.0, f64::max)
    }

    /// Row index attaining [`Self::norm_p_to_infty`] and the extremal input for
    /// that row: `f_j = sign(K_ij) |K_ij|^{p'-1}` (or a delta for `p = 1`).
    pub fn norm_witness(&self, p: Exponent) -> (usize, GridFunction) {
        let pc = p.conjugate();
        let n = self.len();
        let row = (0..n)
            .map(|i| (i, self.row_norm(i, pc)))
            .fold((0, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            })
            .0;
        let k: Vec<f64> = (0..n).map(|j| self.matrix[(row, j)]).collect();
        let f = if p == Exponent::ONE {
            let (jmax, _) =
                k.iter().enumerate().fold(
                    (0, -1.0),
                    |b, (j, v)| if v.abs() > b.1 { (j, v.abs()) } else { b },
                );
            let mut d = vec![0.0; n];
            d[jmax] = k[jmax].signum();
            d
        } else if p.is_infinite() {
            k.iter().map(|v| v.signum()).collect()
        } else {
            let e = pc.value() - 1.0;
            k.iter().map(|v| v.signum() * v.abs().powf(e)).collect()
        };
        (row, GridFunction::from_parts(&self.grid, f))
    }

    /// Exact `‖T‖_{L^p → L^p}` for `p ∈ {1, 2, ∞}`.
    pub fn norm_p_to_p(&self, p: Exponent) -> Result<f64> {
        if p == Exponent::TWO {
            if let Some(spectrum) = &self.spectrum {
                return Ok(spectrum.iter().fold(0.0, |m, v| m.max(v.abs())));
            }
        }
        matrix_norm_p_to_p(&self.matrix, self.grid.weight(), p)
    }

    /// Randomized lower bound `max ‖Tf‖_p / ‖f‖_p` over seeded Gaussian probes,
    /// for any `p`.
    pub fn norm_p_to_p_lower_bound(&self, p: Exponent, probes: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = self.grid.weight();
        let mut best = 0.0_f64;
        for _ in 0..probes {
            let f: Vec<f64> = (0..self.len())
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let nf = weighted_lp(&f, w, p);
            if nf > 0.0 {
                best = best.max(weighted_lp(&self.apply_values(&f), w, p) / nf);
            }
        }
        best
    }

    /// Kernels of `∂_d T`: forward differences of every kernel column.
    pub fn gradient_kernels(&self) -> Vec<Mat<f64>> {
        let n = self.len();
        (0..self.grid.dim())
            .map(|d| {
                let mut out = Mat::<f64>::zeros(n, n);
                for j in 0..n {
                    let col = self.grid.forward_difference(self.matrix.col_as_slice(j), d);
                    out.col_as_slice_mut(j).copy_from_slice(&col);
                }
                out
            })
            .collect()
    }

    pub fn gradient_norms(&self, p: Exponent) -> Result<GradientNorms> {
        let w = self.grid.weight();
        let per_axis = self
            .gradient_kernels()
            .iter()
            .map(|m| matrix_norm_p_to_p(m, w, p))
            .collect::<Result<Vec<_>>>()?;
        let max = per_axis.iter().cloned().fold(0.0, f64::max);
        Ok(GradientNorms { per_axis, max })
    }

    /// Dump as CSV rows `i,j,K` in row-major order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        wtr.write_record(["i", "j", "K"])?;
        for i in 0..self.len() {
            for j in 0..self.len() {
                wtr.write_record([
                    i.to_string(),
                    j.to_string(),
                    self.matrix[(i, j)].to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `L^p → L^p` norm of the operator `f ↦ Σ_j M_ij f_j w` for `p ∈ {1, 2, ∞}`.
pub fn matrix_norm_p_to_p(matrix: &Mat<f64>, weight: f64, p: Exponent) -> Result<f64> {
    let n = matrix.nrows();
    if p == Exponent::ONE {
        Ok((0..matrix.ncols())
            .map(|j| matrix.col_as_slice(j).iter().map(|v| v.abs()).sum::<f64>() * weight)
            .fold(0.0, f64::max))
    } else if p.is_infinite() {
        let mut rows = vec![0.0_f64; n];
        for j in 0..matrix.ncols() {
            for (r, v) in rows.iter_mut().zip(matrix.col_as_slice(j)) {
                *r += v.abs();
            }
        }
        Ok(rows.into_iter().map(|r| r * weight).fold(0.0, f64::max))
    } else if p == Exponent::TWO {
        let s = matrix
            .singular_values()
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        Ok(s.first().copied().unwrap_or(0.0) * weight)
    } else {
        Err(Error::Unsupported(format!(
            "exact operator norm for p = {p}; use the randomized lower bound"
        )))
    }
}
