//! Smooth dyadic partition of unity on the spectrum.
//!
//! The base bump `φ_0` is the normalized exponential bump
//! `h(x) = exp(-1/((x - 1/2)(2 - x)))` on `(1/2, 2)`,
//! `φ_0(x) = h(x) / Σ_k h(2^{-k} x)`, and `φ_j(x) = φ_0(2^{-j} x)`.
//! Blocks act on the spectrum as `φ_j(√λ)`.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::spectral::SpectralDecomposition;

/// Unnormalized bump supported on `[1/2, 2]`.
pub fn bump(x: f64) -> f64 {
    if x > 0.5 && x < 2.0 {
        (-1.0 / ((x - 0.5) * (2.0 - x))).exp()
    } else {
        0.0
    }
}

/// Indices `j` with `φ_j(x)` possibly nonzero, i.e. `2^{j-1} < x < 2^{j+1}`.
fn ladder_window(x: f64) -> RangeInclusive<i32> {
    let e = x.log2().floor() as i32;
    (e - 1)..=(e + 1)
}

/// `φ_0(x)`.
pub fn phi0(x: f64) -> f64 {
    let top = bump(x);
    if top == 0.0 {
        return 0.0;
    }
    let norm: f64 = ladder_window(x).map(|k| bump(x * (-k as f64).exp2())).sum();
    top / norm
}

/// `φ_j(x) = φ_0(2^{-j} x)`. Scaling by a power of two is exact.
pub fn phi(j: i32, x: f64) -> f64 {
    phi0(x * (-j as f64).exp2())
}

/// Inhomogeneous low-pass `ψ(μ) = 1 − Σ_{j≥1} φ_j(√μ)`, clamped to `[0, 1]`.
pub fn psi(mu: f64) -> f64 {
    if mu <= 0.0 {
        return 1.0;
    }
    let x = mu.sqrt();
    let high: f64 = ladder_window(x)
        .filter(|&j| j >= 1)
        .map(|j| phi(j, x))
        .sum();
    (1.0 - high).clamp(0.0, 1.0)
}

/// `Σ_{k ≤ j} φ_k(x)`.
pub fn low_pass_multiplier(j: i32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let window = ladder_window(x);
    if j >= *window.end() {
        return 1.0;
    }
    window.filter(|&k| k <= j).map(|k| phi(k, x)).sum()
}

/// The dyadic ladder adapted to a spectrum `[λ_1, λ_M]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicPartition {
    lambda_min: f64,
    lambda_max: f64,
    j_min: i32,
    j_max: i32,
}

/// Build the partition for a decomposition (`λ_1 > 0` required).
pub fn build_partition(dec: &SpectralDecomposition) -> Result<DyadicPartition> {
    DyadicPartition::for_spectrum(dec.lambda_min(), dec.lambda_max())
}

impl DyadicPartition {
    pub fn for_spectrum(lambda_min: f64, lambda_max: f64) -> Result<Self> {
        if !(lambda_min > 0.0) {
            return Err(Error::Spectrum(format!(
                "smallest eigenvalue {lambda_min} is not positive"
            )));
        }
        if !(lambda_max >= lambda_min && lambda_max.is_finite()) {
            return Err(Error::Spectrum(format!(
                "invalid spectral range [{lambda_min}, {lambda_max}]"
            )));
        }
        let j_min = lambda_min.sqrt().log2().floor() as i32 - 1;
        let j_max = lambda_max.sqrt().log2().ceil() as i32 + 1;
        Ok(Self {
            lambda_min,
            lambda_max,
            j_min,
            j_max,
        })
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn active_range(&self) -> RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    pub fn lambda_range(&self) -> (f64, f64) {
        (self.lambda_min, self.lambda_max)
    }

    /// Block multiplier `λ ↦ φ_j(√λ)`; identically zero outside the active range.
    pub fn block_multiplier(&self, j: i32) -> impl Fn(f64) -> f64 {
        let active = self.active_range().contains(&j);
        move |lambda: f64| {
            if active && lambda > 0.0 {
                phi(j, lambda.sqrt())
            } else {
                0.0
            }
        }
    }

    /// `λ ↦ Σ_{k=j_min}^{j} φ_k(√λ)`.
    pub fn low_pass_symbol(&self, j: i32) -> impl Fn(f64) -> f64 {
        let j_min = self.j_min;
        let j_max = self.j_max;
        move |lambda: f64| {
            if j < j_min || lambda <= 0.0 {
                0.0
            } else {
                let x = lambda.sqrt();
                (j_min..=j.min(j_max)).map(|k| phi(k, x)).sum()
            }
        }
    }

    /// `max_k φ_j(√λ_k)`: how fully the spectrum covers block `j`.
    pub fn population(&self, eigenvalues: &[f64], j: i32) -> f64 {
        let m = self.block_multiplier(j);
        eigenvalues.iter().map(|&l| m(l)).fold(0.0, f64::max)
    }

    /// `φ_j(√H) f`.
    pub fn block(&self, dec: &SpectralDecomposition, j: i32, f: &GridFunction) -> GridFunction {
        if !self.active_range().contains(&j) {
            return GridFunction::zeros(dec.grid());
        }
        let m = block_values(dec, j);
        dec.apply_multiplier(&m, f)
    }

    /// `S_j f = Σ_{k=j_min}^{j} φ_k(√H) f`.
    pub fn low_pass(&self, dec: &SpectralDecomposition, j: i32, f: &GridFunction) -> GridFunction {
        self.split(dec, f).low_pass(j)
    }

    /// `‖f − Σ_j φ_j(√H) f‖_2 / ‖f‖_2`, and `0` for `f = 0`.
    pub fn reconstruction_error(&self, dec: &SpectralDecomposition, f: &GridFunction) -> f64 {
        let norm = l2(f.values());
        if norm == 0.0 {
            return 0.0;
        }
        let total = self.split(dec, f).low_pass(self.j_max);
        let diff: Vec<f64> = f
            .values()
            .iter()
            .zip(total.values())
            .map(|(a, b)| a - b)
            .collect();
        l2(&diff) / norm
    }

    /// All blocks of `f` from a single spectral projection.
    pub fn split(&self, dec: &SpectralDecomposition, f: &GridFunction) -> Blocks {
        let coeffs = dec.coefficients(f.values());
        self.split_coefficients(dec, &coeffs)
    }

    pub fn split_coefficients(&self, dec: &SpectralDecomposition, coeffs: &[f64]) -> Blocks {
        let blocks = self
            .active_range()
            .map(|j| {
                let m = block_values(dec, j);
                let c: Vec<f64> = coeffs
                    .iter()
                    .zip(&m)
                    .map(|(a, b)| if *b == 0.0 { 0.0 } else { a * b })
                    .collect();
                GridFunction::from_parts(dec.grid(), dec.synthesize(&c))
            })
            .collect();
        Blocks {
            j_min: self.j_min,
            blocks,
            zero: GridFunction::zeros(dec.grid()),
        }
    }
}

fn block_values(dec: &SpectralDecomposition, j: i32) -> Vec<f64> {
    dec.eigenvalues()
        .iter()
        .map(|&l| if l > 0.0 { phi(j, l.sqrt()) } else { 0.0 })
        .collect()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The blocks `f_j = φ_j(√H) f` of one grid function over the active range.
#[derive(Debug, Clone)]
pub struct Blocks {
    j_min: i32,
    blocks: Vec<GridFunction>,
    zero: GridFunction,
}

impl Blocks {
    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_min + self.blocks.len() as i32 - 1
    }

    pub fn range(&self) -> RangeInclusive<i32> {
        self.j_min..=self.j_max()
    }

    /// `f_j`; the zero function outside the active range.
    pub fn block(&self, j: i32) -> &GridFunction {
        if self.range().contains(&j) {
            &self.blocks[(j - self.j_min) as usize]
        } else {
            &self.zero
        }
    }

    /// `S_j = Σ_{k ≤ j} f_k`.
    pub fn low_pass(&self, j: i32) -> GridFunction {
        let mut acc = self.zero.clone();
        for k in self.j_min..=j.min(self.j_max()) {
            acc.add_assign_values(self.block(k).values());
        }
        acc
    }

    /// `S_j` for every `j` in the active range, built cumulatively.
    pub fn low_passes(&self) -> Vec<GridFunction> {
        let mut acc = self.zero.clone();
        self.blocks
            .iter()
            .map(|b| {
                acc.add_assign_values(b.values());
                acc.clone()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_support() {
        assert_eq!(bump(0.5), 0.0);
        assert_eq!(bump(2.0), 0.0);
        assert_eq!(phi0(0.49), 0.0);
        assert_eq!(phi0(2.01), 0.0);
        assert!(phi0(1.0) > 0.0);
    }

    #[test]
    fn dyadic_points_have_single_term() {
        for j in -6..8 {
            let x = (j as f64).exp2();
            let terms: Vec<f64> = (-10..12).map(|k| phi(k, x)).filter(|v| *v != 0.0).collect();
            assert_eq!(terms.len(), 1);
            assert!((terms[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn vanishes_below_half_scale() {
        for j in -3..6 {
            let edge = ((j - 1) as f64).exp2();
            for frac in [0.1, 0.5, 0.99, 1.0] {
                assert_eq!(phi(j, edge * frac), 0.0);
            }
        }
    }

    #[test]
    fn partition_sums_to_one() {
        let mut worst = 0.0_f64;
        for i in 0..10_000 {
            let x = (-8.0 + 16.0 * i as f64 / 9_999.0).exp2();
            let s: f64 = (-12..12).map(|j| phi(j, x)).sum();
            worst = worst.max((s - 1.0).abs());
            let nonzero = (-12..12).filter(|&j| phi(j, x) != 0.0).count();
            assert!(nonzero <= 2);
        }
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn inhomogeneous_split_sums_to_one() {
        for i in 0..2000 {
            let x = 10.0 * i as f64 / 1999.0;
            let s = psi(x * x) + (1..10).map(|j| phi(j, x)).sum::<f64>();
            assert!((s - 1.0).abs() <= 1e-10);
        }
        assert_eq!(psi(0.0), 1.0);
        assert_eq!(psi(0.9), 1.0);
        assert_eq!(psi(4.0), 0.0);
    }

    #[test]
    fn low_pass_matches_rescaled_psi() {
        for j in -3..5 {
            for i in 1..400 {
                let x = i as f64 * 0.05;
                let a = low_pass_multiplier(j, x);
                let b = psi(x * x * (-2.0 * j as f64).exp2());
                assert!((a - b).abs() <= 1e-12, "j={j} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn disjoint_supports() {
        for j in -3..5 {
            for k in (j + 2)..(j + 6) {
                for i in 0..4000 {
                    let x = (-5.0 + 12.0 * i as f64 / 3999.0).exp2();
                    assert_eq!(phi(j, x) * phi(k, x), 0.0);
                }
            }
        }
    }

    #[test]
    fn flat_at_support_edges() {
        // Fourth-order central differences of φ_0 straddling 1/2 and 2.
        let d = 5e-3;
        for x in [0.5, 2.0] {
            let f = |k: f64| phi0(x + k * d);
            let d1 = (f(1.0) - f(-1.0)) / (2.0 * d);
            let d2 = (f(1.0) - 2.0 * f(0.0) + f(-1.0)) / (d * d);
            let d3 = (f(2.0) - 2.0 * f(1.0) + 2.0 * f(-1.0) - f(-2.0)) / (2.0 * d * d * d);
            let d4 = (f(2.0) - 4.0 * f(1.0) + 6.0 * f(0.0) - 4.0 * f(-1.0) + f(-2.0)) / d.powi(4);
            for v in [f(0.0), d1, d2, d3, d4] {
                assert!(v.abs() <= 1e-6, "x={x}: {v}");
            }
        }
    }

    #[test]
    fn partition_range() {
        let p = DyadicPartition::for_spectrum(1.0, 4096.0).unwrap();
        assert_eq!(p.j_min(), -1);
        assert_eq!(p.j_max(), 7);
        assert!(matches!(
            DyadicPartition::for_spectrum(0.0, 1.0),
            Err(Error::Spectrum(_))
        ));
        assert!(matches!(
            DyadicPartition::for_spectrum(-1.0, 1.0),
            Err(Error::Spectrum(_))
        ));
    }
}
