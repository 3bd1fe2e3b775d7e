//! Homogeneous and inhomogeneous Besov norms from dyadic block profiles.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dyadic::{psi, DyadicPartition};
use crate::error::{Error, Result};
use crate::exponent::{lq_norm, weighted_lp, Exponent};
use crate::grid::GridFunction;
use crate::spectral::SpectralDecomposition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub s: f64,
    pub p: Exponent,
    pub q: Exponent,
}

impl BesovParams {
    pub fn new(s: f64, p: Exponent, q: Exponent) -> Self {
        Self { s, p, q }
    }
}

/// `‖φ_j(√H) f‖_{L^p}` over the active range, plus the optional low-pass
/// entry `‖ψ(H) f‖_{L^p}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProfile {
    pub p: Exponent,
    pub entries: Vec<(i32, f64)>,
    pub low_pass: Option<f64>,
}

/// Block norms of `f` at exponent `p`, including the `ψ(H)` entry.
pub fn block_profile(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    f: &GridFunction,
    p: Exponent,
) -> BlockProfile {
    let coeffs = dec.coefficients(f.values());
    profile_from_coefficients(dec, part, &coeffs, p)
}

/// Profiles of `f` at several exponents from a single block split.
pub fn block_profiles(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    f: &GridFunction,
    ps: &[Exponent],
) -> Vec<BlockProfile> {
    let w = dec.grid().weight();
    let coeffs = dec.coefficients(f.values());
    let blocks = part.split_coefficients(dec, &coeffs);
    let low = low_pass_values(dec, &coeffs);
    ps.iter()
        .map(|&p| BlockProfile {
            p,
            entries: part
                .active_range()
                .map(|j| (j, weighted_lp(blocks.block(j).values(), w, p)))
                .collect(),
            low_pass: Some(weighted_lp(&low, w, p)),
        })
        .collect()
}

fn low_pass_values(dec: &SpectralDecomposition, coeffs: &[f64]) -> Vec<f64> {
    let low: Vec<f64> = coeffs
        .iter()
        .zip(dec.eigenvalues())
        .map(|(c, &l)| {
            let m = psi(l);
            if m == 0.0 {
                0.0
            } else {
                c * m
            }
        })
        .collect();
    dec.synthesize(&low)
}

fn profile_from_coefficients(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    coeffs: &[f64],
    p: Exponent,
) -> BlockProfile {
    let w = dec.grid().weight();
    let blocks = part.split_coefficients(dec, coeffs);
    let entries = part
        .active_range()
        .map(|j| (j, weighted_lp(blocks.block(j).values(), w, p)))
        .collect();
    let low_pass = Some(weighted_lp(&low_pass_values(dec, coeffs), w, p));
    BlockProfile {
        p,
        entries,
        low_pass,
    }
}

impl BlockProfile {
    pub fn validate(&self) -> Result<()> {
        if self.entries.iter().any(|(_, v)| !(*v >= 0.0)) {
            return Err(Error::Profile("negative or NaN profile entry".into()));
        }
        if self.entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Profile(
                "profile indices not strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn entry(&self, j: i32) -> f64 {
        self.entries
            .iter()
            .find(|(k, _)| *k == j)
            .map_or(0.0, |(_, v)| *v)
    }

    fn check_exponent(&self, params: &BesovParams) -> Result<()> {
        if self.p != params.p {
            return Err(Error::Profile(format!(
                "profile holds L^{} norms, parameters ask for L^{}",
                self.p, params.p
            )));
        }
        Ok(())
    }

    /// Profile rows `j,value`; the low-pass entry, when present, is written
    /// with `j = psi`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        wtr.write_record(["j", "value"])?;
        if let Some(v) = self.low_pass {
            wtr.write_record(["psi".to_string(), v.to_string()])?;
        }
        for (j, v) in &self.entries {
            wtr.write_record([j.to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `‖{2^{sj} ‖φ_j(√H) f‖_p}_j‖_{ℓ^q}` over the active range.
pub fn homogeneous_norm(profile: &BlockProfile, params: &BesovParams) -> Result<f64> {
    profile.check_exponent(params)?;
    let s = params.s;
    Ok(lq_norm(
        profile
            .entries
            .iter()
            .map(|(j, v)| weighted_entry(s, *j, *v)),
        params.q,
    ))
}

/// `‖ψ(H) f‖_p + ‖{2^{sj} ‖φ_j(√H) f‖_p}_{j≥1}‖_{ℓ^q}`.
pub fn inhomogeneous_norm(profile: &BlockProfile, params: &BesovParams) -> Result<f64> {
    profile.check_exponent(params)?;
    let low = profile
        .low_pass
        .ok_or_else(|| Error::Profile("profile has no low-pass entry".into()))?;
    let s = params.s;
    let tail = lq_norm(
        profile
            .entries
            .iter()
            .filter(|(j, _)| *j >= 1)
            .map(|(j, v)| weighted_entry(s, *j, *v)),
        params.q,
    );
    Ok(low + tail)
}

fn weighted_entry(s: f64, j: i32, v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        (s * j as f64).exp2() * v
    }
}

/// Convenience: homogeneous norm of a function.
pub fn homogeneous_norm_of(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    f: &GridFunction,
    params: &BesovParams,
) -> f64 {
    let profile = block_profile(dec, part, f, params.p);
    homogeneous_norm(&profile, params).expect("profile built with params.p")
}

/// Convenience: inhomogeneous norm of a function.
pub fn inhomogeneous_norm_of(
    dec: &SpectralDecomposition,
    part: &DyadicPartition,
    f: &GridFunction,
    params: &BesovParams,
) -> f64 {
    let profile = block_profile(dec, part, f, params.p);
    inhomogeneous_norm(&profile, params).expect("profile built with params.p and low-pass")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(p: Exponent, entries: &[(i32, f64)]) -> BlockProfile {
        BlockProfile {
            p,
            entries: entries.to_vec(),
            low_pass: None,
        }
    }

    #[test]
    fn lifting_of_a_single_block() {
        let pr = profile(Exponent::TWO, &[(-1, 0.0), (0, 0.0), (3, 1.5), (4, 0.0)]);
        for s in [-1.0, 0.0, 0.5, 2.5] {
            for q in [Exponent::ONE, Exponent::TWO, Exponent::INFINITY] {
                let n = homogeneous_norm(&pr, &BesovParams::new(s, Exponent::TWO, q)).unwrap();
                assert_eq!(n, (3.0 * s).exp2() * 1.5);
            }
        }
    }

    #[test]
    fn monotone_in_q() {
        let pr = profile(Exponent::ONE, &[(0, 0.3), (1, 0.2), (2, 0.7), (3, 0.1)]);
        let norm = |q| homogeneous_norm(&pr, &BesovParams::new(0.7, Exponent::ONE, q)).unwrap();
        let q1 = norm(Exponent::ONE);
        let q2 = norm(Exponent::TWO);
        let q4 = norm(Exponent::FOUR);
        let qi = norm(Exponent::INFINITY);
        assert!(q1 >= q2 && q2 >= q4 && q4 >= qi);
    }

    #[test]
    fn missing_low_pass_is_an_error() {
        let pr = profile(Exponent::TWO, &[(0, 1.0)]);
        let r = inhomogeneous_norm(&pr, &BesovParams::new(1.0, Exponent::TWO, Exponent::TWO));
        assert!(matches!(r, Err(Error::Profile(_))));
    }

    #[test]
    fn exponent_mismatch_is_an_error() {
        let pr = profile(Exponent::TWO, &[(0, 1.0)]);
        let r = homogeneous_norm(&pr, &BesovParams::new(1.0, Exponent::ONE, Exponent::TWO));
        assert!(matches!(r, Err(Error::Profile(_))));
    }

    #[test]
    fn validation() {
        assert!(profile(Exponent::ONE, &[(0, 1.0), (1, 0.0)])
            .validate()
            .is_ok());
        assert!(profile(Exponent::ONE, &[(1, 1.0), (0, 0.0)])
            .validate()
            .is_err());
        assert!(profile(Exponent::ONE, &[(0, -1.0)]).validate().is_err());
    }
}
