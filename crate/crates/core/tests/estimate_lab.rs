//! Lab reports recomputed row by row from the public module APIs.

use std::f64::consts::PI;
use std::sync::Arc;

use besov_core::besov::{homogeneous_norm_of, inhomogeneous_norm_of, BesovParams};
use besov_core::dyadic::{phi, DyadicPartition};
use besov_core::grid::{
    build_grid, carre_du_champ, DirichletOperator, DomainSpec, GridFunction, PotentialSpec, Shape,
};
use besov_core::lab::{self, Ensemble, GradientMode, NormKind};
use besov_core::paraproduct::{bony_split, leibniz_residual, term_bounds, HolderTuple};
use besov_core::report::{Cell, ExperimentReport, ReportRow};
use besov_core::spectral::SpectralDecomposition;
use besov_core::Exponent;
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SPOT_TOL: f64 = 1e-10;

fn tuple() -> HolderTuple {
    HolderTuple::from_values([1.0, 2.0, 2.0, 2.0, 2.0]).unwrap()
}

fn interval(n: usize) -> (SpectralDecomposition, DyadicPartition) {
    lab::prepare(&DomainSpec::interval(PI, n)).unwrap()
}

/// Five rows (or all, if fewer) chosen by a fixed seed.
fn spot_rows(report: &ExperimentReport) -> Vec<&ReportRow> {
    let measured: Vec<&ReportRow> = report
        .rows
        .iter()
        .filter(|r| r.provenance.name() != "not-reproducible")
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let n = measured.len().min(5);
    sample(&mut rng, measured.len(), n)
        .into_iter()
        .map(|i| measured[i])
        .collect()
}

fn agree(what: &str, reported: f64, recomputed: f64) {
    let scale = recomputed.abs().max(1.0);
    assert!(
        (reported - recomputed).abs() <= SPOT_TOL * scale,
        "{what}: reported {reported}, recomputed {recomputed}"
    );
}

fn int(report: &ExperimentReport, row: &ReportRow, name: &str) -> usize {
    report.number(row, name).unwrap() as usize
}

fn exponent(report: &ExperimentReport, row: &ReportRow) -> Exponent {
    report.param(row, "p").unwrap().to_string().parse().unwrap()
}

#[test]
fn bilinear_rows_recompute() {
    let (dec, part) = interval(63);
    let e = Ensemble::new(42, 8).unwrap();
    let pairs = e.pairs(&dec).unwrap();
    for kind in [NormKind::Homogeneous, NormKind::Inhomogeneous] {
        let s_grid = [0.5, 1.0, 1.5, 2.5, 3.5];
        let r = match kind {
            NormKind::Homogeneous => {
                lab::bilinear_scan(&dec, &part, &e, &s_grid, &tuple(), Exponent::TWO)
            }
            NormKind::Inhomogeneous => {
                lab::inhomogeneous_bilinear_scan(&dec, &part, &e, &s_grid, &tuple(), Exponent::TWO)
            }
        }
        .unwrap();
        for row in spot_rows(&r) {
            let s = r.number(row, "s").unwrap();
            let (f, g) = &pairs[int(&r, row, "argmax_pair")];
            let direct = lab::bilinear_ratio(&dec, &part, f, g, s, &tuple(), Exponent::TWO, kind)
                .unwrap()
                .unwrap();
            agree("max_r", r.number(row, "max_r").unwrap(), direct);
            let regime = r.value(row, "regime").unwrap();
            assert_eq!(
                regime,
                Cell::text(if s < 2.0 { "proved" } else { "diagnostic" })
            );
        }
    }
}

#[test]
fn bernstein_and_gradient_rows_recompute() {
    let (dec, part) = lab::prepare(&DomainSpec::planar(Shape::Rectangle, 1.0, 1.0, 11)).unwrap();
    let ps = [Exponent::ONE, Exponent::TWO, Exponent::INFINITY];
    let r = lab::bernstein_scan(&dec, &part, 1.0, &ps).unwrap();
    for row in spot_rows(&r) {
        let j = r.number(row, "j").unwrap() as i32;
        let p = exponent(&r, row);
        let k = dec.operator_matrix(|l| l * phi(j, l.sqrt())).unwrap();
        agree(
            "ratio_block",
            r.number(row, "ratio_block").unwrap(),
            k.norm_p_to_p(p).unwrap() / (2.0 * j as f64).exp2(),
        );
        let low = dec
            .operator_matrix(|l| {
                l * part
                    .active_range()
                    .filter(|m| *m <= j)
                    .map(|m| phi(m, l.sqrt()))
                    .sum::<f64>()
            })
            .unwrap();
        agree(
            "ratio_lowpass",
            r.number(row, "ratio_lowpass").unwrap(),
            low.norm_p_to_p(p).unwrap() / (2.0 * j as f64).exp2(),
        );
    }

    let times = lab::dyadic_heat_times(dec.lambda_min(), -4, 2);
    let r = lab::gradient_scan(&dec, &part, &GradientMode::Heat { times }, &ps).unwrap();
    for row in spot_rows(&r) {
        let t = r.number(row, "index").unwrap() / dec.lambda_min();
        let p = exponent(&r, row);
        let k = dec.operator_matrix(|l| (-t * l).exp()).unwrap();
        agree(
            "heat gradient",
            r.number(row, "value").unwrap(),
            t.sqrt() * k.gradient_norms(p).unwrap().max,
        );
    }
}

#[test]
fn reconstruction_partition_and_kernel_rows_recompute() {
    let (dec, part) = interval(63);
    let e = Ensemble::new(9, 6).unwrap();
    let fs = e.functions(&dec).unwrap();
    let r = lab::reconstruction_check(&dec, &part, &e).unwrap();
    for row in spot_rows(&r) {
        let f = &fs[int(&r, row, "f")];
        let mut sum = GridFunction::zeros(dec.grid());
        for j in part.active_range() {
            sum = sum.sum(&part.block(&dec, j, f)).unwrap();
        }
        let err = f.difference(&sum).unwrap().lp_norm(Exponent::TWO) / f.lp_norm(Exponent::TWO);
        agree("rel_error", r.number(row, "rel_error").unwrap(), err);
    }

    let r = lab::partition_check(&dec, &part, 10_000);
    let row = &r.rows[0];
    let at = r.number(row, "argmax_lambda").unwrap().sqrt();
    let dev = (part.active_range().map(|j| phi(j, at)).sum::<f64>() - 1.0).abs();
    agree(
        "max_deviation",
        r.number(row, "max_deviation").unwrap(),
        dev,
    );

    let r = lab::kernel_norm_check(&dec, &part, &[1, 3], 20, 5).unwrap();
    for row in spot_rows(&r) {
        let j = r.number(row, "j").unwrap() as i32;
        let p = exponent(&r, row);
        let k = dec.operator_matrix(|l| phi(j, l.sqrt())).unwrap();
        let pc = p.conjugate();
        let sup = (0..k.len()).map(|i| k.row_norm(i, pc)).fold(0.0, f64::max);
        agree("reported", r.number(row, "reported").unwrap(), sup);
    }
}

#[test]
fn paraproduct_rows_recompute() {
    let (dec, part) = interval(63);
    let e = Ensemble::new(4, 6).unwrap();
    let pairs = e.pairs(&dec).unwrap();
    let r = lab::paraproduct_check(&dec, &part, &e).unwrap();
    for row in spot_rows(&r) {
        let (f, g) = &pairs[int(&r, row, "pair")];
        let split = bony_split(&dec, &part, f, g).unwrap();
        let total = split.pi1.sum(&split.pi2).unwrap().sum(&split.pi3).unwrap();
        let res = f
            .product(g)
            .unwrap()
            .difference(&total)
            .unwrap()
            .lp_norm(Exponent::TWO);
        let scale = f.lp_norm(Exponent::INFINITY)
            * g.lp_norm(Exponent::INFINITY)
            * dec.grid().measure().sqrt();
        agree(
            "rel_residual",
            r.number(row, "rel_residual").unwrap(),
            res / scale,
        );
    }

    let (f, g) = &pairs[0];
    let r = lab::term_bounds_scan(
        &dec,
        &part,
        f,
        g,
        &[0.5, 1.0, 1.5, 2.5],
        &tuple(),
        Exponent::TWO,
    )
    .unwrap();
    for row in spot_rows(&r) {
        let s = r.number(row, "s").unwrap();
        let tb = term_bounds(&dec, &part, f, g, s, &tuple(), Exponent::TWO).unwrap();
        let direct = homogeneous_norm_of(
            &dec,
            &part,
            &f.product(g).unwrap(),
            &BesovParams::new(s, Exponent::ONE, Exponent::TWO),
        );
        agree(
            "product_norm",
            r.number(row, "product_norm").unwrap(),
            direct,
        );
        agree("total", r.number(row, "total").unwrap(), tb.total());
    }
}

#[test]
fn case_b_rows_recompute() {
    let (dec, part) = interval(127);
    let f = Ensemble::new(6, 1)
        .unwrap()
        .functions(&dec)
        .unwrap()
        .remove(0);
    let g = GridFunction::constant(dec.grid(), 1.0);
    let r = lab::case_b_scan(&dec, &part, &f, &g, &tuple()).unwrap();
    for row in spot_rows(&r) {
        let j = r.number(row, "j").unwrap() as i32;
        let k = r.number(row, "k").unwrap() as i32;
        let fk = part.block(&dec, k, &f);
        let sg = if k - 3 < part.j_min() {
            GridFunction::zeros(dec.grid())
        } else {
            part.low_pass(&dec, k - 3, &g)
        };
        let num = part
            .block(&dec, j, &fk.product(&sg).unwrap())
            .lp_norm(Exponent::ONE);
        agree("numerator", r.number(row, "numerator").unwrap(), num);
        let den = fk.lp_norm(Exponent::TWO) * g.lp_norm(Exponent::TWO);
        agree("denominator", r.number(row, "denominator").unwrap(), den);
        if let Some(ratio) = r.number(row, "ratio") {
            agree("ratio", ratio, num * (2.0 * (j - k) as f64).exp2() / den);
        }
    }
}

#[test]
fn chain_rows_recompute() {
    let (dec, part) = interval(63);
    let e = Ensemble::new(12, 3).unwrap();
    let fs = e.functions(&dec).unwrap();
    let times = lab::dyadic_heat_times(dec.lambda_min(), -6, 2);
    let r = lab::chain_probe(&dec, &part, &e, &times, 0.25).unwrap();
    assert_eq!(r.rows.last().unwrap().provenance.name(), "not-reproducible");
    assert!(lab::chain_violations(&r).is_empty());
    let op = dec.operator();
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    for row in spot_rows(&r) {
        let f = &fs[int(&r, row, "f")];
        let t = r.number(row, "t_lambda1").unwrap() / dec.lambda_min();
        let u = dec.heat_apply(t, f).unwrap();
        let uu = u.product(&u).unwrap();
        agree(
            "lhs",
            r.number(row, "lhs").unwrap(),
            sup(&carre_du_champ(&u)),
        );
        agree(
            "i_term",
            r.number(row, "i_term").unwrap(),
            sup(&op.apply(uu.values())),
        );
        let hu = op.apply(u.values());
        let cross: Vec<f64> = hu.iter().zip(u.values()).map(|(a, b)| a * b).collect();
        agree("ii_term", r.number(row, "ii_term").unwrap(), sup(&cross));
        let n = dec.grid().dim() as f64;
        let i1 = homogeneous_norm_of(
            &dec,
            &part,
            &uu,
            &BesovParams::new(n + 2.0 - 0.25, Exponent::ONE, Exponent::TWO),
        );
        agree("i1", r.number(row, "i1").unwrap(), i1);
    }
}

#[test]
fn schrodinger_rows_recompute() {
    let spec = DomainSpec::interval(PI, 63);
    let (d0, p0) = lab::prepare(&spec).unwrap();
    let (dv, pv) = lab::prepare(&spec.clone().with_potential(PotentialSpec::well(0.5))).unwrap();
    let e = Ensemble::new(3, 6).unwrap();
    let fs = e.functions(&d0).unwrap();
    let params = BesovParams::new(0.5, Exponent::TWO, Exponent::TWO);
    let r = lab::schrodinger_equivalence_scan(
        &dv,
        &pv,
        &d0,
        &p0,
        &e,
        0.5,
        Exponent::TWO,
        Exponent::TWO,
    )
    .unwrap();
    for row in spot_rows(&r) {
        let f = &fs[int(&r, row, "f")];
        let fv = GridFunction::new(dv.grid(), f.values().to_vec()).unwrap();
        let want = inhomogeneous_norm_of(&dv, &pv, &fv, &params)
            / inhomogeneous_norm_of(&d0, &p0, f, &params);
        agree("ratio", r.number(row, "ratio").unwrap(), want);
    }
}

#[test]
fn constant_potential_matches_shifted_symbols() {
    // With V ≡ c the eigenvectors are unchanged and every eigenvalue moves by c,
    // so the H_V norm can be evaluated in the free eigenbasis.
    let c = 0.3;
    let spec = DomainSpec::interval(PI, 63);
    let (d0, _) = lab::prepare(&spec).unwrap();
    let (dv, pv) = lab::prepare(&spec.clone().with_potential(PotentialSpec::constant(c))).unwrap();
    let e = Ensemble::new(21, 4).unwrap();
    for f in e.functions(&d0).unwrap() {
        let fv = GridFunction::new(dv.grid(), f.values().to_vec()).unwrap();
        for s in [0.0, 0.5] {
            let params = BesovParams::new(s, Exponent::TWO, Exponent::TWO);
            let got = homogeneous_norm_of(&dv, &pv, &fv, &params);
            let want = besov_core::exponent::lq_norm(
                pv.active_range().map(|j| {
                    let b = d0.apply_function(|l| phi(j, (l + c).sqrt()), &f).unwrap();
                    let v = b.lp_norm(Exponent::TWO);
                    if v == 0.0 {
                        0.0
                    } else {
                        (s * j as f64).exp2() * v
                    }
                }),
                Exponent::TWO,
            );
            assert!((got - want).abs() <= 1e-9 * want, "s={s}: {got} vs {want}");
        }
    }
}

#[test]
fn leibniz_rows_recompute() {
    let r = lab::leibniz_refinement(PI, &[31, 63, 127], 2, 42).unwrap();
    let cutoff = |l: f64| besov_core::dyadic::low_pass_multiplier(2, l.max(0.0).sqrt());
    for row in spot_rows(&r) {
        let n = int(&r, row, "resolution");
        let grid = Arc::new(build_grid(&DomainSpec::interval(PI, n)).unwrap());
        let dec = SpectralDecomposition::new(DirichletOperator::from_grid(&grid).unwrap()).unwrap();
        let f = lab::smooth_sample(dec.grid(), 42, 0);
        let g = lab::smooth_sample(dec.grid(), 42, 1);
        agree(
            "residual",
            r.number(row, "residual").unwrap(),
            leibniz_residual(&dec, cutoff, cutoff, &f, &g).unwrap(),
        );
    }
}

#[test]
fn cross_term_decays_at_twice_the_ground_rate() {
    // For large t, (Hu)u ≈ λ_1 c_1² e^{−2tλ_1} v_1², with c_1 the ground coefficient of f.
    let (dec, part) = interval(63);
    let f = Ensemble::new(77, 1)
        .unwrap()
        .functions(&dec)
        .unwrap()
        .remove(0);
    let l1 = dec.lambda_min();
    let c1 = dec.coefficients(f.values())[0];
    let v1 = dec.eigenvector(0);
    let limit = l1 * c1 * c1 * v1.product(&v1).unwrap().lp_norm(Exponent::INFINITY);
    let t = 16.0 / l1;
    let row = lab::chain_row(&dec, &part, &f, t, 0.25).unwrap();
    let scaled = row.ii_term * (2.0 * t * l1).exp();
    assert!(
        (scaled - limit).abs() <= 1e-3 * limit,
        "{scaled} vs {limit}"
    );
}

#[test]
fn case_b_band_is_stable_under_refinement() {
    let band_at = |n: usize| {
        let (dec, part) = interval(n);
        let one = GridFunction::constant(dec.grid(), 1.0);
        let r = lab::case_b_scan(&dec, &part, &one, &one, &tuple()).unwrap();
        lab::case_b_band(&r).unwrap()
    };
    let (a, b) = (band_at(127), band_at(255));
    let drift = [a.0 / b.0, b.0 / a.0, a.1 / b.1, b.1 / a.1]
        .into_iter()
        .fold(0.0, f64::max);
    assert!(drift <= 3.0, "{a:?} vs {b:?}");
}

#[test]
fn bilinear_report_is_deterministic() {
    let (dec, part) = interval(63);
    let e = Ensemble::new(42, 8).unwrap();
    let run = || {
        lab::bilinear_scan(&dec, &part, &e, &[0.5, 1.0], &tuple(), Exponent::TWO)
            .unwrap()
            .to_csv_string()
    };
    assert_eq!(run(), run());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn minkowski_chain_bounds_the_product(
        seed in 0u64..1000,
        s in prop::sample::select(vec![0.25, 0.5, 1.0, 1.5, 1.9, 2.5]),
        q in prop::sample::select(vec![Exponent::ONE, Exponent::TWO, Exponent::INFINITY]),
        t in prop::sample::select(vec![[1.0, 2.0, 2.0, 2.0, 2.0], [2.0, 4.0, 4.0, 2.0, f64::INFINITY], [1.0, 1.0, f64::INFINITY, 2.0, 2.0]]),
    ) {
        let (dec, part) = interval(31);
        let tuple = HolderTuple::from_values(t).unwrap();
        let (f, g) = Ensemble::new(seed, 1).unwrap().pairs(&dec).unwrap().remove(0);
        let tb = term_bounds(&dec, &part, &f, &g, s, &tuple, q).unwrap();
        prop_assert!(tb.product_norm <= tb.total() + 1e-8, "{} > {}", tb.product_norm, tb.total());
    }
}
