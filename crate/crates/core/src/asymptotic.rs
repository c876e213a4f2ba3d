//! Finite-size decay experiments for the middle-reversal flip argument.
//!
//! Statements that only hold modulo compacts are measured on high-level
//! windows, typically `[2k+1, N−1]`, which drop both the low-level finite-rank
//! corrections and the truncation edge.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{FockError, Result};
use crate::gram::GramFamily;
use crate::linalg::{spectral_norm, sym_apply, sym_eigen};
use crate::op::{
    build_reverse, build_reverse_middle, embed_left, embed_right, plain_pseudoinverse, Generators,
    GradedOperator, Side,
};
use crate::report::{DecaySeries, VerificationReport};

fn empty_window(lo: usize, hi: usize, k: usize) -> FockError {
    FockError::EmptyWindow {
        lo,
        hi,
        context: format!(" for k = {k}"),
    }
}

/// `‖[J_k, L_i L_j^†]‖` on input levels `[2k+1, N−1]` for `k = 0..=k_max`.
pub fn measure_commutator_decay(
    gram: &GramFamily,
    i: usize,
    j: usize,
    k_max: usize,
) -> Result<DecaySeries> {
    let ctx = gram.ctx();
    ctx.check_letter(i)?;
    ctx.check_letter(j)?;
    let top = ctx.levels() - 1;
    if 2 * k_max + 2 > ctx.levels() {
        return Err(empty_window(2 * k_max + 1, top, k_max));
    }
    let g = Generators::orthonormal(gram)?;
    let x = g.left_quadratic(i, j)?;
    let mut series = DecaySeries::new(format!("commutator_decay_L{}L{}", i + 1, j + 1), "k");
    let mut jk_norms = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let jk = build_reverse_middle(ctx, k).orthonormal_form(gram)?;
        let lo = 2 * k + 1;
        let v = jk.commutator(&x)?.restrict_input(lo, top).plain_norm();
        series.push(k, v, (lo, top));
        jk_norms.push(jk.restrict_input(lo, top).plain_norm());
    }
    series.meta("J_k_norm_on_window", &jk_norms);
    series.meta("n", ctx.n());
    series.meta("q", ctx.q());
    series.meta("N", ctx.levels());
    series.meta("log_abs_q", ctx.q().abs().ln());
    Ok(series)
}

/// `A_k = Σ_{i,j} R_i L_j A_{k−1} R_j^† ρ_R^+ L_i^† ρ_L^+`, `A_0 = 1`.
pub fn build_a_k(gram: &GramFamily, k: usize) -> Result<GradedOperator> {
    a_k_orthonormal(gram, k)?.from_orthonormal(gram)
}

fn a_k_orthonormal(gram: &GramFamily, k: usize) -> Result<GradedOperator> {
    let ctx = gram.ctx();
    let mut a = GradedOperator::identity(ctx).with_label("A_0");
    if k == 0 {
        return Ok(a);
    }
    let g = Generators::orthonormal(gram)?;
    let rho_l = plain_pseudoinverse(&g.particle_number(Side::Left)?, 1.0)?;
    let rho_r = plain_pseudoinverse(&g.particle_number(Side::Right)?, 1.0)?;
    let n = ctx.n();
    // right factors R_j^† ρ_R^+ L_i^† ρ_L^+ do not depend on the step
    let mut tails = vec![Vec::with_capacity(n); n];
    for (i, row) in tails.iter_mut().enumerate() {
        let l_tail = g.left_adj[i].compose(&rho_l)?;
        for j in 0..n {
            row.push(g.right_adj[j].compose(&rho_r)?.compose(&l_tail)?);
        }
    }
    for step in 1..=k {
        let mut terms = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let head = g.right[i].compose(&g.left[j])?;
                terms.push(head.compose(&a)?.compose(&tails[i][j])?);
            }
        }
        a = GradedOperator::linear_combination(
            ctx,
            format!("A_{step}"),
            terms.iter().map(|t| (1.0, t)),
        )?;
    }
    Ok(a)
}

/// `‖J_k − J·A_k‖` on input levels `[2k, N−2]`.
pub fn build_ak_and_verify(gram: &GramFamily, k: usize) -> Result<VerificationReport> {
    let ctx = gram.ctx();
    let lo = 2 * k;
    let hi = ctx.levels().saturating_sub(2);
    if ctx.levels() < 2 || lo > hi {
        return Err(empty_window(lo, hi, k));
    }
    let a = a_k_orthonormal(gram, k)?;
    let jk = build_reverse_middle(ctx, k).orthonormal_form(gram)?;
    let j = build_reverse(ctx).orthonormal_form(gram)?;
    let diff = jk.sub(&j.compose(&a)?)?;
    let mut report = VerificationReport::new(format!("A_{k}"), ctx.tol_exact());
    report.meta("n", ctx.n());
    report.meta("q", ctx.q());
    report.meta("N", ctx.levels());
    report.meta("k", k);
    report.meta("interior", (lo, hi));
    for m in lo..=hi {
        report.record(m, diff.plain_level_norm(m), || {
            format!("J_{k} − J A_{k} on level {m}")
        });
    }
    Ok(report)
}

/// Polar decomposition `U_k = V_k |U_k|` of `U_k = J·J_k`.
#[derive(Debug, Clone)]
pub struct PolarFactors {
    pub u: GradedOperator,
    pub v: GradedOperator,
    pub abs_u: GradedOperator,
    /// `V_k` in orthonormal coordinates.
    pub v_ortho: GradedOperator,
    pub min_sv: f64,
    pub reconstruction_residual: f64,
}

pub fn polar_uk(gram: &GramFamily, k: usize) -> Result<PolarFactors> {
    let ctx = gram.ctx();
    let u = build_reverse(ctx)
        .compose(&build_reverse_middle(ctx, k))?
        .with_label(format!("U_{k}"));
    let ortho = u.orthonormal_form(gram)?;
    let mut v_blocks = Vec::new();
    let mut abs_blocks = Vec::new();
    let mut min_sv = f64::INFINITY;
    // right singular vectors and σ² from the eigendecomposition of ŨᵀŨ;
    // left singular vectors are then Ũ V Σ^{-1}
    for m in 0..=ctx.levels() {
        let b = ortho.diagonal_block(m);
        let e = sym_eigen(&(b.transpose() * &b));
        let level_min = e.eigenvalues.min().max(0.0).sqrt();
        min_sv = min_sv.min(level_min);
        if level_min <= ctx.tol_spectral() {
            continue;
        }
        let abs = sym_apply(&e.eigenvalues, &e.eigenvectors, |l| l.sqrt());
        let abs_inv = sym_apply(&e.eigenvalues, &e.eigenvectors, |l| 1.0 / l.sqrt());
        v_blocks.push(((m, m), &b * abs_inv));
        abs_blocks.push(((m, m), abs));
    }
    if min_sv <= ctx.tol_spectral() {
        return Err(FockError::PolarDegeneracy {
            k,
            min_sv,
            tol: ctx.tol_spectral(),
        });
    }
    let v_ortho = GradedOperator::from_blocks(ctx, format!("V_{k}"), v_blocks)?;
    let abs_ortho = GradedOperator::from_blocks(ctx, format!("|U_{k}|"), abs_blocks)?;
    let reconstruction_residual = ortho.sub(&v_ortho.compose(&abs_ortho)?)?.plain_norm();
    Ok(PolarFactors {
        u,
        v: v_ortho.from_orthonormal(gram)?,
        abs_u: abs_ortho.from_orthonormal(gram)?,
        v_ortho,
        min_sv,
        reconstruction_residual,
    })
}

/// `max_{i,j} ‖V_k^† L_iL_j^† V_k − J L_iL_j^† J‖` on `[2k+1, N−1]`.
pub fn measure_flip_defect(gram: &GramFamily, k_max: usize) -> Result<DecaySeries> {
    let ctx = gram.ctx();
    let top = ctx.levels() - 1;
    if 2 * k_max + 1 > top {
        return Err(empty_window(2 * k_max + 1, top, k_max));
    }
    let g = Generators::orthonormal(gram)?;
    let j = build_reverse(ctx).orthonormal_form(gram)?;
    let mut quadratics = Vec::new();
    for a in 0..ctx.n() {
        for b in 0..ctx.n() {
            let x = g.left_quadratic(a, b)?;
            let flipped = j.compose(&x)?.compose(&j)?;
            quadratics.push((x, flipped));
        }
    }
    let mut series = DecaySeries::new("flip_defect", "k");
    let mut min_svs = Vec::new();
    for k in 0..=k_max {
        let polar = polar_uk(gram, k)?;
        let lo = 2 * k + 1;
        let v = polar.v_ortho.restrict_input(lo, top);
        let v_adj = v.transpose();
        let mut worst: f64 = 0.0;
        for (x, flipped) in &quadratics {
            let d = v_adj.compose(x)?.compose(&v)?.sub(flipped)?;
            worst = worst.max(d.restrict_input(lo, top).plain_norm());
        }
        series.push(k, worst, (lo, top));
        min_svs.push(polar.min_sv);
    }
    series.meta("n", ctx.n());
    series.meta("q", ctx.q());
    series.meta("N", ctx.levels());
    series.meta("polar_min_sv", &min_svs);
    Ok(series)
}

fn psd_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let e = sym_eigen(a);
    sym_apply(&e.eigenvalues, &e.eigenvectors, |l| l.max(0.0).sqrt())
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| rng.sample(StandardNormal))
}

/// Random test of `‖[A^{1/2}, B]‖ ≤ 5/4 ‖B‖ ‖[A, B]‖` with `A = MMᵀ`, entries of `M`, `B` standard normal.
///
/// The residual of a trial is the excess of the left side over the right side
/// plus `1e−12`. Metadata also carries the ratio against `‖B‖^{1/2}‖[A,B]‖^{1/2}`.
pub fn verify_halfpower_inequality(
    trials: usize,
    max_dim: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if trials == 0 || max_dim == 0 {
        return Err(FockError::InvalidParameter(format!(
            "need trials >= 1 and max_dim >= 1, got trials = {trials}, max_dim = {max_dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VerificationReport::new("halfpower_inequality", 0.0);
    let mut max_ratio: f64 = 0.0;
    let mut max_sqrt_ratio: f64 = 0.0;
    let mut violations = 0usize;
    for t in 0..trials {
        let d = rng.random_range(1..=max_dim);
        let m = gaussian(&mut rng, d);
        let a = &m * m.transpose();
        let b = gaussian(&mut rng, d);
        let half = psd_sqrt(&a);
        let lhs = spectral_norm(&(&half * &b - &b * &half));
        let nb = spectral_norm(&b);
        let comm = spectral_norm(&(&a * &b - &b * &a));
        let rhs = 1.25 * nb * comm;
        if rhs > 0.0 {
            max_ratio = max_ratio.max(lhs / (nb * comm));
            max_sqrt_ratio = max_sqrt_ratio.max(lhs / (nb * comm).sqrt());
        }
        let excess = (lhs - rhs - 1e-12).max(0.0);
        if excess > 0.0 {
            violations += 1;
        }
        report.record_global(excess, || format!("trial {t}, dim {d}"));
    }
    report.meta("trials", trials);
    report.meta("max_dim", max_dim);
    report.meta("seed", seed);
    report.meta("max_ratio", max_ratio);
    report.meta("max_ratio_sqrt_form", max_sqrt_ratio);
    report.meta("violations", violations);
    Ok(report)
}

/// `‖1^{⊗k} ⊗ x ⊗ 1^{⊗k}‖` over all levels for `k = 0..=k_max`.
pub fn measure_uniform_boundedness(
    gram: &GramFamily,
    x: &GradedOperator,
    k_max: usize,
) -> Result<DecaySeries> {
    let ctx = gram.ctx();
    if 2 * k_max > ctx.levels() {
        return Err(empty_window(2 * k_max, ctx.levels(), k_max));
    }
    let mut series = DecaySeries::new(format!("uniform_bound_{}", x.label()), "k");
    let mut y = x.clone();
    for k in 0..=k_max {
        if k > 0 {
            y = embed_right(&embed_left(&y)?)?;
        }
        series.push(
            k,
            y.operator_norm(gram, 0, ctx.levels())?,
            (0, ctx.levels()),
        );
    }
    let values = series.values_vec();
    let c_x = values.iter().copied().fold(0.0, f64::max);
    let earlier = values[..values.len() - 1]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let last = *values.last().unwrap_or(&0.0);
    series.meta("C_x", c_x);
    series.meta("bounded", values.len() < 2 || last <= 1.1 * earlier);
    series.meta("n", ctx.n());
    series.meta("q", ctx.q());
    series.meta("N", ctx.levels());
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::FockContext;
    use crate::op::build_vacuum_projection;

    fn gram(n: usize, q: f64, levels: usize) -> GramFamily {
        GramFamily::build(&FockContext::new(n, q, levels).unwrap()).unwrap()
    }

    #[test]
    fn free_commutator_vanishes_on_window() {
        let s = measure_commutator_decay(&gram(2, 0.0, 8), 0, 0, 3).unwrap();
        // J_0 = J does not commute with L_1L_1^† even at q = 0: it swaps e_1⊗ξ and ξ⊗e_1
        assert!((s.values[&0] - 1.0).abs() < 1e-12);
        assert!((1..=3).all(|k| s.values[&k] <= 1e-12), "{:?}", s.values);
        assert_eq!(s.window[&2], (5, 7));
    }

    #[test]
    fn commutator_decay_window_limits() {
        assert!(measure_commutator_decay(&gram(2, 0.5, 8), 0, 0, 4).is_err());
        let s = measure_commutator_decay(&gram(2, -0.5, 8), 0, 1, 3).unwrap();
        assert_eq!(s.window[&3], (7, 7));
        assert_eq!(
            s.metadata["J_k_norm_on_window"].as_array().unwrap().len(),
            4
        );
    }

    #[test]
    fn a_zero_is_identity() {
        let gm = gram(2, 0.5, 5);
        let a = build_a_k(&gm, 0).unwrap();
        assert!(a.max_abs_diff(&GradedOperator::identity(gm.ctx())).unwrap() < 1e-12);
        let r = build_ak_and_verify(&gm, 0).unwrap();
        assert!(r.max_residual < 1e-12);
    }

    #[test]
    fn a_k_recursion() {
        let r = build_ak_and_verify(&gram(2, 0.5, 7), 1).unwrap();
        assert!(r.max_residual <= 1e-9, "{:?}", r.failure_message());
        assert_eq!(
            r.per_level.keys().copied().collect::<Vec<_>>(),
            vec![2, 3, 4, 5]
        );
        let r = build_ak_and_verify(&gram(2, 0.0, 7), 2).unwrap();
        assert!(r.max_residual <= 1e-12);
        assert!(build_ak_and_verify(&gram(2, 0.5, 5), 2).is_err());
    }

    #[test]
    fn polar_examples() {
        let p = polar_uk(&gram(2, 0.0, 6), 1).unwrap();
        let ctx = p.u.ctx().clone();
        assert!(
            p.abs_u
                .max_abs_diff(&GradedOperator::identity(&ctx))
                .unwrap()
                < 1e-12
        );
        assert!(p.v.max_abs_diff(&p.u).unwrap() < 1e-12);

        let p = polar_uk(&gram(2, 0.7, 5), 0).unwrap();
        let ctx = p.u.ctx().clone();
        assert!(p.v.max_abs_diff(&GradedOperator::identity(&ctx)).unwrap() < 1e-10);

        let gm = gram(2, 0.5, 8);
        let p = polar_uk(&gm, 1).unwrap();
        assert!(p.min_sv > 0.1, "min sv {}", p.min_sv);
        assert!(p.reconstruction_residual <= 1e-10);
        // V_k is unitary in the q-geometry
        let vv = p.v.q_adjoint(&gm).unwrap().compose(&p.v).unwrap();
        let d = vv.sub(&GradedOperator::identity(gm.ctx())).unwrap();
        assert!(d.operator_norm(&gm, 0, 8).unwrap() < 1e-10);
    }

    #[test]
    fn flip_defect_examples() {
        let s = measure_flip_defect(&gram(2, 0.0, 8), 3).unwrap();
        // q = 0: J_k is unitary, V_k = J J_k and the defect vanishes for k ≥ 1
        for k in 1..=3 {
            assert!(s.values[&k] <= 1e-10, "k = {k}: {}", s.values[&k]);
        }
        let s = measure_flip_defect(&gram(2, 0.4, 8), 2).unwrap();
        assert!(s.is_strictly_decreasing(), "{:?}", s.values);
    }

    #[test]
    fn flip_defect_fixes_identity() {
        let gm = gram(2, 0.4, 6);
        let p = polar_uk(&gm, 1).unwrap();
        let one = GradedOperator::identity(gm.ctx());
        let v_adj = p.v.q_adjoint(&gm).unwrap();
        let d = v_adj.compose(&p.v).unwrap().sub(&one).unwrap();
        assert!(d.operator_norm(&gm, 3, 5).unwrap() < 1e-10);
    }

    #[test]
    fn halfpower_trivial_cases() {
        let id = DMatrix::<f64>::identity(4, 4);
        let b = DMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64);
        let half = psd_sqrt(&id);
        assert!(spectral_norm(&(&half * &b - &b * &half)) < 1e-14);
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0, 9.0]));
        let bd = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, -1.0, 3.0]));
        let half = psd_sqrt(&a);
        assert!(spectral_norm(&(&half * &bd - &bd * &half)) < 1e-14);
        assert!(spectral_norm(&(&a * &bd - &bd * &a)) < 1e-14);
    }

    #[test]
    fn halfpower_bound_is_not_scale_invariant() {
        // [A^{1/2}, B] scales like t^{1/2} under A -> tA while [A, B] scales like t,
        // so the linear form fails for small A; the square-root form does not.
        let a0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        for t in [1.0, 1e-2, 1e-4] {
            let a = &a0 * t;
            let half = psd_sqrt(&a);
            let lhs = spectral_norm(&(&half * &b - &b * &half));
            let comm = spectral_norm(&(&a * &b - &b * &a));
            let nb = spectral_norm(&b);
            assert!((lhs - t.sqrt()).abs() < 1e-12);
            assert!((comm - t).abs() < 1e-12);
            assert!(lhs <= 1.25 * (nb * comm).sqrt() + 1e-12);
            if t < 0.5 {
                assert!(lhs > 1.25 * nb * comm);
            }
        }
    }

    #[test]
    fn halfpower_report_is_seeded() {
        let a = verify_halfpower_inequality(20, 6, 7).unwrap();
        let b = verify_halfpower_inequality(20, 6, 7).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.metadata["max_ratio_sqrt_form"].as_f64().unwrap() <= 1.25);
        assert!(verify_halfpower_inequality(0, 6, 7).is_err());
    }

    #[test]
    fn uniform_boundedness_examples() {
        let gm = gram(2, 0.0, 8);
        let g = Generators::build(&gm).unwrap();
        let x = g.left_quadratic(0, 0).unwrap();
        let s = measure_uniform_boundedness(&gm, &x, 3).unwrap();
        let v = s.values_vec();
        assert!(v.iter().all(|&a| (a - v[0]).abs() < 1e-12), "{v:?}");

        let gm = gram(2, 0.5, 8);
        let g = Generators::build(&gm).unwrap();
        let x = g.left_quadratic(0, 0).unwrap();
        let s = measure_uniform_boundedness(&gm, &x, 2).unwrap();
        assert_eq!(s.metadata["bounded"], true);

        // identity on positive levels
        let one = GradedOperator::identity(gm.ctx());
        let pos = one.sub(&build_vacuum_projection(gm.ctx())).unwrap();
        let s = measure_uniform_boundedness(&gm, &pos, 3).unwrap();
        assert!(
            s.values_vec().iter().all(|&a| (a - 1.0).abs() < 1e-10),
            "{:?}",
            s.values
        );
    }
}
