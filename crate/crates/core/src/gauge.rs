//! Gauge-invariant part, the isometries `s_i = (ρ_L^+)^{1/2} L_i`, the
//! endomorphism `φ`, the matrix-unit maps `λ`, `λ^{-1}` and the telescoping
//! recovery of `L_k` from `s`-type data.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{FockError, Result};
use crate::gram::GramFamily;
use crate::op::{
    build_gauge, build_vacuum_projection, plain_pseudoinverse, Generators, GradedOperator,
    PhasedOperator, Side,
};
use crate::report::{DecaySeries, VerificationReport};

/// Projection onto the degree-0 part: off-diagonal level blocks are dropped.
pub fn conditional_expectation(x: &GradedOperator) -> GradedOperator {
    let blocks: Vec<_> = x
        .blocks()
        .filter(|(&(ko, ki), _)| ko == ki)
        .map(|(&k, b)| (k, b.clone()))
        .collect();
    GradedOperator::from_blocks(x.ctx(), format!("E({})", x.label()), blocks)
        .expect("blocks copied from a valid operator")
}

/// Average of `γ_z(x)` over the `points`-th roots of unity.
pub fn gauge_average(x: &GradedOperator, points: usize) -> Result<PhasedOperator> {
    if points == 0 {
        return Err(FockError::InvalidParameter(
            "gauge average needs at least one point".into(),
        ));
    }
    let ctx = x.ctx();
    let mut re = GradedOperator::zero(ctx, format!("avg Re γ({})", x.label()));
    let mut im = GradedOperator::zero(ctx, format!("avg Im γ({})", x.label()));
    let w = 1.0 / points as f64;
    for p in 0..points {
        let theta = std::f64::consts::TAU * p as f64 / points as f64;
        let u = build_gauge(ctx, Complex64::from_polar(1.0, theta))?;
        let c = u.conjugate(x);
        re = re.add(&c.re.scale(w))?;
        im = im.add(&c.im.scale(w))?;
    }
    Ok(PhasedOperator { re, im })
}

/// The operators `s_i`, their q-adjoints and the isometry defect per level.
#[derive(Debug, Clone)]
pub struct IsometryFamily {
    pub s: Vec<GradedOperator>,
    pub s_adj: Vec<GradedOperator>,
    /// Norm of `s_i^† s_j − δ_ij` on input level `m`, keyed by `(i, j, m)` with 0-based letters.
    pub defect_profile: BTreeMap<(usize, usize, usize), f64>,
    /// Check of `Σ_i s_i s_i^† = 1 − P_Ω`.
    pub range: VerificationReport,
    s_hat: Vec<GradedOperator>,
    gram: GramFamily,
}

impl IsometryFamily {
    pub fn n(&self) -> usize {
        self.s.len()
    }

    /// Profile `m ↦ ‖s_i^† s_j − δ_ij‖` on level `m`.
    pub fn defect(&self, i: usize, j: usize) -> Vec<(usize, f64)> {
        self.defect_profile
            .range((i, j, 0)..=(i, j, usize::MAX))
            .map(|(&(_, _, m), &v)| (m, v))
            .collect()
    }

    pub fn gram(&self) -> &GramFamily {
        &self.gram
    }
}

pub fn build_isometries(gram: &GramFamily) -> Result<IsometryFamily> {
    let ctx = gram.ctx();
    let g = Generators::orthonormal(gram)?;
    let root = plain_pseudoinverse(&g.particle_number(Side::Left)?, 0.5)?;
    let s_hat: Vec<GradedOperator> = g
        .left
        .iter()
        .enumerate()
        .map(|(i, l)| {
            root.compose(l)
                .map(|op| op.with_label(format!("s_{}", i + 1)))
        })
        .collect::<Result<_>>()?;
    let s_hat_t: Vec<GradedOperator> = s_hat.iter().map(GradedOperator::transpose).collect();

    let id = GradedOperator::identity(ctx);
    let mut defect_profile = BTreeMap::new();
    // s_j annihilates level N, so the profile covers levels 0..N−1
    let top = ctx.levels() - 1;
    for i in 0..ctx.n() {
        for j in 0..ctx.n() {
            let mut d = s_hat_t[i].compose(&s_hat[j])?;
            if i == j {
                d = d.sub(&id)?;
            }
            for m in 0..=top {
                defect_profile.insert((i, j, m), d.plain_level_norm(m));
            }
        }
    }

    let sum = GradedOperator::linear_combination(
        ctx,
        "Σ s_i s_i^†",
        s_hat
            .iter()
            .zip(&s_hat_t)
            .map(|(a, b)| a.compose(b))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .map(|t| (1.0, t)),
    )?;
    let target = id.sub(&build_vacuum_projection(ctx))?;
    let diff = sum.sub(&target)?;
    let mut range = VerificationReport::new("isometry_range", ctx.tol_exact());
    range.meta("n", ctx.n());
    range.meta("q", ctx.q());
    range.meta("N", ctx.levels());
    range.meta("interior", (0, ctx.levels()));
    for m in 0..=ctx.levels() {
        range.record(m, diff.plain_level_norm(m), || {
            format!("Σ s_i s_i^† − (1 − P_Ω) on level {m}")
        });
    }
    let s = s_hat
        .iter()
        .map(|x| x.from_orthonormal(gram))
        .collect::<Result<Vec<_>>>()?;
    let s_adj = s_hat_t
        .iter()
        .enumerate()
        .map(|(i, x)| {
            Ok(x.from_orthonormal(gram)?
                .with_label(format!("s_{}^†", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IsometryFamily {
        s,
        s_adj,
        defect_profile,
        range,
        s_hat,
        gram: gram.clone(),
    })
}

fn to_hat(x: &GradedOperator, iso: &IsometryFamily) -> Result<GradedOperator> {
    if !iso.gram.ctx().same_shape(x.ctx()) {
        return Err(FockError::Validation(format!(
            "operator '{}' does not match the isometry family truncation",
            x.label()
        )));
    }
    x.orthonormal_form(&iso.gram)
}

/// `φ(x) = Σ_i s_i x s_i^†`.
pub fn phi_endomorphism(x: &GradedOperator, iso: &IsometryFamily) -> Result<GradedOperator> {
    let xh = to_hat(x, iso)?;
    let terms = iso
        .s_hat
        .iter()
        .map(|s| s.compose(&xh)?.compose(&s.transpose()))
        .collect::<Result<Vec<_>>>()?;
    GradedOperator::linear_combination(
        x.ctx(),
        format!("φ({})", x.label()),
        terms.iter().map(|t| (1.0, t)),
    )?
    .from_orthonormal(&iso.gram)
}

fn lambda_hat(xh: &GradedOperator, iso: &IsometryFamily) -> Result<Vec<Vec<GradedOperator>>> {
    iso.s_hat
        .iter()
        .map(|si| {
            let left = si.transpose().compose(xh)?;
            iso.s_hat.iter().map(|sj| left.compose(sj)).collect()
        })
        .collect()
}

fn lambda_inverse_hat(
    blocks: &[Vec<GradedOperator>],
    iso: &IsometryFamily,
) -> Result<GradedOperator> {
    let mut terms = Vec::with_capacity(iso.n() * iso.n());
    for (i, row) in blocks.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            terms.push(
                iso.s_hat[i]
                    .compose(a)?
                    .compose(&iso.s_hat[j].transpose())?,
            );
        }
    }
    GradedOperator::linear_combination(iso.gram.ctx(), "λ^-1", terms.iter().map(|t| (1.0, t)))
}

/// `λ(x)_{ij} = s_i^† x s_j`.
pub fn lambda_map(x: &GradedOperator, iso: &IsometryFamily) -> Result<Vec<Vec<GradedOperator>>> {
    let hat = lambda_hat(&to_hat(x, iso)?, iso)?;
    hat.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, a)| {
                    Ok(a.from_orthonormal(&iso.gram)?.with_label(format!(
                        "λ({})_{}{}",
                        x.label(),
                        i + 1,
                        j + 1
                    )))
                })
                .collect()
        })
        .collect()
}

/// `λ^{-1}(a) = Σ_{ij} s_i a_{ij} s_j^†`.
pub fn lambda_inverse(
    blocks: &[Vec<GradedOperator>],
    iso: &IsometryFamily,
) -> Result<GradedOperator> {
    let n = iso.n();
    if blocks.len() != n || blocks.iter().any(|row| row.len() != n) {
        return Err(FockError::Validation(format!(
            "λ^-1 expects an {n}x{n} array of operators"
        )));
    }
    let hat = blocks
        .iter()
        .map(|row| {
            row.iter()
                .map(|a| to_hat(a, iso))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    lambda_inverse_hat(&hat, iso)?.from_orthonormal(&iso.gram)
}

/// `λ^{-1}(λ(x))` against `(1 − P_Ω) x (1 − P_Ω)` on every level, in orthonormal coordinates.
pub fn verify_lambda_round_trip(
    x: &GradedOperator,
    iso: &IsometryFamily,
    gram: &GramFamily,
) -> Result<VerificationReport> {
    let ctx = gram.ctx();
    if !iso.gram.ctx().same_shape(ctx) || iso.gram.ctx().q() != ctx.q() {
        return Err(FockError::Validation(
            "isometry family built from a different Gram family".into(),
        ));
    }
    let xh = to_hat(x, iso)?;
    let back = lambda_inverse_hat(&lambda_hat(&xh, iso)?, iso)?;
    let comp = GradedOperator::identity(ctx).sub(&build_vacuum_projection(ctx))?;
    let expected = comp.compose(&xh)?.compose(&comp)?;
    let diff = back.sub(&expected)?;
    let mut report = VerificationReport::new("lambda_round_trip", ctx.tol_exact());
    report.meta("x", x.label());
    report.meta("n", ctx.n());
    report.meta("q", ctx.q());
    report.meta("N", ctx.levels());
    report.meta("interior", (0, ctx.levels()));
    for m in 0..=ctx.levels() {
        report.record(m, diff.plain_level_norm(m), || {
            format!("λ^-1 λ(x) − (1−P)x(1−P) on level {m}")
        });
    }
    Ok(report)
}

/// `‖S_l − L_k‖` on `[0, N−1]` for `l = 0..=terms`, with
/// `S_l = L_k Σ_{p ≤ l} (−q)^p (L_1L_1^†)^p L_1^† L_1`.
///
/// Requires `|q|·‖L_1‖² < 1` on the window.
pub fn telescoping_recovery(gram: &GramFamily, k: usize, terms: usize) -> Result<DecaySeries> {
    let ctx = gram.ctx();
    ctx.check_letter(k)?;
    let q = ctx.q();
    let top = ctx.levels() - 1;
    let g = Generators::orthonormal(gram)?;
    let norm = g.left[0].restrict_input(0, top).plain_norm();
    let ratio = q.abs() * norm * norm;
    if ratio >= 1.0 {
        return Err(FockError::Divergent { q, norm, ratio });
    }
    let y = g.left_quadratic(0, 0)?;
    let tail = g.left_adj[0].compose(&g.left[0])?;
    let mut series = DecaySeries::new(format!("telescoping_L{}", k + 1), "terms");
    let mut power = GradedOperator::identity(ctx);
    let mut sum = GradedOperator::zero(ctx, "Σ");
    let mut coeff = 1.0;
    for l in 0..=terms {
        if l > 0 {
            power = y.compose(&power)?;
            coeff *= -q;
        }
        sum = sum.add(&power.compose(&tail)?.scale(coeff))?;
        let s_l = g.left[k].compose(&sum)?;
        series.push(
            l,
            s_l.sub(&g.left[k])?.restrict_input(0, top).plain_norm(),
            (0, top),
        );
    }
    series.meta("n", ctx.n());
    series.meta("q", q);
    series.meta("N", ctx.levels());
    series.meta("norm_L1", norm);
    series.meta("ratio", ratio);
    Ok(series)
}
