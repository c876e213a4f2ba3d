//! Level-wise Gram matrices of the q-inner product.
//!
//! Two independent constructions are provided: the defining sum over `S_k`
//! (capped at [`K_ORACLE`]) and a recursion obtained from pairing the first
//! letter against the left annihilation operator. The recursion is the one
//! used everywhere else; the brute-force sum exists to gate it.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::basis::{enumerate_permutations, word_index, FockContext, Word, K_ORACLE};
use crate::error::{FockError, Result};
use crate::linalg::{sym_apply, sym_eigen};

/// Condition numbers above this are reported as warnings, not failures.
pub const CONDITION_WARNING: f64 = 1e12;

/// `G_k(μ, ν) = Σ_σ q^{inv σ} Π_m δ(μ_{σ(m)}, ν_m)` by enumeration of `S_k`.
pub fn gram_bruteforce(ctx: &FockContext, k: usize) -> Result<DMatrix<f64>> {
    if k > K_ORACLE {
        return Err(FockError::OracleSizeCap { k, cap: K_ORACLE });
    }
    ctx.check_level(k)?;
    let n = ctx.n();
    let q = ctx.q();
    let dim = ctx.dim(k);
    let perms: Vec<(Vec<usize>, f64)> = enumerate_permutations(k)?
        .map(|(p, inv)| (p, q.powi(inv as i32)))
        .collect();
    let words: Vec<Word> = (0..dim).map(|i| Word::from_index(n, k, i)).collect();
    let mut g = DMatrix::zeros(dim, dim);
    let mut permuted = vec![0usize; k];
    // Each σ sends μ to a unique word ν = μ∘σ, so accumulate instead of testing all pairs.
    for (r, mu) in words.iter().enumerate() {
        let letters = mu.letters();
        for (perm, weight) in &perms {
            for (m, &s) in perm.iter().enumerate() {
                permuted[m] = letters[s];
            }
            let c = word_index(&permuted, n);
            g[(r, c)] += weight;
        }
    }
    Ok(g)
}

/// `G_k(i·μ, ν) = Σ_{m : ν_m = i} q^{m-1} G_{k-1}(μ, ν with letter m removed)`.
pub fn gram_recursive(ctx: &FockContext, k: usize, prev: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(FockError::OutOfRange {
            what: "level",
            value: 0,
            lo: 1,
            hi: ctx.levels() as i64,
        });
    }
    ctx.check_level(k)?;
    let n = ctx.n();
    let q = ctx.q();
    let sub = ctx.dim(k - 1);
    if prev.nrows() != sub || prev.ncols() != sub {
        return Err(FockError::Validation(format!(
            "level-{} Gram must be {sub}x{sub}, got {}x{}",
            k - 1,
            prev.nrows(),
            prev.ncols()
        )));
    }
    let dim = ctx.dim(k);
    let qpow: Vec<f64> = (0..k).map(|m| q.powi(m as i32)).collect();
    // For every column word ν: (letter at m, weight q^m, index of ν without m).
    let deletions: Vec<Vec<(usize, f64, usize)>> = (0..dim)
        .map(|c| {
            let nu = Word::from_index(n, k, c);
            let letters = nu.letters();
            (0..k)
                .map(|m| {
                    let mut rest = letters.to_vec();
                    rest.remove(m);
                    (letters[m], qpow[m], word_index(&rest, n))
                })
                .collect()
        })
        .collect();
    let mut g = DMatrix::zeros(dim, dim);
    for c in 0..dim {
        for &(letter, w, rest) in &deletions[c] {
            if w == 0.0 {
                continue;
            }
            let row0 = letter * sub;
            for mu in 0..sub {
                g[(row0 + mu, c)] += w * prev[(mu, rest)];
            }
        }
    }
    Ok(g)
}

/// Gram matrices for levels `0..=N` built by the recursion from `G_0 = [1]`.
pub fn gram_levels(ctx: &FockContext) -> Result<Vec<DMatrix<f64>>> {
    let mut out = Vec::with_capacity(ctx.levels() + 1);
    out.push(DMatrix::from_element(1, 1, 1.0));
    for k in 1..=ctx.levels() {
        let next = gram_recursive(ctx, k, &out[k - 1])?;
        out.push(next);
    }
    Ok(out)
}

/// One level of the factorized Gram data.
#[derive(Debug, Clone)]
pub struct GramLevel {
    pub gram: DMatrix<f64>,
    pub half: DMatrix<f64>,
    pub half_inv: DMatrix<f64>,
    pub inv: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl GramLevel {
    pub fn min_eig(&self) -> f64 {
        self.eigenvalues.min()
    }

    pub fn max_eig(&self) -> f64 {
        self.eigenvalues.max()
    }

    pub fn condition(&self) -> f64 {
        self.max_eig() / self.min_eig()
    }
}

/// Gram matrices with their symmetric square roots, inverse roots and spectra.
#[derive(Debug, Clone)]
pub struct GramFamily {
    ctx: FockContext,
    levels: Vec<GramLevel>,
}

impl GramFamily {
    /// Recursion plus factorization in one step.
    pub fn build(ctx: &FockContext) -> Result<Self> {
        let grams = gram_levels(ctx)?;
        gram_factorize(ctx, grams)
    }

    pub fn ctx(&self) -> &FockContext {
        &self.ctx
    }

    pub fn level(&self, k: usize) -> &GramLevel {
        &self.levels[k]
    }

    pub fn gram(&self, k: usize) -> &DMatrix<f64> {
        &self.levels[k].gram
    }

    pub fn half(&self, k: usize) -> &DMatrix<f64> {
        &self.levels[k].half
    }

    pub fn half_inv(&self, k: usize) -> &DMatrix<f64> {
        &self.levels[k].half_inv
    }

    pub fn inv(&self, k: usize) -> &DMatrix<f64> {
        &self.levels[k].inv
    }

    /// `G_k^{-1} · rhs` by Cholesky solve (more accurate than multiplying by `inv`).
    pub fn solve(&self, k: usize, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.levels[k].chol.solve(rhs)
    }

    pub fn min_eig(&self, k: usize) -> f64 {
        self.levels[k].min_eig()
    }

    pub fn max_eig(&self, k: usize) -> f64 {
        self.levels[k].max_eig()
    }

    pub fn min_eigs(&self) -> Vec<f64> {
        self.levels.iter().map(GramLevel::min_eig).collect()
    }

    /// Levels whose condition number exceeds [`CONDITION_WARNING`].
    pub fn warnings(&self) -> Vec<String> {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.condition() > CONDITION_WARNING)
            .map(|(k, l)| {
                format!(
                    "level {k}: Gram condition number {:.3e} exceeds {:.0e} (q = {})",
                    l.condition(),
                    CONDITION_WARNING,
                    self.ctx.q()
                )
            })
            .collect()
    }

    pub(crate) fn check_ctx(&self, ctx: &FockContext) -> Result<()> {
        if !self.ctx.same_shape(ctx) || self.ctx.q() != ctx.q() {
            return Err(FockError::Validation(format!(
                "Gram family built for (n={}, q={}, N={}) used with (n={}, q={}, N={})",
                self.ctx.n(),
                self.ctx.q(),
                self.ctx.levels(),
                ctx.n(),
                ctx.q(),
                ctx.levels()
            )));
        }
        Ok(())
    }
}

/// Factorize per-level Gram matrices by symmetric eigendecomposition.
pub fn gram_factorize(ctx: &FockContext, grams: Vec<DMatrix<f64>>) -> Result<GramFamily> {
    if grams.len() != ctx.levels() + 1 {
        return Err(FockError::Validation(format!(
            "expected {} Gram levels, got {}",
            ctx.levels() + 1,
            grams.len()
        )));
    }
    let mut levels = Vec::with_capacity(grams.len());
    for (k, gram) in grams.into_iter().enumerate() {
        let d = ctx.dim(k);
        if gram.nrows() != d || gram.ncols() != d {
            return Err(FockError::Validation(format!(
                "level {k} Gram must be {d}x{d}, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        let asym = (&gram - gram.transpose()).amax();
        if asym > ctx.tol_exact() {
            return Err(FockError::Validation(format!(
                "level {k} Gram is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let eig = sym_eigen(&gram);
        let min_eig = eig.eigenvalues.min();
        if min_eig <= ctx.tol_spectral() {
            return Err(FockError::Positivity {
                level: k,
                q: ctx.q(),
                min_eig,
                tol: ctx.tol_spectral(),
            });
        }
        let half = sym_apply(&eig.eigenvalues, &eig.eigenvectors, f64::sqrt);
        let half_inv = sym_apply(&eig.eigenvalues, &eig.eigenvectors, |l| 1.0 / l.sqrt());
        let inv = sym_apply(&eig.eigenvalues, &eig.eigenvectors, |l| 1.0 / l);
        let chol = Cholesky::new(gram.clone()).ok_or(FockError::Positivity {
            level: k,
            q: ctx.q(),
            min_eig,
            tol: ctx.tol_spectral(),
        })?;
        levels.push(GramLevel {
            gram,
            half,
            half_inv,
            inv,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
            chol,
        });
    }
    Ok(GramFamily {
        ctx: ctx.clone(),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::q_factorial;
    use crate::linalg::max_abs;

    fn sorted(v: &DVector<f64>) -> Vec<f64> {
        let mut s: Vec<f64> = v.iter().copied().collect();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s
    }

    #[test]
    fn vacuum_and_first_level() {
        let ctx = FockContext::new(3, 0.7, 3).unwrap();
        assert_eq!(
            gram_bruteforce(&ctx, 0).unwrap(),
            DMatrix::from_element(1, 1, 1.0)
        );
        let g = gram_levels(&ctx).unwrap();
        assert_eq!(g[1], DMatrix::identity(3, 3));
    }

    #[test]
    fn free_case_is_identity() {
        let ctx = FockContext::new(2, 0.0, 5).unwrap();
        for k in 0..=5 {
            let g = gram_bruteforce(&ctx, k).unwrap();
            assert_eq!(g, DMatrix::identity(ctx.dim(k), ctx.dim(k)));
        }
    }

    #[test]
    fn two_letters_level_two() {
        let q = 0.37;
        let ctx = FockContext::new(2, q, 2).unwrap();
        let g = gram_bruteforce(&ctx, 2).unwrap();
        // I + q·swap, swap exchanging (1,2) <-> (2,1) and fixing (1,1), (2,2);
        // swap has eigenvalue −1 once (e12 − e21) and +1 three times
        let mut expected = DMatrix::identity(4, 4);
        expected[(0, 0)] += q;
        expected[(3, 3)] += q;
        expected[(1, 2)] += q;
        expected[(2, 1)] += q;
        assert!(max_abs(&(&g - &expected)) < 1e-15);
        let ev = sorted(&sym_eigen(&g).eigenvalues);
        for (a, b) in ev.iter().zip([1.0 - q, 1.0 + q, 1.0 + q, 1.0 + q]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn one_letter_gram_is_q_factorial() {
        for &q in &[0.5, -0.8] {
            let ctx = FockContext::new(1, q, 7).unwrap();
            let g = gram_levels(&ctx).unwrap();
            for k in 0..=7 {
                assert!((g[k][(0, 0)] - q_factorial(q, k)).abs() < 1e-12);
                if k <= K_ORACLE {
                    let b = gram_bruteforce(&ctx, k).unwrap();
                    assert!((b[(0, 0)] - q_factorial(q, k)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn recursion_matches_oracle() {
        for &n in &[1usize, 2, 3] {
            for &q in &[0.3, -0.3, 0.7, -0.7, 0.9, -0.9] {
                let top = if n == 3 { 5 } else { 6 };
                let ctx = FockContext::new(n, q, top).unwrap();
                let rec = gram_levels(&ctx).unwrap();
                for k in 0..=top {
                    let bf = gram_bruteforce(&ctx, k).unwrap();
                    let diff = max_abs(&(&rec[k] - &bf));
                    assert!(diff <= 1e-12, "n={n} q={q} k={k} diff={diff:e}");
                }
            }
        }
    }

    #[test]
    fn oracle_cap() {
        let ctx = FockContext::new(1, 0.1, 10).unwrap();
        assert!(matches!(
            gram_bruteforce(&ctx, 9),
            Err(FockError::OracleSizeCap { .. })
        ));
    }

    #[test]
    fn recursion_rejects_wrong_predecessor() {
        let ctx = FockContext::new(2, 0.1, 4).unwrap();
        let bad = DMatrix::identity(3, 3);
        assert!(matches!(
            gram_recursive(&ctx, 2, &bad),
            Err(FockError::Validation(_))
        ));
    }

    #[test]
    fn factorization_identities() {
        let ctx = FockContext::new(2, 0.7, 6).unwrap();
        let fam = GramFamily::build(&ctx).unwrap();
        for k in 0..=6 {
            let d = ctx.dim(k);
            let h = fam.half(k);
            assert!(max_abs(&(h * h - fam.gram(k))) < 1e-10);
            assert!(max_abs(&(h * fam.half_inv(k) - DMatrix::identity(d, d))) < 1e-10);
            assert!(max_abs(&(fam.gram(k) * fam.inv(k) - DMatrix::identity(d, d))) < 1e-10);
        }
    }

    #[test]
    fn free_factorization_is_trivial() {
        let ctx = FockContext::new(2, 0.0, 4).unwrap();
        let fam = GramFamily::build(&ctx).unwrap();
        for k in 0..=4 {
            let id = DMatrix::identity(ctx.dim(k), ctx.dim(k));
            assert!(max_abs(&(fam.half(k) - &id)) < 1e-15);
            assert!(max_abs(&(fam.half_inv(k) - &id)) < 1e-15);
        }
    }

    #[test]
    fn half_root_spectrum_two_letters() {
        let ctx = FockContext::new(2, 0.5, 2).unwrap();
        let fam = GramFamily::build(&ctx).unwrap();
        let ev = sorted(&sym_eigen(fam.half(2)).eigenvalues);
        let expected = [0.5f64.sqrt(), 1.5f64.sqrt(), 1.5f64.sqrt(), 1.5f64.sqrt()];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn positivity_near_one() {
        let ctx = FockContext::new(2, 0.9, 6).unwrap();
        let fam = GramFamily::build(&ctx).unwrap();
        assert!(fam.min_eigs().iter().all(|&m| m > 0.0));
        let ctx = FockContext::new(2, -0.9, 6).unwrap();
        let fam = GramFamily::build(&ctx).unwrap();
        assert!(fam.min_eigs().iter().all(|&m| m > 0.0));
    }

    #[test]
    fn positivity_failure_is_reported() {
        let ctx = FockContext::new(2, 0.5, 2).unwrap();
        let mut grams = gram_levels(&ctx).unwrap();
        grams[2] = -grams[2].clone();
        match gram_factorize(&ctx, grams) {
            Err(FockError::Positivity { level, .. }) => assert_eq!(level, 2),
            other => panic!("expected positivity failure, got {other:?}"),
        }
    }

    #[test]
    fn reversal_symmetry() {
        let ctx = FockContext::new(3, -0.7, 4).unwrap();
        let g = gram_levels(&ctx).unwrap();
        for k in 0..=4 {
            let d = ctx.dim(k);
            let rev: Vec<usize> = (0..d)
                .map(|i| {
                    let mut w = Word::from_index(3, k, i).letters().to_vec();
                    w.reverse();
                    word_index(&w, 3)
                })
                .collect();
            for r in 0..d {
                for c in 0..d {
                    assert!((g[k][(rev[r], rev[c])] - g[k][(r, c)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn min_eig_non_increasing_for_positive_q() {
        for &q in &[0.3, 0.7, 0.9] {
            let ctx = FockContext::new(2, q, 7).unwrap();
            let fam = GramFamily::build(&ctx).unwrap();
            let m = fam.min_eigs();
            assert!(m.windows(2).all(|w| w[1] <= w[0] + 1e-12), "q={q}: {m:?}");
        }
    }
}
