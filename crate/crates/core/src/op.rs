//! Level-graded block operators and the builders for every named operator.
//!
//! A [`GradedOperator`] stores dense blocks `(k_out, k_in)` in the *word*
//! basis, which is not orthonormal for `q != 0`. The q-adjoint therefore
//! conjugates by Gram matrices, and norms are taken after moving to
//! orthonormal coordinates with `G^{1/2} · block · G^{-1/2}`.
//!
//! Truncation: levels above `N` do not exist. Creation operators annihilate
//! level `N`, and any product whose image would leave `0..=N` is dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::{word_index, FockContext, Word};
use crate::error::{FockError, Result};
use crate::gram::GramFamily;
use crate::linalg::{kron, max_abs, spectral_norm, sym_apply, sym_eigen};

pub type BlockKey = (usize, usize);

/// Block map between Fock levels; absent blocks are zero.
#[derive(Clone)]
pub struct GradedOperator {
    ctx: FockContext,
    blocks: BTreeMap<BlockKey, DMatrix<f64>>,
    label: String,
}

impl fmt::Debug for GradedOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GradedOperator")
            .field("label", &self.label)
            .field("blocks", &self.blocks.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl GradedOperator {
    pub fn zero(ctx: &FockContext, label: impl Into<String>) -> Self {
        GradedOperator {
            ctx: ctx.clone(),
            blocks: BTreeMap::new(),
            label: label.into(),
        }
    }

    pub fn identity(ctx: &FockContext) -> Self {
        let mut op = Self::zero(ctx, "1");
        for k in 0..=ctx.levels() {
            let d = ctx.dim(k);
            op.blocks.insert((k, k), DMatrix::identity(d, d));
        }
        op
    }

    /// Builds an operator from explicit blocks, validating levels and shapes.
    pub fn from_blocks(
        ctx: &FockContext,
        label: impl Into<String>,
        blocks: impl IntoIterator<Item = (BlockKey, DMatrix<f64>)>,
    ) -> Result<Self> {
        let mut op = Self::zero(ctx, label);
        for (key, m) in blocks {
            op.set_block(key, m)?;
        }
        Ok(op)
    }

    pub fn set_block(&mut self, (ko, ki): BlockKey, m: DMatrix<f64>) -> Result<()> {
        self.ctx.check_level(ko)?;
        self.ctx.check_level(ki)?;
        let shape = (self.ctx.dim(ko), self.ctx.dim(ki));
        if m.shape() != shape {
            return Err(FockError::Validation(format!(
                "block ({ko}, {ki}) must be {}x{}, got {}x{}",
                shape.0,
                shape.1,
                m.nrows(),
                m.ncols()
            )));
        }
        self.blocks.insert((ko, ki), m);
        Ok(())
    }

    pub fn ctx(&self) -> &FockContext {
        &self.ctx
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn block(&self, ko: usize, ki: usize) -> Option<&DMatrix<f64>> {
        self.blocks.get(&(ko, ki))
    }

    /// Block `(ko, ki)` or a zero matrix of the right shape.
    pub fn block_or_zero(&self, ko: usize, ki: usize) -> DMatrix<f64> {
        self.blocks
            .get(&(ko, ki))
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(self.ctx.dim(ko), self.ctx.dim(ki)))
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&BlockKey, &DMatrix<f64>)> {
        self.blocks.iter()
    }

    pub fn block_keys(&self) -> Vec<BlockKey> {
        self.blocks.keys().copied().collect()
    }

    /// `Some(d)` when every block sits at `k_out = k_in + d`.
    pub fn degree(&self) -> Option<i64> {
        let degrees: BTreeSet<i64> = self
            .blocks
            .keys()
            .map(|&(ko, ki)| ko as i64 - ki as i64)
            .collect();
        match degrees.len() {
            0 => Some(0),
            1 => degrees.into_iter().next(),
            _ => None,
        }
    }

    pub fn is_block_diagonal(&self) -> bool {
        self.blocks.keys().all(|&(ko, ki)| ko == ki)
    }

    /// Block acting on level `k` of a block-diagonal operator (zero if absent).
    pub fn diagonal_block(&self, k: usize) -> DMatrix<f64> {
        self.block_or_zero(k, k)
    }

    fn check_compatible(&self, other: &GradedOperator) -> Result<()> {
        if !self.ctx.same_shape(&other.ctx) {
            return Err(FockError::Validation(format!(
                "operators '{}' and '{}' live on different truncations",
                self.label, other.label
            )));
        }
        Ok(())
    }

    /// `self · other`.
    pub fn compose(&self, other: &GradedOperator) -> Result<GradedOperator> {
        self.check_compatible(other)?;
        let mut by_input: BTreeMap<usize, Vec<(usize, &DMatrix<f64>)>> = BTreeMap::new();
        for (&(ko, ki), m) in &self.blocks {
            by_input.entry(ki).or_default().push((ko, m));
        }
        let mut out: BTreeMap<BlockKey, DMatrix<f64>> = BTreeMap::new();
        for (&(mid, ki), b) in &other.blocks {
            if let Some(lefts) = by_input.get(&mid) {
                for &(ko, a) in lefts {
                    let prod = a * b;
                    match out.get_mut(&(ko, ki)) {
                        Some(acc) => *acc += prod,
                        None => {
                            out.insert((ko, ki), prod);
                        }
                    }
                }
            }
        }
        Ok(GradedOperator {
            ctx: self.ctx.clone(),
            blocks: out,
            label: format!("({})·({})", self.label, other.label),
        })
    }

    /// `Σ` of `coeff · op` over the terms.
    pub fn linear_combination<'a>(
        ctx: &FockContext,
        label: impl Into<String>,
        terms: impl IntoIterator<Item = (f64, &'a GradedOperator)>,
    ) -> Result<GradedOperator> {
        let mut out = GradedOperator::zero(ctx, label);
        for (c, op) in terms {
            out.check_compatible(op)?;
            for (&key, m) in &op.blocks {
                match out.blocks.get_mut(&key) {
                    Some(acc) => *acc += m * c,
                    None => {
                        out.blocks.insert(key, m * c);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &GradedOperator) -> Result<GradedOperator> {
        Self::linear_combination(
            &self.ctx,
            format!("{} + {}", self.label, other.label),
            [(1.0, self), (1.0, other)],
        )
    }

    pub fn sub(&self, other: &GradedOperator) -> Result<GradedOperator> {
        Self::linear_combination(
            &self.ctx,
            format!("{} - {}", self.label, other.label),
            [(1.0, self), (-1.0, other)],
        )
    }

    pub fn scale(&self, c: f64) -> GradedOperator {
        GradedOperator {
            ctx: self.ctx.clone(),
            blocks: self.blocks.iter().map(|(&k, m)| (k, m * c)).collect(),
            label: format!("{c}·{}", self.label),
        }
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &GradedOperator) -> Result<GradedOperator> {
        let ab = self.compose(other)?;
        let ba = other.compose(self)?;
        Ok(ab
            .sub(&ba)?
            .with_label(format!("[{}, {}]", self.label, other.label)))
    }

    /// Keeps only the blocks whose input level lies in `lo..=hi`.
    pub fn restrict_input(&self, lo: usize, hi: usize) -> GradedOperator {
        GradedOperator {
            ctx: self.ctx.clone(),
            blocks: self
                .blocks
                .iter()
                .filter(|(&(_, ki), _)| ki >= lo && ki <= hi)
                .map(|(&k, m)| (k, m.clone()))
                .collect(),
            label: self.label.clone(),
        }
    }

    /// Largest entry of `self − other` in the word basis.
    pub fn max_abs_diff(&self, other: &GradedOperator) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.values().map(max_abs).fold(0.0, f64::max)
    }

    /// Adjoint for the q-inner product: block `(ki, ko) = G_ki^{-1} · Bᵀ · G_ko`, via a Cholesky solve.
    pub fn q_adjoint(&self, gram: &GramFamily) -> Result<GradedOperator> {
        gram.check_shape(&self.ctx)?;
        let blocks = self
            .blocks
            .iter()
            .map(|(&(ko, ki), b)| ((ki, ko), gram.solve(ki, &(b.transpose() * gram.gram(ko)))))
            .collect();
        Ok(GradedOperator {
            ctx: self.ctx.clone(),
            blocks,
            label: format!("{}^†", self.label),
        })
    }

    /// `G_ko^{1/2} · block · G_ki^{-1/2}`: the same operator in orthonormal coordinates.
    pub fn orthonormal_form(&self, gram: &GramFamily) -> Result<GradedOperator> {
        gram.check_shape(&self.ctx)?;
        let blocks = self
            .blocks
            .iter()
            .map(|(&(ko, ki), b)| ((ko, ki), gram.half(ko) * b * gram.half_inv(ki)))
            .collect();
        Ok(GradedOperator {
            ctx: self.ctx.clone(),
            blocks,
            label: format!("ortho({})", self.label),
        })
    }

    /// Inverse of [`GradedOperator::orthonormal_form`].
    pub fn from_orthonormal(&self, gram: &GramFamily) -> Result<GradedOperator> {
        gram.check_shape(&self.ctx)?;
        let blocks = self
            .blocks
            .iter()
            .map(|(&(ko, ki), b)| ((ko, ki), gram.half_inv(ko) * b * gram.half(ki)))
            .collect();
        Ok(GradedOperator {
            ctx: self.ctx.clone(),
            blocks,
            label: self.label.clone(),
        })
    }

    /// Plain block transpose (the adjoint once in orthonormal coordinates).
    pub fn transpose(&self) -> GradedOperator {
        GradedOperator {
            ctx: self.ctx.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|(&(ko, ki), b)| ((ki, ko), b.transpose()))
                .collect(),
            label: format!("{}ᵀ", self.label),
        }
    }

    /// Operator norm of the restriction to input levels `lo..=hi`.
    pub fn operator_norm(&self, gram: &GramFamily, lo: usize, hi: usize) -> Result<f64> {
        if lo > hi || hi > self.ctx.levels() {
            return Err(FockError::EmptyWindow {
                lo,
                hi,
                context: format!(" for '{}' (N = {})", self.label, self.ctx.levels()),
            });
        }
        let ortho = self.restrict_input(lo, hi).orthonormal_form(gram)?;
        Ok(ortho.plain_norm())
    }

    /// Norm of the restriction to a single input level.
    pub fn level_norm(&self, gram: &GramFamily, level: usize) -> Result<f64> {
        self.operator_norm(gram, level, level)
    }

    /// Spectral norm of the stored blocks taken as an ordinary matrix.
    ///
    /// Input levels that feed disjoint sets of output levels are measured
    /// separately, so homogeneous operators never assemble the full matrix.
    pub(crate) fn plain_norm(&self) -> f64 {
        let inputs: Vec<usize> = self
            .blocks
            .keys()
            .map(|&(_, ki)| ki)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if inputs.is_empty() {
            return 0.0;
        }
        // union-find over input levels sharing an output level
        let pos: BTreeMap<usize, usize> = inputs.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let mut parent: Vec<usize> = (0..inputs.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut first_by_output: BTreeMap<usize, usize> = BTreeMap::new();
        for &(ko, ki) in self.blocks.keys() {
            let idx = pos[&ki];
            if let Some(&other) = first_by_output.get(&ko) {
                let (a, b) = (find(&mut parent, idx), find(&mut parent, other));
                parent[a] = b;
            } else {
                first_by_output.insert(ko, idx);
            }
        }
        let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &k) in inputs.iter().enumerate() {
            let root = find(&mut parent, i);
            components.entry(root).or_default().push(k);
        }
        components
            .values()
            .map(|cols| self.assembled_norm(cols))
            .fold(0.0, f64::max)
    }

    fn assembled_norm(&self, cols: &[usize]) -> f64 {
        let col_set: BTreeSet<usize> = cols.iter().copied().collect();
        let rows: BTreeSet<usize> = self
            .blocks
            .keys()
            .filter(|(_, ki)| col_set.contains(ki))
            .map(|&(ko, _)| ko)
            .collect();
        if rows.len() == 1 && cols.len() == 1 {
            let ko = *rows.iter().next().unwrap();
            return spectral_norm(&self.blocks[&(ko, cols[0])]);
        }
        let row_off: BTreeMap<usize, usize> = rows
            .iter()
            .scan(0, |acc, &k| {
                let o = *acc;
                *acc += self.ctx.dim(k);
                Some((k, o))
            })
            .collect();
        let col_off: BTreeMap<usize, usize> = cols
            .iter()
            .scan(0, |acc, &k| {
                let o = *acc;
                *acc += self.ctx.dim(k);
                Some((k, o))
            })
            .collect();
        let nr: usize = rows.iter().map(|&k| self.ctx.dim(k)).sum();
        let nc: usize = cols.iter().map(|&k| self.ctx.dim(k)).sum();
        let mut full = DMatrix::zeros(nr, nc);
        for (&(ko, ki), b) in &self.blocks {
            if let (Some(&r), Some(&c)) = (row_off.get(&ko), col_off.get(&ki)) {
                full.view_mut((r, c), b.shape()).copy_from(b);
            }
        }
        spectral_norm(&full)
    }

    /// [`GradedOperator::plain_norm`] of the restriction to one input level.
    pub(crate) fn plain_level_norm(&self, level: usize) -> f64 {
        self.restrict_input(level, level).plain_norm()
    }

    /// Applies the operator to a single basis word, returning `(word, coefficient)` pairs.
    pub fn apply_to_word(&self, word: &Word) -> Result<Vec<(Word, f64)>> {
        let k = word.level();
        self.ctx.check_level(k)?;
        let col = word.index(self.ctx.n());
        let mut out = Vec::new();
        for (&(ko, ki), b) in &self.blocks {
            if ki != k {
                continue;
            }
            for r in 0..b.nrows() {
                let v = b[(r, col)];
                if v != 0.0 {
                    out.push((Word::from_index(self.ctx.n(), ko, r), v));
                }
            }
        }
        Ok(out)
    }
}

impl GramFamily {
    pub(crate) fn check_shape(&self, ctx: &FockContext) -> Result<()> {
        self.check_ctx(ctx)
    }
}

/// Block for a map sending each level-`k_in` word to one level-`k_out` word.
fn word_map_block(
    ctx: &FockContext,
    k_out: usize,
    k_in: usize,
    f: impl Fn(&[usize]) -> Vec<usize>,
) -> DMatrix<f64> {
    let n = ctx.n();
    let mut m = DMatrix::zeros(ctx.dim(k_out), ctx.dim(k_in));
    for c in 0..ctx.dim(k_in) {
        let w = Word::from_index(n, k_in, c);
        let image = f(w.letters());
        debug_assert_eq!(image.len(), k_out);
        m[(word_index(&image, n), c)] = 1.0;
    }
    m
}

/// `L_i`: prefix by `e_i`; level `N` is annihilated.
pub fn build_creation_left(ctx: &FockContext, i: usize) -> Result<GradedOperator> {
    ctx.check_letter(i)?;
    let mut op = GradedOperator::zero(ctx, format!("L_{}", i + 1));
    for k in 0..ctx.levels() {
        let b = word_map_block(ctx, k + 1, k, |w| {
            let mut v = Vec::with_capacity(w.len() + 1);
            v.push(i);
            v.extend_from_slice(w);
            v
        });
        op.blocks.insert((k + 1, k), b);
    }
    Ok(op)
}

/// `R_i`: suffix by `e_i`; level `N` is annihilated.
pub fn build_creation_right(ctx: &FockContext, i: usize) -> Result<GradedOperator> {
    ctx.check_letter(i)?;
    let mut op = GradedOperator::zero(ctx, format!("R_{}", i + 1));
    for k in 0..ctx.levels() {
        let b = word_map_block(ctx, k + 1, k, |w| {
            let mut v = w.to_vec();
            v.push(i);
            v
        });
        op.blocks.insert((k + 1, k), b);
    }
    Ok(op)
}

/// All left creation operators `L_1..L_n`.
pub fn creation_left_all(ctx: &FockContext) -> Result<Vec<GradedOperator>> {
    (0..ctx.n()).map(|i| build_creation_left(ctx, i)).collect()
}

/// All right creation operators `R_1..R_n`.
pub fn creation_right_all(ctx: &FockContext) -> Result<Vec<GradedOperator>> {
    (0..ctx.n()).map(|i| build_creation_right(ctx, i)).collect()
}

/// Tensor reversal `J`.
pub fn build_reverse(ctx: &FockContext) -> GradedOperator {
    let mut op = build_reverse_middle(ctx, 0);
    op.label = "J".into();
    op
}

/// `J_k = 1^{⊗k} ⊗ J ⊗ 1^{⊗k}`: fixes the outer `k` letters on each side and
/// reverses the middle. Levels below `2k` are left untouched.
pub fn build_reverse_middle(ctx: &FockContext, k: usize) -> GradedOperator {
    let mut op = GradedOperator::zero(ctx, format!("J_{k}"));
    for m in 0..=ctx.levels() {
        let b = word_map_block(ctx, m, m, |w| {
            let mut v = w.to_vec();
            if m >= 2 * k {
                v[k..m - k].reverse();
            }
            v
        });
        op.blocks.insert((m, m), b);
    }
    op
}

/// Rank-one projection onto the vacuum.
pub fn build_vacuum_projection(ctx: &FockContext) -> GradedOperator {
    let mut op = GradedOperator::zero(ctx, "P_vac");
    op.blocks.insert((0, 0), DMatrix::from_element(1, 1, 1.0));
    op
}

/// Projection onto a single level.
pub fn build_level_projection(ctx: &FockContext, level: usize) -> Result<GradedOperator> {
    ctx.check_level(level)?;
    let d = ctx.dim(level);
    GradedOperator::from_blocks(
        ctx,
        format!("P_{level}"),
        [((level, level), DMatrix::identity(d, d))],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// `ρ_L = Σ_i L_i L_i^†` (or `ρ_R` with right creations), as a literal sum.
pub fn build_particle_number(gram: &GramFamily, side: Side) -> Result<GradedOperator> {
    let ctx = gram.ctx();
    let creators = match side {
        Side::Left => creation_left_all(ctx)?,
        Side::Right => creation_right_all(ctx)?,
    };
    let mut terms = Vec::with_capacity(creators.len());
    for c in &creators {
        terms.push(c.compose(&c.q_adjoint(gram)?)?);
    }
    let label = match side {
        Side::Left => "rho_L",
        Side::Right => "rho_R",
    };
    GradedOperator::linear_combination(ctx, label, terms.iter().map(|t| (1.0, t)))
}

/// Eigenvalues (ascending) of a q-self-adjoint block-diagonal operator on one level.
pub fn level_spectrum(x: &GradedOperator, gram: &GramFamily, level: usize) -> Result<Vec<f64>> {
    require_block_diagonal(x)?;
    x.ctx().check_level(level)?;
    let ortho = gram.half(level) * x.diagonal_block(level) * gram.half_inv(level);
    let mut ev: Vec<f64> = sym_eigen(&ortho).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ev)
}

fn require_block_diagonal(x: &GradedOperator) -> Result<()> {
    if !x.is_block_diagonal() {
        return Err(FockError::Validation(format!(
            "'{}' must be block-diagonal (degree 0)",
            x.label()
        )));
    }
    Ok(())
}

/// Level-wise functional calculus `f(level, λ)` of a q-self-adjoint degree-0 operator.
pub fn spectral_map(
    x: &GradedOperator,
    gram: &GramFamily,
    label: impl Into<String>,
    f: impl Fn(usize, f64) -> f64,
) -> Result<GradedOperator> {
    require_block_diagonal(x)?;
    gram.check_shape(x.ctx())?;
    let ctx = x.ctx();
    let mut out = GradedOperator::zero(ctx, label);
    for k in 0..=ctx.levels() {
        let ortho = gram.half(k) * x.diagonal_block(k) * gram.half_inv(k);
        let eig = sym_eigen(&ortho);
        let mapped = sym_apply(&eig.eigenvalues, &eig.eigenvectors, |l| f(k, l));
        if mapped.iter().any(|&v| v != 0.0) {
            out.blocks
                .insert((k, k), gram.half_inv(k) * mapped * gram.half(k));
        }
    }
    Ok(out)
}

/// Level-wise `f(level, λ)` of a block-diagonal operator whose blocks are
/// symmetric as stored (an orthonormal form).
pub(crate) fn plain_spectral_map(
    x: &GradedOperator,
    label: impl Into<String>,
    f: impl Fn(usize, f64) -> f64,
) -> Result<GradedOperator> {
    require_block_diagonal(x)?;
    let ctx = x.ctx();
    let mut out = GradedOperator::zero(ctx, label);
    for k in 0..=ctx.levels() {
        let eig = sym_eigen(&x.diagonal_block(k));
        let mapped = sym_apply(&eig.eigenvalues, &eig.eigenvectors, |l| f(k, l));
        if mapped.iter().any(|&v| v != 0.0) {
            out.blocks.insert((k, k), mapped);
        }
    }
    Ok(out)
}

/// `ρ^+` and `(ρ^+)^{1/2}` for a particle-number operator given in orthonormal coordinates.
pub(crate) fn plain_pseudoinverse(rho: &GradedOperator, power: f64) -> Result<GradedOperator> {
    let ctx = rho.ctx();
    for k in 1..=ctx.levels() {
        let min = sym_eigen(&rho.diagonal_block(k)).eigenvalues.min();
        if min <= ctx.tol_spectral() {
            return Err(FockError::Positivity {
                level: k,
                q: ctx.q(),
                min_eig: min,
                tol: ctx.tol_spectral(),
            });
        }
    }
    plain_spectral_map(rho, format!("{}^+", rho.label()), |k, l| {
        if k == 0 {
            0.0
        } else {
            l.powf(-power)
        }
    })
}

fn check_particle_number_gap(rho: &GradedOperator, gram: &GramFamily) -> Result<()> {
    let ctx = rho.ctx();
    for k in 1..=ctx.levels() {
        let min = level_spectrum(rho, gram, k)?[0];
        if min <= ctx.tol_spectral() {
            return Err(FockError::Positivity {
                level: k,
                q: ctx.q(),
                min_eig: min,
                tol: ctx.tol_spectral(),
            });
        }
    }
    Ok(())
}

/// `ρ^+`: inverse of `ρ` on levels `1..=N`, zero on the vacuum.
pub fn pseudoinverse_particle_number(
    rho: &GradedOperator,
    gram: &GramFamily,
) -> Result<GradedOperator> {
    check_particle_number_gap(rho, gram)?;
    spectral_map(rho, gram, format!("{}^+", rho.label()), |k, l| {
        if k == 0 {
            0.0
        } else {
            1.0 / l
        }
    })
}

/// `(ρ^+)^{1/2}`.
pub fn pseudoinverse_sqrt(rho: &GradedOperator, gram: &GramFamily) -> Result<GradedOperator> {
    check_particle_number_gap(rho, gram)?;
    spectral_map(rho, gram, format!("({}^+)^1/2", rho.label()), |k, l| {
        if k == 0 {
            0.0
        } else {
            1.0 / l.sqrt()
        }
    })
}

/// `ρ^{1/2}`; non-positive eigenvalues (the vacuum) map to zero.
pub fn sqrt_particle_number(rho: &GradedOperator, gram: &GramFamily) -> Result<GradedOperator> {
    spectral_map(rho, gram, format!("{}^1/2", rho.label()), |k, l| {
        if k == 0 || l <= 0.0 {
            0.0
        } else {
            l.sqrt()
        }
    })
}

/// `1 ⊗ x`: vacuum ↦ 0, and on level `m ≥ 1` the block `I_n ⊗ x_{m-1}`
/// (first letter kept, `x` applied to the rest; on level 1 this is `ξ ⊗ x(Ω)`).
pub fn embed_right(x: &GradedOperator) -> Result<GradedOperator> {
    require_block_diagonal(x)?;
    let ctx = x.ctx();
    let id = DMatrix::identity(ctx.n(), ctx.n());
    let mut out = GradedOperator::zero(ctx, format!("1⊗({})", x.label()));
    for m in 1..=ctx.levels() {
        if let Some(b) = x.block(m - 1, m - 1) {
            out.blocks.insert((m, m), kron(&id, b));
        }
    }
    Ok(out)
}

/// `x ⊗ 1`: vacuum ↦ 0, and on level `m ≥ 1` the block `x_{m-1} ⊗ I_n`
/// (last letter kept, `x` applied to the rest).
pub fn embed_left(x: &GradedOperator) -> Result<GradedOperator> {
    require_block_diagonal(x)?;
    let ctx = x.ctx();
    let id = DMatrix::identity(ctx.n(), ctx.n());
    let mut out = GradedOperator::zero(ctx, format!("({})⊗1", x.label()));
    for m in 1..=ctx.levels() {
        if let Some(b) = x.block(m - 1, m - 1) {
            out.blocks.insert((m, m), kron(b, &id));
        }
    }
    Ok(out)
}

/// The gauge unitary `U_z`, acting as `z^k` on level `k`.
///
/// Operators here are real, so conjugation returns real and imaginary parts.
#[derive(Debug, Clone)]
pub struct GaugeUnitary {
    ctx: FockContext,
    z: Complex64,
}

/// A complex operator split as `re + i·im`.
#[derive(Debug, Clone)]
pub struct PhasedOperator {
    pub re: GradedOperator,
    pub im: GradedOperator,
}

impl PhasedOperator {
    /// Largest entry-wise modulus of `self − c·x`.
    pub fn max_abs_diff_scaled(&self, c: Complex64, x: &GradedOperator) -> Result<f64> {
        let re = self.re.sub(&x.scale(c.re))?;
        let im = self.im.sub(&x.scale(c.im))?;
        let mut worst: f64 = 0.0;
        for (key, r) in re.blocks() {
            let i = im.block_or_zero(key.0, key.1);
            for (a, b) in r.iter().zip(i.iter()) {
                worst = worst.max(a.hypot(*b));
            }
        }
        for (key, i) in im.blocks() {
            if re.block(key.0, key.1).is_none() {
                worst = worst.max(max_abs(i));
            }
        }
        Ok(worst)
    }
}

/// `U_z` for a unit-modulus `z`.
pub fn build_gauge(ctx: &FockContext, z: Complex64) -> Result<GaugeUnitary> {
    if (z.norm() - 1.0).abs() > ctx.tol_exact() {
        return Err(FockError::InvalidParameter(format!(
            "gauge parameter must have |z| = 1, got {z}"
        )));
    }
    Ok(GaugeUnitary {
        ctx: ctx.clone(),
        z,
    })
}

impl GaugeUnitary {
    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn phase(&self, level: usize) -> Complex64 {
        self.z.powi(level as i32)
    }

    /// `U_z` itself when it is real (`z = ±1`).
    pub fn as_real(&self) -> Option<GradedOperator> {
        if self.z.im.abs() > 1e-15 {
            return None;
        }
        let mut op = GradedOperator::zero(&self.ctx, format!("U_{}", self.z.re));
        for k in 0..=self.ctx.levels() {
            let d = self.ctx.dim(k);
            op.blocks
                .insert((k, k), DMatrix::identity(d, d) * self.phase(k).re);
        }
        Some(op)
    }

    /// `U_z x U_z^{-1}`: block `(ko, ki)` picks up the phase `z^{ko - ki}`.
    pub fn conjugate(&self, x: &GradedOperator) -> PhasedOperator {
        let mut re = GradedOperator::zero(x.ctx(), format!("Re γ_z({})", x.label()));
        let mut im = GradedOperator::zero(x.ctx(), format!("Im γ_z({})", x.label()));
        for (&(ko, ki), b) in x.blocks() {
            let d = ko as i32 - ki as i32;
            let phase = self.z.powi(d);
            if phase.re != 0.0 {
                re.blocks.insert((ko, ki), b * phase.re);
            }
            if phase.im != 0.0 {
                im.blocks.insert((ko, ki), b * phase.im);
            }
        }
        PhasedOperator { re, im }
    }
}

/// Operator with standard normal entries in every block `(ko, ki)` with `|ko − ki| ≤ max_degree`.
pub fn random_operator(ctx: &FockContext, max_degree: usize, seed: u64) -> GradedOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut op = GradedOperator::zero(ctx, format!("random(seed={seed})"));
    for ki in 0..=ctx.levels() {
        let lo = ki.saturating_sub(max_degree);
        let hi = (ki + max_degree).min(ctx.levels());
        for ko in lo..=hi {
            let b = DMatrix::from_fn(ctx.dim(ko), ctx.dim(ki), |_, _| rng.sample(StandardNormal));
            op.blocks.insert((ko, ki), b);
        }
    }
    op
}

/// Creation operators and their q-adjoints for one Gram family.
#[derive(Debug, Clone)]
pub struct Generators {
    pub left: Vec<GradedOperator>,
    pub right: Vec<GradedOperator>,
    pub left_adj: Vec<GradedOperator>,
    pub right_adj: Vec<GradedOperator>,
}

impl Generators {
    pub fn build(gram: &GramFamily) -> Result<Self> {
        let ctx = gram.ctx();
        let left = creation_left_all(ctx)?;
        let right = creation_right_all(ctx)?;
        let left_adj = left
            .iter()
            .map(|l| l.q_adjoint(gram))
            .collect::<Result<Vec<_>>>()?;
        let right_adj = right
            .iter()
            .map(|r| r.q_adjoint(gram))
            .collect::<Result<Vec<_>>>()?;
        Ok(Generators {
            left,
            right,
            left_adj,
            right_adj,
        })
    }

    /// The generators in orthonormal coordinates, where adjoints are plain transposes.
    ///
    /// Products of these never multiply `G^{1/2}` against `G^{-1/2}`, so
    /// residuals stay near machine precision even when the Gram matrices are
    /// badly conditioned.
    pub fn orthonormal(gram: &GramFamily) -> Result<Self> {
        let ctx = gram.ctx();
        let left = creation_left_all(ctx)?
            .iter()
            .map(|l| l.orthonormal_form(gram).map(|o| o.with_label(l.label())))
            .collect::<Result<Vec<_>>>()?;
        let right = creation_right_all(ctx)?
            .iter()
            .map(|r| r.orthonormal_form(gram).map(|o| o.with_label(r.label())))
            .collect::<Result<Vec<_>>>()?;
        let left_adj = left
            .iter()
            .map(|l| l.transpose().with_label(format!("{}^†", l.label())))
            .collect();
        let right_adj = right
            .iter()
            .map(|r| r.transpose().with_label(format!("{}^†", r.label())))
            .collect();
        Ok(Generators {
            left,
            right,
            left_adj,
            right_adj,
        })
    }

    /// `Σ_i L_i L_i^†` or `Σ_i R_i R_i^†` in whatever coordinates the generators use.
    pub fn particle_number(&self, side: Side) -> Result<GradedOperator> {
        let (ops, adj, label) = match side {
            Side::Left => (&self.left, &self.left_adj, "rho_L"),
            Side::Right => (&self.right, &self.right_adj, "rho_R"),
        };
        let ctx = ops[0].ctx().clone();
        let terms = ops
            .iter()
            .zip(adj)
            .map(|(a, b)| a.compose(b))
            .collect::<Result<Vec<_>>>()?;
        GradedOperator::linear_combination(&ctx, label, terms.iter().map(|t| (1.0, t)))
    }

    /// `L_i L_j^†`.
    pub fn left_quadratic(&self, i: usize, j: usize) -> Result<GradedOperator> {
        Ok(self.left[i]
            .compose(&self.left_adj[j])?
            .with_label(format!("L_{}L_{}^†", i + 1, j + 1)))
    }
}
