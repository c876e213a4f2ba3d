//! Truncated Fock basis: parameters, word labels and permutation combinatorics.
//!
//! Letters are 0-based internally (`0..n`); labels printed for humans are
//! 1-based so that `e1.e2` reads like the usual tensor notation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};

/// Largest `k` for which the `k!` permutation oracle may be enumerated.
pub const K_ORACLE: usize = 8;

pub const DEFAULT_TOL_EXACT: f64 = 1e-10;
pub const DEFAULT_TOL_SPECTRAL: f64 = 1e-9;

/// Global parameters shared by every construction on the truncated space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockContext {
    n: usize,
    q: f64,
    levels: usize,
    tol_exact: f64,
    tol_spectral: f64,
    seed: u64,
    dims: Vec<usize>,
}

impl FockContext {
    /// `n` generators, deformation `q` with `|q| < 1`, levels `0..=levels` retained.
    pub fn new(n: usize, q: f64, levels: usize) -> Result<Self> {
        if n == 0 {
            return Err(FockError::InvalidParameter(
                "alphabet size n must be >= 1".into(),
            ));
        }
        if !q.is_finite() || q.abs() >= 1.0 {
            return Err(FockError::InvalidParameter(format!(
                "|q| must be < 1, got q = {q}"
            )));
        }
        if levels < 2 {
            return Err(FockError::InvalidParameter(format!(
                "truncation level must be >= 2, got {levels}"
            )));
        }
        let mut dims = Vec::with_capacity(levels + 1);
        let mut d: usize = 1;
        for k in 0..=levels {
            if k > 0 {
                d = d.checked_mul(n).ok_or_else(|| {
                    FockError::InvalidParameter(format!("n^{k} overflows for n = {n}"))
                })?;
            }
            dims.push(d);
        }
        Ok(FockContext {
            n,
            q,
            levels,
            tol_exact: DEFAULT_TOL_EXACT,
            tol_spectral: DEFAULT_TOL_SPECTRAL,
            seed: 0,
            dims,
        })
    }

    pub fn with_tolerances(mut self, tol_exact: f64, tol_spectral: f64) -> Result<Self> {
        if !(tol_exact > 0.0 && tol_spectral > 0.0) {
            return Err(FockError::InvalidParameter(
                "tolerances must be positive".into(),
            ));
        }
        self.tol_exact = tol_exact;
        self.tol_spectral = tol_spectral;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Highest retained tensor degree `N`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn tol_exact(&self) -> f64 {
        self.tol_exact
    }

    pub fn tol_spectral(&self) -> f64 {
        self.tol_spectral
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `n^k`; panics if `k > levels`.
    pub fn dim(&self, k: usize) -> usize {
        self.dims[k]
    }

    /// Total truncated dimension `sum_{k=0}^{N} n^k`.
    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn check_level(&self, k: usize) -> Result<()> {
        if k > self.levels {
            return Err(FockError::OutOfRange {
                what: "level",
                value: k as i64,
                lo: 0,
                hi: self.levels as i64,
            });
        }
        Ok(())
    }

    pub fn check_letter(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(FockError::OutOfRange {
                what: "letter",
                value: i as i64,
                lo: 0,
                hi: self.n as i64 - 1,
            });
        }
        Ok(())
    }

    /// Same alphabet and truncation (the deformation may differ).
    pub fn same_shape(&self, other: &FockContext) -> bool {
        self.n == other.n && self.levels == other.levels
    }
}

/// Basis tensor `e_{i_1} ⊗ … ⊗ e_{i_k}`; the empty word is the vacuum.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word {
    letters: Vec<usize>,
}

impl Word {
    pub fn vacuum() -> Self {
        Word {
            letters: Vec::new(),
        }
    }

    pub fn new(letters: Vec<usize>) -> Self {
        Word { letters }
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn level(&self) -> usize {
        self.letters.len()
    }

    pub fn is_vacuum(&self) -> bool {
        self.letters.is_empty()
    }

    /// Row/column index of this word inside its level (base-`n`, first letter most significant).
    pub fn index(&self, n: usize) -> usize {
        word_index(&self.letters, n)
    }

    pub fn from_index(n: usize, level: usize, mut index: usize) -> Self {
        let mut letters = vec![0; level];
        for slot in letters.iter_mut().rev() {
            *slot = index % n;
            index /= n;
        }
        Word { letters }
    }

    /// 1-based dotted label, `vac` for the vacuum.
    pub fn label(&self) -> String {
        if self.letters.is_empty() {
            return "vac".to_string();
        }
        self.letters
            .iter()
            .map(|l| (l + 1).to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub(crate) fn word_index(letters: &[usize], n: usize) -> usize {
    letters.iter().fold(0, |acc, &l| acc * n + l)
}

/// All `n^k` words of level `k` in lexicographic order.
pub fn enumerate_words(ctx: &FockContext, k: usize) -> Result<Vec<Word>> {
    ctx.check_level(k)?;
    Ok((0..ctx.dim(k))
        .map(|idx| Word::from_index(ctx.n(), k, idx))
        .collect())
}

/// Number of pairs `i < j` with `perm[i] > perm[j]`.
///
/// `perm` is a 0-based permutation of `0..perm.len()`.
pub fn inversions(perm: &[usize]) -> Result<usize> {
    let k = perm.len();
    let mut seen = vec![false; k];
    for &p in perm {
        if p >= k || seen[p] {
            return Err(FockError::Validation(format!(
                "{perm:?} is not a permutation of 0..{k}"
            )));
        }
        seen[p] = true;
    }
    Ok(count_inversions(perm))
}

fn count_inversions(perm: &[usize]) -> usize {
    let mut inv = 0;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inv += 1;
            }
        }
    }
    inv
}

/// Lexicographic walk over `S_k`, yielding each permutation with its inversion count.
#[derive(Debug, Clone)]
pub struct Permutations {
    current: Option<Vec<usize>>,
}

impl Iterator for Permutations {
    type Item = (Vec<usize>, usize);

    fn next(&mut self) -> Option<Self::Item> {
        let perm = self.current.take()?;
        let inv = count_inversions(&perm);
        let mut next = perm.clone();
        if next_permutation(&mut next) {
            self.current = Some(next);
        }
        Some((perm, inv))
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Every permutation of `0..k` with its inversion count; `k` is capped at [`K_ORACLE`].
pub fn enumerate_permutations(k: usize) -> Result<Permutations> {
    if k > K_ORACLE {
        return Err(FockError::OracleSizeCap { k, cap: K_ORACLE });
    }
    Ok(Permutations {
        current: Some((0..k).collect()),
    })
}

/// `[k]_q! = prod_{j=1}^{k} (1 + q + ... + q^{j-1})`.
pub fn q_factorial(q: f64, k: usize) -> f64 {
    (1..=k).map(|j| q_integer(q, j)).product()
}

/// `[j]_q = 1 + q + ... + q^{j-1}`.
pub fn q_integer(q: f64, j: usize) -> f64 {
    (0..j).map(|e| q.powi(e as i32)).sum()
}
