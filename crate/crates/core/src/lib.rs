//! Numerical model of the q-deformed Fock space truncated at a finite level.
//!
//! Every operator is a [`op::GradedOperator`]: dense blocks between tensor
//! levels `0..=N`, expressed in the word basis and measured in the q-inner
//! product through the Gram matrices of [`gram::GramFamily`].

pub mod asymptotic;
pub mod basis;
pub mod cli;
pub mod error;
pub mod export;
pub mod gauge;
pub mod gram;
mod linalg;
pub mod op;
pub mod report;
pub mod verify;

pub use basis::{enumerate_permutations, enumerate_words, inversions, FockContext, Word, K_ORACLE};
pub use error::{FockError, Result};
pub use gram::{gram_bruteforce, gram_factorize, gram_recursive, GramFamily};
pub use op::{GradedOperator, Side};
pub use report::{DecaySeries, VerificationReport};
