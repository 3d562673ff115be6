//! Next-token scoring backends.

mod ngram;
mod sampling;
mod transformer;

use crate::error::{Error, Result};

pub use ngram::NGramModel;
pub use sampling::{nucleus_candidates, sample_from, sample_next};
pub use transformer::{
    AttentionKind, Gradients, ToyTransformer, TransformerConfig, TransformerTrace,
};

/// Anything that yields a next-token distribution for a context.
///
/// Implementations are immutable and may be shared across threads.
pub trait ScoringModel: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Longest context the model looks at; `None` when unbounded.
    fn max_context(&self) -> Option<usize>;

    /// Probabilities for every token id, summing to one.
    fn distribution(&self, context: &[u32]) -> Result<Vec<f64>>;

    /// Natural-log probability of `next` after `context`.
    fn log_prob(&self, context: &[u32], next: u32) -> Result<f64> {
        check_id(next, self.vocab_size())?;
        Ok(self.distribution(context)?[next as usize].ln())
    }

    /// `log p(ids[i] | ids[..i])` for every position.
    fn sequence_log_probs(&self, ids: &[u32]) -> Result<Vec<f64>> {
        (0..ids.len()).map(|i| self.log_prob(&ids[..i], ids[i])).collect()
    }
}

pub(crate) fn check_id(id: u32, vocab_size: usize) -> Result<()> {
    if (id as usize) < vocab_size {
        Ok(())
    } else {
        Err(Error::TokenOutOfRange { id, vocab_size })
    }
}

/// Assigns `1/V` to every token regardless of context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformModel {
    pub vocab_size: usize,
}

impl UniformModel {
    pub fn new(vocab_size: usize) -> Self {
        assert!(vocab_size > 0, "vocabulary must be non-empty");
        Self { vocab_size }
    }
}

impl ScoringModel for UniformModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn max_context(&self) -> Option<usize> {
        Some(0)
    }

    fn distribution(&self, _context: &[u32]) -> Result<Vec<f64>> {
        Ok(vec![1.0 / self.vocab_size as f64; self.vocab_size])
    }

    fn log_prob(&self, _context: &[u32], next: u32) -> Result<f64> {
        check_id(next, self.vocab_size)?;
        Ok(-(self.vocab_size as f64).ln())
    }
}

impl<T: ScoringModel + ?Sized> ScoringModel for &T {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn max_context(&self) -> Option<usize> {
        (**self).max_context()
    }
    fn distribution(&self, context: &[u32]) -> Result<Vec<f64>> {
        (**self).distribution(context)
    }
    fn log_prob(&self, context: &[u32], next: u32) -> Result<f64> {
        (**self).log_prob(context, next)
    }
    fn sequence_log_probs(&self, ids: &[u32]) -> Result<Vec<f64>> {
        (**self).sequence_log_probs(ids)
    }
}

impl<T: ScoringModel + ?Sized> ScoringModel for Box<T> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn max_context(&self) -> Option<usize> {
        (**self).max_context()
    }
    fn distribution(&self, context: &[u32]) -> Result<Vec<f64>> {
        (**self).distribution(context)
    }
    fn log_prob(&self, context: &[u32], next: u32) -> Result<f64> {
        (**self).log_prob(context, next)
    }
    fn sequence_log_probs(&self, ids: &[u32]) -> Result<Vec<f64>> {
        (**self).sequence_log_probs(ids)
    }
}
