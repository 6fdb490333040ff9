//! Online estimation of document relevance from rank-biased clicks.
//!
//! Every displayed document keeps a click-probability estimate and an
//! "effective impression" count. Clicks and non-clicks are weighted by how
//! likely they were to come from the document itself rather than from its
//! position, using a two-component Bernoulli mixture click model. A UCB-style
//! index over those estimates chooses the next ranking.
//!
//! Module map:
//!
//! - [`click_model`]: click-model parameters, click probabilities and
//!   the per-rank effective-count weights.
//! - [`estimator`]: per-document state and the iterative update.
//! - [`em`]: batch EM fitting of the mixture and count-based estimators
//!   for fitting click models from judged logs.
//! - [`policy`]: the UCB ranking policy.
//! - [`simulator`]: judgments, simulated users and T-step experiments.
//! - [`replay`]: restricted re-ranking replay of a session log.
//! - [`metrics`]: average precision, nDCG@k and aggregation.

pub mod click_model;
pub mod em;
mod error;
pub mod estimator;
pub mod metrics;
pub mod policy;
pub mod replay;
pub mod simulator;

use std::borrow::Borrow;
use std::fmt;

pub use click_model::{ClickModelSpec, ClickModelVariant, EffectiveCounts, RankParams};
pub use error::{Error, Result};
pub use estimator::DocumentState;
pub use policy::{Policy, PolicyConfig, RankAction};

/// Identifier of a document, as it appears in judgments and logs.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DocId(String);

impl DocId {
    pub fn new(id: impl Into<String>) -> Self {
        DocId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DocId {
    fn from(s: &str) -> Self {
        DocId(s.to_owned())
    }
}

impl From<String> for DocId {
    fn from(s: String) -> Self {
        DocId(s)
    }
}

impl AsRef<str> for DocId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for DocId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Checks that `p` is a probability.
pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
/// Output order always follows the input index.
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
