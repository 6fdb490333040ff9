//! Per-document click-probability state and its iterative update.
//!
//! A document carries an estimate `r_hat` and an effective impression count
//! `gamma`. A click moves `r_hat` toward 1 and a non-click toward 0, each by a
//! step whose size is the observation's effective-count weight relative to the
//! new `gamma`. With all weights equal to 1 the estimate reduces to the
//! smoothed running mean `(prior + clicks) / (1 + impressions)`.

use std::io::{BufRead, Write};

use crate::click_model::EffectiveCounts;
use crate::{check_probability, DocId, Error, Result};

pub const FLAT_PRIOR: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DocumentState {
    r_hat: f64,
    gamma: f64,
}

/// One observed outcome at a 1-based rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClickObservation {
    pub rank: usize,
    pub clicked: bool,
}

impl DocumentState {
    /// Fresh state: the prior counts as a single impression.
    pub fn new(prior: f64) -> Result<Self> {
        check_probability("prior", prior)?;
        Ok(DocumentState {
            r_hat: prior,
            gamma: 1.0,
        })
    }

    /// Restores a previously exported state.
    pub fn from_parts(r_hat: f64, gamma: f64) -> Result<Self> {
        check_probability("r_hat", r_hat)?;
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!(
                "gamma must be finite and >= 1, got {gamma}"
            )));
        }
        Ok(DocumentState { r_hat, gamma })
    }

    pub fn r_hat(&self) -> f64 {
        self.r_hat
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Applies one observation weighted by `counts`.
    pub fn update(self, clicked: bool, counts: &EffectiveCounts) -> Self {
        let w = counts.weight(clicked);
        let gamma = self.gamma + w;
        let c = if clicked { w } else { 0.0 };
        // r' = r * g/g' + C * (1 - g/g'), written without the cancellation.
        let r_hat = ((self.r_hat * self.gamma + c) / gamma).clamp(0.0, 1.0);
        DocumentState { r_hat, gamma }
    }
}

pub fn init_state(prior: f64) -> Result<DocumentState> {
    DocumentState::new(prior)
}

pub fn ie_update(
    state: DocumentState,
    obs: ClickObservation,
    counts: &EffectiveCounts,
) -> DocumentState {
    state.update(obs.clicked, counts)
}

const SNAPSHOT_HEADER: &str = "#doc_id\tr_hat\tgamma";

/// Writes one tab-separated `doc_id r_hat gamma` record per document.
pub fn write_snapshot<'a, W, I>(mut out: W, states: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a DocId, &'a DocumentState)>,
{
    writeln!(out, "{SNAPSHOT_HEADER}")?;
    for (id, s) in states {
        writeln!(out, "{}\t{}\t{}", id, s.r_hat, s.gamma)?;
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<Vec<(DocId, DocumentState)>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, r, g] = fields[..] else {
            return Err(Error::parse(
                line_no,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(line_no, format!("`{s}` is not a number")))
        };
        let state = DocumentState::from_parts(num(r)?, num(g)?)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        out.push((DocId::from(id), state));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::click_model::{effective_counts, RankParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn weights(alpha: f64, beta: f64) -> EffectiveCounts {
        EffectiveCounts {
            alpha,
            beta,
            degenerate: false,
        }
    }

    #[test]
    fn init_examples() {
        for prior in [0.5, 0.0, 1.0] {
            let s = init_state(prior).unwrap();
            assert_eq!((s.r_hat(), s.gamma()), (prior, 1.0));
        }
        assert!(init_state(1.5).is_err());
        assert!(init_state(-0.1).is_err());
    }

    #[test]
    fn click_at_top_mixed_click_rank() {
        let counts = effective_counts(
            0.5,
            RankParams {
                trust: 0.8,
                bias: 1.0,
            },
        );
        let s = ie_update(
            init_state(0.5).unwrap(),
            ClickObservation {
                rank: 1,
                clicked: true,
            },
            &counts,
        );
        assert_abs_diff_eq!(s.r_hat(), 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma(), 5.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn non_click_at_second_mixed_click_rank() {
        let counts = effective_counts(
            0.5,
            RankParams {
                trust: 0.8,
                bias: 0.8,
            },
        );
        let s = init_state(0.5).unwrap().update(false, &counts);
        assert_abs_diff_eq!(s.gamma(), 1.909091, epsilon = 1e-6);
        assert_abs_diff_eq!(s.r_hat(), 0.261905, epsilon = 1e-6);
    }

    #[test]
    fn unit_weights_give_smoothed_mean() {
        let clicks = [true, false, false, true, true, false, true];
        let mut s = init_state(0.5).unwrap();
        for &c in &clicks {
            s = s.update(c, &weights(1.0, 1.0));
        }
        let hits = clicks.iter().filter(|&&c| c).count() as f64;
        assert_abs_diff_eq!(s.r_hat(), (0.5 + hits) / 8.0, epsilon = 1e-15);
        assert_eq!(s.gamma(), 8.0);
    }

    #[test]
    fn snapshot_round_trip() {
        let a = DocId::from("d1");
        let b = DocId::from("d2");
        let sa = DocumentState::from_parts(0.25, 3.5).unwrap();
        let sb = init_state(0.5).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, [(&a, &sa), (&b, &sb)]).unwrap();
        let back = read_snapshot(&buf[..]).unwrap();
        assert_eq!(back, vec![(a, sa), (b, sb)]);
    }

    #[test]
    fn snapshot_rejects_bad_rows() {
        assert!(matches!(
            read_snapshot("d1\t0.5\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(read_snapshot("d1\t0.5\t0.2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn update_is_a_convex_step(
            r in 0.0f64..=1.0,
            extra in 0.0f64..50.0,
            alpha in 0.0f64..=1.0,
            beta in 0.0f64..=1.0,
            clicked: bool,
        ) {
            let s = DocumentState::from_parts(r, 1.0 + extra).unwrap();
            let next = s.update(clicked, &weights(alpha, beta));
            prop_assert!((0.0..=1.0).contains(&next.r_hat()));
            let target = if clicked { 1.0 } else { 0.0 };
            // Moves toward the outcome, never past it.
            prop_assert!((next.r_hat() - target).abs() <= (r - target).abs() + 1e-15);
            let w = if clicked { alpha } else { beta };
            prop_assert!((next.gamma() - (s.gamma() + w)).abs() < 1e-12);
            prop_assert!(next.gamma() >= s.gamma());
        }
    }
}
