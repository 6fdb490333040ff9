//! Ranking quality against graded judgments.
//!
//! Average precision binarizes grades at `>= 1` and normalizes by
//! `min(R, cutoff)` where `R` is the number of relevant documents for the
//! topic. nDCG uses gain `2^g - 1` and discount `log2(i + 1)`.

use crate::simulator::{Grade, TopicJudgments};
use crate::{DocId, Error, Result};

/// A ranking with the grades of its documents and the topic totals needed to
/// normalize metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct JudgedRanking {
    pub grades: Vec<Grade>,
    pub total_relevant: usize,
    /// Grades of the topic's best documents, in descending order.
    pub ideal: Vec<Grade>,
}

impl JudgedRanking {
    /// Looks up every ranked document in `judgments`; unjudged documents
    /// count as grade 0.
    pub fn new(docs: &[DocId], judgments: &TopicJudgments, cutoff: usize) -> Self {
        JudgedRanking {
            grades: docs.iter().map(|d| judgments.grade(d.as_str())).collect(),
            total_relevant: judgments.total_relevant(),
            ideal: judgments.ideal_grades(cutoff),
        }
    }

    pub fn average_precision(&self, cutoff: usize) -> f64 {
        average_precision(&self.grades, self.total_relevant, cutoff)
    }

    pub fn ndcg(&self, k: usize) -> f64 {
        ndcg_at_k(&self.grades, k, &self.ideal)
    }
}

pub fn average_precision(grades: &[Grade], total_relevant: usize, cutoff: usize) -> f64 {
    let denom = total_relevant.min(cutoff);
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, g) in grades.iter().take(cutoff).enumerate() {
        if g.is_relevant() {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

fn dcg(grades: &[Grade], k: usize) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| g.gain() / ((i + 2) as f64).log2())
        .sum()
}

/// `ideal` holds the topic's top grades in descending order; only the first
/// `k` are used.
pub fn ndcg_at_k(grades: &[Grade], k: usize, ideal: &[Grade]) -> f64 {
    let idcg = dcg(ideal, k);
    if idcg <= 0.0 {
        return 0.0;
    }
    dcg(grades, k) / idcg
}

/// Arithmetic mean and population variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
}

pub fn aggregate(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Domain("cannot aggregate an empty series".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(Summary { mean, variance })
}
