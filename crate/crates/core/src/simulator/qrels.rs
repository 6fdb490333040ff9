use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{check_probability, DocId, Error, Result};

/// Graded judgment in `{0, 1, 2}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Grade(u8);

impl Grade {
    pub const MAX: u8 = 2;

    pub fn new(g: u8) -> Option<Self> {
        (g <= Self::MAX).then_some(Grade(g))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Probability of relevance: 0, 1/2 or 1.
    pub fn relevance(self) -> f64 {
        f64::from(self.0) / f64::from(Self::MAX)
    }

    pub fn is_relevant(self) -> bool {
        self.0 >= 1
    }

    /// DCG gain `2^g - 1`.
    pub fn gain(self) -> f64 {
        f64::from((1u32 << self.0) - 1)
    }
}

/// Judgments for one topic. Unjudged documents count as grade 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TopicJudgments {
    grades: BTreeMap<DocId, Grade>,
}

impl TopicJudgments {
    pub fn new(grades: BTreeMap<DocId, Grade>) -> Self {
        TopicJudgments { grades }
    }

    pub fn grade(&self, doc: &str) -> Grade {
        self.grades.get(doc).copied().unwrap_or_default()
    }

    pub fn relevance(&self, doc: &str) -> f64 {
        self.grade(doc).relevance()
    }

    pub fn is_judged(&self, doc: &str) -> bool {
        self.grades.contains_key(doc)
    }

    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }

    pub fn total_relevant(&self) -> usize {
        self.grades.values().filter(|g| g.is_relevant()).count()
    }

    /// The `k` highest grades in descending order.
    pub fn ideal_grades(&self, k: usize) -> Vec<Grade> {
        let mut all: Vec<Grade> = self.grades.values().copied().collect();
        all.sort_unstable_by(|a, b| b.cmp(a));
        all.truncate(k);
        all
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DocId, Grade)> {
        self.grades.iter().map(|(d, &g)| (d, g))
    }

    pub fn docs(&self) -> impl Iterator<Item = &DocId> {
        self.grades.keys()
    }

    pub fn insert(&mut self, doc: DocId, grade: Grade) -> Option<Grade> {
        self.grades.insert(doc, grade)
    }
}

/// Judgments for every topic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Qrels {
    topics: BTreeMap<String, TopicJudgments>,
}

impl Qrels {
    pub fn topic(&self, id: &str) -> Option<&TopicJudgments> {
        self.topics.get(id)
    }

    pub fn topics(&self) -> impl Iterator<Item = (&str, &TopicJudgments)> {
        self.topics.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn insert_topic(&mut self, id: impl Into<String>, judgments: TopicJudgments) {
        self.topics.insert(id.into(), judgments);
    }

    /// Merges another set of topics in; existing topics are replaced.
    pub fn extend(&mut self, other: Qrels) {
        self.topics.extend(other.topics);
    }

    /// Writes the TREC 4-column format `topic 0 doc grade`.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (topic, j) in &self.topics {
            for (doc, g) in j.iter() {
                writeln!(out, "{topic} 0 {doc} {}", g.value())?;
            }
        }
        Ok(())
    }
}

/// Parser output: the judgments plus non-fatal diagnostics.
#[derive(Clone, Debug, Default)]
pub struct ParsedQrels {
    pub qrels: Qrels,
    pub warnings: Vec<String>,
}

/// Reads whitespace-delimited `topic iteration docid grade` lines.
///
/// Lines whose grade is an integer outside `{0, 1, 2}` are skipped with a
/// warning. A repeated `(topic, doc)` keeps the last grade, also with a
/// warning. Anything else malformed is an error.
pub fn parse_qrels<R: BufRead>(input: R) -> Result<ParsedQrels> {
    let mut parsed = ParsedQrels::default();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = n + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [topic, _iteration, doc, grade] = fields[..] else {
            return Err(Error::parse(
                line_no,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        };
        let raw: i64 = grade
            .parse()
            .map_err(|_| Error::parse(line_no, format!("grade `{grade}` is not an integer")))?;
        let Some(g) = u8::try_from(raw).ok().and_then(Grade::new) else {
            parsed.warnings.push(format!(
                "line {line_no}: grade {raw} outside {{0, 1, 2}}, line skipped"
            ));
            continue;
        };
        let judgments = parsed.qrels.topics.entry(topic.to_owned()).or_default();
        if judgments.insert(DocId::from(doc), g).is_some() {
            parsed.warnings.push(format!(
                "line {line_no}: duplicate judgment for ({topic}, {doc}), last wins"
            ));
        }
    }
    Ok(parsed)
}

/// Synthetic judgments for one topic: `n_docs` documents of which
/// `n_relevant` are relevant, `round(n_relevant * grade2_fraction)` of those
/// at grade 2 and the rest at grade 1. Relevant positions are a seeded
/// shuffle, so ids carry no information about grades.
pub fn gen_qrels(
    topic: &str,
    n_docs: usize,
    n_relevant: usize,
    grade2_fraction: f64,
    seed: u64,
) -> Result<TopicJudgments> {
    if n_relevant > n_docs {
        return Err(Error::Domain(format!(
            "{n_relevant} relevant documents requested out of {n_docs}"
        )));
    }
    check_probability("grade2_fraction", grade2_fraction)?;
    let n_grade2 = (n_relevant as f64 * grade2_fraction).round() as usize;
    let mut grades: Vec<Grade> = (0..n_docs)
        .map(|i| match i {
            i if i < n_grade2 => Grade(2),
            i if i < n_relevant => Grade(1),
            _ => Grade(0),
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grades.shuffle(&mut rng);
    let width = n_docs.saturating_sub(1).to_string().len();
    Ok(TopicJudgments::new(
        grades
            .into_iter()
            .enumerate()
            .map(|(i, g)| (DocId::new(format!("{topic}-d{i:0width$}")), g))
            .collect(),
    ))
}

/// `n_topics` synthetic topics named `t01`, `t02`, ..., each generated with
/// a seed derived from `seed` and the topic index.
pub fn gen_topics(
    n_topics: usize,
    n_docs: usize,
    n_relevant: usize,
    grade2_fraction: f64,
    seed: u64,
) -> Result<Qrels> {
    let width = n_topics.to_string().len().max(2);
    let mut qrels = Qrels::default();
    for k in 0..n_topics {
        let id = format!("t{:0width$}", k + 1);
        let topic_seed = seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let j = gen_qrels(&id, n_docs, n_relevant, grade2_fraction, topic_seed)?;
        qrels.insert_topic(id, j);
    }
    Ok(qrels)
}
