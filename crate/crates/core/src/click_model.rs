//! Click models expressed as a two-component Bernoulli mixture.
//!
//! At rank `i` a click comes either from the document (probability `r`,
//! selected with probability `pi_i`, the user's *trust*) or from the position
//! alone (probability `b_i`, the *blind-click* rate). The three supported
//! models are special cases of that mixture:
//!
//! | variant | trust at rank i | blind-click rate |
//! |---|---|---|
//! | mixed click | `pi_i` | `b_i` |
//! | examination hypothesis | `eta_i` | 0 |
//! | dependent click | `prod_{j<i} (1 - r_j + eta_j * r_j)` | 0 |
//!
//! # Spec file format
//!
//! A click-model spec is stored as line-oriented text. Blank lines and lines
//! starting with `#` are ignored. Every other line is a key followed by
//! whitespace-separated values:
//!
//! ```text
//! variant mixed-click
//! pi 0.8 0.8 0.8
//! b 1 0.8 0.64
//! ```
//!
//! `variant` takes one of `mixed-click` (alias `mc`),
//! `examination-hypothesis` (`eh`) or `dependent-click` (`dcm`). A mixed-click
//! spec needs `pi` and `b` of equal length; the other two variants need
//! `eta` and reject `pi`/`b`. Every value must lie in `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use crate::{check_probability, Error, Result};

/// Parameter shared by all three variants in the default experiment setup.
pub const DEFAULT_DECAY: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClickModelVariant {
    MixedClick,
    ExaminationHypothesis,
    DependentClick,
}

impl ClickModelVariant {
    pub const ALL: [ClickModelVariant; 3] = [
        ClickModelVariant::MixedClick,
        ClickModelVariant::ExaminationHypothesis,
        ClickModelVariant::DependentClick,
    ];

    /// Short tag used in file names and tables: `mc`, `eh` or `dcm`.
    pub fn tag(self) -> &'static str {
        match self {
            ClickModelVariant::MixedClick => "mc",
            ClickModelVariant::ExaminationHypothesis => "eh",
            ClickModelVariant::DependentClick => "dcm",
        }
    }

    fn long_name(self) -> &'static str {
        match self {
            ClickModelVariant::MixedClick => "mixed-click",
            ClickModelVariant::ExaminationHypothesis => "examination-hypothesis",
            ClickModelVariant::DependentClick => "dependent-click",
        }
    }
}

impl fmt::Display for ClickModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.long_name())
    }
}

impl FromStr for ClickModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mc" | "mixed-click" | "mixedclick" => Ok(ClickModelVariant::MixedClick),
            "eh" | "examination-hypothesis" | "examinationhypothesis" => {
                Ok(ClickModelVariant::ExaminationHypothesis)
            }
            "dcm" | "dependent-click" | "dependentclick" => Ok(ClickModelVariant::DependentClick),
            other => Err(Error::Config(format!(
                "unknown click model variant `{other}`"
            ))),
        }
    }
}

/// Variant tag plus the per-rank parameter vectors that define it.
///
/// Vectors may be longer than the page size they are used with; extra ranks
/// are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct ClickModelSpec {
    variant: ClickModelVariant,
    pi: Vec<f64>,
    b: Vec<f64>,
    eta: Vec<f64>,
}

fn check_all(name: &str, values: &[f64]) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        check_probability(&format!("{name}[{}]", i + 1), v)?;
    }
    Ok(())
}

impl ClickModelSpec {
    pub fn mixed_click(pi: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if pi.len() != b.len() {
            return Err(Error::Config(format!(
                "mixed-click spec needs pi and b of equal length, got {} and {}",
                pi.len(),
                b.len()
            )));
        }
        check_all("pi", &pi)?;
        check_all("b", &b)?;
        Ok(ClickModelSpec {
            variant: ClickModelVariant::MixedClick,
            pi,
            b,
            eta: Vec::new(),
        })
    }

    pub fn examination_hypothesis(eta: Vec<f64>) -> Result<Self> {
        check_all("eta", &eta)?;
        Ok(ClickModelSpec {
            variant: ClickModelVariant::ExaminationHypothesis,
            pi: Vec::new(),
            b: Vec::new(),
            eta,
        })
    }

    pub fn dependent_click(eta: Vec<f64>) -> Result<Self> {
        check_all("eta", &eta)?;
        Ok(ClickModelSpec {
            variant: ClickModelVariant::DependentClick,
            pi: Vec::new(),
            b: Vec::new(),
            eta,
        })
    }

    /// The fixed-parameter setup used when no log is available to fit from:
    /// mixed click `pi = 0.8`, `b_i = 0.8^(i-1)`; examination
    /// `eta_i = 0.8^(i-1)`; dependent click `eta = 0.8`.
    pub fn default_for(variant: ClickModelVariant, ranks: usize) -> Self {
        let decay: Vec<f64> = (0..ranks).map(|i| DEFAULT_DECAY.powi(i as i32)).collect();
        match variant {
            ClickModelVariant::MixedClick => ClickModelSpec {
                variant,
                pi: vec![DEFAULT_DECAY; ranks],
                b: decay,
                eta: Vec::new(),
            },
            ClickModelVariant::ExaminationHypothesis => ClickModelSpec {
                variant,
                pi: Vec::new(),
                b: Vec::new(),
                eta: decay,
            },
            ClickModelVariant::DependentClick => ClickModelSpec {
                variant,
                pi: Vec::new(),
                b: Vec::new(),
                eta: vec![DEFAULT_DECAY; ranks],
            },
        }
    }

    pub fn variant(&self) -> ClickModelVariant {
        self.variant
    }

    /// Trust vector (mixed click only; empty otherwise).
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Blind-click vector (mixed click only; empty otherwise).
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Rank-decay vector (examination and dependent click; empty otherwise).
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Number of ranks the spec has parameters for.
    pub fn ranks(&self) -> usize {
        match self.variant {
            ClickModelVariant::MixedClick => self.pi.len(),
            _ => self.eta.len(),
        }
    }

    pub fn check_covers(&self, page_size: usize) -> Result<()> {
        if self.ranks() < page_size {
            return Err(Error::Config(format!(
                "{} spec has parameters for {} ranks, need {page_size}",
                self.variant,
                self.ranks()
            )));
        }
        Ok(())
    }

    /// Resolves the `(pi_i, b_i)` pair for every position of a ranking whose
    /// documents currently have the given click-probability estimates.
    ///
    /// Only the dependent click model reads the estimates.
    pub fn resolve(&self, estimates: &[f64]) -> Result<ResolvedRankParams> {
        let m = estimates.len();
        self.check_covers(m)?;
        check_all("estimate", estimates)?;
        Ok(self.resolve_unchecked(estimates))
    }

    pub(crate) fn resolve_unchecked(&self, estimates: &[f64]) -> ResolvedRankParams {
        let m = estimates.len();
        let ranks = match self.variant {
            ClickModelVariant::MixedClick => self.pi[..m]
                .iter()
                .zip(&self.b[..m])
                .map(|(&trust, &bias)| RankParams { trust, bias })
                .collect(),
            ClickModelVariant::ExaminationHypothesis => self.eta[..m]
                .iter()
                .map(|&trust| RankParams { trust, bias: 0.0 })
                .collect(),
            ClickModelVariant::DependentClick => {
                let mut out = Vec::with_capacity(m);
                let mut reach = 1.0;
                for (&r, &eta) in estimates.iter().zip(&self.eta) {
                    out.push(RankParams {
                        trust: reach,
                        bias: 0.0,
                    });
                    reach *= 1.0 - r + eta * r;
                }
                out
            }
        };
        ResolvedRankParams { ranks }
    }

    /// Parses the line-oriented spec format described in the module docs.
    pub fn parse(text: &str) -> Result<Self> {
        let mut variant = None;
        let mut pi = None;
        let mut b = None;
        let mut eta = None;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let key = fields.next().unwrap_or_default();
            if key == "variant" {
                let name = fields
                    .next()
                    .ok_or_else(|| Error::parse(line_no, "`variant` needs a value"))?;
                if fields.next().is_some() {
                    return Err(Error::parse(line_no, "`variant` takes exactly one value"));
                }
                let v = name
                    .parse::<ClickModelVariant>()
                    .map_err(|e| Error::parse(line_no, e.to_string()))?;
                if variant.replace(v).is_some() {
                    return Err(Error::parse(line_no, "duplicate `variant`"));
                }
                continue;
            }
            let slot = match key {
                "pi" => &mut pi,
                "b" => &mut b,
                "eta" => &mut eta,
                other => return Err(Error::parse(line_no, format!("unknown key `{other}`"))),
            };
            let values = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::parse(line_no, format!("`{f}` is not a number")))
                })
                .collect::<Result<Vec<_>>>()?;
            if slot.replace(values).is_some() {
                return Err(Error::parse(line_no, format!("duplicate `{key}`")));
            }
        }
        let variant = variant.ok_or_else(|| Error::Config("spec has no `variant` line".into()))?;
        match variant {
            ClickModelVariant::MixedClick => {
                if eta.is_some() {
                    return Err(Error::Config("mixed-click spec does not take `eta`".into()));
                }
                let pi = pi.ok_or_else(|| Error::Config("mixed-click spec needs `pi`".into()))?;
                let b = b.ok_or_else(|| Error::Config("mixed-click spec needs `b`".into()))?;
                ClickModelSpec::mixed_click(pi, b)
            }
            _ => {
                if pi.is_some() || b.is_some() {
                    return Err(Error::Config(format!(
                        "{variant} spec takes only `eta`, not `pi`/`b`"
                    )));
                }
                let eta =
                    eta.ok_or_else(|| Error::Config(format!("{variant} spec needs `eta`")))?;
                if variant == ClickModelVariant::ExaminationHypothesis {
                    ClickModelSpec::examination_hypothesis(eta)
                } else {
                    ClickModelSpec::dependent_click(eta)
                }
            }
        }
    }
}

impl FromStr for ClickModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClickModelSpec::parse(s)
    }
}

fn write_values(f: &mut fmt::Formatter<'_>, key: &str, values: &[f64]) -> fmt::Result {
    f.write_str(key)?;
    for v in values {
        write!(f, " {v}")?;
    }
    writeln!(f)
}

impl fmt::Display for ClickModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variant {}", self.variant)?;
        match self.variant {
            ClickModelVariant::MixedClick => {
                write_values(f, "pi", &self.pi)?;
                write_values(f, "b", &self.b)
            }
            _ => write_values(f, "eta", &self.eta),
        }
    }
}

/// Trust and blind-click rate in effect at one rank.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankParams {
    pub trust: f64,
    pub bias: f64,
}

/// The `(pi_i, b_i)` pair actually used at each displayed rank.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedRankParams {
    ranks: Vec<RankParams>,
}

impl ResolvedRankParams {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Parameters at 0-based position `i`.
    pub fn at(&self, i: usize) -> RankParams {
        self.ranks[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = RankParams> + '_ {
        self.ranks.iter().copied()
    }

    pub fn trust(&self) -> Vec<f64> {
        self.ranks.iter().map(|p| p.trust).collect()
    }

    pub fn bias(&self) -> Vec<f64> {
        self.ranks.iter().map(|p| p.bias).collect()
    }
}

/// Probability of a click on a document with relevance `r` shown at a rank
/// with the given parameters.
pub fn click_probability(r: f64, params: RankParams) -> f64 {
    debug_assert!((0.0..=1.0).contains(&r));
    r * params.trust + params.bias * (1.0 - params.trust)
}

/// Weights applied to a click (`alpha`) and a non-click (`beta`) when
/// updating a document's estimate: the posterior probability that the
/// observation came from the document rather than its position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveCounts {
    pub alpha: f64,
    pub beta: f64,
    /// Set when a denominator vanished and the neutral weight 1.0 was used.
    pub degenerate: bool,
}

impl EffectiveCounts {
    /// Weight for an observation with the given outcome.
    pub fn weight(&self, clicked: bool) -> f64 {
        if clicked {
            self.alpha
        } else {
            self.beta
        }
    }
}

pub fn effective_counts(r_hat: f64, params: RankParams) -> EffectiveCounts {
    let RankParams { trust, bias } = params;
    let mut degenerate = false;
    let mut ratio = |num: f64, other: f64| {
        let den = num + other;
        if den > 0.0 {
            num / den
        } else {
            degenerate = true;
            1.0
        }
    };
    let alpha = ratio(r_hat * trust, bias * (1.0 - trust));
    let beta = ratio((1.0 - r_hat) * trust, (1.0 - bias) * (1.0 - trust));
    EffectiveCounts {
        alpha,
        beta,
        degenerate,
    }
}
