//! Synthetic corpora whose per-class feature distributions follow the
//! published LEGO statistics.
//!
//! Generation runs in two stages. [`sample_feature_vector`] draws a target
//! feature vector from a [`ClassProfile`], and [`synthesize_session`] lays
//! out a raw session log whose extracted features reproduce that target.
//!
//! Each continuous feature is described by its published mean, median and
//! standard deviation plus a natural lower bound. The sampler matches the
//! mean and standard deviation with a lower-truncated normal when that is
//! possible, and with a shifted lognormal when the spread is too large for
//! any truncated normal. Barge-in rate, exchange count, call duration,
//! mean utterance duration and first-turn duration are coupled through a
//! Gaussian copula so that counts, utterance lengths and call lengths stay
//! mutually plausible; every other feature is drawn independently.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::corpus::{Class, Corpus, Exchange, Label, Session};
use crate::error::{Error, Result};
use crate::features::{extract_features, ExtractionConfig, FeatureId, FeatureVector};
use crate::seed::{derive_seed, rng_from_seed};

/// Published summary of one continuous feature for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSpec {
    pub mean: f64,
    /// Kept for reference; the sampler does not enforce it.
    pub median: f64,
    pub sd: f64,
    /// Natural lower bound of the feature, if any.
    pub lower: Option<f64>,
}

impl ContinuousSpec {
    pub const fn new(mean: f64, median: f64, sd: f64, lower: Option<f64>) -> Self {
        ContinuousSpec {
            mean,
            median,
            sd,
            lower,
        }
    }
}

/// Gaussian-copula correlations between the coupled features, in the
/// order (barge-in rate, exchange count, call duration, mean utterance
/// duration, first-turn duration). Pairs not listed are uncorrelated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub rate_exchanges: f64,
    pub exchanges_call: f64,
    pub call_utterance: f64,
    #[serde(default)]
    pub exchanges_utterance: f64,
    #[serde(default)]
    pub utterance_first_turn: f64,
}

const COPULA_DIM: usize = 5;

type CopulaMatrix = [[f64; COPULA_DIM]; COPULA_DIM];

impl CopulaSpec {
    fn matrix(&self) -> CopulaMatrix {
        let mut r = [[0.0; COPULA_DIM]; COPULA_DIM];
        for (i, row) in r.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let mut set = |i: usize, j: usize, v: f64| {
            r[i][j] = v;
            r[j][i] = v;
        };
        set(0, 1, self.rate_exchanges);
        set(1, 2, self.exchanges_call);
        set(2, 3, self.call_utterance);
        set(1, 3, self.exchanges_utterance);
        set(3, 4, self.utterance_first_turn);
        r
    }
}

fn cholesky(a: CopulaMatrix) -> Option<CopulaMatrix> {
    let mut l = [[0.0; COPULA_DIM]; COPULA_DIM];
    for i in 0..COPULA_DIM {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 1e-12 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Per-class generative profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub class: Class,
    /// Class share used when a corpus is sized by priors.
    pub prior: f64,
    pub barge_in_rate: ContinuousSpec,
    pub first_turn_barge_in: f64,
    pub first_turn_delay: ContinuousSpec,
    pub first_turn_positive_delay: ContinuousSpec,
    pub mean_utterance_duration: ContinuousSpec,
    pub call_duration: ContinuousSpec,
    pub first_turn_duration: ContinuousSpec,
    pub exchange_count: ContinuousSpec,
    pub global_speech_rate: ContinuousSpec,
    pub first_turn_speech_rate: ContinuousSpec,
    /// Probabilities of 0, 1, 2 and 3 help requests.
    pub help_request_count: [f64; 4],
    /// Marginal probability of asking for help on the first turn.
    pub first_turn_help: f64,
    pub copula: CopulaSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profiles {
    pub novice: ClassProfile,
    pub expert: ClassProfile,
}

impl Profiles {
    pub fn get(&self, class: Class) -> &ClassProfile {
        match class {
            Class::Novice => &self.novice,
            Class::Expert => &self.expert,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.novice.class != Class::Novice || self.expert.class != Class::Expert {
            return Err(Error::invalid("profile classes must be novice and expert"));
        }
        self.novice.validate()?;
        self.expert.validate()
    }

    pub fn from_json<R: Read>(reader: R) -> Result<Profiles> {
        let p: Profiles = serde_json::from_reader(reader)?;
        p.validate()?;
        Ok(p)
    }
}

/// Splits `mass` over 1, 2 and 3 requests proportionally to `1, r, r^2`,
/// with `r` chosen so that the mean count is `mean`.
pub fn geometric_help_tail(mass: f64, mean: f64) -> Result<[f64; 4]> {
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::invalid("help mass must be in (0, 1]"));
    }
    let c = mean / mass;
    if !(1.0..=3.0).contains(&c) {
        return Err(Error::invalid(
            "mean help count unreachable with counts 1..=3",
        ));
    }
    // (1 + 2r + 3r^2) = c (1 + r + r^2)
    let (a, b, k) = (3.0 - c, 2.0 - c, 1.0 - c);
    let r = if a.abs() < 1e-15 {
        -k / b
    } else {
        (-b + (b * b - 4.0 * a * k).sqrt()) / (2.0 * a)
    };
    let z = 1.0 + r + r * r;
    Ok([1.0 - mass, mass / z, mass * r / z, mass * r * r / z])
}

fn lego_profiles() -> Profiles {
    let z = Some(0.0);
    let utt = Some(0.1);
    let novice = ClassProfile {
        class: Class::Novice,
        prior: 235.0 / 315.0,
        barge_in_rate: ContinuousSpec::new(16.2, 15.4, 9.9, z),
        first_turn_barge_in: 0.6,
        first_turn_delay: ContinuousSpec::new(1.52, 1.28, 3.00, None),
        first_turn_positive_delay: ContinuousSpec::new(2.82, 2.18, 2.79, z),
        mean_utterance_duration: ContinuousSpec::new(1.81, 1.44, 3.14, utt),
        call_duration: ContinuousSpec::new(123.0, 104.0, 95.0, z),
        first_turn_duration: ContinuousSpec::new(1.81, 1.19, 2.02, utt),
        exchange_count: ContinuousSpec::new(28.0, 23.0, 23.4, Some(0.5)),
        global_speech_rate: ContinuousSpec::new(13.7, 14.2, 3.3, z),
        first_turn_speech_rate: ContinuousSpec::new(14.3, 14.5, 4.1, z),
        help_request_count: geometric_help_tail(0.23, 0.27).expect("valid tail"),
        first_turn_help: 0.17,
        copula: CopulaSpec {
            rate_exchanges: 0.25,
            exchanges_call: 0.7,
            call_utterance: 0.3,
            exchanges_utterance: -0.3,
            utterance_first_turn: 0.5,
        },
    };
    let expert = ClassProfile {
        class: Class::Expert,
        prior: 80.0 / 315.0,
        barge_in_rate: ContinuousSpec::new(10.3, 9.5, 6.9, z),
        first_turn_barge_in: 0.6,
        first_turn_delay: ContinuousSpec::new(1.32, 1.21, 2.81, None),
        first_turn_positive_delay: ContinuousSpec::new(1.90, 1.49, 2.72, z),
        mean_utterance_duration: ContinuousSpec::new(1.19, 1.20, 0.43, utt),
        call_duration: ContinuousSpec::new(102.0, 76.0, 78.0, z),
        first_turn_duration: ContinuousSpec::new(1.72, 1.39, 1.66, utt),
        exchange_count: ContinuousSpec::new(23.8, 20.0, 13.8, Some(0.5)),
        global_speech_rate: ContinuousSpec::new(14.8, 14.9, 1.9, z),
        first_turn_speech_rate: ContinuousSpec::new(14.8, 14.5, 2.8, z),
        help_request_count: [1.0, 0.0, 0.0, 0.0],
        first_turn_help: 0.0,
        copula: CopulaSpec {
            rate_exchanges: 0.30,
            exchanges_call: 0.7,
            call_utterance: 0.3,
            exchanges_utterance: -0.3,
            utterance_first_turn: 0.5,
        },
    };
    Profiles { novice, expert }
}

/// Profiles built from the published LEGO class statistics.
pub fn default_profiles() -> Profiles {
    lego_profiles()
}

impl ClassProfile {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{name} probability {p} outside [0, 1]"
                )))
            }
        };
        prob("prior", self.prior)?;
        prob("first_turn_barge_in", self.first_turn_barge_in)?;
        prob("first_turn_help", self.first_turn_help)?;
        for (i, p) in self.help_request_count.iter().enumerate() {
            prob(&format!("help_request_count[{i}]"), *p)?;
        }
        let total: f64 = self.help_request_count.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "help count probabilities sum to {total}"
            )));
        }
        if self.first_turn_help > 1.0 - self.help_request_count[0] + 1e-12 {
            return Err(Error::invalid(
                "first-turn help is likelier than any help request",
            ));
        }
        for (name, spec) in self.continuous() {
            if !(spec.sd >= 0.0 && spec.sd.is_finite() && spec.mean.is_finite()) {
                return Err(Error::invalid(format!("{name}: invalid mean or sd")));
            }
            if let Some(lo) = spec.lower {
                if spec.mean <= lo {
                    return Err(Error::invalid(format!(
                        "{name}: mean must exceed the lower bound"
                    )));
                }
            }
        }
        if self.first_turn_positive_delay.lower != Some(0.0) {
            return Err(Error::invalid(
                "first_turn_positive_delay must be bounded below by 0",
            ));
        }
        delay_mixture(&self.first_turn_delay, &self.first_turn_positive_delay)?;
        if cholesky(self.copula.matrix()).is_none() {
            return Err(Error::invalid(
                "copula correlation matrix is not positive definite",
            ));
        }
        Ok(())
    }

    fn continuous(&self) -> [(&'static str, &ContinuousSpec); 9] {
        [
            ("barge_in_rate", &self.barge_in_rate),
            ("first_turn_delay", &self.first_turn_delay),
            ("first_turn_positive_delay", &self.first_turn_positive_delay),
            ("mean_utterance_duration", &self.mean_utterance_duration),
            ("call_duration", &self.call_duration),
            ("first_turn_duration", &self.first_turn_duration),
            ("exchange_count", &self.exchange_count),
            ("global_speech_rate", &self.global_speech_rate),
            ("first_turn_speech_rate", &self.first_turn_speech_rate),
        ]
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn survival(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse-CDF sampler for one continuous feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Point(f64),
    Normal {
        mean: f64,
        sd: f64,
    },
    /// `N(loc, scale^2)` truncated below at `loc + alpha * scale`.
    TruncatedNormal {
        loc: f64,
        scale: f64,
        alpha: f64,
    },
    /// `lower + exp(N(mu, sigma^2))`.
    ShiftedLogNormal {
        lower: f64,
        mu: f64,
        sigma: f64,
    },
}

/// Largest `sd / (mean - lower)` fitted by a truncated normal; beyond it
/// the truncated normal would pile its mass on the bound.
const TRUNCATED_NORMAL_MAX_RATIO: f64 = 0.9;

fn truncated_ratio(alpha: f64) -> f64 {
    let lambda = density(alpha) / survival(alpha);
    let var = 1.0 + alpha * lambda - lambda * lambda;
    var.max(0.0).sqrt() / (lambda - alpha)
}

impl Marginal {
    /// Matches mean and standard deviation of `spec`.
    pub fn fit(spec: &ContinuousSpec) -> Result<Marginal> {
        let (mean, sd) = (spec.mean, spec.sd);
        if sd == 0.0 {
            return Ok(Marginal::Point(mean));
        }
        let Some(lower) = spec.lower else {
            return Ok(Marginal::Normal { mean, sd });
        };
        let gap = mean - lower;
        if gap <= 0.0 {
            return Err(Error::invalid("mean must exceed the lower bound"));
        }
        let ratio = sd / gap;
        if ratio <= TRUNCATED_NORMAL_MAX_RATIO {
            let (mut lo, mut hi) = (-50.0, 30.0);
            if ratio <= truncated_ratio(lo) {
                hi = lo;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if truncated_ratio(mid) < ratio {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let alpha = 0.5 * (lo + hi);
            let lambda = density(alpha) / survival(alpha);
            let scale = gap / (lambda - alpha);
            Ok(Marginal::TruncatedNormal {
                loc: lower - alpha * scale,
                scale,
                alpha,
            })
        } else {
            Ok(Marginal::lognormal(lower, gap, sd))
        }
    }

    fn lognormal(lower: f64, mean_above: f64, sd: f64) -> Marginal {
        let s2 = (1.0 + (sd / mean_above).powi(2)).ln();
        Marginal::ShiftedLogNormal {
            lower,
            mu: mean_above.ln() - s2 / 2.0,
            sigma: s2.sqrt(),
        }
    }

    /// Value at probability `u` in the open interval (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        let n = std_normal();
        match *self {
            Marginal::Point(v) => v,
            Marginal::Normal { mean, sd } => mean + sd * n.inverse_cdf(u),
            Marginal::TruncatedNormal { loc, scale, alpha } => {
                let lower = loc + alpha * scale;
                let z = if alpha <= 0.0 {
                    let p0 = n.cdf(alpha);
                    n.inverse_cdf(p0 + u * (1.0 - p0))
                } else {
                    -n.inverse_cdf((1.0 - u) * survival(alpha))
                };
                (loc + scale * z).max(lower)
            }
            Marginal::ShiftedLogNormal { lower, mu, sigma } => {
                lower + (mu + sigma * n.inverse_cdf(u)).exp()
            }
        }
    }

    /// Analytic mean of the fitted distribution.
    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Point(v) => v,
            Marginal::Normal { mean, .. } => mean,
            Marginal::TruncatedNormal { loc, scale, alpha } => {
                loc + scale * density(alpha) / survival(alpha)
            }
            Marginal::ShiftedLogNormal { lower, mu, sigma } => {
                lower + (mu + sigma * sigma / 2.0).exp()
            }
        }
    }
}

/// Signed first-turn delay: with probability `p_positive` a draw from the
/// positive part, otherwise minus a draw from the negative magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayMixture {
    pub p_positive: f64,
    pub positive: Marginal,
    pub negative: Marginal,
}

/// Splits the overall delay moments into a positive part with the given
/// conditional moments and a negative remainder. The mixing weight sits
/// midway through the interval where both parts have valid moments.
pub fn delay_mixture(overall: &ContinuousSpec, positive: &ContinuousSpec) -> Result<DelayMixture> {
    let (m, s) = (overall.mean, overall.sd);
    let (pm, ps) = (positive.mean, positive.sd);
    if pm <= 0.0 || m >= pm {
        return Err(Error::invalid(
            "positive delay mean must exceed the overall mean",
        ));
    }
    let e2 = s * s + m * m;
    let pe2 = ps * ps + pm * pm;
    let lo = (m / pm).max(0.0);
    let hi = (e2 / pe2).min(1.0);
    if lo >= hi {
        return Err(Error::invalid(
            "delay moments admit no positive/negative split",
        ));
    }
    let p = 0.5 * (lo + hi);
    let neg_mean = (m - p * pm) / (1.0 - p);
    let neg_e2 = (e2 - p * pe2) / (1.0 - p);
    let neg_var = neg_e2 - neg_mean * neg_mean;
    if neg_mean >= 0.0 || neg_var <= 0.0 {
        return Err(Error::invalid(
            "delay moments admit no positive/negative split",
        ));
    }
    Ok(DelayMixture {
        p_positive: p,
        positive: Marginal::fit(positive)?,
        negative: Marginal::lognormal(0.0, -neg_mean, neg_var.sqrt()),
    })
}

/// Corpus layout conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusStyle {
    /// Fixed 10.25 s opening prompt; system turn ends are not logged.
    Lego,
    /// 13.29 s opening prompt recorded per session; later system turn ends
    /// are logged.
    Lg2014,
}

impl CorpusStyle {
    pub fn prompt_duration(self) -> f64 {
        match self {
            CorpusStyle::Lego => 10.25,
            CorpusStyle::Lg2014 => 13.29,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CorpusStyle::Lego => "lego",
            CorpusStyle::Lg2014 => "lg2014",
        }
    }

    /// Default profiles with the style's class priors.
    pub fn default_profiles(self) -> Profiles {
        let mut p = default_profiles();
        if self == CorpusStyle::Lg2014 {
            p.novice.prior = 25.0 / 56.0;
            p.expert.prior = 31.0 / 56.0;
        }
        p
    }
}

impl fmt::Display for CorpusStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorpusStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s
            .to_ascii_lowercase()
            .replace(['-', '_', ' ', '\''], "")
            .as_str()
        {
            "lego" => Ok(CorpusStyle::Lego),
            "lg2014" | "letsgo2014" | "2014" => Ok(CorpusStyle::Lg2014),
            _ => Err(Error::invalid(format!("unknown corpus style `{s}`"))),
        }
    }
}

/// Uniform in the open interval (0, 1).
fn open_unit(rng: &mut impl Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

fn std_normal_draw(rng: &mut impl Rng) -> f64 {
    std_normal().inverse_cdf(open_unit(rng))
}

/// A profile prepared for repeated sampling.
#[derive(Debug, Clone)]
pub struct Sampler {
    class: Class,
    prompt: f64,
    chol: CopulaMatrix,
    barge_in_rate: Marginal,
    exchange_count: Marginal,
    call_duration: Marginal,
    mean_utterance_duration: Marginal,
    first_turn_duration: Marginal,
    global_speech_rate: Marginal,
    first_turn_speech_rate: Marginal,
    delay: DelayMixture,
    first_turn_barge_in: f64,
    help: [f64; 4],
    first_turn_help_given_help: f64,
}

/// Lower bound on `S_r * S_d / m^2` for the later exchanges, above the
/// minimum of 1 needed for one phone per utterance.
const PHONE_FEASIBILITY_MARGIN: f64 = 1.05;

const MAX_REDRAWS: usize = 10_000;

impl Sampler {
    pub fn new(profile: &ClassProfile, style: CorpusStyle) -> Result<Sampler> {
        profile.validate()?;
        let help_mass = 1.0 - profile.help_request_count[0];
        Ok(Sampler {
            class: profile.class,
            prompt: style.prompt_duration(),
            chol: cholesky(profile.copula.matrix()).expect("validated"),
            barge_in_rate: Marginal::fit(&profile.barge_in_rate)?,
            exchange_count: Marginal::fit(&profile.exchange_count)?,
            call_duration: Marginal::fit(&profile.call_duration)?,
            mean_utterance_duration: Marginal::fit(&profile.mean_utterance_duration)?,
            first_turn_duration: Marginal::fit(&profile.first_turn_duration)?,
            global_speech_rate: Marginal::fit(&profile.global_speech_rate)?,
            first_turn_speech_rate: Marginal::fit(&profile.first_turn_speech_rate)?,
            delay: delay_mixture(
                &profile.first_turn_delay,
                &profile.first_turn_positive_delay,
            )?,
            first_turn_barge_in: profile.first_turn_barge_in,
            help: profile.help_request_count,
            first_turn_help_given_help: if help_mass > 0.0 {
                (profile.first_turn_help / help_mass).min(1.0)
            } else {
                0.0
            },
        })
    }

    fn draw_delay(&self, rng: &mut impl Rng) -> f64 {
        if rng.random::<f64>() < self.delay.p_positive {
            return self.delay.positive.quantile(open_unit(rng));
        }
        loop {
            let magnitude = self.delay.negative.quantile(open_unit(rng));
            if magnitude < self.prompt {
                return -magnitude;
            }
        }
    }

    /// One consistent target vector (session id empty).
    pub fn sample(&self, rng: &mut impl Rng) -> FeatureVector {
        for _ in 0..MAX_REDRAWS {
            if let Some(v) = self.try_sample(rng) {
                return v;
            }
        }
        panic!("profile never produced a feasible session after {MAX_REDRAWS} draws");
    }

    fn try_sample(&self, rng: &mut impl Rng) -> Option<FeatureVector> {
        let n01 = std_normal();
        let e: [f64; COPULA_DIM] = std::array::from_fn(|_| std_normal_draw(rng));
        let mut u = [0.0; COPULA_DIM];
        for (i, ui) in u.iter_mut().enumerate() {
            let z: f64 = (0..=i).map(|k| self.chol[i][k] * e[k]).sum();
            *ui = n01.cdf(z).clamp(1e-300, 1.0 - f64::EPSILON / 2.0);
        }
        let rate = self.barge_in_rate.quantile(u[0]);
        let n = self.exchange_count.quantile(u[1]).round().max(1.0) as u32;
        let mut call = self.call_duration.quantile(u[2]);
        let mut mean_dur = self.mean_utterance_duration.quantile(u[3]);

        let expected = rate * n as f64 / 100.0;
        let floor = expected.floor();
        let mut count = floor as u32 + u32::from(rng.random::<f64>() < expected - floor);
        count = count.min(n);

        let mut b1 = rng.random::<f64>() < self.first_turn_barge_in;
        if count == 0 {
            b1 = false;
        } else if count == n {
            b1 = true;
        }

        let delay = self.draw_delay(rng);
        let d1 = self.first_turn_duration.quantile(u[4]);
        let r1_raw = self.first_turn_speech_rate.quantile(open_unit(rng));
        let p1 = (r1_raw * d1).round().max(1.0);
        let r1 = p1 / d1;
        let mut rate_global = self.global_speech_rate.quantile(open_unit(rng));

        let roll = rng.random::<f64>();
        let mut help = 0u32;
        let mut acc = 0.0;
        for (k, p) in self.help.iter().enumerate() {
            acc += p;
            if roll < acc {
                help = k as u32;
                break;
            }
            help = k as u32;
        }
        help = help.min(n);
        let mut f1 = help >= 1 && rng.random::<f64>() < self.first_turn_help_given_help;
        if help == n && help > 0 {
            f1 = true;
        }

        let start_speech = self.prompt + delay;
        if n == 1 {
            mean_dur = d1;
            rate_global = r1;
            call = start_speech + d1;
        } else {
            let m = (n - 1) as f64;
            let s_d = n as f64 * mean_dur - d1;
            let s_r = n as f64 * rate_global - r1;
            if s_d <= 0.0 || s_r <= 0.0 || s_r * s_d < m * m * PHONE_FEASIBILITY_MARGIN {
                return None;
            }
            if n == 2 {
                // the single later utterance needs a whole phone count
                let p2 = (s_r * s_d).round().max(1.0);
                rate_global = (r1 + p2 / s_d) / 2.0;
            }
            call = call.max(start_speech + n as f64 * mean_dur);
        }

        let mut v = FeatureVector::new(String::new(), Label::from(self.class));
        use FeatureId::*;
        v.set(BargeInCount, Some(count as f64));
        v.set(BargeInRate, Some(100.0 * count as f64 / n as f64));
        v.set(FirstTurnBargeIn, Some(if b1 { 1.0 } else { 0.0 }));
        v.set(FirstTurnDelay, Some(delay));
        v.set(FirstTurnPositiveDelay, (delay > 0.0).then_some(delay));
        v.set(MeanUtteranceDuration, Some(mean_dur));
        v.set(CallDuration, Some(call));
        v.set(FirstTurnDuration, Some(d1));
        v.set(ExchangeCount, Some(n as f64));
        v.set(GlobalSpeechRate, Some(rate_global));
        v.set(FirstTurnSpeechRate, Some(r1));
        v.set(HelpRequestCount, Some(help as f64));
        v.set(FirstTurnHelp, Some(if f1 { 1.0 } else { 0.0 }));
        Some(v)
    }
}

/// Draws one target feature vector for `profile`'s class.
pub fn sample_feature_vector(
    profile: &ClassProfile,
    style: CorpusStyle,
    rng: &mut impl Rng,
) -> Result<FeatureVector> {
    Ok(Sampler::new(profile, style)?.sample(rng))
}

#[derive(Debug, Clone, Copy)]
struct Target {
    n: u32,
    barge_ins: u32,
    first_barge_in: bool,
    delay: f64,
    first_duration: f64,
    first_phones: u32,
    mean_duration: f64,
    call: f64,
    rate: f64,
    first_rate: f64,
    help: u32,
    first_help: bool,
}

fn infeasible(msg: impl Into<String>) -> Error {
    Error::invalid(format!("infeasible target: {}", msg.into()))
}

fn near(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn whole(v: f64, name: &str) -> Result<u32> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(infeasible(format!(
            "{name} must be a nonnegative integer, got {v}"
        )))
    }
}

fn flag(v: f64, name: &str) -> Result<bool> {
    match v {
        0.0 => Ok(false),
        1.0 => Ok(true),
        _ => Err(infeasible(format!("{name} must be 0 or 1, got {v}"))),
    }
}

impl Target {
    fn from_vector(v: &FeatureVector, prompt: f64) -> Result<Target> {
        use FeatureId::*;
        let req = |f: FeatureId| {
            v.get(f)
                .filter(|x| x.is_finite())
                .ok_or_else(|| infeasible(format!("{f} is missing")))
        };
        let n = whole(req(ExchangeCount)?, "exchange_count")?;
        if n == 0 {
            return Err(infeasible("exchange_count must be at least 1"));
        }
        let barge_ins = whole(req(BargeInCount)?, "barge_in_count")?;
        let first_barge_in = flag(req(FirstTurnBargeIn)?, "first_turn_barge_in")?;
        let help = whole(req(HelpRequestCount)?, "help_request_count")?;
        let first_help = flag(req(FirstTurnHelp)?, "first_turn_help")?;
        let delay = req(FirstTurnDelay)?;
        let first_duration = req(FirstTurnDuration)?;
        let first_rate = req(FirstTurnSpeechRate)?;
        let t = Target {
            n,
            barge_ins,
            first_barge_in,
            delay,
            first_duration,
            first_phones: 0,
            mean_duration: req(MeanUtteranceDuration)?,
            call: req(CallDuration)?,
            rate: req(GlobalSpeechRate)?,
            first_rate,
            help,
            first_help,
        };

        if barge_ins > n || help > n {
            return Err(infeasible("more barge-ins or help requests than exchanges"));
        }
        if !near(
            req(BargeInRate)?,
            100.0 * barge_ins as f64 / n as f64,
            1e-12,
        ) {
            return Err(infeasible("barge_in_rate disagrees with barge_in_count"));
        }
        for (first, total, name) in [
            (first_barge_in, barge_ins, "barge-in"),
            (first_help, help, "help"),
        ] {
            if first && total == 0 {
                return Err(infeasible(format!("first-turn {name} without any {name}")));
            }
            if !first && total == n {
                return Err(infeasible(format!(
                    "every exchange has a {name} but the first does not"
                )));
            }
        }
        match v.get(FirstTurnPositiveDelay) {
            Some(p) if delay > 0.0 && p == delay => {}
            None if delay <= 0.0 => {}
            _ => {
                return Err(infeasible(
                    "first_turn_positive_delay disagrees with first_turn_delay",
                ))
            }
        }
        if prompt + delay < 0.0 {
            return Err(infeasible("user speaks before the call starts"));
        }
        if !(first_duration > 0.0 && first_rate > 0.0) {
            return Err(infeasible(
                "first utterance needs positive duration and rate",
            ));
        }
        let phones = first_rate * first_duration;
        let p1 = phones.round();
        if p1 < 1.0 || (phones - p1).abs() > 1e-6 {
            return Err(infeasible(
                "first-turn rate times duration is not a whole phone count",
            ));
        }
        let t = Target {
            first_phones: p1 as u32,
            ..t
        };

        let start_speech = prompt + delay;
        if n == 1 {
            if !near(t.mean_duration, first_duration, 1e-9) || !near(t.rate, first_rate, 1e-9) {
                return Err(infeasible(
                    "a one-exchange session has first-turn mean duration and rate",
                ));
            }
            if !near(t.call, start_speech + first_duration, 1e-9) {
                return Err(infeasible(
                    "one-exchange call duration must end with the only utterance",
                ));
            }
        } else {
            let m = (n - 1) as f64;
            let s_d = n as f64 * t.mean_duration - first_duration;
            let s_r = n as f64 * t.rate - first_rate;
            if s_d <= 0.0 || s_r <= 0.0 {
                return Err(infeasible(
                    "later utterances would need nonpositive duration or rate",
                ));
            }
            if s_r * s_d < m * m {
                return Err(infeasible("later utterances cannot carry one phone each"));
            }
            if n == 2 && ((s_r * s_d) - (s_r * s_d).round()).abs() > 1e-6 {
                return Err(infeasible(
                    "second utterance rate times duration is not a whole phone count",
                ));
            }
            if t.call < start_speech + n as f64 * t.mean_duration - 1e-9 * (1.0 + t.call) {
                return Err(infeasible("call is shorter than its speech"));
            }
        }
        Ok(t)
    }
}

const FILLERS: [&str; 12] = [
    "next bus",
    "forbes avenue",
    "downtown",
    "yes",
    "no",
    "the sixty one c",
    "oakland",
    "tomorrow morning",
    "squirrel hill",
    "when is the next one",
    "from the airport",
    "go back",
];

/// Durations `d` summing to `s_d` with `sum p_i / d_i = s_r`, starting from
/// the jittered guess `u`.
fn fit_durations(p: &[f64], u: &[f64], s_d: f64, s_r: f64) -> Vec<f64> {
    let root_sum: f64 = p.iter().map(|x| x.sqrt()).sum();
    let d_star: Vec<f64> = p.iter().map(|x| s_d * x.sqrt() / root_sum).collect();
    let g = |theta: f64| -> f64 {
        p.iter()
            .zip(&d_star)
            .zip(u)
            .map(|((pi, ds), ui)| pi / (ds + theta * (ui - ds)))
            .sum()
    };
    let at = |theta: f64| -> Vec<f64> {
        d_star
            .iter()
            .zip(u)
            .map(|(ds, ui)| ds + theta * (ui - ds))
            .collect()
    };
    if g(0.0) >= s_r {
        return d_star;
    }
    let theta_max = d_star
        .iter()
        .zip(u)
        .filter(|(ds, ui)| **ui < **ds)
        .map(|(ds, ui)| ds / (ds - ui))
        .fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, theta_max);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < s_r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = if (g(lo) - s_r).abs() <= (g(hi) - s_r).abs() || !hi.is_finite() {
        lo
    } else {
        hi
    };
    at(best)
}

fn layout(
    target: &Target,
    id: &str,
    label: Label,
    style: CorpusStyle,
    rng: &mut impl Rng,
) -> Result<Session> {
    let prompt = style.prompt_duration();
    let n = target.n as usize;
    let start_speech = prompt + target.delay;
    let filler =
        |rng: &mut dyn rand::RngCore| FILLERS[rng.random_range(0..FILLERS.len())].to_string();

    let mut durations = vec![target.first_duration];
    let mut phones = vec![target.first_phones];
    let mut gaps = vec![0.0; n];
    if n > 1 {
        let m = n - 1;
        let mf = m as f64;
        let s_d = n as f64 * target.mean_duration - target.first_duration;
        let s_r = n as f64 * target.rate - target.first_rate;
        let raw: Vec<f64> = (0..m)
            .map(|_| (0.35 * std_normal_draw(rng)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        let mut u: Vec<f64> = raw.iter().map(|x| s_d * x / total).collect();
        let per_rate = s_r / mf;
        let mut p: Vec<f64> = u
            .iter()
            .map(|ui| {
                (per_rate * ui * (0.1 * std_normal_draw(rng)).exp())
                    .round()
                    .max(1.0)
            })
            .collect();
        if m == 1 {
            p[0] = (s_r * s_d).round();
            u[0] = s_d;
        }
        let root_sum: f64 = p.iter().map(|x| x.sqrt()).sum();
        if m > 1 && root_sum * root_sum / s_d > s_r {
            let equal = (s_r * s_d / (mf * mf)).floor().max(1.0);
            p = vec![equal; m];
        }
        let root_sum: f64 = p.iter().map(|x| x.sqrt()).sum();
        let d_star: Vec<f64> = p.iter().map(|x| s_d * x.sqrt() / root_sum).collect();
        if m > 1
            && u.iter()
                .zip(&d_star)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * s_d)
        {
            // the guess sits on the minimum; tilt it so the search has a direction
            u[0] = 0.5 * d_star[0];
            let rest: f64 = d_star[1..].iter().sum();
            for (ui, ds) in u[1..].iter_mut().zip(&d_star[1..]) {
                *ui = ds * (1.0 + 0.5 * d_star[0] / rest);
            }
        }
        let d = fit_durations(&p, &u, s_d, s_r);
        if d.iter().any(|x| !(*x > 0.0)) {
            return Err(infeasible(
                "no positive utterance durations match the speech rate",
            ));
        }
        durations.extend(d);
        phones.extend(p.iter().map(|x| *x as u32));

        let slack = target.call - (start_speech + n as f64 * target.mean_duration);
        let slack = slack.max(0.0);
        let w: Vec<f64> = (0..m).map(|_| open_unit(rng)).collect();
        let wsum: f64 = w.iter().sum();
        for (g, wi) in gaps[1..].iter_mut().zip(&w) {
            *g = slack * wi / wsum;
        }
    }

    let mut barge = vec![false; n];
    let mut help = vec![false; n];
    for (marks, first, total) in [
        (&mut barge, target.first_barge_in, target.barge_ins),
        (&mut help, target.first_help, target.help),
    ] {
        marks[0] = first;
        let rest = total as usize - usize::from(first);
        for k in sample(rng, n - 1, rest).into_iter() {
            marks[k + 1] = true;
        }
    }

    let mut exchanges = Vec::with_capacity(n);
    let mut prev_end = 0.0;
    for i in 0..n {
        let mut ex;
        if i == 0 {
            ex = Exchange::new(1, 0.0);
            ex.user_start = Some(start_speech);
        } else {
            let g = gaps[i];
            ex = Exchange::new(i as u32 + 1, prev_end + 0.25 * g);
            let user_start = prev_end + g;
            ex.user_start = Some(user_start);
            if style == CorpusStyle::Lg2014 {
                ex.system_end = Some(if barge[i] {
                    user_start + 0.5 * durations[i]
                } else {
                    prev_end + 0.9 * g
                });
            }
        }
        let start = ex.user_start.expect("set above");
        let end = start + durations[i];
        ex.user_end = Some(end);
        ex.user_barge_in = barge[i];
        ex.phone_count = Some(phones[i]);
        ex.transcript = Some(if help[i] {
            "help".to_string()
        } else {
            filler(rng)
        });
        prev_end = end;
        exchanges.push(ex);
    }

    Ok(Session {
        session_id: id.to_string(),
        label,
        first_system_prompt_duration: (style == CorpusStyle::Lg2014).then_some(prompt),
        exchanges,
    })
}

/// Per-feature tolerance used to accept a synthesized session.
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-7;

fn matches(target: &FeatureVector, got: &FeatureVector) -> bool {
    FeatureId::ALL
        .iter()
        .all(|&f| match (target.get(f), got.get(f)) {
            (None, None) => true,
            (Some(a), Some(b)) => (a - b).abs() <= ROUND_TRIP_TOLERANCE,
            _ => false,
        })
}

/// Builds a session whose extracted features reproduce `target`.
///
/// The session id and label come from the target. Layout is randomized
/// (utterance lengths, phone counts, gaps, which exchanges carry barge-ins
/// and help requests) but always consistent with the target.
pub fn synthesize_session(
    target: &FeatureVector,
    style: CorpusStyle,
    rng: &mut impl Rng,
) -> Result<Session> {
    let t = Target::from_vector(target, style.prompt_duration())?;
    let id = if target.session_id.is_empty() {
        "synthetic"
    } else {
        target.session_id.as_str()
    };
    let config = ExtractionConfig::default();
    let mut last = None;
    for _ in 0..8 {
        let session = layout(&t, id, target.label, style, rng)?;
        session.validate()?;
        let got = extract_features(&session, &config)?;
        if matches(target, &got) {
            return Ok(session);
        }
        last = Some(got);
    }
    let got = last.expect("at least one attempt");
    let worst = FeatureId::ALL
        .iter()
        .filter_map(|&f| Some((f, (target.get(f)? - got.get(f)?).abs())))
        .fold((FeatureId::BargeInCount, 0.0), |a, b| {
            if b.1 > a.1 {
                b
            } else {
                a
            }
        });
    Err(infeasible(format!(
        "layout could not reproduce {} (off by {:e})",
        worst.0, worst.1
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSize {
    PerClass(usize),
    /// Total sessions split by the profiles' class priors.
    Priors(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub name: String,
    pub size: CorpusSize,
    pub seed: u64,
    pub style: CorpusStyle,
    pub profiles: Profiles,
}

impl GeneratorConfig {
    pub fn new(size: CorpusSize, seed: u64, style: CorpusStyle) -> GeneratorConfig {
        GeneratorConfig {
            name: format!("synthetic-{}", style.name()),
            size,
            seed,
            style,
            profiles: style.default_profiles(),
        }
    }

    /// Sessions per class, indexed by [`Class::index`].
    pub fn class_counts(&self) -> Result<[usize; 2]> {
        match self.size {
            CorpusSize::PerClass(0) | CorpusSize::Priors(0) => {
                Err(Error::invalid("corpus size must be at least 1"))
            }
            CorpusSize::PerClass(n) => Ok([n, n]),
            CorpusSize::Priors(total) => {
                let (pn, pe) = (self.profiles.novice.prior, self.profiles.expert.prior);
                if !(pn + pe > 0.0) {
                    return Err(Error::invalid("class priors must not both be zero"));
                }
                let expert = ((total as f64 * pe / (pn + pe)).round() as usize).min(total);
                Ok([total - expert, expert])
            }
        }
    }

    /// Key/value description written into the corpus header.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let size = match self.size {
            CorpusSize::PerClass(n) => format!("per_class={n}"),
            CorpusSize::Priors(n) => format!("priors={n}"),
        };
        m.insert("generator.size".into(), size);
        m.insert("generator.seed".into(), self.seed.to_string());
        m.insert("generator.style".into(), self.style.name().into());
        m.insert(
            "generator.profiles".into(),
            serde_json::to_string(&self.profiles).expect("profiles serialize"),
        );
        m
    }
}

/// Generates a labeled corpus. Session `i` uses its own seed derived from
/// the config seed, so output is independent of thread scheduling.
pub fn generate_corpus(config: &GeneratorConfig) -> Result<Corpus> {
    config.profiles.validate()?;
    let counts = config.class_counts()?;
    let samplers = [
        Sampler::new(&config.profiles.novice, config.style)?,
        Sampler::new(&config.profiles.expert, config.style)?,
    ];
    let mut classes: Vec<Class> = Class::ORDER
        .iter()
        .flat_map(|&c| std::iter::repeat_n(c, counts[c.index()]))
        .collect();
    {
        use rand::seq::SliceRandom;
        let mut rng = rng_from_seed(derive_seed(config.seed, u64::MAX));
        classes.shuffle(&mut rng);
    }
    let width = classes.len().to_string().len().max(4);
    let sessions = classes
        .par_iter()
        .enumerate()
        .map(|(i, &class)| {
            let mut rng = rng_from_seed(derive_seed(config.seed, i as u64));
            let id = format!("{}-{:0width$}", config.name, i + 1);
            let mut last_err = None;
            for _ in 0..16 {
                let mut v = samplers[class.index()].sample(&mut rng);
                v.session_id = id.clone();
                match synthesize_session(&v, config.style, &mut rng) {
                    Ok(s) => return Ok(s),
                    Err(e) => last_err = Some(e),
                }
            }
            Err(last_err.expect("at least one attempt"))
        })
        .collect::<Result<Vec<Session>>>()?;
    Ok(Corpus {
        name: config.name.clone(),
        sessions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_tail_has_the_published_mean() {
        let q = geometric_help_tail(0.23, 0.27).unwrap();
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mean: f64 = q.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        assert!((mean - 0.27).abs() < 1e-12);
        assert!((q[1] / 0.23 - 0.8467).abs() < 1e-3);
        assert!(geometric_help_tail(0.23, 0.9).is_err());
    }

    #[test]
    fn fitted_marginals_match_moments() {
        for spec in [
            ContinuousSpec::new(16.2, 15.4, 9.9, Some(0.0)),
            ContinuousSpec::new(1.19, 1.2, 0.43, Some(0.1)),
            ContinuousSpec::new(1.81, 1.44, 3.14, Some(0.1)),
            ContinuousSpec::new(14.8, 14.9, 1.9, Some(0.0)),
        ] {
            let m = Marginal::fit(&spec).unwrap();
            assert!(
                (m.mean() - spec.mean).abs() < 1e-6 * spec.mean,
                "{spec:?} -> {m:?}"
            );
            // midpoint-rule moments over the probability scale
            let k = 200_000;
            let xs: Vec<f64> = (0..k)
                .map(|i| m.quantile((i as f64 + 0.5) / k as f64))
                .collect();
            let mean = xs.iter().sum::<f64>() / k as f64;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k as f64).sqrt();
            assert!(
                (mean - spec.mean).abs() < 0.01 * spec.mean,
                "{spec:?}: mean {mean}"
            );
            assert!((sd - spec.sd).abs() < 0.05 * spec.sd, "{spec:?}: sd {sd}");
            assert!(xs.iter().all(|x| *x >= spec.lower.unwrap()));
        }
    }

    #[test]
    fn delay_mixture_reproduces_both_moments() {
        let p = default_profiles();
        let mix = delay_mixture(
            &p.expert.first_turn_delay,
            &p.expert.first_turn_positive_delay,
        )
        .unwrap();
        let mean =
            mix.p_positive * mix.positive.mean() - (1.0 - mix.p_positive) * mix.negative.mean();
        assert!((mean - 1.32).abs() < 1e-9, "{mean}");
    }

    #[test]
    fn samples_are_internally_consistent() {
        let p = default_profiles();
        let mut rng = rng_from_seed(7);
        for class in Class::ORDER {
            let s = Sampler::new(p.get(class), CorpusStyle::Lego).unwrap();
            for _ in 0..500 {
                let v = s.sample(&mut rng);
                let n = v.get(FeatureId::ExchangeCount).unwrap();
                let c = v.get(FeatureId::BargeInCount).unwrap();
                assert!(n >= 1.0 && c <= n);
                assert_eq!(v.get(FeatureId::BargeInRate).unwrap(), 100.0 * c / n);
                if class == Class::Expert {
                    assert_eq!(v.get(FeatureId::HelpRequestCount), Some(0.0));
                }
                Target::from_vector(&v, 10.25).unwrap();
            }
        }
    }

    #[test]
    fn synthesized_sessions_round_trip() {
        let p = default_profiles();
        let mut rng = rng_from_seed(11);
        for style in [CorpusStyle::Lego, CorpusStyle::Lg2014] {
            let s = Sampler::new(&p.novice, style).unwrap();
            for _ in 0..200 {
                let v = s.sample(&mut rng);
                let session = synthesize_session(&v, style, &mut rng).unwrap();
                let got = extract_features(&session, &ExtractionConfig::default()).unwrap();
                assert!(matches(&v, &got));
                if style == CorpusStyle::Lg2014 {
                    assert_eq!(session.first_system_prompt_duration, Some(13.29));
                }
            }
        }
    }

    #[test]
    fn first_turn_barge_in_lands_on_exchange_one() {
        let mut rng = rng_from_seed(3);
        let s = Sampler::new(&default_profiles().novice, CorpusStyle::Lego).unwrap();
        let v = loop {
            let v = s.sample(&mut rng);
            if v.get(FeatureId::FirstTurnBargeIn) == Some(1.0) {
                break v;
            }
        };
        let session = synthesize_session(&v, CorpusStyle::Lego, &mut rng).unwrap();
        assert!(session.exchanges[0].user_barge_in);
    }

    #[test]
    fn infeasible_targets_are_rejected() {
        let mut rng = rng_from_seed(1);
        let s = Sampler::new(&default_profiles().expert, CorpusStyle::Lego).unwrap();
        let v = s.sample(&mut rng);
        let mut bad = v.clone();
        bad.set(FeatureId::GlobalSpeechRate, Some(-5.0));
        assert!(synthesize_session(&bad, CorpusStyle::Lego, &mut rng).is_err());
        let mut bad = v.clone();
        bad.set(FeatureId::CallDuration, None);
        assert!(synthesize_session(&bad, CorpusStyle::Lego, &mut rng).is_err());
    }

    #[test]
    fn corpus_allocation() {
        let c = generate_corpus(&GeneratorConfig::new(
            CorpusSize::PerClass(5),
            1,
            CorpusStyle::Lego,
        ))
        .unwrap();
        assert_eq!(c.sessions.len(), 10);
        let cfg = GeneratorConfig::new(CorpusSize::Priors(315), 1, CorpusStyle::Lego);
        assert_eq!(cfg.class_counts().unwrap(), [235, 80]);
        let cfg = GeneratorConfig::new(CorpusSize::Priors(56), 1, CorpusStyle::Lg2014);
        assert_eq!(cfg.class_counts().unwrap(), [25, 31]);
    }

    #[test]
    fn generation_is_reproducible() {
        let cfg = GeneratorConfig::new(CorpusSize::PerClass(20), 9, CorpusStyle::Lg2014);
        let a = generate_corpus(&cfg).unwrap();
        assert_eq!(a, generate_corpus(&cfg).unwrap());
        for s in &a.sessions {
            s.validate().unwrap();
        }
    }

    #[test]
    fn style_names_parse() {
        assert_eq!("LEGO".parse::<CorpusStyle>().unwrap(), CorpusStyle::Lego);
        assert_eq!(
            "lets-go-2014".parse::<CorpusStyle>().unwrap(),
            CorpusStyle::Lg2014
        );
        assert!("other".parse::<CorpusStyle>().is_err());
    }
}
