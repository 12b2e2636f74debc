//! Uncertain monetary prospects.
//!
//! A [`Prospect`] is a finite discrete distribution, a Gaussian, an affine
//! image `k·X + c` of another prospect, or a sum of mutually independent
//! prospects. Every certain-equivalent computation in the crate goes through
//! [`Prospect::log_mgf`].

use std::fmt;

use crate::error::{Error, Result};

/// Largest support produced by exact convolution. Beyond it
/// [`Prospect::add_independent`] keeps the lazy [`IndependentSum`] form.
pub const CONVOLUTION_SUPPORT_CAP: usize = 1_000_000;

/// Accepted deviation of user-supplied masses from a total of one.
pub const MASS_SUM_TOLERANCE: f64 = 1e-9;

/// Finite distribution with strictly ascending, distinct support values.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrete {
    points: Vec<(f64, f64)>,
}

impl Discrete {
    /// Validates `(value, mass)` pairs, merges duplicate values and sorts.
    pub fn new(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::invalid("discrete prospect", "support is empty"));
        }
        for (i, &(value, mass)) in pairs.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::invalid(
                    "discrete prospect",
                    format!("point {i}: value {value} is not finite"),
                ));
            }
            if !(mass.is_finite() && mass > 0.0) {
                return Err(Error::invalid(
                    "discrete prospect",
                    format!("point {i}: mass {mass} is not positive"),
                ));
            }
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > MASS_SUM_TOLERANCE {
            return Err(Error::invalid(
                "discrete prospect",
                format!("masses sum to {total}, expected 1"),
            ));
        }
        Ok(Self::normalized(pairs))
    }

    /// Point mass at `value`.
    pub fn point(value: f64) -> Result<Self> {
        Self::new([(value, 1.0)])
    }

    /// Sorts, merges bit-equal values and rescales the masses to sum to one.
    /// Callers guarantee finite values and positive masses.
    fn normalized(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (value, mass) in pairs {
            match points.last_mut() {
                Some(last) if last.0 == value => last.1 += mass,
                _ => points.push((value, mass)),
            }
        }
        let total: f64 = points.iter().map(|p| p.1).sum();
        if total != 1.0 {
            for p in &mut points {
                p.1 /= total;
            }
        }
        Discrete { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min_value(&self) -> f64 {
        self.points[0].0
    }

    pub fn max_value(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    /// Probability of the smallest support value.
    pub fn mass_at_min(&self) -> f64 {
        self.points[0].1
    }

    pub fn is_point_mass(&self) -> bool {
        self.points.len() == 1
    }

    fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut mapped = Vec::with_capacity(self.points.len());
        for &(v, p) in &self.points {
            let w = f(v);
            if !w.is_finite() {
                return Err(Error::invalid(
                    "transformed prospect",
                    format!("value {v} maps to non-finite {w}"),
                ));
            }
            mapped.push((w, p));
        }
        Ok(Self::normalized(mapped))
    }

    /// Exact distribution of the sum of two independent discrete prospects,
    /// or `None` when the pairwise support would exceed [`CONVOLUTION_SUPPORT_CAP`].
    pub fn convolve(&self, other: &Discrete) -> Option<Discrete> {
        let n = self.len().checked_mul(other.len())?;
        if n > CONVOLUTION_SUPPORT_CAP {
            return None;
        }
        let mut pairs = Vec::with_capacity(n);
        for &(a, p) in &self.points {
            for &(b, q) in &other.points {
                let s = a + b;
                if !s.is_finite() {
                    return None;
                }
                pairs.push((s, p * q));
            }
        }
        let out = Self::normalized(pairs);
        (out.len() <= CONVOLUTION_SUPPORT_CAP).then_some(out)
    }

    fn log_mgf(&self, t: f64) -> Result<f64> {
        let mut exps = Vec::with_capacity(self.points.len());
        let mut max = f64::NEG_INFINITY;
        for &(v, p) in &self.points {
            let tv = t * v;
            if !tv.is_finite() {
                return Err(Error::Range {
                    context: format!("log-mgf exponent t = {t:e}, value = {v:e}"),
                    magnitude: t.abs() * v.abs(),
                });
            }
            let a = tv + p.ln();
            max = max.max(a);
            exps.push(a);
        }
        let sum: f64 = exps.iter().map(|a| (a - max).exp()).sum();
        Ok(max + sum.ln())
    }

    fn stats(&self) -> ProspectStats {
        let lo = self.min_value();
        let hi = self.max_value();
        let mean = self
            .points
            .iter()
            .map(|&(v, p)| v * p)
            .sum::<f64>()
            .clamp(lo, hi);
        let variance = self
            .points
            .iter()
            .map(|&(v, p)| p * (v - mean) * (v - mean))
            .sum();
        ProspectStats {
            mean,
            variance,
            worst_case: lo,
        }
    }
}

/// Normal distribution; zero variance is a point mass at the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    mean: f64,
    variance: f64,
}

impl Gaussian {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() {
            return Err(Error::invalid(
                "gaussian prospect",
                format!("mean {mean} and variance {variance} must be finite"),
            ));
        }
        if variance < 0.0 {
            return Err(Error::invalid(
                "gaussian prospect",
                format!("variance {variance} is negative"),
            ));
        }
        Ok(Gaussian { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// `scale · base + offset` with `scale > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    base: Box<Prospect>,
    scale: f64,
    offset: f64,
}

impl Affine {
    pub fn base(&self) -> &Prospect {
        &self.base
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

/// Sum of mutually independent prospects, evaluated through the MGF.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentSum {
    terms: Vec<Prospect>,
}

impl IndependentSum {
    pub fn terms(&self) -> &[Prospect] {
        &self.terms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prospect {
    Discrete(Discrete),
    Gaussian(Gaussian),
    Affine(Affine),
    Sum(IndependentSum),
}

/// Mean, variance and essential infimum of a prospect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProspectStats {
    pub mean: f64,
    pub variance: f64,
    /// Smallest value carrying positive mass; `-inf` when a Gaussian with
    /// positive variance is involved.
    pub worst_case: f64,
}

/// `X = N(0, gaussian_variance) + discrete` with the two parts independent.
/// Every prospect whose discrete parts convolve within the cap has one.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NormalForm {
    pub gaussian_variance: f64,
    pub discrete: Discrete,
}

fn check_finite(what: &'static str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("{x} is not finite")))
    }
}

impl Prospect {
    /// Discrete prospect from `(value, probability)` pairs.
    pub fn discrete(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Discrete::new(pairs).map(Prospect::Discrete)
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        Gaussian::new(mean, variance).map(Prospect::Gaussian)
    }

    /// Sure amount `value`.
    pub fn deterministic(value: f64) -> Result<Self> {
        Discrete::point(value).map(Prospect::Discrete)
    }

    /// Explicit affine node `scale · base + offset`, kept unsimplified.
    pub fn affine(base: Prospect, scale: f64, offset: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(
                "affine prospect",
                format!("scale {scale} must be positive and finite"),
            ));
        }
        check_finite("affine offset", offset)?;
        Ok(Prospect::Affine(Affine {
            base: Box::new(base),
            scale,
            offset,
        }))
    }

    /// Explicit independent-sum node over `terms`.
    pub fn independent_sum(terms: Vec<Prospect>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("independent sum", "needs at least one term"));
        }
        Ok(Prospect::Sum(IndependentSum { terms }))
    }

    pub fn as_discrete(&self) -> Option<&Discrete> {
        match self {
            Prospect::Discrete(d) => Some(d),
            _ => None,
        }
    }

    /// Distribution of `k·X`.
    pub fn scale(&self, k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::invalid(
                "scale factor",
                format!("{k} must be positive and finite"),
            ));
        }
        Ok(match self {
            Prospect::Discrete(d) => Prospect::Discrete(d.map_values(|v| v * k)?),
            Prospect::Gaussian(g) => Prospect::gaussian(g.mean * k, g.variance * k * k)?,
            Prospect::Affine(a) => Prospect::affine((*a.base).clone(), a.scale * k, a.offset * k)?,
            Prospect::Sum(_) => Prospect::affine(self.clone(), k, 0.0)?,
        })
    }

    /// Distribution of `X + c`.
    pub fn shift(&self, c: f64) -> Result<Self> {
        check_finite("shift", c)?;
        Ok(match self {
            Prospect::Discrete(d) => Prospect::Discrete(d.map_values(|v| v + c)?),
            Prospect::Gaussian(g) => Prospect::gaussian(g.mean + c, g.variance)?,
            Prospect::Affine(a) => Prospect::affine((*a.base).clone(), a.scale, a.offset + c)?,
            Prospect::Sum(_) => Prospect::affine(self.clone(), 1.0, c)?,
        })
    }

    /// Distribution of `X + Z` for `Z` independent of `X`.
    pub fn add_independent(&self, other: &Prospect) -> Prospect {
        if let Some(c) = other.point_value() {
            if let Ok(p) = self.shift(c) {
                return p;
            }
        }
        if let Some(c) = self.point_value() {
            if let Ok(p) = other.shift(c) {
                return p;
            }
        }
        match (self, other) {
            (Prospect::Discrete(a), Prospect::Discrete(b)) => {
                if let Some(d) = a.convolve(b) {
                    return Prospect::Discrete(d);
                }
            }
            (Prospect::Gaussian(a), Prospect::Gaussian(b)) => {
                if let Ok(g) = Gaussian::new(a.mean + b.mean, a.variance + b.variance) {
                    return Prospect::Gaussian(g);
                }
            }
            _ => {}
        }
        let mut terms = Vec::new();
        for p in [self, other] {
            match p {
                Prospect::Sum(s) => terms.extend(s.terms.iter().cloned()),
                _ => terms.push(p.clone()),
            }
        }
        Prospect::Sum(IndependentSum { terms })
    }

    /// `ln E[exp(t·X)]`.
    pub fn log_mgf(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::invalid("mgf argument", format!("{t} is not finite")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let value = match self {
            Prospect::Discrete(d) => d.log_mgf(t)?,
            Prospect::Gaussian(g) => {
                let v = g.mean * t + 0.5 * g.variance * t * t;
                if !v.is_finite() {
                    return Err(Error::Range {
                        context: format!(
                            "gaussian log-mgf at t = {t:e} (mean {:e}, variance {:e})",
                            g.mean, g.variance
                        ),
                        magnitude: (g.mean * t).abs().max(g.variance * t * t),
                    });
                }
                v
            }
            Prospect::Affine(a) => a.base.log_mgf(a.scale * t)? + a.offset * t,
            Prospect::Sum(s) => {
                let mut acc = 0.0;
                for term in &s.terms {
                    acc += term.log_mgf(t)?;
                }
                acc
            }
        };
        if !value.is_finite() {
            return Err(Error::Range {
                context: format!("log-mgf at t = {t:e} overflowed"),
                magnitude: value.abs(),
            });
        }
        Ok(value)
    }

    pub fn stats(&self) -> ProspectStats {
        match self {
            Prospect::Discrete(d) => d.stats(),
            Prospect::Gaussian(g) => ProspectStats {
                mean: g.mean,
                variance: g.variance,
                worst_case: if g.variance > 0.0 {
                    f64::NEG_INFINITY
                } else {
                    g.mean
                },
            },
            Prospect::Affine(a) => {
                let s = a.base.stats();
                ProspectStats {
                    mean: a.scale * s.mean + a.offset,
                    variance: a.scale * a.scale * s.variance,
                    worst_case: a.scale * s.worst_case + a.offset,
                }
            }
            Prospect::Sum(sum) => sum.terms.iter().map(Prospect::stats).fold(
                ProspectStats {
                    mean: 0.0,
                    variance: 0.0,
                    worst_case: 0.0,
                },
                |acc, s| ProspectStats {
                    mean: acc.mean + s.mean,
                    variance: acc.variance + s.variance,
                    worst_case: acc.worst_case + s.worst_case,
                },
            ),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            Prospect::Discrete(d) => d.is_point_mass(),
            Prospect::Gaussian(g) => g.variance == 0.0,
            Prospect::Affine(a) => a.base.is_deterministic(),
            Prospect::Sum(s) => s.terms.iter().all(Prospect::is_deterministic),
        }
    }

    /// The sure value of a deterministic prospect.
    pub fn point_value(&self) -> Option<f64> {
        match self {
            Prospect::Discrete(d) if d.is_point_mass() => Some(d.min_value()),
            Prospect::Gaussian(g) if g.variance == 0.0 => Some(g.mean),
            Prospect::Affine(a) => a.base.point_value().map(|v| a.scale * v + a.offset),
            Prospect::Sum(s) if self.is_deterministic() => {
                s.terms.iter().map(Prospect::point_value).sum()
            }
            _ => None,
        }
    }

    /// Splits the prospect into an independent centred Gaussian part and a
    /// discrete part, materialising convolutions. Fails with
    /// [`Error::Unsupported`] when a convolution exceeds the support cap.
    pub(crate) fn normal_form(&self) -> Result<NormalForm> {
        match self {
            Prospect::Discrete(d) => Ok(NormalForm {
                gaussian_variance: 0.0,
                discrete: d.clone(),
            }),
            Prospect::Gaussian(g) => Ok(NormalForm {
                gaussian_variance: g.variance,
                discrete: Discrete::point(g.mean)?,
            }),
            Prospect::Affine(a) => {
                let inner = a.base.normal_form()?;
                Ok(NormalForm {
                    gaussian_variance: a.scale * a.scale * inner.gaussian_variance,
                    discrete: inner.discrete.map_values(|v| a.scale * v + a.offset)?,
                })
            }
            Prospect::Sum(s) => {
                let mut acc = NormalForm {
                    gaussian_variance: 0.0,
                    discrete: Discrete::point(0.0)?,
                };
                for term in &s.terms {
                    let nf = term.normal_form()?;
                    acc.gaussian_variance += nf.gaussian_variance;
                    acc.discrete = acc.discrete.convolve(&nf.discrete).ok_or_else(|| {
                        Error::Unsupported(format!(
                            "independent sum support exceeds {CONVOLUTION_SUPPORT_CAP} points"
                        ))
                    })?;
                }
                Ok(acc)
            }
        }
    }
}

impl fmt::Display for Prospect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prospect::Discrete(d) => {
                write!(f, "discrete{{")?;
                for (i, (v, p)) in d.points.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{v}:{p}")?;
                }
                write!(f, "}}")
            }
            Prospect::Gaussian(g) => {
                write!(f, "gaussian{{mean:{} variance:{}}}", g.mean, g.variance)
            }
            Prospect::Affine(a) => write!(f, "{}*({})+{}", a.scale, a.base, a.offset),
            Prospect::Sum(s) => {
                for (i, t) in s.terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "({t})")?;
                }
                Ok(())
            }
        }
    }
}
