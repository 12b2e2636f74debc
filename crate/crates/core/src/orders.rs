//! Flexibility orders between prospects.
//!
//! `X` is more flexible than `Y` with threshold `K` when
//! `CE(X|k·r) ≥ CE(Y|k·r)` for every `k ≥ K`; with `K = 1` `X` dominates `Y`.
//! The quantifier over all `k` is discharged by an exact tail certificate
//! ([`tail_order`]) beyond which the sign of the curve difference is known,
//! plus root isolation on the bounded remainder `[1, certified_from]`.

use std::fmt;

use crate::error::{Error, Result};
use crate::prospects::{Discrete, Prospect};
use crate::valuation::{certain_equivalent, RiskAversion};

/// Grid density for root isolation, in points per decade of `k`.
pub const GRID_POINTS_PER_DECADE: f64 = 512.0;

/// Relative width at which bracketed crossings stop being refined.
pub const ROOT_REL_TOL: f64 = 1e-10;

/// Relative band inside which two certain equivalents count as tied.
pub const TIE_REL_TOL: f64 = 1e-12;

/// Masses on a shared support value closer than this count as equal, so
/// renormalisation rounding does not decide a tail.
pub const MASS_TIE_TOL: f64 = 4.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailRelation {
    XAbove,
    YAbove,
    Equal,
}

impl TailRelation {
    fn flipped(self) -> Self {
        match self {
            TailRelation::XAbove => TailRelation::YAbove,
            TailRelation::YAbove => TailRelation::XAbove,
            TailRelation::Equal => TailRelation::Equal,
        }
    }
}

/// Why the tail relation holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailRationale {
    /// The worst cases differ; the higher one wins.
    WorstCaseGap,
    /// Same worst case; less mass there wins.
    MassAtWorstGap,
    /// Mass functions agree on the lowest `level - 1` merged support values
    /// and differ at `level`.
    LexicographicLevel(usize),
    /// Different Gaussian variance: the flatter curve wins.
    GaussianSlope,
    IdenticalDistribution,
}

impl fmt::Display for TailRationale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailRationale::WorstCaseGap => f.write_str("worst-case gap"),
            TailRationale::MassAtWorstGap => f.write_str("mass-at-worst gap"),
            TailRationale::LexicographicLevel(n) => write!(f, "lexicographic level {n}"),
            TailRationale::GaussianSlope => f.write_str("gaussian slope"),
            TailRationale::IdenticalDistribution => f.write_str("identical distribution"),
        }
    }
}

/// Asymptotic order of two flexibility curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailVerdict {
    pub relation: TailRelation,
    /// For every `k > certified_from` the relation holds strictly
    /// (always true for [`TailRelation::Equal`]). At least 1.
    pub certified_from: f64,
    pub rationale: TailRationale,
}

impl TailVerdict {
    fn flipped(self) -> Self {
        TailVerdict {
            relation: self.relation.flipped(),
            ..self
        }
    }
}

/// Exact comparison of `CE(X|k·r)` and `CE(Y|k·r)` as `k → ∞`.
///
/// Both prospects are reduced to an independent centred Gaussian part plus a
/// discrete part. Unequal Gaussian variances are decided by slope. Otherwise
/// the Gaussian factors cancel and `E[e^{-sY}] - E[e^{-sX}]` is a finite
/// exponential sum `Σ c_j e^{-s v_j}` over the merged supports whose leading
/// nonzero coefficient fixes the sign for large `s`.
pub fn tail_order(x: &Prospect, y: &Prospect, r: RiskAversion) -> Result<TailVerdict> {
    let r = r.require_positive()?;
    let nx = x.normal_form()?;
    let ny = y.normal_form()?;
    if nx.gaussian_variance != ny.gaussian_variance {
        let x_flatter = nx.gaussian_variance < ny.gaussian_variance;
        let (flat, steep) = if x_flatter { (&nx, &ny) } else { (&ny, &nx) };
        // CE_flat(s) - CE_steep(s) ≥ worst(flat) - mean(steep) + Δσ² s / 2.
        let flat_worst = flat.discrete.min_value();
        let steep_mean = Prospect::Discrete(steep.discrete.clone()).stats().mean;
        let dvar = steep.gaussian_variance - flat.gaussian_variance;
        let s_star = 2.0 * (steep_mean - flat_worst) / dvar;
        return Ok(TailVerdict {
            relation: if x_flatter {
                TailRelation::XAbove
            } else {
                TailRelation::YAbove
            },
            certified_from: (s_star / r).max(1.0),
            rationale: TailRationale::GaussianSlope,
        });
    }
    Ok(discrete_tail(&nx.discrete, &ny.discrete, r))
}

fn discrete_tail(x: &Discrete, y: &Discrete, r: f64) -> TailVerdict {
    // (value, p_Y - p_X, both have mass)
    let mut merged: Vec<(f64, f64, bool)> = Vec::with_capacity(x.len() + y.len());
    let (xs, ys) = (x.points(), y.points());
    let (mut i, mut j) = (0, 0);
    while i < xs.len() || j < ys.len() {
        match (xs.get(i), ys.get(j)) {
            (Some(&(vx, px)), Some(&(vy, py))) if vx == vy => {
                let c = py - px;
                merged.push((vx, if c.abs() <= MASS_TIE_TOL { 0.0 } else { c }, true));
                i += 1;
                j += 1;
            }
            (Some(&(vx, px)), Some(&(vy, _))) if vx < vy => {
                merged.push((vx, -px, false));
                i += 1;
            }
            (Some(&(vx, px)), None) => {
                merged.push((vx, -px, false));
                i += 1;
            }
            (_, Some(&(vy, py))) => {
                merged.push((vy, py, false));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    let Some(lead) = merged.iter().position(|m| m.1 != 0.0) else {
        return TailVerdict {
            relation: TailRelation::Equal,
            certified_from: 1.0,
            rationale: TailRationale::IdenticalDistribution,
        };
    };
    let (v_lead, c_lead, shared) = merged[lead];
    let rationale = match (lead, shared) {
        (0, false) => TailRationale::WorstCaseGap,
        (0, true) => TailRationale::MassAtWorstGap,
        (n, _) => TailRationale::LexicographicLevel(n + 1),
    };
    let rest = &merged[lead + 1..];
    let residual: f64 = rest.iter().map(|m| m.1.abs()).sum();
    // |Σ_{j>lead} c_j e^{-s(v_j - v_lead)}| ≤ M e^{-sΔ} ≤ |c_lead| / 2 once
    // s ≥ ln(2M/|c_lead|) / Δ.
    let certified_from = match rest.iter().find(|m| m.1 != 0.0) {
        Some(next) => {
            let gap = next.0 - v_lead;
            let s_star = (2.0 * residual / c_lead.abs()).ln() / gap;
            (s_star / r).max(1.0)
        }
        None => 1.0,
    };
    TailVerdict {
        relation: if c_lead > 0.0 {
            TailRelation::XAbove
        } else {
            TailRelation::YAbove
        },
        certified_from,
        rationale,
    }
}

/// `CE(X|k·r) - CE(Y|k·r)` sampled on a geometric grid.
struct Scan {
    ks: Vec<f64>,
    gaps: Vec<f64>,
    tols: Vec<f64>,
}

fn ce_gap(x: &Prospect, y: &Prospect, r: RiskAversion, k: f64) -> Result<(f64, f64)> {
    let rk = r.distorted(k)?;
    let cx = certain_equivalent(x, rk)?;
    let cy = certain_equivalent(y, rk)?;
    Ok((cx - cy, TIE_REL_TOL * (1.0 + cx.abs().max(cy.abs()))))
}

fn grid(lo: f64, hi: f64) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let n = ((hi / lo).log10() * GRID_POINTS_PER_DECADE).ceil().max(1.0) as usize;
    let step = (hi / lo).ln() / n as f64;
    let mut ks: Vec<f64> = (0..=n).map(|i| lo * (step * i as f64).exp()).collect();
    ks[n] = hi;
    ks
}

impl Scan {
    fn run(x: &Prospect, y: &Prospect, r: RiskAversion, hi: f64) -> Result<Scan> {
        let ks = grid(1.0, hi);
        let mut gaps = Vec::with_capacity(ks.len());
        let mut tols = Vec::with_capacity(ks.len());
        for &k in &ks {
            let (g, t) = ce_gap(x, y, r, k)?;
            gaps.push(g);
            tols.push(t);
        }
        Ok(Scan { ks, gaps, tols })
    }

    fn class(&self, i: usize) -> i8 {
        if self.gaps[i] > self.tols[i] {
            1
        } else if self.gaps[i] < -self.tols[i] {
            -1
        } else {
            0
        }
    }
}

/// Bisects `[lo, hi]` where `below(lo)` holds and `below(hi)` does not;
/// returns the upper end of the final bracket.
fn bisect(mut lo: f64, mut hi: f64, mut below: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    for _ in 0..200 {
        if hi - lo <= ROOT_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if below(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

struct Analysis {
    threshold: f64,
    crossings: Vec<f64>,
    /// The gap exceeds the tie band at every grid point past `threshold`
    /// (at and past `k = 1` when the threshold is 1).
    strict: bool,
}

/// Threshold, crossings and strictness for `X` over `Y`, given that the tail
/// favours `X` (or is tied).
fn analyze(x: &Prospect, y: &Prospect, r: RiskAversion, tail: &TailVerdict) -> Result<Analysis> {
    let hi = 2.0 * tail.certified_from.max(1.0);
    let scan = Scan::run(x, y, r, hi)?;
    let n = scan.ks.len();
    let gap_below = |k: f64| ce_gap(x, y, r, k).map(|(g, _)| g < 0.0);

    let mut crossings = Vec::new();
    let mut prev: Option<(usize, i8)> = None;
    for i in 0..n {
        let c = scan.class(i);
        if c == 0 {
            continue;
        }
        if let Some((j, pc)) = prev {
            if pc != c {
                let (lo, hi) = (scan.ks[j], scan.ks[i]);
                let root = if pc < 0 {
                    bisect(lo, hi, gap_below)?
                } else {
                    bisect(lo, hi, |k| gap_below(k).map(|b| !b))?
                };
                crossings.push(root);
            }
        }
        prev = Some((i, c));
    }

    let last_negative = (0..n).rev().find(|&i| scan.class(i) < 0);
    let threshold = match last_negative {
        None => 1.0,
        Some(i) if i + 1 == n => scan.ks[i],
        Some(i) => match crossings.last() {
            Some(&c) if c > scan.ks[i] => c,
            _ => bisect(scan.ks[i], scan.ks[i + 1], gap_below)?,
        },
    };
    let strict = tail.relation != TailRelation::Equal
        && (0..n)
            .filter(|&i| scan.ks[i] > threshold || threshold == 1.0)
            .all(|i| scan.class(i) > 0);
    Ok(Analysis {
        threshold,
        crossings,
        strict,
    })
}

/// Smallest `K ≥ 1` with `CE(X|k·r) ≥ CE(Y|k·r)` for all `k ≥ K`, or `None`
/// when the tail strictly favours `Y`.
pub fn find_threshold(x: &Prospect, y: &Prospect, r: RiskAversion) -> Result<Option<f64>> {
    let tail = tail_order(x, y, r)?;
    match tail.relation {
        TailRelation::YAbove => Ok(None),
        TailRelation::Equal => Ok(Some(1.0)),
        TailRelation::XAbove => Ok(Some(analyze(x, y, r, &tail)?.threshold)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    XStrictlyDominates,
    XDominates,
    YStrictlyDominates,
    YDominates,
    XMoreFlexible,
    XStrictlyMoreFlexible,
    YMoreFlexible,
    YStrictlyMoreFlexible,
    EquallyFlexible,
    Incomparable,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::XStrictlyDominates => "X_strictly_dominates",
            Classification::XDominates => "X_dominates",
            Classification::YStrictlyDominates => "Y_strictly_dominates",
            Classification::YDominates => "Y_dominates",
            Classification::XMoreFlexible => "X_more_flexible",
            Classification::XStrictlyMoreFlexible => "X_strictly_more_flexible",
            Classification::YMoreFlexible => "Y_more_flexible",
            Classification::YStrictlyMoreFlexible => "Y_strictly_more_flexible",
            Classification::EquallyFlexible => "equally_flexible",
            Classification::Incomparable => "incomparable",
        }
    }

    pub fn is_dominance(self) -> bool {
        matches!(
            self,
            Classification::XStrictlyDominates
                | Classification::XDominates
                | Classification::YStrictlyDominates
                | Classification::YDominates
        )
    }

    pub fn is_strict(self) -> bool {
        matches!(
            self,
            Classification::XStrictlyDominates
                | Classification::YStrictlyDominates
                | Classification::XStrictlyMoreFlexible
                | Classification::YStrictlyMoreFlexible
        )
    }

    /// `Some(true)` when the verdict favours `X`, `Some(false)` for `Y`.
    pub fn favours_x(self) -> Option<bool> {
        match self {
            Classification::XStrictlyDominates
            | Classification::XDominates
            | Classification::XMoreFlexible
            | Classification::XStrictlyMoreFlexible => Some(true),
            Classification::YStrictlyDominates
            | Classification::YDominates
            | Classification::YMoreFlexible
            | Classification::YStrictlyMoreFlexible => Some(false),
            Classification::EquallyFlexible | Classification::Incomparable => None,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlexibilityVerdict {
    pub classification: Classification,
    pub threshold_k: Option<f64>,
    /// Refined crossing points of the two curves in `[1, 2·certified_from]`.
    pub crossings: Vec<f64>,
    /// Absent only for [`Classification::Incomparable`].
    pub tail: Option<TailVerdict>,
}

/// Classifies the pair `(X, Y)` into the flexibility taxonomy.
pub fn compare(x: &Prospect, y: &Prospect, r: RiskAversion) -> Result<FlexibilityVerdict> {
    let tail = match tail_order(x, y, r) {
        Ok(t) => t,
        Err(Error::Unsupported(_)) => {
            return Ok(FlexibilityVerdict {
                classification: Classification::Incomparable,
                threshold_k: None,
                crossings: Vec::new(),
                tail: None,
            })
        }
        Err(e) => return Err(e),
    };
    let (analysis, x_wins) = match tail.relation {
        TailRelation::Equal => {
            return Ok(FlexibilityVerdict {
                classification: Classification::EquallyFlexible,
                threshold_k: Some(1.0),
                crossings: Vec::new(),
                tail: Some(tail),
            })
        }
        TailRelation::XAbove => (analyze(x, y, r, &tail)?, true),
        TailRelation::YAbove => (analyze(y, x, r, &tail.flipped())?, false),
    };
    use Classification::*;
    let classification = match (x_wins, analysis.threshold == 1.0, analysis.strict) {
        (true, true, true) => XStrictlyDominates,
        (true, true, false) => XDominates,
        (true, false, true) => XStrictlyMoreFlexible,
        (true, false, false) => XMoreFlexible,
        (false, true, true) => YStrictlyDominates,
        (false, true, false) => YDominates,
        (false, false, true) => YStrictlyMoreFlexible,
        (false, false, false) => YMoreFlexible,
    };
    Ok(FlexibilityVerdict {
        classification,
        threshold_k: Some(analysis.threshold),
        crossings: analysis.crossings,
        tail: Some(tail),
    })
}

/// Range of `k` covered by [`upper_envelope`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KRange {
    lo: f64,
    hi: f64,
}

impl KRange {
    /// A range inside the ordering domain `k ≥ 1`.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo < 1.0 {
            return Err(Error::Domain(format!(
                "k range starts at {lo}; orders are defined for k >= 1 (use KRange::unrestricted)"
            )));
        }
        Self::unrestricted(lo, hi)
    }

    /// Any range with `0 < lo < hi`.
    pub fn unrestricted(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
            return Err(Error::invalid(
                "k range",
                format!("{lo}..{hi} must satisfy 0 < lo < hi"),
            ));
        }
        Ok(KRange { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

/// Maximal run of `k` on which `ids` attain the largest certain equivalent.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSegment {
    pub ids: Vec<String>,
    pub k_lo: f64,
    pub k_hi: f64,
}

/// Which prospects are optimal, and where, across `range`. Prospects missing
/// from every segment are optimal for no `k` in the range.
pub fn upper_envelope(
    prospects: &[(String, Prospect)],
    r: RiskAversion,
    range: KRange,
) -> Result<Vec<EnvelopeSegment>> {
    let rv = r.require_positive()?;
    if prospects.is_empty() {
        return Err(Error::invalid("envelope", "no prospects given"));
    }
    let lines: Option<Vec<Line>> = prospects
        .iter()
        .enumerate()
        .map(|(i, (_, p))| Line::of(p, rv, i))
        .collect();
    let segments = match lines {
        Some(lines) => line_envelope(lines, range),
        None => sampled_envelope(prospects, r, range)?,
    };
    Ok(segments
        .into_iter()
        .map(|(members, k_lo, k_hi)| EnvelopeSegment {
            ids: members.iter().map(|&i| prospects[i].0.clone()).collect(),
            k_lo,
            k_hi,
        })
        .collect())
}

/// `CE(k) = intercept + slope·k` for Gaussian and deterministic prospects.
#[derive(Debug, Clone)]
struct Line {
    intercept: f64,
    slope: f64,
    members: Vec<usize>,
}

impl Line {
    fn of(p: &Prospect, r: f64, index: usize) -> Option<Line> {
        let nf = p.normal_form().ok()?;
        let mean = nf
            .discrete
            .is_point_mass()
            .then(|| nf.discrete.min_value())?;
        Some(Line {
            intercept: mean,
            slope: -0.5 * nf.gaussian_variance * r,
            members: vec![index],
        })
    }

    fn at(&self, k: f64) -> f64 {
        self.intercept + self.slope * k
    }

    fn meet(&self, other: &Line) -> f64 {
        (self.intercept - other.intercept) / (other.slope - self.slope)
    }
}

type RawSegment = (Vec<usize>, f64, f64);

fn line_envelope(mut lines: Vec<Line>, range: KRange) -> Vec<RawSegment> {
    lines.sort_by(|a, b| {
        a.slope
            .total_cmp(&b.slope)
            .then(a.intercept.total_cmp(&b.intercept))
    });
    // Identical lines share one hull entry; among parallels only the highest survives.
    let mut distinct: Vec<Line> = Vec::with_capacity(lines.len());
    for line in lines {
        match distinct.last_mut() {
            Some(last) if last.slope == line.slope && last.intercept == line.intercept => {
                last.members.extend(line.members)
            }
            Some(last) if last.slope == line.slope => *last = line,
            _ => distinct.push(line),
        }
    }
    // Monotone hull: with slopes ascending, the middle line is dropped when
    // the outer two meet at or before the point where it would take over.
    let mut hull: Vec<Line> = Vec::with_capacity(distinct.len());
    for line in distinct {
        while hull.len() >= 2 {
            let (l1, l2) = (&hull[hull.len() - 2], &hull[hull.len() - 1]);
            if (l1.intercept - line.intercept) * (l2.slope - l1.slope)
                <= (l1.intercept - l2.intercept) * (line.slope - l1.slope)
            {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(line);
    }
    let mut out: Vec<RawSegment> = Vec::new();
    for (i, line) in hull.iter().enumerate() {
        let start = if i == 0 {
            f64::NEG_INFINITY
        } else {
            hull[i - 1].meet(line)
        };
        let end = hull
            .get(i + 1)
            .map_or(f64::INFINITY, |next| line.meet(next));
        let (a, b) = (start.max(range.lo), end.min(range.hi));
        if b > a {
            let mut members = line.members.clone();
            members.sort_unstable();
            out.push((members, a, b));
        }
    }
    if out.is_empty() {
        // Every hull breakpoint falls outside the range: a single line rules it.
        let best = hull
            .iter()
            .max_by(|a, b| a.at(range.lo).total_cmp(&b.at(range.lo)))
            .expect("nonempty hull");
        let mut members = best.members.clone();
        members.sort_unstable();
        out.push((members, range.lo, range.hi));
    }
    out
}

fn argmax_set(prospects: &[(String, Prospect)], r: RiskAversion, k: f64) -> Result<Vec<usize>> {
    let rk = r.distorted(k)?;
    let ces = prospects
        .iter()
        .map(|(id, p)| {
            certain_equivalent(p, rk).map_err(|e| e.with_context(format_args!("prospect `{id}`")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let best = ces.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_REL_TOL * (1.0 + best.abs());
    Ok((0..ces.len()).filter(|&i| ces[i] >= best - tol).collect())
}

fn sampled_envelope(
    prospects: &[(String, Prospect)],
    r: RiskAversion,
    range: KRange,
) -> Result<Vec<RawSegment>> {
    let ks = grid(range.lo, range.hi);
    let mut sets = Vec::with_capacity(ks.len());
    for &k in &ks {
        sets.push(argmax_set(prospects, r, k)?);
    }
    let mut out: Vec<RawSegment> = Vec::new();
    let mut start = range.lo;
    let mut current = sets[0].clone();
    for i in 1..ks.len() {
        let mut lo = ks[i - 1];
        let hi = ks[i];
        // The argmax set is piecewise constant; walk its changes inside the bracket.
        for _ in 0..prospects.len() + 1 {
            if current == sets[i] {
                break;
            }
            let held = current.clone();
            let t = bisect(lo, hi, |k| argmax_set(prospects, r, k).map(|s| s == held))?;
            out.push((current, start, t));
            start = t;
            lo = t;
            current = if t >= hi {
                sets[i].clone()
            } else {
                argmax_set(prospects, r, t)?
            };
        }
    }
    out.push((current, start, range.hi));

    // Drop slivers left by ties at a breakpoint and merge equal neighbours.
    let mut merged: Vec<RawSegment> = Vec::with_capacity(out.len());
    for seg in out {
        if seg.2 - seg.1 <= 1e-9 * seg.2 && !merged.is_empty() {
            merged.last_mut().unwrap().2 = seg.2;
            continue;
        }
        match merged.last_mut() {
            Some(last) if last.0 == seg.0 => last.2 = seg.2,
            _ => merged.push(seg),
        }
    }
    Ok(merged)
}

/// Sampled check that `upper` lies on or above `lower` at every common
/// `k ≥ 1`, within `tol`. Both curves must share the same `k` grid.
pub fn dominates_on_samples(
    upper: &crate::valuation::FlexibilityCurve,
    lower: &crate::valuation::FlexibilityCurve,
    tol: f64,
) -> Result<bool> {
    if upper.samples.len() != lower.samples.len() || upper.ks().zip(lower.ks()).any(|(a, b)| a != b)
    {
        return Err(Error::invalid(
            "curve comparison",
            "curves use different k grids",
        ));
    }
    Ok(upper
        .samples
        .iter()
        .zip(&lower.samples)
        .filter(|(a, _)| a.k >= 1.0)
        .all(|(a, b)| a.ce >= b.ce - tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: f64) -> RiskAversion {
        RiskAversion::new(v).unwrap()
    }

    fn coin() -> Prospect {
        Prospect::discrete([(0.0, 0.5), (100.0, 0.5)]).unwrap()
    }

    fn gauss(m: f64, v: f64) -> Prospect {
        Prospect::gaussian(m, v).unwrap()
    }

    fn det(v: f64) -> Prospect {
        Prospect::deterministic(v).unwrap()
    }

    /// Independent oracle: plain bisection on k for CE(coin | 0.01 k) = 10.
    fn coin_vs_ten_oracle() -> f64 {
        let ce = |k: f64| {
            let s = 0.01 * k;
            -(0.5 * (1.0 + (-100.0 * s).exp())).ln() / s
        };
        let (mut lo, mut hi) = (6.9, 6.95);
        assert!(ce(lo) > 10.0 && ce(hi) < 10.0);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if ce(mid) > 10.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        hi
    }

    #[test]
    fn tail_mass_at_shared_worst_value() {
        let w = Prospect::discrete([(0.0, 0.4), (50.0, 0.6)]).unwrap();
        let t = tail_order(&coin(), &w, r(0.01)).unwrap();
        assert_eq!(t.relation, TailRelation::YAbove);
        assert_eq!(t.rationale, TailRationale::MassAtWorstGap);
        let rk = r(1.0);
        assert!(certain_equivalent(&w, rk).unwrap() > certain_equivalent(&coin(), rk).unwrap());
        let rk = r(0.01).distorted(2.0 * t.certified_from).unwrap();
        assert!(certain_equivalent(&w, rk).unwrap() > certain_equivalent(&coin(), rk).unwrap());
    }

    #[test]
    fn tail_ignores_renormalisation_rounding() {
        // 0.2 + 0.7 + 0.1 falls an ulp short of 1, so x is rescaled and its
        // mass at 0 is no longer the literal 0.2 that y keeps.
        let x = Prospect::discrete([(0.0, 0.2), (10.0, 0.7), (20.0, 0.1)]).unwrap();
        let y = Prospect::discrete([(0.0, 0.2), (20.0, 0.8)]).unwrap();
        assert_ne!(
            x.as_discrete().unwrap().mass_at_min(),
            y.as_discrete().unwrap().mass_at_min()
        );
        let t = tail_order(&x, &y, r(0.1)).unwrap();
        assert_eq!(t.relation, TailRelation::YAbove);
        assert_eq!(t.rationale, TailRationale::LexicographicLevel(2));
        assert!(t.certified_from < 10.0);
    }

    #[test]
    fn tail_gaussian_slopes() {
        let t = tail_order(&gauss(10.0, 4.0), &gauss(9.0, 1.0), r(1.0)).unwrap();
        assert_eq!(t.relation, TailRelation::YAbove);
        assert_eq!(t.rationale, TailRationale::GaussianSlope);
        let t = tail_order(&gauss(10.0, 4.0), &gauss(9.0, 4.0), r(1.0)).unwrap();
        assert_eq!(t.relation, TailRelation::XAbove);
        let t = tail_order(&gauss(3.0, 4.0), &gauss(3.0, 4.0), r(1.0)).unwrap();
        assert_eq!(t.relation, TailRelation::Equal);
    }

    #[test]
    fn tail_gaussian_vs_bounded() {
        let t = tail_order(&gauss(100.0, 1.0), &coin(), r(0.01)).unwrap();
        assert_eq!(t.relation, TailRelation::YAbove);
        // CE of the Gaussian falls below the coin's worst case 0 at k = 2·100 / (1·0.01).
        assert!((t.certified_from - 20_000.0).abs() < 1e-6);
    }

    #[test]
    fn tail_reflexive_and_worst_case_gap() {
        let t = tail_order(&coin(), &coin(), r(0.1)).unwrap();
        assert_eq!(t.relation, TailRelation::Equal);
        assert_eq!(t.rationale, TailRationale::IdenticalDistribution);
        let higher = Prospect::discrete([(1.0, 0.9), (2.0, 0.1)]).unwrap();
        let t = tail_order(&higher, &coin(), r(0.1)).unwrap();
        assert_eq!(t.relation, TailRelation::XAbove);
        assert_eq!(t.rationale, TailRationale::WorstCaseGap);
    }

    #[test]
    fn tail_lexicographic_level() {
        let a = Prospect::discrete([(0.0, 0.2), (1.0, 0.3), (5.0, 0.5)]).unwrap();
        let b = Prospect::discrete([(0.0, 0.2), (1.0, 0.4), (3.0, 0.4)]).unwrap();
        let t = tail_order(&a, &b, r(1.0)).unwrap();
        assert_eq!(t.relation, TailRelation::XAbove);
        assert_eq!(t.rationale, TailRationale::LexicographicLevel(2));
    }

    #[test]
    fn tail_rejects_risk_neutral() {
        assert!(matches!(
            tail_order(&coin(), &det(1.0), r(0.0)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            compare(&coin(), &det(1.0), r(0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn threshold_coin_vs_ten() {
        let oracle = coin_vs_ten_oracle();
        assert!((oracle - 6.92).abs() < 0.01);
        let k = find_threshold(&det(10.0), &coin(), r(0.01))
            .unwrap()
            .unwrap();
        assert!((k - oracle).abs() < 1e-6 * oracle, "{k} vs {oracle}");
        assert_eq!(find_threshold(&coin(), &det(10.0), r(0.01)).unwrap(), None);
    }

    #[test]
    fn threshold_trivial_cases() {
        let shifted = coin().shift(1.0).unwrap();
        assert_eq!(
            find_threshold(&shifted, &coin(), r(0.01)).unwrap(),
            Some(1.0)
        );
        assert_eq!(
            find_threshold(&coin(), &coin(), r(0.01)).unwrap(),
            Some(1.0)
        );
    }

    #[test]
    fn compare_deterministic_indifference() {
        let ce = certain_equivalent(&coin(), r(0.01)).unwrap();
        let v = compare(&coin(), &det(ce), r(0.01)).unwrap();
        assert_eq!(v.classification, Classification::YDominates);
        assert_eq!(v.threshold_k, Some(1.0));
    }

    #[test]
    fn compare_gaussian_lines_crossing_below_one() {
        let v = compare(&gauss(10.0, 4.0), &gauss(9.0, 1.0), r(1.0)).unwrap();
        assert_eq!(v.classification, Classification::YStrictlyDominates);
        assert!(v.crossings.is_empty());
    }

    #[test]
    fn compare_coin_vs_ten() {
        let v = compare(&coin(), &det(10.0), r(0.01)).unwrap();
        assert_eq!(v.classification, Classification::YStrictlyMoreFlexible);
        let oracle = coin_vs_ten_oracle();
        assert!((v.threshold_k.unwrap() - oracle).abs() < 1e-6 * oracle);
        assert_eq!(v.crossings.len(), 1);
        assert!((v.crossings[0] - oracle).abs() < 1e-6 * oracle);
    }

    #[test]
    fn compare_identical_and_incomparable() {
        let v = compare(&coin(), &coin(), r(0.01)).unwrap();
        assert_eq!(v.classification, Classification::EquallyFlexible);
        let big: Vec<(f64, f64)> = (0..1001).map(|i| (i as f64, 1.0 / 1001.0)).collect();
        let a = Prospect::discrete(big.clone()).unwrap();
        let b = Prospect::discrete(big.iter().map(|&(v, p)| (v * 1e-3 + 5e-5, p))).unwrap();
        let v = compare(&a.add_independent(&b), &coin(), r(0.01)).unwrap();
        assert_eq!(v.classification, Classification::Incomparable);
        assert!(v.tail.is_none());
    }

    #[test]
    fn stigler_gaussian_crossing() {
        let x = gauss(-50.0, 400.0);
        let y = gauss(-55.0, 100.0);
        let analytic = (-50.0 - -55.0) * 2.0 / ((400.0 - 100.0) * 0.01);
        let k = find_threshold(&y, &x, r(0.01)).unwrap().unwrap();
        assert!((k - 10.0 / 3.0).abs() <= 1e-6 * analytic);
    }

    #[test]
    fn envelope_three_lines() {
        let ps = vec![
            ("A".to_string(), gauss(10.0, 2.0)),
            ("B".to_string(), gauss(9.0, 1.9)),
            ("C".to_string(), gauss(8.0, 0.2)),
        ];
        let env = upper_envelope(&ps, r(1.0), KRange::new(1.0, 10.0).unwrap()).unwrap();
        assert_eq!(env.len(), 2);
        assert_eq!(env[0].ids, vec!["A"]);
        assert_eq!(env[1].ids, vec!["C"]);
        assert_eq!(env[0].k_lo, 1.0);
        assert!((env[0].k_hi - 20.0 / 9.0).abs() < 1e-12);
        assert_eq!(env[1].k_hi, 10.0);
    }

    #[test]
    fn envelope_sampled_path_matches_lines() {
        // A tiny discrete perturbation forces the sampled path.
        let ps = vec![
            ("A".to_string(), gauss(10.0, 2.0)),
            ("B".to_string(), gauss(9.0, 1.9)),
            (
                "C".to_string(),
                gauss(8.0, 0.2)
                    .add_independent(&Prospect::discrete([(-1e-9, 0.5), (1e-9, 0.5)]).unwrap()),
            ),
        ];
        let env = upper_envelope(&ps, r(1.0), KRange::new(1.0, 10.0).unwrap()).unwrap();
        assert_eq!(env.len(), 2);
        assert_eq!(env[0].ids, vec!["A"]);
        assert_eq!(env[1].ids, vec!["C"]);
        assert!((env[0].k_hi - 20.0 / 9.0).abs() < 1e-6 * 20.0 / 9.0);
    }

    #[test]
    fn envelope_single_and_ties() {
        let one = vec![("X".to_string(), coin())];
        let env = upper_envelope(&one, r(0.01), KRange::new(1.0, 50.0).unwrap()).unwrap();
        assert_eq!(
            env,
            vec![EnvelopeSegment {
                ids: vec!["X".into()],
                k_lo: 1.0,
                k_hi: 50.0
            }]
        );
        let two = vec![("X".to_string(), coin()), ("Y".to_string(), coin())];
        let env = upper_envelope(&two, r(0.01), KRange::new(1.0, 50.0).unwrap()).unwrap();
        assert_eq!(env.len(), 1);
        assert_eq!(env[0].ids, vec!["X", "Y"]);
        let lines = vec![
            ("P".to_string(), gauss(1.0, 1.0)),
            ("Q".to_string(), gauss(1.0, 1.0)),
        ];
        let env = upper_envelope(&lines, r(0.5), KRange::new(1.0, 5.0).unwrap()).unwrap();
        assert_eq!(env.len(), 1);
        assert_eq!(env[0].ids, vec!["P", "Q"]);
    }

    #[test]
    fn envelope_mixed_crossing() {
        let ps = vec![("X".to_string(), coin()), ("T".to_string(), det(10.0))];
        let env = upper_envelope(&ps, r(0.01), KRange::new(1.0, 100.0).unwrap()).unwrap();
        assert_eq!(env.len(), 2);
        assert_eq!(env[0].ids, vec!["X"]);
        assert_eq!(env[1].ids, vec!["T"]);
        let oracle = coin_vs_ten_oracle();
        assert!((env[0].k_hi - oracle).abs() < 1e-6 * oracle);
    }

    #[test]
    fn envelope_validation() {
        assert!(upper_envelope(&[], r(1.0), KRange::new(1.0, 2.0).unwrap()).is_err());
        assert!(KRange::new(0.5, 2.0).is_err());
        assert!(KRange::unrestricted(0.5, 2.0).is_ok());
        assert!(KRange::new(2.0, 2.0).is_err());
    }
}
