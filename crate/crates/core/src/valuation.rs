//! Exponential utility, certain equivalents and flexibility curves.

use crate::error::{Error, Result};
use crate::prospects::Prospect;

/// Constant absolute risk aversion `r ≥ 0`, in units of 1/money.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RiskAversion(f64);

impl RiskAversion {
    pub fn new(r: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::invalid(
                "risk aversion",
                format!("{r} must be finite and nonnegative"),
            ));
        }
        Ok(RiskAversion(r))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Distorted aversion `k·r`.
    pub fn distorted(self, k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::invalid(
                "distortion k",
                format!("{k} must be positive and finite"),
            ));
        }
        RiskAversion::new(self.0 * k)
    }

    /// Rejects the risk-neutral case, where every flexibility curve is flat.
    pub fn require_positive(self) -> Result<f64> {
        if self.0 > 0.0 {
            Ok(self.0)
        } else {
            Err(Error::Domain(
                "flexibility comparison requires r > 0 (risk-neutral curves are constant in k)"
                    .into(),
            ))
        }
    }
}

/// Normalised exponential utility with `u(0) = 0` and `u(1) = 1`.
pub fn utility_of_money(x: f64, r: RiskAversion) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::invalid("money amount", format!("{x} is not finite")));
    }
    let r = r.value();
    if r == 0.0 {
        return Ok(x);
    }
    let u = (-r * x).exp_m1() / (-r).exp_m1();
    if !u.is_finite() {
        return Err(Error::Range {
            context: format!("utility of {x:e} at r = {r:e}"),
            magnitude: (r * x).abs(),
        });
    }
    Ok(u)
}

/// Inverse of [`utility_of_money`]. For `r > 0` the utility must be below
/// the supremum `1 / (1 - e^{-r})`.
pub fn money_of_utility(u: f64, r: RiskAversion) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::invalid("utility", format!("{u} is not finite")));
    }
    let r = r.value();
    if r == 0.0 {
        return Ok(u);
    }
    let y = u * (-r).exp_m1();
    if y <= -1.0 {
        return Err(Error::invalid(
            "utility",
            format!(
                "{u} is not below the supremum {} at r = {r}",
                -1.0 / (-r).exp_m1()
            ),
        ));
    }
    Ok(-y.ln_1p() / r)
}

/// `CE(X|r) = -ln E[e^{-rX}] / r`, and the mean at `r = 0`.
pub fn certain_equivalent(x: &Prospect, r: RiskAversion) -> Result<f64> {
    if let Some(v) = x.point_value() {
        return Ok(v);
    }
    let r = r.value();
    if r == 0.0 {
        return Ok(x.stats().mean);
    }
    let l = x
        .log_mgf(-r)
        .map_err(|e| e.with_context(format_args!("certain equivalent at r = {r:e}")))?;
    Ok(-l / r)
}

/// `E[X] - r Var[X] / 2`; exact for Gaussian prospects.
pub fn mean_variance_approximation(x: &Prospect, r: RiskAversion) -> f64 {
    let s = x.stats();
    s.mean - 0.5 * r.value() * s.variance
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub k: f64,
    pub ce: f64,
}

/// Sampled map `k ↦ CE(X|k·r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlexibilityCurve {
    pub prospect_id: String,
    pub r: RiskAversion,
    pub samples: Vec<CurvePoint>,
    /// Limit of the curve as `k → ∞`: the worst case, or `-inf`.
    pub tail_limit: f64,
}

impl FlexibilityCurve {
    pub fn ks(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.k)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.ce)
    }
}

pub(crate) fn validate_ks(ks: &[f64]) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::invalid("k grid", "no k values given"));
    }
    for (i, &k) in ks.iter().enumerate() {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::invalid(
                "k grid",
                format!("k[{i}] = {k} is not positive"),
            ));
        }
        if i > 0 && ks[i - 1] >= k {
            return Err(Error::invalid(
                "k grid",
                format!("k[{i}] = {k} does not exceed k[{}] = {}", i - 1, ks[i - 1]),
            ));
        }
    }
    Ok(())
}

/// Samples `CE(X|k·r)` at every `k` in `ks` (strictly ascending, positive).
pub fn flexibility_curve(
    id: impl Into<String>,
    x: &Prospect,
    r: RiskAversion,
    ks: &[f64],
) -> Result<FlexibilityCurve> {
    r.require_positive()?;
    validate_ks(ks)?;
    let id = id.into();
    let samples = ks
        .iter()
        .map(|&k| {
            let ce = certain_equivalent(x, r.distorted(k)?)
                .map_err(|e| e.with_context(format_args!("prospect `{id}`")))?;
            Ok(CurvePoint { k, ce })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FlexibilityCurve {
        prospect_id: id,
        r,
        samples,
        tail_limit: x.stats().worst_case,
    })
}

/// `steps` geometrically spaced points from `lo` to `hi`, both included.
pub fn geometric_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
        return Err(Error::invalid(
            "k grid",
            format!("range {lo}:{hi} must satisfy 0 < lo <= hi"),
        ));
    }
    match steps {
        0 => Err(Error::invalid("k grid", "steps must be at least 1")),
        1 if lo == hi => Ok(vec![lo]),
        1 => Err(Error::invalid("k grid", "a single step needs lo == hi")),
        _ if lo == hi => Err(Error::invalid("k grid", "lo == hi allows only one step")),
        _ => {
            let ratio = (hi / lo).ln() / (steps - 1) as f64;
            let mut ks: Vec<f64> = (0..steps).map(|i| lo * (ratio * i as f64).exp()).collect();
            ks[0] = lo;
            ks[steps - 1] = hi;
            Ok(ks)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(v: f64) -> RiskAversion {
        RiskAversion::new(v).unwrap()
    }

    fn coin() -> Prospect {
        Prospect::discrete([(0.0, 0.5), (100.0, 0.5)]).unwrap()
    }

    /// Expected utility under the normalised utility, inverted back to money.
    fn utility_space_ce(x: &Prospect, ra: RiskAversion) -> f64 {
        let eu: f64 = x
            .as_discrete()
            .unwrap()
            .points()
            .iter()
            .map(|&(v, p)| p * utility_of_money(v, ra).unwrap())
            .sum();
        money_of_utility(eu, ra).unwrap()
    }

    #[test]
    fn utility_anchors() {
        for v in [1e-6, 0.01, 0.5, 1.0, 7.0] {
            assert_eq!(utility_of_money(0.0, r(v)).unwrap(), 0.0);
            assert!((utility_of_money(1.0, r(v)).unwrap() - 1.0).abs() < 1e-15);
        }
        assert_eq!(utility_of_money(-3.5, r(0.0)).unwrap(), -3.5);
        assert!(utility_of_money(-1e4, r(1.0)).is_err());
    }

    #[test]
    fn money_of_utility_inverts() {
        assert_eq!(money_of_utility(0.0, r(0.3)).unwrap(), 0.0);
        assert!((money_of_utility(1.0, r(0.3)).unwrap() - 1.0).abs() < 1e-15);
        let u = utility_of_money(-3.7, r(0.2)).unwrap();
        let x = money_of_utility(u, r(0.2)).unwrap();
        assert!((x + 3.7).abs() <= 1e-10 * 3.7);
        let sup = -1.0 / (-0.2f64).exp_m1();
        assert!(money_of_utility(sup, r(0.2)).is_err());
        assert!(money_of_utility(sup + 1.0, r(0.2)).is_err());
        assert_eq!(money_of_utility(12.0, r(0.0)).unwrap(), 12.0);
    }

    #[test]
    fn certain_equivalent_of_coin() {
        let ce = certain_equivalent(&coin(), r(0.01)).unwrap();
        assert!((ce - 37.988_549_304_172_25).abs() < 1e-10);
        assert!((ce - utility_space_ce(&coin(), r(0.01))).abs() < 1e-9);
    }

    #[test]
    fn certain_equivalent_monte_carlo() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 10_000_000u64;
        let heads = (0..n).filter(|_| rng.gen_bool(0.5)).count() as f64;
        let mean_exp = (heads * (-1.0f64).exp() + (n as f64 - heads)) / n as f64;
        let mc = -mean_exp.ln() / 0.01;
        let ce = certain_equivalent(&coin(), r(0.01)).unwrap();
        assert!((mc - ce).abs() < 0.05, "mc {mc} vs {ce}");
    }

    #[test]
    fn certain_equivalent_gaussian_and_deterministic() {
        let g = Prospect::gaussian(10.0, 4.0).unwrap();
        assert_eq!(certain_equivalent(&g, r(0.5)).unwrap(), 9.0);
        let d = Prospect::deterministic(10.0).unwrap();
        for v in [0.0, 1e-9, 0.3, 1e6] {
            assert_eq!(certain_equivalent(&d, r(v)).unwrap(), 10.0);
        }
        let z = Prospect::gaussian(0.0, 0.0).unwrap();
        assert_eq!(certain_equivalent(&z, r(2.0)).unwrap(), 0.0);
        assert_eq!(certain_equivalent(&coin(), r(0.0)).unwrap(), 50.0);
    }

    #[test]
    fn mean_variance_examples() {
        let g = Prospect::gaussian(10.0, 4.0).unwrap();
        assert_eq!(mean_variance_approximation(&g, r(0.5)), 9.0);
        assert_eq!(mean_variance_approximation(&coin(), r(0.0)), 50.0);
        let approx = mean_variance_approximation(&coin(), r(0.001));
        let exact = certain_equivalent(&coin(), r(0.001)).unwrap();
        assert_eq!(approx, 48.75);
        assert!((exact - 48.750_520_486_374_41).abs() < 1e-9);
        // Fourth cumulant of the coin is -2·50^4; the next term is r³κ4/24.
        assert!((exact - approx).abs() <= 1.1 * 0.001f64.powi(3) * 2.0 * 50f64.powi(4) / 24.0);
    }

    #[test]
    fn gaussian_curve_is_linear() {
        let g = Prospect::gaussian(10.0, 4.0).unwrap();
        let ks = geometric_grid(1.0, 10.0, 10).unwrap();
        let c = flexibility_curve("G", &g, r(0.5), &ks).unwrap();
        for s in &c.samples {
            assert!((s.ce - (10.0 - s.k)).abs() <= 1e-12 * (1.0 + s.ce.abs()));
        }
        assert_eq!(c.tail_limit, f64::NEG_INFINITY);
    }

    #[test]
    fn deterministic_curve_is_flat() {
        let d = Prospect::deterministic(-4.0).unwrap();
        let c = flexibility_curve("d", &d, r(0.2), &[0.5, 1.0, 3.0, 1e6]).unwrap();
        assert!(c.values().all(|v| v == -4.0));
        assert_eq!(c.tail_limit, -4.0);
    }

    #[test]
    fn coin_curve_approaches_worst_case() {
        let c = flexibility_curve("X", &coin(), r(0.01), &[1000.0]).unwrap();
        let ce = c.samples[0].ce;
        assert!((ce - 2f64.ln() / 10.0).abs() < 1e-12);
        assert_eq!(c.tail_limit, 0.0);
    }

    #[test]
    fn curve_rejects_bad_grids() {
        assert!(flexibility_curve("X", &coin(), r(0.01), &[]).is_err());
        assert!(flexibility_curve("X", &coin(), r(0.01), &[2.0, 1.0]).is_err());
        assert!(flexibility_curve("X", &coin(), r(0.01), &[1.0, 1.0]).is_err());
        assert!(flexibility_curve("X", &coin(), r(0.01), &[0.0, 1.0]).is_err());
        assert!(matches!(
            flexibility_curve("X", &coin(), r(0.0), &[1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn grid_includes_endpoints() {
        let g = geometric_grid(1.0, 100.0, 3).unwrap();
        assert_eq!(g[0], 1.0);
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert_eq!(g[2], 100.0);
        assert_eq!(geometric_grid(2.0, 2.0, 1).unwrap(), vec![2.0]);
        assert!(geometric_grid(0.0, 2.0, 4).is_err());
        assert!(geometric_grid(3.0, 2.0, 4).is_err());
        assert!(geometric_grid(1.0, 2.0, 0).is_err());
    }

    #[test]
    fn risk_aversion_validation() {
        assert!(RiskAversion::new(-0.1).is_err());
        assert!(RiskAversion::new(f64::NAN).is_err());
        assert!(r(0.0).require_positive().is_err());
        assert_eq!(r(0.5).distorted(4.0).unwrap().value(), 2.0);
        assert!(r(0.5).distorted(0.0).is_err());
    }

    fn arb_discrete() -> impl Strategy<Value = Prospect> {
        prop::collection::vec((-100.0f64..100.0, 0.05f64..1.0), 2..6).prop_map(|pts| {
            let total: f64 = pts.iter().map(|p| p.1).sum();
            Prospect::discrete(pts.into_iter().map(|(v, p)| (v, p / total))).unwrap()
        })
    }

    proptest! {
        #[test]
        fn round_trip_utility(rx in -5.0f64..5.0, rv in 1e-4f64..2.0) {
            // Past r|x| ~ 30 the utility saturates and the inverse loses all precision.
            let x = rx / rv;
            let u = utility_of_money(x, r(rv)).unwrap();
            let back = money_of_utility(u, r(rv)).unwrap();
            prop_assert!((back - x).abs() <= 1e-10 * x.abs().max(1.0));
        }

        #[test]
        fn ce_matches_utility_space(x in arb_discrete(), rv in prop::sample::select(vec![0.001, 0.01, 0.1])) {
            let ce = certain_equivalent(&x, r(rv)).unwrap();
            prop_assert!((ce - utility_space_ce(&x, r(rv))).abs() <= 1e-8 * (1.0 + ce.abs()));
        }

        #[test]
        fn risk_averse_ce_below_mean(x in arb_discrete(), rv in 1e-4f64..1.0) {
            let ce = certain_equivalent(&x, r(rv)).unwrap();
            prop_assert!(ce <= x.stats().mean + 1e-12);
            if !x.is_deterministic() {
                prop_assert!(ce < x.stats().mean);
            }
        }

        #[test]
        fn gaussian_exactness(mean in -100.0f64..100.0, var in 0.0f64..100.0, log_r in -6.0f64..1.0) {
            let ra = r(10f64.powf(log_r));
            let g = Prospect::gaussian(mean, var).unwrap();
            let ce = certain_equivalent(&g, ra).unwrap();
            prop_assert!((ce - mean_variance_approximation(&g, ra)).abs() <= 1e-12 * (1.0 + ce.abs()));
        }
    }
}
