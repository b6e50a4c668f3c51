//! Concave mobility functions on a bounded interval and the action densities
//! they induce.
//!
//! A mobility `h` is a positive concave function on an interval `(a, b)`,
//! extended upper semicontinuously by its endpoint limits and by `-inf`
//! outside `[a, b]`. It weights how easily density moves: `h(r) = r` recovers
//! classical transport, `h(r) = r(1-r)` saturates at both ends.
//!
//! The induced action density of order `p > 1` is
//!
//! ```text
//! phi(r, w) = |w|^p / h(r)^(p-1)     if h(r) > 0,
//!             0                      if h(r) = 0 and w = 0,
//!             +inf                   otherwise,
//! ```
//!
//! with marginal conjugate `phi~(r, z) = h(r) |z|^q` (`1/p + 1/q = 1`).
//! Infinite values are ordinary `f64` infinities, never errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of sample points used when scanning a mobility over its domain
/// (concavity checks, suprema, parabola fitting).
const SCAN_POINTS: usize = 1001;

/// Functional form of a mobility.
#[derive(Debug, Clone, PartialEq)]
pub enum MobilityKind {
    /// `(r - a)(b - r)`: the congestion mobility; `r(1-r)` when `(a,b)=(0,1)`.
    Quadratic,
    /// `(r - a)^alpha (b - r)^beta` with `alpha, beta` in `[0, 1]`.
    Power { alpha: f64, beta: f64 },
    /// `h(r) = r` on `(0, M)`; the classical Benamou-Brenier mobility,
    /// truncated to a bounded interval. Extends to `M` (not 0) at the right
    /// endpoint.
    Linear,
    /// User-supplied values on a uniform grid over `[a, b]`, interpolated
    /// linearly. Concavity is validated at construction.
    Tabulated { values: Vec<f64> },
}

/// A concave mobility function on a bounded interval.
///
/// Immutable after construction; all evaluation is pure.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilitySpec {
    a: f64,
    b: f64,
    scale: f64,
    kind: MobilityKind,
}

impl MobilitySpec {
    /// `scale * (r - a)(b - r)` on `[a, b]`.
    pub fn quadratic(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, 1.0, MobilityKind::Quadratic)
    }

    /// `scale * (r - a)^alpha (b - r)^beta` on `[a, b]`.
    pub fn power(a: f64, b: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidConfig(format!(
                "power mobility needs alpha, beta in [0,1], got ({alpha}, {beta})"
            )));
        }
        Self::new(a, b, 1.0, MobilityKind::Power { alpha, beta })
    }

    /// `h(r) = r` on `(0, m)`.
    pub fn linear(m: f64) -> Result<Self> {
        Self::new(0.0, m, 1.0, MobilityKind::Linear)
    }

    /// Tabulated mobility on a uniform grid over `[a, b]` (endpoints
    /// included). Rejects tables that are not concave or not positive in the
    /// interior.
    pub fn tabulated(a: f64, b: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidConfig(
                "tabulated mobility needs at least 3 samples".into(),
            ));
        }
        let scale = values.iter().cloned().fold(0.0, f64::max).max(1e-300);
        for i in 1..values.len() - 1 {
            let second = values[i - 1] - 2.0 * values[i] + values[i + 1];
            if second > 1e-10 * scale {
                return Err(Error::NotConcave {
                    index: i,
                    violation: second,
                });
            }
            if values[i] <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "tabulated mobility must be positive in the interior, got {} at index {i}",
                    values[i]
                )));
            }
        }
        Self::new(a, b, 1.0, MobilityKind::Tabulated { values })
    }

    fn new(a: f64, b: f64, scale: f64, kind: MobilityKind) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "mobility interval must satisfy a < b, got ({a}, {b})"
            )));
        }
        if matches!(kind, MobilityKind::Linear) && a != 0.0 {
            return Err(Error::InvalidConfig(
                "linear mobility is defined on (0, M)".into(),
            ));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidConfig(format!("scale must be > 0, got {scale}")));
        }
        Ok(Self { a, b, scale, kind })
    }

    /// Same shape, multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.a, self.b, self.scale * factor, self.kind.clone())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn kind(&self) -> &MobilityKind {
        &self.kind
    }

    /// Midpoint of the domain, the normalization point for dual norms.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    /// Evaluate the u.s.c. concave extension of `h`.
    ///
    /// Returns the interpolated/closed-form value on `[a, b]` and
    /// `f64::NEG_INFINITY` outside.
    pub fn eval(&self, r: f64) -> f64 {
        if r < self.a || r > self.b || r.is_nan() {
            return f64::NEG_INFINITY;
        }
        let v = match &self.kind {
            MobilityKind::Quadratic => (r - self.a) * (self.b - r),
            MobilityKind::Power { alpha, beta } => {
                pow_zero_safe(r - self.a, *alpha) * pow_zero_safe(self.b - r, *beta)
            }
            MobilityKind::Linear => r,
            MobilityKind::Tabulated { values } => {
                let n = values.len() - 1;
                let t = (r - self.a) / (self.b - self.a) * n as f64;
                let i = (t.floor() as usize).min(n - 1);
                let frac = t - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        };
        self.scale * v
    }

    /// One-sided derivative of `h` at an interior point (segment slope for
    /// tabulated mobilities). Used by the proximal root-finders.
    pub fn derivative(&self, r: f64) -> f64 {
        debug_assert!(r > self.a && r < self.b);
        let v = match &self.kind {
            MobilityKind::Quadratic => self.a + self.b - 2.0 * r,
            MobilityKind::Power { alpha, beta } => {
                let left = r - self.a;
                let right = self.b - r;
                alpha * pow_zero_safe(left, alpha - 1.0) * pow_zero_safe(right, *beta)
                    - beta * pow_zero_safe(left, *alpha) * pow_zero_safe(right, beta - 1.0)
            }
            MobilityKind::Linear => 1.0,
            MobilityKind::Tabulated { values } => {
                let n = values.len() - 1;
                let dx = (self.b - self.a) / n as f64;
                let t = (r - self.a) / (self.b - self.a) * n as f64;
                let i = (t.floor() as usize).min(n - 1);
                (values[i + 1] - values[i]) / dx
            }
        };
        self.scale * v
    }

    /// Maximum of `h` over `[a, b]`, located by a domain scan that always
    /// includes the midpoint and both endpoints.
    pub fn max_value(&self) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..SCAN_POINTS {
            let r = self.a + (self.b - self.a) * i as f64 / (SCAN_POINTS - 1) as f64;
            best = best.max(self.eval(r));
        }
        best
    }
}

fn pow_zero_safe(base: f64, exp: f64) -> f64 {
    if exp == 0.0 {
        1.0
    } else {
        base.powf(exp)
    }
}

// JSON wire form: {"kind":"quadratic"|"power"|"linear","a":..,"b":..,
// "alpha":..,"beta":..} with optional "scale" and tabulated "values".
#[derive(Serialize, Deserialize)]
struct MobilityJson {
    kind: String,
    a: f64,
    b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

impl Serialize for MobilitySpec {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let (kind, alpha, beta, values) = match &self.kind {
            MobilityKind::Quadratic => ("quadratic", None, None, None),
            MobilityKind::Power { alpha, beta } => ("power", Some(*alpha), Some(*beta), None),
            MobilityKind::Linear => ("linear", None, None, None),
            MobilityKind::Tabulated { values } => ("tabulated", None, None, Some(values.clone())),
        };
        MobilityJson {
            kind: kind.to_string(),
            a: self.a,
            b: self.b,
            alpha,
            beta,
            scale: if self.scale == 1.0 { None } else { Some(self.scale) },
            values,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for MobilitySpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = MobilityJson::deserialize(de)?;
        let spec = match raw.kind.as_str() {
            "quadratic" => MobilitySpec::quadratic(raw.a, raw.b),
            "power" => MobilitySpec::power(
                raw.a,
                raw.b,
                raw.alpha.unwrap_or(1.0),
                raw.beta.unwrap_or(1.0),
            ),
            "linear" => MobilitySpec::linear(raw.b),
            "tabulated" => MobilitySpec::tabulated(
                raw.a,
                raw.b,
                raw.values
                    .ok_or_else(|| serde::de::Error::custom("tabulated mobility needs values"))?,
            ),
            other => {
                return Err(serde::de::Error::custom(format!(
                    "unknown mobility kind {other:?}"
                )))
            }
        }
        .map_err(serde::de::Error::custom)?;
        match raw.scale {
            Some(s) => spec.scaled(s).map_err(serde::de::Error::custom),
            None => Ok(spec),
        }
    }
}

/// The action density `phi_h` of order `p` built from a mobility, together
/// with its marginal conjugate and dual norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDensity {
    p: f64,
    q: f64,
    mobility: MobilitySpec,
}

impl ActionDensity {
    pub fn new(p: f64, mobility: MobilitySpec) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidConfig(format!("need p > 1, got {p}")));
        }
        Ok(Self {
            p,
            q: p / (p - 1.0),
            mobility,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Conjugate exponent `q = p / (p - 1)`.
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn mobility(&self) -> &MobilitySpec {
        &self.mobility
    }

    /// `phi(r, w)` for a momentum vector `w`.
    pub fn eval_action(&self, rho: f64, w: &[f64]) -> f64 {
        self.eval_action_norm(rho, euclidean_norm(w))
    }

    /// `phi(r, w)` given `|w|` directly; the hot path used by solvers.
    pub fn eval_action_norm(&self, rho: f64, w_norm: f64) -> f64 {
        let h = self.mobility.eval(rho);
        if h == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        if h > 0.0 {
            w_norm.powf(self.p) / h.powf(self.p - 1.0)
        } else if w_norm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// Marginal conjugate `phi~(r, z) = h(r) |z|^q`, extended by the
    /// concave-convex lower extension (`-inf` off the domain of `h`).
    pub fn eval_conjugate(&self, rho: f64, z: &[f64]) -> f64 {
        let h = self.mobility.eval(rho);
        if h == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let n = euclidean_norm(z);
        if n == 0.0 {
            0.0
        } else {
            h * n.powf(self.q)
        }
    }

    /// Recession function of `phi`: `0` at the origin, `+inf` elsewhere.
    ///
    /// This is the bounded-interval convention; it is what forces measures of
    /// finite action to be absolutely continuous with density in `[a, b]`.
    pub fn eval_recession(&self, rho: f64, w: &[f64]) -> f64 {
        if rho == 0.0 && w.iter().all(|&c| c == 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// The dual pair of norms `(|w|_(phi,r), |z|_(phi,r)*)`
    /// = `(phi(r,w)^(1/p), phi~(r,z)^(1/q))`.
    ///
    /// Rejects `r` outside the open interval `(a, b)` where the pair stops
    /// being a pair of genuine norms.
    pub fn phi_norms(&self, rho: f64, w: &[f64], z: &[f64]) -> Result<(f64, f64)> {
        if !(rho > self.mobility.a() && rho < self.mobility.b()) {
            return Err(Error::DensityOutOfRange {
                value: rho,
                a: self.mobility.a(),
                b: self.mobility.b(),
            });
        }
        let primal = self.eval_action(rho, w).powf(1.0 / self.p);
        let dual = self.eval_conjugate(rho, z).powf(1.0 / self.q);
        Ok((primal, dual))
    }

    /// The uniform concave bound `hbar = h / h(rbar)` with `rbar = (a+b)/2`,
    /// normalized so the dual-norm inequality
    /// `phi~(r, z) <= hbar(r) |z|_*^q` holds with equality in `r = rbar`.
    pub fn upper_concave_bound(&self) -> UpperConcaveBound {
        let h_mid = self.mobility.eval(self.mobility.midpoint());
        let mobility = self
            .mobility
            .scaled(1.0 / h_mid)
            .expect("midpoint value of an admissible mobility is positive");
        let h_max = mobility.max_value();
        UpperConcaveBound { mobility, h_max }
    }
}

/// Result of [`ActionDensity::upper_concave_bound`]: the normalized mobility
/// and its (finite) supremum.
#[derive(Debug, Clone)]
pub struct UpperConcaveBound {
    pub mobility: MobilitySpec,
    pub h_max: f64,
}

/// Fit a parabola `A r (M/B - B r)` below a mobility on `(0, M)`.
///
/// Returns `(A, B)` with `B = 1`, `A` the largest coefficient passing a
/// 1001-point grid verification. Fails when no positive coefficient fits,
/// which signals a mobility that is not admissible on `(0, M)`.
pub fn parabola_minorant(h: &MobilitySpec) -> Result<(f64, f64)> {
    if h.a() != 0.0 {
        return Err(Error::InvalidConfig(
            "parabola minorant expects a mobility on (0, M)".into(),
        ));
    }
    let m = h.b();
    let mut a_coeff = f64::INFINITY;
    for i in 1..SCAN_POINTS - 1 {
        let r = m * i as f64 / (SCAN_POINTS - 1) as f64;
        let parabola = r * (m - r);
        let ratio = h.eval(r) / parabola;
        a_coeff = a_coeff.min(ratio);
    }
    if !a_coeff.is_finite() || a_coeff <= 0.0 {
        return Err(Error::NoParabolaMinorant);
    }
    // Grid verification, endpoints included.
    for i in 0..SCAN_POINTS {
        let r = m * i as f64 / (SCAN_POINTS - 1) as f64;
        let parabola = a_coeff * r * (m - r);
        let hv = h.eval(r);
        if parabola > hv + 1e-9 * (1.0 + hv.abs()) {
            return Err(Error::NoParabolaMinorant);
        }
    }
    Ok((a_coeff, 1.0))
}

pub(crate) fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn quadratic01() -> ActionDensity {
        ActionDensity::new(2.0, MobilitySpec::quadratic(0.0, 1.0).unwrap()).unwrap()
    }

    /// Grid-search oracle for the partial Legendre transform:
    /// max over z of <z,w> - (1/q) phi~(rho, z), on a log-radial x angular
    /// grid refined three times around the best point. Independent of
    /// `eval_action`.
    fn conjugate_by_search(phi: &ActionDensity, rho: f64, w: &[f64; 2]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut best_lr = 0.0f64;
        let mut best_th = 0.0f64;
        let (mut lr_lo, mut lr_hi) = (-3.0f64, 3.0f64);
        let (mut th_lo, mut th_hi) = (0.0f64, 2.0 * std::f64::consts::PI);
        for _round in 0..3 {
            for i in 0..=96 {
                let lr = lr_lo + (lr_hi - lr_lo) * i as f64 / 96.0;
                let r = 10f64.powf(lr);
                for j in 0..=256 {
                    let th = th_lo + (th_hi - th_lo) * j as f64 / 256.0;
                    let z = [r * th.cos(), r * th.sin()];
                    let val = z[0] * w[0] + z[1] * w[1]
                        - phi.eval_conjugate(rho, &z) / phi.q();
                    if val > best {
                        best = val;
                        best_lr = lr;
                        best_th = th;
                    }
                }
            }
            let lr_span = (lr_hi - lr_lo) / 96.0 * 2.0;
            let th_span = (th_hi - th_lo) / 256.0 * 2.0;
            lr_lo = best_lr - lr_span;
            lr_hi = best_lr + lr_span;
            th_lo = best_th - th_span;
            th_hi = best_th + th_span;
        }
        best
    }

    #[test]
    fn action_closed_forms() {
        let phi = quadratic01();
        // h(1/2) = 1/4, p = 2.
        assert!((phi.eval_action(0.5, &[1.0]) - 4.0).abs() < 1e-12);
        assert_eq!(phi.eval_action(0.5, &[0.0]), 0.0);
        assert_eq!(phi.eval_action(1.0, &[0.1]), f64::INFINITY);
        assert_eq!(phi.eval_action(1.0, &[0.0]), 0.0);
        assert_eq!(phi.eval_action(1.5, &[0.0]), f64::INFINITY);
    }

    #[test]
    fn conjugate_closed_forms() {
        let phi = quadratic01();
        assert!((phi.eval_conjugate(0.5, &[2.0, 0.0]) - 1.0).abs() < 1e-12);
        assert_eq!(phi.eval_conjugate(0.5, &[0.0, 0.0]), 0.0);
        assert_eq!(phi.eval_conjugate(-0.2, &[1.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn recession_values() {
        let phi = quadratic01();
        assert_eq!(phi.eval_recession(0.0, &[0.0]), 0.0);
        assert_eq!(phi.eval_recession(0.1, &[0.0]), f64::INFINITY);
        assert_eq!(phi.eval_recession(0.0, &[0.0, 1.0]), f64::INFINITY);
    }

    #[test]
    fn duality_spot_check() {
        // (1/p) phi(rho, w) must equal the grid-search supremum of
        // <z,w> - (1/q) phi~(rho, z).
        let phi = quadratic01();
        let rho = 0.3;
        let w = [1.0, 1.0];
        let direct = phi.eval_action(rho, &w) / phi.p();
        let searched = conjugate_by_search(&phi, rho, &w);
        assert!(
            (direct - searched).abs() < 1e-6,
            "direct {direct} vs searched {searched}"
        );
        assert!(searched <= direct + 1e-12, "Fenchel-Young violated");
    }

    #[test]
    fn norms_dual_pair() {
        let phi = quadratic01();
        let (nw, nz) = phi.phi_norms(0.5, &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((nw - 2.0).abs() < 1e-12);
        assert!((nz - 0.5).abs() < 1e-12);
        assert!(nw * nz >= 1.0 - 1e-12); // equality case of Hoelder

        let (nw0, _) = phi.phi_norms(0.5, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(nw0, 0.0);

        assert!(phi.phi_norms(0.0, &[1.0], &[1.0]).is_err());
        assert!(phi.phi_norms(1.0, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn norms_hoelder_random() {
        let phi = quadratic01();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let rho = rng.gen_range(0.05..0.95);
            let w = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let z = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let (nw, nz) = phi.phi_norms(rho, &w, &z).unwrap();
            let pairing = w[0] * z[0] + w[1] * z[1];
            assert!(pairing <= nw * nz + 1e-10, "Hoelder failed: {pairing} > {nw}*{nz}");
        }
    }

    #[test]
    fn norm_duality_by_supremum() {
        // sup_z <w,z>/|z|_* over sampled directions reproduces |w| within 1e-3.
        let phi = quadratic01();
        let rho = 0.3;
        let w = [0.7, -1.2];
        let (nw, _) = phi.phi_norms(rho, &w, &[1.0, 0.0]).unwrap();
        let mut sup = 0.0f64;
        for j in 0..4096 {
            let th = 2.0 * std::f64::consts::PI * j as f64 / 4096.0;
            let z = [th.cos(), th.sin()];
            let (_, nz) = phi.phi_norms(rho, &w, &z).unwrap();
            sup = sup.max((w[0] * z[0] + w[1] * z[1]) / nz);
        }
        assert!((sup - nw).abs() < 1e-3 * nw.max(1.0), "sup {sup} vs norm {nw}");
    }

    #[test]
    fn upper_bound_quadratic() {
        let phi = quadratic01();
        let bound = phi.upper_concave_bound();
        // hbar = 4 r (1 - r), max 1 at the midpoint.
        assert!((bound.mobility.eval(0.5) - 1.0).abs() < 1e-12);
        assert!((bound.mobility.eval(0.25) - 0.75).abs() < 1e-12);
        assert!((bound.h_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn upper_bound_midpoint_is_one_for_builtins() {
        for mob in [
            MobilitySpec::quadratic(0.0, 1.0).unwrap(),
            MobilitySpec::quadratic(-1.0, 1.0).unwrap(),
            MobilitySpec::power(0.0, 1.0, 0.5, 0.5).unwrap(),
            MobilitySpec::linear(2.0).unwrap(),
        ] {
            let phi = ActionDensity::new(2.0, mob).unwrap();
            let bound = phi.upper_concave_bound();
            let mid = bound.mobility.midpoint();
            assert!((bound.mobility.eval(mid) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn upper_bound_norm_inequalities_sampled() {
        // Both inequalities of the uniform bound, on random samples:
        //   phi~(r, z) <= hbar(r) |z|_*^q
        //   |w|        <= hbar(r)^(1/q) phi(r, w)^(1/p)
        let phi = quadratic01();
        let bound = phi.upper_concave_bound();
        let rbar = phi.mobility().midpoint();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let rho = rng.gen_range(0.02..0.98);
            let z = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let w = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let (norm_w, norm_z_star) = phi.phi_norms(rbar, &w, &z).unwrap();
            let hbar = bound.mobility.eval(rho);
            assert!(
                phi.eval_conjugate(rho, &z) <= hbar * norm_z_star.powf(phi.q()) + 1e-10,
                "conjugate bound failed at rho={rho}"
            );
            let rhs = hbar.powf(1.0 / phi.q()) * phi.eval_action(rho, &w).powf(1.0 / phi.p());
            assert!(norm_w <= rhs + 1e-10, "primal bound failed at rho={rho}");
        }
    }

    #[test]
    fn phile_bound_with_own_mobility_is_equality() {
        // phi built from h equals phi_{hbar * h(rbar)} pointwise, and is
        // dominated by phi_g for any concave g >= h.
        let phi = quadratic01();
        let bound = phi.upper_concave_bound();
        let restored = bound
            .mobility
            .scaled(phi.mobility().eval(phi.mobility().midpoint()))
            .unwrap();
        let phi_restored = ActionDensity::new(2.0, restored).unwrap();
        let g = MobilitySpec::quadratic(0.0, 1.0).unwrap().scaled(1.5).unwrap();
        let phi_g = ActionDensity::new(2.0, g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let rho = rng.gen_range(0.02..0.98);
            let w = [rng.gen_range(-2.0..2.0)];
            let own = phi.eval_action(rho, &w);
            assert!((own - phi_restored.eval_action(rho, &w)).abs() <= 1e-10 * own.max(1.0));
            assert!(phi_g.eval_action(rho, &w) <= own + 1e-12);
        }
    }

    #[test]
    fn parabola_fits() {
        let quad = MobilitySpec::quadratic(0.0, 1.0).unwrap();
        let (a, b) = parabola_minorant(&quad).unwrap();
        assert!((a - 1.0).abs() < 1e-9);
        assert_eq!(b, 1.0);

        // Piecewise-linear concave hat.
        let n = 200;
        let hat: Vec<f64> = (0..=n)
            .map(|i| {
                let r = i as f64 / n as f64;
                r.min(1.0 - r).max(0.0)
            })
            .collect();
        let hat = MobilitySpec::tabulated(0.0, 1.0, hat).unwrap();
        let (a, _) = parabola_minorant(&hat).unwrap();
        assert!(a > 0.0);
        for i in 0..=1000 {
            let r = i as f64 / 1000.0;
            assert!(a * r * (1.0 - r) <= hat.eval(r) + 1e-9);
        }

        // sqrt(r(1-r)).
        let sq: Vec<f64> = (0..=n)
            .map(|i| {
                let r = i as f64 / n as f64;
                (r * (1.0 - r)).sqrt()
            })
            .collect();
        let sq = MobilitySpec::tabulated(0.0, 1.0, sq).unwrap();
        let (a, _) = parabola_minorant(&sq).unwrap();
        assert!(a > 0.0);
        for i in 0..=1000 {
            let r = i as f64 / 1000.0;
            assert!(a * r * (1.0 - r) <= sq.eval(r) + 1e-9);
        }
    }

    #[test]
    fn tabulated_rejects_convex_table() {
        let bad = vec![1.0, 0.2, 1.0];
        assert!(matches!(
            MobilitySpec::tabulated(0.0, 1.0, bad),
            Err(Error::NotConcave { .. })
        ));
    }

    #[test]
    fn builtin_concavity_sampled() {
        for mob in [
            MobilitySpec::quadratic(-1.0, 1.0).unwrap(),
            MobilitySpec::power(0.0, 2.0, 0.7, 0.4).unwrap(),
            MobilitySpec::linear(3.0).unwrap(),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..200 {
                let r1 = rng.gen_range(mob.a()..mob.b());
                let r2 = rng.gen_range(mob.a()..mob.b());
                let lambda: f64 = rng.gen_range(0.0..1.0);
                let mid = lambda * r1 + (1.0 - lambda) * r2;
                let lhs = mob.eval(mid);
                let rhs = lambda * mob.eval(r1) + (1.0 - lambda) * mob.eval(r2);
                assert!(lhs >= rhs - 1e-10, "concavity failed for {mob:?}");
            }
        }
    }

    #[test]
    fn mobility_json_round_trip() {
        let spec = MobilitySpec::power(0.0, 1.0, 0.5, 0.25).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"power\""));
        assert!(text.contains("\"alpha\":0.5"));
        let back: MobilitySpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);

        let parsed: MobilitySpec =
            serde_json::from_str(r#"{"kind":"quadratic","a":0.0,"b":1.0}"#).unwrap();
        assert!((parsed.eval(0.5) - 0.25).abs() < 1e-15);
    }

    mod properties {
        use super::quadratic01;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn action_p_homogeneity(
                rho in 0.01f64..0.99,
                wx in -5.0f64..5.0,
                wy in -5.0f64..5.0,
                lambda in -4.0f64..4.0,
            ) {
                prop_assume!(lambda.abs() > 1e-6);
                let phi = quadratic01();
                let scaled = phi.eval_action(rho, &[lambda * wx, lambda * wy]);
                let direct = lambda.abs().powf(phi.p()) * phi.eval_action(rho, &[wx, wy]);
                prop_assert!((scaled - direct).abs() <= 1e-12 * direct.abs().max(1e-300));
            }

            #[test]
            fn conjugate_q_homogeneity(
                rho in 0.01f64..0.99,
                zx in -5.0f64..5.0,
                lambda in 0.01f64..4.0,
            ) {
                let phi = quadratic01();
                let scaled = phi.eval_conjugate(rho, &[lambda * zx]);
                let direct = lambda.powf(phi.q()) * phi.eval_conjugate(rho, &[zx]);
                prop_assert!((scaled - direct).abs() <= 1e-12 * direct.abs().max(1e-300));
            }

            #[test]
            fn action_joint_convexity_sampled(
                r1 in 0.01f64..0.99,
                r2 in 0.01f64..0.99,
                w1 in -3.0f64..3.0,
                w2 in -3.0f64..3.0,
            ) {
                let phi = quadratic01();
                let mid = phi.eval_action(0.5 * (r1 + r2), &[0.5 * (w1 + w2)]);
                let avg = 0.5 * phi.eval_action(r1, &[w1]) + 0.5 * phi.eval_action(r2, &[w2]);
                prop_assert!(mid <= avg + 1e-10 * avg.max(1.0));
            }
        }
    }
}
