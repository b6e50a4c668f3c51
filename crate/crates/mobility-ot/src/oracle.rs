//! Independent small-instance and quadrature oracles.
//!
//! These validate the solver and the derived constants before the main build
//! is trusted. They deliberately share no minimization code with the solver:
//! the two-cell problem is solved by dynamic programming over a discretized
//! density state plus golden-section coordinate refinement, not by proximal
//! splitting.

use crate::error::{Error, Result};
use crate::mobility::{ActionDensity, MobilitySpec};

/// Adaptive Simpson quadrature of `f` over `interval` to absolute
/// tolerance `tol`.
///
/// Endpoint evaluations that come out non-finite (integrable endpoint
/// singularities) are nudged a relative 1e-13 into the interval.
pub fn quadrature<F: Fn(f64) -> f64>(f: F, interval: (f64, f64), tol: f64) -> Result<f64> {
    let (a, b) = interval;
    if !(b > a) {
        return Err(Error::InvalidConfig(format!(
            "quadrature interval must be increasing, got ({a}, {b})"
        )));
    }
    let len = b - a;
    let safe = |x: f64| -> f64 {
        let v = f(x);
        if v.is_finite() {
            return v;
        }
        let nudge = if x - a < b - x { 1.0 } else { -1.0 } * len * 1e-13;
        f(x + nudge)
    };
    let fa = safe(a);
    let fb = safe(b);
    let m = 0.5 * (a + b);
    let fm = safe(m);
    let whole = len / 6.0 * (fa + 4.0 * fm + fb);
    let mut worst = 0.0f64;
    let v = simpson_rec(&safe, a, b, fa, fm, fb, whole, tol, 60, &mut worst);
    if worst > tol {
        return Err(Error::QuadratureDidNotConverge { tol, err: worst });
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol || depth == 0 {
        if depth == 0 {
            *worst = worst.max(err.abs() / 15.0);
        }
        return left + right + err / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, worst)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, worst)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// The smallest nontrivial continuity-equation system: two cells, one
/// interior face, so the flux time series is the only unknown.
#[derive(Debug, Clone)]
pub struct TwoCellInstance {
    /// Initial densities (left, right) with respect to Lebesgue.
    pub rho0: (f64, f64),
    /// Final densities (left, right).
    pub rho1: (f64, f64),
    /// Width of each of the two cells.
    pub cell_width: f64,
    pub mobility: MobilitySpec,
    pub p: f64,
    pub time_steps: usize,
}

impl TwoCellInstance {
    fn validate(&self) -> Result<()> {
        let (a, b) = (self.mobility.a(), self.mobility.b());
        for &r in [self.rho0.0, self.rho0.1, self.rho1.0, self.rho1.1].iter() {
            if r < a || r > b {
                return Err(Error::DensityOutOfRange { value: r, a, b });
            }
        }
        let m0 = (self.rho0.0 + self.rho0.1) * self.cell_width;
        let m1 = (self.rho1.0 + self.rho1.1) * self.cell_width;
        if (m0 - m1).abs() > 1e-10 * m0.abs().max(1.0) {
            return Err(Error::MassMismatch { m0, m1 });
        }
        if self.time_steps == 0 || !(self.cell_width > 0.0) {
            return Err(Error::InvalidConfig("need time_steps > 0 and cell_width > 0".into()));
        }
        Ok(())
    }
}

/// Exact value of the two-cell discrete transport problem.
///
/// The state is one-dimensional (the left density; the right one follows by
/// mass conservation), so dynamic programming over a discretized state grid
/// brackets the optimum, and golden-section coordinate descent over the
/// interior time nodes refines it below 1e-6. Returns the distance, i.e. the
/// p-th root of the minimal action on the unit time horizon.
pub fn two_cell_exact(inst: &TwoCellInstance) -> Result<f64> {
    inst.validate()?;
    let phi = ActionDensity::new(inst.p, inst.mobility.clone())?;
    let n = inst.time_steps;
    let dt = 1.0 / n as f64;
    let dx = inst.cell_width;
    let sum = inst.rho0.0 + inst.rho0.1;
    let (a, b) = (inst.mobility.a(), inst.mobility.b());
    // Both cells must stay in [a, b]: left in [max(a, sum-b), min(b, sum-a)].
    let lo = a.max(sum - b);
    let hi = b.min(sum - a);

    // Discrete step cost between consecutive left-cell densities u -> v.
    // The single face flux is w = -dx (v - u) / dt and the face/time-midpoint
    // density interpolation averages all four surrounding node values.
    let step_cost = |u: f64, v: f64| -> f64 {
        let w_norm = dx * (v - u).abs() / dt;
        let rho_hat = 0.25 * (u + v + (sum - u) + (sum - v));
        dt * dx * phi.eval_action_norm(rho_hat, w_norm)
    };

    let mut path = vec![0.0; n + 1];
    path[0] = inst.rho0.0;
    path[n] = inst.rho1.0;

    if n > 1 {
        // Stage 1: dynamic programming over a uniform state grid.
        // value[i] = cheapest cost to sit at level i at the current node.
        let levels = 801usize;
        let level = |i: usize| lo + (hi - lo) * i as f64 / (levels - 1) as f64;
        let mut value: Vec<f64> = (0..levels)
            .map(|i| step_cost(inst.rho0.0, level(i)))
            .collect();
        // parents[k - 2][j]: best predecessor of level j at node k (k >= 2).
        let mut parents: Vec<Vec<usize>> = Vec::with_capacity(n.saturating_sub(2));
        for _node in 2..n {
            let mut next = vec![f64::INFINITY; levels];
            let mut parent = vec![0usize; levels];
            for (j, slot) in next.iter_mut().enumerate() {
                let vj = level(j);
                let mut best = f64::INFINITY;
                let mut arg = 0usize;
                for i in 0..levels {
                    if value[i] >= best {
                        continue;
                    }
                    let c = value[i] + step_cost(level(i), vj);
                    if c < best {
                        best = c;
                        arg = i;
                    }
                }
                *slot = best;
                parent[j] = arg;
            }
            parents.push(parent);
            value = next;
        }
        // Close the path at the fixed terminal state.
        let mut best_total = f64::INFINITY;
        let mut best_last = 0usize;
        for i in 0..levels {
            let c = value[i] + step_cost(level(i), inst.rho1.0);
            if c < best_total {
                best_total = c;
                best_last = i;
            }
        }
        let mut idx = best_last;
        path[n - 1] = level(idx);
        for k in (1..n - 1).rev() {
            idx = parents[k - 1][idx];
            path[k] = level(idx);
        }
    }

    // Stage 2: golden-section coordinate descent over interior nodes.
    let total = |path: &[f64]| -> f64 {
        (0..n).map(|k| step_cost(path[k], path[k + 1])).sum()
    };
    let mut current = total(&path);
    for _sweep in 0..400 {
        for k in 1..n {
            let (left, right) = (path[k - 1], path[k + 1]);
            let (x, _) = golden_min(
                |v| step_cost(left, v) + step_cost(v, right),
                lo,
                hi,
                1e-13 * (hi - lo).max(1.0),
            );
            path[k] = x;
        }
        let new = total(&path);
        if (current - new).abs() <= 1e-14 * current.max(1.0) {
            current = new;
            break;
        }
        current = new;
    }
    Ok(current.powf(1.0 / inst.p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_trivial() {
        let v = quadrature(|_| 1.0, (0.0, 1.0), 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_polynomial() {
        // Integrand of the p=2, d=1 connectivity constant.
        let v = quadrature(|t| 4.0 * (1.0 + t * t), (0.0, 1.0), 1e-12).unwrap();
        assert!((v - 16.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn quadrature_log_endpoint() {
        // (ln t + 1) t integrates to t^2 ln t / 2 + t^2 / 4 -> 1/4 on (0,1).
        let v = quadrature(|t| (t.ln() + 1.0) * t, (0.0, 1.0), 1e-10).unwrap();
        assert!((v - 0.25).abs() < 1e-8, "got {v}");
    }

    fn quad_instance(rho0: (f64, f64), rho1: (f64, f64)) -> TwoCellInstance {
        TwoCellInstance {
            rho0,
            rho1,
            cell_width: 0.5,
            mobility: MobilitySpec::quadratic(0.0, 1.0).unwrap(),
            p: 2.0,
            time_steps: 12,
        }
    }

    #[test]
    fn identical_endpoints_cost_zero() {
        let inst = quad_instance((0.3, 0.5), (0.3, 0.5));
        assert!(two_cell_exact(&inst).unwrap() < 1e-9);
    }

    #[test]
    fn symmetric_swap_time_reversal() {
        let fwd = quad_instance((0.2, 0.6), (0.6, 0.2));
        let rev = quad_instance((0.6, 0.2), (0.2, 0.6));
        let vf = two_cell_exact(&fwd).unwrap();
        let vr = two_cell_exact(&rev).unwrap();
        assert!((vf - vr).abs() < 1e-9, "{vf} vs {vr}");
    }

    #[test]
    fn matches_straight_path_closed_form() {
        // With arithmetic face interpolation the interpolated density is the
        // conserved mean, so the optimal path is linear and the value is
        // dx^((1+p)/p) |delta| / h(mean)^((p-1)/p).
        let inst = quad_instance((0.3, 0.5), (0.5, 0.3));
        let dx: f64 = 0.5;
        let delta: f64 = 0.2;
        let h_mid: f64 = 0.4 * (1.0 - 0.4);
        let expected = dx.powf(1.5) * delta / h_mid.sqrt();
        let v = two_cell_exact(&inst).unwrap();
        assert!((v - expected).abs() < 1e-6, "{v} vs {expected}");
    }

    #[test]
    fn monotone_under_mobility_domination() {
        // h1 >= h2 pointwise implies value1 <= value2.
        let h1 = MobilitySpec::quadratic(0.0, 1.0).unwrap();
        let h2 = h1.scaled(0.5).unwrap();
        let mut inst = quad_instance((0.25, 0.55), (0.45, 0.35));
        inst.mobility = h1;
        let v1 = two_cell_exact(&inst).unwrap();
        inst.mobility = h2;
        let v2 = two_cell_exact(&inst).unwrap();
        assert!(v1 <= v2 + 1e-10, "{v1} vs {v2}");
    }

    #[test]
    fn rejects_unequal_masses() {
        let inst = quad_instance((0.3, 0.5), (0.3, 0.6));
        assert!(matches!(two_cell_exact(&inst), Err(Error::MassMismatch { .. })));
    }
}
