//! Discrete continuity-equation curves and the action functional.
//!
//! A [`TransportCurve`] stores densities at time nodes and face momenta at
//! time midpoints (staggered in both space and time). With the zero-flux
//! finite-volume divergence
//!
//! ```text
//! div_h(w)_i = sum_axes (ghat_f+ w_f+ - ghat_f- w_f-) / (gamma_i dx_axis)
//! ```
//!
//! the discrete continuity equation `(rho^{k+1} - rho^k)/dt + div_h w = 0`
//! telescopes exactly, so zero-flux curves conserve the signed total mass to
//! machine precision.
//!
//! The action of a curve is the time-step sum of `phi(rho_hat, w)` over
//! faces, with `rho_hat` the arithmetic mean of the four surrounding node
//! densities and the face weight the mean of the two adjacent cell weights.
//! This makes the action jointly convex in the stored unknowns.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::{GridMeasure, ReferenceMeasure, MAX_DIM};
use crate::mobility::ActionDensity;
use crate::oracle::quadrature;

/// A discrete solution candidate of the continuity equation.
#[derive(Debug, Clone)]
pub struct TransportCurve {
    reference: Arc<ReferenceMeasure>,
    horizon: f64,
    /// `steps + 1` density frames at time nodes.
    densities: Vec<Vec<f64>>,
    /// `steps` momentum fields at time midpoints: `momenta[k][axis][face]`.
    momenta: Vec<Vec<Vec<f64>>>,
}

impl TransportCurve {
    pub fn new(
        reference: Arc<ReferenceMeasure>,
        horizon: f64,
        densities: Vec<Vec<f64>>,
        momenta: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if !(horizon > 0.0) || densities.len() < 2 || momenta.len() + 1 != densities.len() {
            return Err(Error::InvalidConfig(
                "curve needs horizon > 0 and one momentum field per step".into(),
            ));
        }
        let grid = reference.grid();
        for frame in &densities {
            if frame.len() != grid.num_cells() {
                return Err(Error::GridMismatch);
            }
        }
        for step in &momenta {
            if step.len() != grid.dim() {
                return Err(Error::GridMismatch);
            }
            for (axis, field) in step.iter().enumerate() {
                if field.len() != grid.face_count(axis) {
                    return Err(Error::GridMismatch);
                }
            }
        }
        Ok(Self {
            reference,
            horizon,
            densities,
            momenta,
        })
    }

    /// The constant-in-time curve with zero momenta.
    pub fn static_curve(mu: &GridMeasure, horizon: f64, steps: usize) -> Result<Self> {
        let reference = Arc::clone(mu.reference());
        let grid = reference.grid();
        let zero: Vec<Vec<f64>> = (0..grid.dim())
            .map(|axis| vec![0.0; grid.face_count(axis)])
            .collect();
        Self::new(
            reference,
            horizon,
            vec![mu.density().to_vec(); steps + 1],
            vec![zero; steps],
        )
    }

    /// 1D only: build the unique zero-flux momentum field turning a density
    /// path into an exact discrete solution. Fails when the frame masses
    /// disagree (no such field exists).
    pub fn from_density_path_1d(
        reference: Arc<ReferenceMeasure>,
        horizon: f64,
        densities: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let grid = reference.grid();
        if grid.dim() != 1 {
            return Err(Error::DimensionUnsupported("from_density_path_1d", 1));
        }
        let steps = densities.len().checked_sub(1).unwrap_or(0);
        if steps == 0 {
            return Err(Error::InvalidConfig("need at least two frames".into()));
        }
        let n = grid.num_cells();
        let dx = grid.spacing(0);
        let dt = horizon / steps as f64;
        let w = reference.weights();
        let mass = |frame: &[f64]| -> f64 { frame.iter().zip(w).map(|(r, g)| r * g).sum() };
        let m0 = mass(&densities[0]);
        let mut momenta = Vec::with_capacity(steps);
        for k in 0..steps {
            let mk = mass(&densities[k + 1]);
            if (mk - m0).abs() > 1e-10 * m0.abs().max(1.0) {
                return Err(Error::MassMismatch { m0, m1: mk });
            }
            let mut field = vec![0.0; n - 1];
            let mut flux = 0.0; // gamma-weighted flux through the previous face
            for i in 0..n - 1 {
                flux -= w[i] * dx * (densities[k + 1][i] - densities[k][i]) / dt;
                let ghat = 0.5 * (w[i] + w[i + 1]);
                field[i] = flux / ghat;
            }
            momenta.push(vec![field]);
        }
        Self::new(reference, horizon, densities, momenta)
    }

    pub fn reference(&self) -> &Arc<ReferenceMeasure> {
        &self.reference
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.momenta.len()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    pub fn densities(&self) -> &[Vec<f64>] {
        &self.densities
    }

    pub fn momenta(&self) -> &[Vec<Vec<f64>>] {
        &self.momenta
    }

    /// The measure at time node `k`.
    pub fn node_measure(&self, k: usize) -> GridMeasure {
        GridMeasure::new(Arc::clone(&self.reference), self.densities[k].clone())
            .expect("curve frames are valid densities")
    }
}

/// Apply the zero-flux finite-volume divergence of a momentum field,
/// accumulating into `out` (which is first zeroed).
pub(crate) fn divergence(reference: &ReferenceMeasure, step: &[Vec<f64>], out: &mut [f64]) {
    let grid = reference.grid();
    let gamma = reference.weights();
    out.iter_mut().for_each(|v| *v = 0.0);
    for (axis, field) in step.iter().enumerate() {
        let dx = grid.spacing(axis);
        for (f, &wf) in field.iter().enumerate() {
            let (lo, hi) = grid.face_cells(axis, f);
            let ghat = 0.5 * (gamma[lo] + gamma[hi]);
            let flux = ghat * wf;
            if gamma[lo] > 0.0 {
                out[lo] += flux / (gamma[lo] * dx);
            }
            if gamma[hi] > 0.0 {
                out[hi] -= flux / (gamma[hi] * dx);
            }
        }
    }
}

/// Maximum continuity-equation defect over all cells and steps, normalized by
/// the largest density magnitude.
pub fn ce_residual(curve: &TransportCurve) -> f64 {
    let dt = curve.dt();
    let n = curve.reference.grid().num_cells();
    let mut div = vec![0.0; n];
    let mut worst = 0.0f64;
    let mut rho_max = 0.0f64;
    for frame in &curve.densities {
        for &v in frame {
            rho_max = rho_max.max(v.abs());
        }
    }
    for k in 0..curve.steps() {
        divergence(&curve.reference, &curve.momenta[k], &mut div);
        for i in 0..n {
            let defect = (curve.densities[k + 1][i] - curve.densities[k][i]) / dt + div[i];
            worst = worst.max(defect.abs());
        }
    }
    worst / rho_max.max(1e-300)
}

/// Action contribution of each time step: `dt * sum_faces phi(rho_hat, w) ghat`.
pub fn per_step_action(curve: &TransportCurve, phi: &ActionDensity) -> Vec<f64> {
    let grid = curve.reference.grid();
    let gamma = curve.reference.weights();
    let dt = curve.dt();
    (0..curve.steps())
        .map(|k| {
            let mut acc = 0.0;
            for (axis, field) in curve.momenta[k].iter().enumerate() {
                for (f, &wf) in field.iter().enumerate() {
                    let (lo, hi) = grid.face_cells(axis, f);
                    let ghat = 0.5 * (gamma[lo] + gamma[hi]);
                    if ghat == 0.0 {
                        continue;
                    }
                    let rho_hat = 0.25
                        * (curve.densities[k][lo]
                            + curve.densities[k][hi]
                            + curve.densities[k + 1][lo]
                            + curve.densities[k + 1][hi]);
                    let value = phi.eval_action_norm(rho_hat, wf.abs());
                    if value == f64::INFINITY {
                        return f64::INFINITY;
                    }
                    acc += value * ghat;
                }
            }
            dt * acc
        })
        .collect()
}

/// Total action of the curve; `+inf` as soon as any interpolated density
/// leaves the mobility domain with nonzero flux.
pub fn action_integral(curve: &TransportCurve, phi: &ActionDensity) -> f64 {
    per_step_action(curve, phi).iter().sum()
}

/// Signed total mass at every time node.
pub fn mass_trace(curve: &TransportCurve) -> Vec<f64> {
    let gamma = curve.reference.weights();
    curve
        .densities
        .iter()
        .map(|frame| frame.iter().zip(gamma).map(|(r, g)| r * g).sum())
        .collect()
}

/// Concatenate two curves sharing grid, reference, time step and the joint
/// density frame.
pub fn glue(c1: &TransportCurve, c2: &TransportCurve) -> Result<TransportCurve> {
    if c1.reference != c2.reference {
        return Err(Error::GridMismatch);
    }
    let (dt1, dt2) = (c1.dt(), c2.dt());
    if (dt1 - dt2).abs() > 1e-12 * dt1.max(dt2) {
        return Err(Error::IncompatibleTimeStep { dt1, dt2 });
    }
    let last = c1.densities.last().unwrap();
    let first = &c2.densities[0];
    if last != first {
        return Err(Error::EndpointMismatch);
    }
    let mut densities = c1.densities.clone();
    densities.extend_from_slice(&c2.densities[1..]);
    let mut momenta = c1.momenta.clone();
    momenta.extend_from_slice(&c2.momenta);
    TransportCurve::new(
        Arc::clone(&c1.reference),
        c1.horizon + c2.horizon,
        densities,
        momenta,
    )
}

/// Linear time reparametrization onto `[0, new_t]`: same frames, momenta
/// scaled by `horizon / new_t`.
pub fn time_rescale(curve: &TransportCurve, new_t: f64) -> Result<TransportCurve> {
    if !(new_t > 0.0) {
        return Err(Error::InvalidConfig(format!("new horizon must be > 0, got {new_t}")));
    }
    let factor = curve.horizon / new_t;
    let momenta = curve
        .momenta
        .iter()
        .map(|step| {
            step.iter()
                .map(|field| field.iter().map(|w| w * factor).collect())
                .collect()
        })
        .collect();
    TransportCurve::new(
        Arc::clone(&curve.reference),
        new_t,
        curve.densities.clone(),
        momenta,
    )
}

/// The self-similar dilation `rho_t(x) = e^{-dt} rho_0(e^{-t} x)` with
/// momentum `w_t(x) = x rho_t(x)`, sampled on the grid of `rho0`.
///
/// Returns the curve, the closed-form time exponent `(1-d)p + d` of the
/// momentum p-energy, and whether the action over `[0, inf)` is finite
/// (exponent strictly negative, i.e. `d > q`).
pub fn dilation_curve(
    rho0: &GridMeasure,
    p: f64,
    horizon: f64,
    steps: usize,
) -> Result<(TransportCurve, f64, bool)> {
    if !(p > 1.0) || !(horizon > 0.0) || steps == 0 {
        return Err(Error::InvalidConfig(
            "dilation curve needs p > 1, horizon > 0, steps > 0".into(),
        ));
    }
    let grid = rho0.grid().clone();
    let d = grid.dim();
    if let Some(bbox) = rho0.support_box() {
        let top = horizon.exp();
        for (j, &(lo_s, hi_s)) in bbox.iter().enumerate() {
            let (lo, hi) = grid.bounds()[j];
            if lo_s * top < lo - 1e-12 || hi_s * top > hi + 1e-12 {
                return Err(Error::SupportEscapesGrid);
            }
        }
    }
    let src = rho0.density().to_vec();
    let sample = |t: f64, x: &[f64]| -> f64 {
        let mut y = [0.0f64; MAX_DIM];
        let decay = (-t).exp();
        for j in 0..d {
            y[j] = decay * x[j];
        }
        (-(d as f64) * t).exp() * grid.interpolate(&src, &y[..d])
    };
    let dt = horizon / steps as f64;
    let mut x = [0.0f64; MAX_DIM];
    let mut densities = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let mut frame = vec![0.0; grid.num_cells()];
        for (i, v) in frame.iter_mut().enumerate() {
            grid.center(i, &mut x);
            *v = sample(t, &x[..d]);
        }
        densities.push(frame);
    }
    let mut momenta = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = (k as f64 + 0.5) * dt;
        let step: Vec<Vec<f64>> = (0..d)
            .map(|axis| {
                (0..grid.face_count(axis))
                    .map(|f| {
                        grid.face_center(axis, f, &mut x);
                        x[axis] * sample(t, &x[..d])
                    })
                    .collect()
            })
            .collect();
        momenta.push(step);
    }
    let curve = TransportCurve::new(Arc::clone(rho0.reference()), horizon, densities, momenta)?;
    let exponent = (1.0 - d as f64) * p + d as f64;
    Ok((curve, exponent, exponent < 0.0))
}

/// The doubling construction `T_t(x) = (1 + t^p) x` joining `mu` to
/// `(2 Id)_# mu` over the unit time interval, for the mobility
/// `h(r) = r(1-r)` on `(0, 1)`.
///
/// Returns the sampled curve and the a priori action bound
/// `C_{p,d} * m~_p(mu)`; the actual [`action_integral`] stays below it.
pub fn connectivity_curve(mu: &GridMeasure, p: f64, steps: usize) -> Result<(TransportCurve, f64)> {
    if !(p > 1.0) || steps == 0 {
        return Err(Error::InvalidConfig("connectivity curve needs p > 1, steps > 0".into()));
    }
    let grid = mu.grid().clone();
    let d = grid.dim();
    for &r in mu.density() {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::DensityOutOfRange { value: r, a: 0.0, b: 1.0 });
        }
    }
    if let Some(bbox) = mu.support_box() {
        for (j, &(lo_s, hi_s)) in bbox.iter().enumerate() {
            let (lo, hi) = grid.bounds()[j];
            if 2.0 * lo_s < lo - 1e-12 || 2.0 * hi_s > hi + 1e-12 {
                return Err(Error::SupportEscapesGrid);
            }
        }
    }
    let src = mu.density().to_vec();
    let sample = |t: f64, x: &[f64]| -> f64 {
        let s = 1.0 + t.powf(p);
        let mut y = [0.0f64; MAX_DIM];
        for j in 0..d {
            y[j] = x[j] / s;
        }
        grid.interpolate(&src, &y[..d]) / s.powi(d as i32)
    };
    let dt = 1.0 / steps as f64;
    let mut x = [0.0f64; MAX_DIM];
    let mut densities = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let mut frame = vec![0.0; grid.num_cells()];
        for (i, v) in frame.iter_mut().enumerate() {
            grid.center(i, &mut x);
            *v = sample(t, &x[..d]);
        }
        densities.push(frame);
    }
    let mut momenta = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = (k as f64 + 0.5) * dt;
        let speed = p * t.powf(p - 1.0) / (1.0 + t.powf(p));
        let step: Vec<Vec<f64>> = (0..d)
            .map(|axis| {
                (0..grid.face_count(axis))
                    .map(|f| {
                        grid.face_center(axis, f, &mut x);
                        speed * x[axis] * sample(t, &x[..d])
                    })
                    .collect()
            })
            .collect();
        momenta.push(step);
    }
    let curve = TransportCurve::new(Arc::clone(mu.reference()), 1.0, densities, momenta)?;
    let bound = c_pd_constant(p, d)? * mu.generalized_moment(p);
    Ok((curve, bound))
}

/// `C_{p,d} = int_0^1 p^p d^{1-p} (1 + t^p)^{d(p-1)} dt` by adaptive
/// quadrature.
pub fn c_pd_constant(p: f64, d: usize) -> Result<f64> {
    if !(p > 1.0) || d == 0 {
        return Err(Error::InvalidConfig(format!("need p > 1 and d >= 1, got ({p}, {d})")));
    }
    let df = d as f64;
    quadrature(
        |t| p.powf(p) * df.powf(1.0 - p) * (1.0 + t.powf(p)).powf(df * (p - 1.0)),
        (0.0, 1.0),
        1e-12,
    )
}

/// Time exponent of the dilation example momentum energy.
pub fn dilation_exponent(p: f64, d: usize) -> f64 {
    (1.0 - d as f64) * p + d as f64
}

/// Classical p-Wasserstein distance between two nonnegative 1D grid measures
/// of equal mass, by the quantile closed form with piecewise-linear CDFs.
pub fn wasserstein_1d(mu0: &GridMeasure, mu1: &GridMeasure, p: f64) -> Result<f64> {
    let grid0 = mu0.grid();
    let grid1 = mu1.grid();
    if grid0.dim() != 1 || grid1.dim() != 1 {
        return Err(Error::DimensionUnsupported("wasserstein_1d", 1));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidConfig(format!("need p >= 1, got {p}")));
    }
    for m in [mu0, mu1] {
        if m.density().iter().any(|&r| r < 0.0) {
            return Err(Error::InvalidConfig(
                "wasserstein_1d needs nonnegative densities".into(),
            ));
        }
    }
    let m0 = mu0.total_mass();
    let m1 = mu1.total_mass();
    if (m0 - m1).abs() > 1e-10 * m0.abs().max(1.0) {
        return Err(Error::MassMismatch { m0, m1 });
    }
    let total = m0;
    if total <= 1e-300 {
        return Ok(0.0);
    }

    let cumulative = |mu: &GridMeasure| -> Vec<f64> {
        let w = mu.reference().weights();
        let mut cum = Vec::with_capacity(mu.density().len() + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for (r, g) in mu.density().iter().zip(w) {
            acc += r * g;
            cum.push(acc);
        }
        cum
    };
    let cum0 = cumulative(mu0);
    let cum1 = cumulative(mu1);

    // Quantile of a piecewise-constant density: affine inside each cell's
    // mass span. `cell` is located by the midpoint of the current interval.
    let quantile = |grid: &crate::measures::Grid, cum: &[f64], s_loc: f64, s: f64| -> f64 {
        let i = cum.partition_point(|&c| c <= s_loc).saturating_sub(1);
        let i = i.min(cum.len() - 2);
        let mass = cum[i + 1] - cum[i];
        let (lo, _) = grid.bounds()[0];
        let dx = grid.spacing(0);
        lo + i as f64 * dx + (s - cum[i]) / mass * dx
    };

    let mut breaks: Vec<f64> = cum0.iter().chain(cum1.iter()).cloned().collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * total);

    let mut integral = 0.0;
    for pair in breaks.windows(2) {
        let (sa, sb) = (pair[0], pair[1]);
        let len = sb - sa;
        if len <= 1e-15 * total {
            continue;
        }
        let mid = 0.5 * (sa + sb);
        let ua = quantile(grid0, &cum0, mid, sa) - quantile(grid1, &cum1, mid, sa);
        let ub = quantile(grid0, &cum0, mid, sb) - quantile(grid1, &cum1, mid, sb);
        integral += affine_abs_power_integral(ua, ub, len, p);
    }
    Ok(integral.powf(1.0 / p))
}

/// Exact `int_0^len |u(s)|^p ds` for the affine `u` with endpoint values
/// `ua`, `ub`.
fn affine_abs_power_integral(ua: f64, ub: f64, len: f64, p: f64) -> f64 {
    if (ub - ua).abs() <= 1e-14 * (ua.abs() + ub.abs() + 1e-300) {
        return (0.5 * (ua + ub)).abs().powf(p) * len;
    }
    let anti = |u: f64| u.abs().powf(p) * u / (p + 1.0);
    (anti(ub) - anti(ua)) * len / (ub - ua)
}
