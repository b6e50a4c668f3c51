//! Grid-discretized signed measures and reference measures.
//!
//! Everything lives on an axis-aligned box grid. A [`ReferenceMeasure`]
//! carries the gamma-mass of each cell (Lebesgue, masked, or Gibbs-weighted);
//! a [`GridMeasure`] is a per-cell density with respect to that reference, so
//! its mass in cell `i` is `density[i] * weights[i]`. Densities may be signed
//! whenever the mobility interval allows `a < 0`.
//!
//! Quadrature is cell-centered throughout, consistent with the staggered
//! momenta at faces used by the dynamics module.

use std::sync::Arc;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// An axis-aligned box grid in dimension 1, 2 or 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    bounds: Vec<(f64, f64)>,
    cells: Vec<usize>,
}

impl Grid {
    pub fn new(bounds: Vec<(f64, f64)>, cells: Vec<usize>) -> Result<Self> {
        let d = bounds.len();
        if d == 0 || d > MAX_DIM || cells.len() != d {
            return Err(Error::InvalidConfig(format!(
                "grid dimension must be 1..=3 with matching cell counts, got {d} bounds / {} cells",
                cells.len()
            )));
        }
        for (&(lo, hi), &n) in bounds.iter().zip(&cells) {
            if !(lo < hi) || n == 0 {
                return Err(Error::InvalidConfig(format!(
                    "each axis needs lo < hi and at least one cell, got [{lo}, {hi}] with {n}"
                )));
            }
        }
        Ok(Self { bounds, cells })
    }

    /// Uniform 1D grid on `(lo, hi)`.
    pub fn line(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![(lo, hi)], vec![n])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / self.cells[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.spacing(j)).product()
    }

    /// Row-major linear index (first axis slowest).
    pub fn linear_index(&self, multi: &[usize]) -> usize {
        let mut lin = 0;
        for (j, &i) in multi.iter().enumerate() {
            lin = lin * self.cells[j] + i;
        }
        lin
    }

    pub fn multi_index(&self, mut lin: usize, out: &mut [usize]) {
        for j in (0..self.dim()).rev() {
            out[j] = lin % self.cells[j];
            lin /= self.cells[j];
        }
    }

    /// Center coordinates of a cell, written into `out[..dim]`.
    pub fn center(&self, lin: usize, out: &mut [f64]) {
        let mut multi = [0usize; MAX_DIM];
        self.multi_index(lin, &mut multi[..self.dim()]);
        for j in 0..self.dim() {
            out[j] = self.bounds[j].0 + (multi[j] as f64 + 0.5) * self.spacing(j);
        }
    }

    /// Number of interior faces normal to `axis`.
    pub fn face_count(&self, axis: usize) -> usize {
        if self.cells[axis] < 2 {
            return 0;
        }
        (self.cells[axis] - 1) * self.num_cells() / self.cells[axis]
    }

    /// Linear cell indices (lower, upper) adjacent to an interior face.
    ///
    /// Faces normal to `axis` are indexed row-major over the cell layout with
    /// the `axis` extent reduced by one.
    pub fn face_cells(&self, axis: usize, face_lin: usize) -> (usize, usize) {
        let mut multi = [0usize; MAX_DIM];
        let mut lin = face_lin;
        for j in (0..self.dim()).rev() {
            let extent = if j == axis { self.cells[j] - 1 } else { self.cells[j] };
            multi[j] = lin % extent;
            lin /= extent;
        }
        let lower = self.linear_index(&multi[..self.dim()]);
        multi[axis] += 1;
        let upper = self.linear_index(&multi[..self.dim()]);
        (lower, upper)
    }

    /// Center coordinates of an interior face.
    pub fn face_center(&self, axis: usize, face_lin: usize, out: &mut [f64]) {
        let (lower, _) = self.face_cells(axis, face_lin);
        self.center(lower, out);
        out[axis] += 0.5 * self.spacing(axis);
    }

    /// Multilinear interpolation of a cell-centered field at point `x`;
    /// clamped at the boundary, zero outside the box.
    pub fn interpolate(&self, field: &[f64], x: &[f64]) -> f64 {
        let d = self.dim();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for j in 0..d {
            let (lo, hi) = self.bounds[j];
            if x[j] < lo || x[j] > hi {
                return 0.0;
            }
            let t = (x[j] - lo) / self.spacing(j) - 0.5;
            let tc = t.clamp(0.0, (self.cells[j] - 1) as f64);
            let i = (tc.floor() as usize).min(self.cells[j].saturating_sub(2).max(0));
            base[j] = i;
            frac[j] = if self.cells[j] == 1 { 0.0 } else { tc - i as f64 };
        }
        let mut value = 0.0;
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut multi = [0usize; MAX_DIM];
            for j in 0..d {
                if corner >> j & 1 == 1 {
                    weight *= frac[j];
                    multi[j] = (base[j] + 1).min(self.cells[j] - 1);
                } else {
                    weight *= 1.0 - frac[j];
                    multi[j] = base[j];
                }
            }
            if weight != 0.0 {
                value += weight * field[self.linear_index(&multi[..d])];
            }
        }
        value
    }
}

/// How the per-cell reference weights were generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Plain Lebesgue measure on the box: every weight equals the cell volume.
    LebesgueBox,
    /// Lebesgue restricted to a subset of cells.
    MaskedLebesgue,
    /// `e^{-V} dx` for a potential sampled at cell centers.
    Gibbs,
}

/// A nonnegative reference measure gamma on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMeasure {
    grid: Grid,
    weights: Vec<f64>,
    kind: ReferenceKind,
}

impl ReferenceMeasure {
    pub fn lebesgue(grid: Grid) -> Self {
        let w = grid.cell_volume();
        let n = grid.num_cells();
        Self {
            grid,
            weights: vec![w; n],
            kind: ReferenceKind::LebesgueBox,
        }
    }

    pub fn masked(grid: Grid, mask: &[bool]) -> Result<Self> {
        if mask.len() != grid.num_cells() {
            return Err(Error::GridMismatch);
        }
        let v = grid.cell_volume();
        let weights = mask.iter().map(|&m| if m { v } else { 0.0 }).collect();
        Ok(Self {
            grid,
            weights,
            kind: ReferenceKind::MaskedLebesgue,
        })
    }

    /// `e^{-V(x)} dx` with `V` evaluated at cell centers.
    pub fn gibbs<F: Fn(&[f64]) -> f64>(grid: Grid, potential: F) -> Self {
        let v = grid.cell_volume();
        let mut x = [0.0f64; MAX_DIM];
        let weights = (0..grid.num_cells())
            .map(|i| {
                grid.center(i, &mut x);
                (-potential(&x[..grid.dim()])).exp() * v
            })
            .collect();
        Self {
            grid,
            weights,
            kind: ReferenceKind::Gibbs,
        }
    }

    /// Rebuild from explicit weights (file round-trips).
    pub fn from_weights(grid: Grid, weights: Vec<f64>, kind: ReferenceKind) -> Result<Self> {
        if weights.len() != grid.num_cells() {
            return Err(Error::GridMismatch);
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidConfig("reference weights must be finite and >= 0".into()));
        }
        Ok(Self { grid, weights, kind })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> ReferenceKind {
        self.kind
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Whether every cell has the same weight (what mollification and the
    /// heat flow require).
    pub fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|&w| (w - w0).abs() <= 1e-14 * w0.abs().max(1.0))
    }

    /// Generalized r-th moment of gamma: its mass inside the unit ball plus
    /// the r-th absolute moment outside, by cell centers.
    pub fn generalized_moment(&self, r: f64) -> f64 {
        moment_of_masses(&self.grid, &self.weights, r)
    }
}

fn moment_of_masses(grid: &Grid, masses: &[f64], r: f64) -> f64 {
    let mut x = [0.0f64; MAX_DIM];
    let mut total = 0.0;
    for (i, &m) in masses.iter().enumerate() {
        grid.center(i, &mut x);
        let dist: f64 = x[..grid.dim()].iter().map(|c| c * c).sum::<f64>().sqrt();
        total += if dist < 1.0 { m } else { dist.powf(r) * m };
    }
    total
}

/// A signed measure `rho * gamma` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    reference: Arc<ReferenceMeasure>,
    density: Vec<f64>,
}

impl GridMeasure {
    /// Cells with zero reference weight get density zero by convention.
    pub fn new(reference: Arc<ReferenceMeasure>, mut density: Vec<f64>) -> Result<Self> {
        if density.len() != reference.grid().num_cells() {
            return Err(Error::GridMismatch);
        }
        if density.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("densities must be finite".into()));
        }
        for (d, &w) in density.iter_mut().zip(reference.weights()) {
            if w == 0.0 {
                *d = 0.0;
            }
        }
        Ok(Self { reference, density })
    }

    /// Density evaluated from a function of the cell center.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(reference: Arc<ReferenceMeasure>, f: F) -> Result<Self> {
        let grid = reference.grid();
        let mut x = [0.0f64; MAX_DIM];
        let density = (0..grid.num_cells())
            .map(|i| {
                grid.center(i, &mut x);
                f(&x[..grid.dim()])
            })
            .collect();
        Self::new(reference, density)
    }

    pub fn reference(&self) -> &Arc<ReferenceMeasure> {
        &self.reference
    }

    pub fn grid(&self) -> &Grid {
        self.reference.grid()
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn same_layout(&self, other: &GridMeasure) -> bool {
        Arc::ptr_eq(&self.reference, &other.reference) || self.reference == other.reference
    }

    /// Signed total mass `sum_i rho_i gamma_i`.
    pub fn total_mass(&self) -> f64 {
        self.density
            .iter()
            .zip(self.reference.weights())
            .map(|(r, w)| r * w)
            .sum()
    }

    /// Generalized r-th moment of `|rho| gamma` (total-variation convention).
    pub fn generalized_moment(&self, r: f64) -> f64 {
        let masses: Vec<f64> = self
            .density
            .iter()
            .zip(self.reference.weights())
            .map(|(r, w)| r.abs() * w)
            .collect();
        moment_of_masses(self.grid(), &masses, r)
    }

    /// Push forward under `x -> scale * x + shift`, materializing the result
    /// on the image grid. Cell masses are transported exactly, so the total
    /// mass is preserved to roundoff and `sup |rho'| = sup |rho| / |scale|^d`.
    pub fn push_forward_affine(&self, scale: f64, shift: &[f64]) -> Result<GridMeasure> {
        let grid = self.grid();
        let d = grid.dim();
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::InvalidConfig("push-forward scale must be nonzero".into()));
        }
        if shift.len() != d {
            return Err(Error::GridMismatch);
        }
        let bounds = grid
            .bounds()
            .iter()
            .enumerate()
            .map(|(j, &(lo, hi))| {
                let (a, b) = (scale * lo + shift[j], scale * hi + shift[j]);
                if a < b {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect();
        let image = Grid::new(bounds, grid.cells().to_vec())?;
        let det = scale.abs().powi(d as i32);
        let n = grid.num_cells();
        let mut density = vec![0.0; n];
        let mut multi = [0usize; MAX_DIM];
        for i in 0..n {
            grid.multi_index(i, &mut multi[..d]);
            if scale < 0.0 {
                for (j, m) in multi[..d].iter_mut().enumerate() {
                    *m = grid.cells()[j] - 1 - *m;
                }
            }
            let target = image.linear_index(&multi[..d]);
            density[target] = self.density[i] / det;
        }
        let reference = match self.reference.kind() {
            ReferenceKind::LebesgueBox => ReferenceMeasure::lebesgue(image),
            _ => {
                return Err(Error::InvalidConfig(
                    "push-forward is only defined over Lebesgue references".into(),
                ))
            }
        };
        GridMeasure::new(Arc::new(reference), density)
    }

    /// Sample the pushed-forward density `rho((y - shift)/scale) / |scale|^d`
    /// at the cell centers of `target`. The image of the support must lie in
    /// the target box.
    pub fn push_forward_onto(
        &self,
        target: &Arc<ReferenceMeasure>,
        scale: f64,
        shift: &[f64],
    ) -> Result<GridMeasure> {
        let d = self.grid().dim();
        if scale == 0.0 {
            return Err(Error::InvalidConfig("push-forward scale must be nonzero".into()));
        }
        if target.grid().dim() != d {
            return Err(Error::GridMismatch);
        }
        if let Some(bbox) = self.support_box() {
            for j in 0..d {
                let (a, b) = (scale * bbox[j].0 + shift[j], scale * bbox[j].1 + shift[j]);
                let (lo, hi) = target.grid().bounds()[j];
                if a.min(b) < lo - 1e-12 || a.max(b) > hi + 1e-12 {
                    return Err(Error::SupportEscapesGrid);
                }
            }
        }
        let det = scale.abs().powi(d as i32);
        let grid = self.grid().clone();
        let src = self.density.clone();
        GridMeasure::from_fn(Arc::clone(target), move |y| {
            let mut x = [0.0f64; MAX_DIM];
            for j in 0..d {
                x[j] = (y[j] - shift[j]) / scale;
            }
            grid.interpolate(&src, &x[..d]) / det
        })
    }

    /// Bounding box of the cells with nonzero density, or `None` when empty.
    pub fn support_box(&self) -> Option<Vec<(f64, f64)>> {
        let grid = self.grid();
        let d = grid.dim();
        let mut lo = [usize::MAX; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        let mut any = false;
        let mut multi = [0usize; MAX_DIM];
        for (i, &v) in self.density.iter().enumerate() {
            if v != 0.0 {
                any = true;
                grid.multi_index(i, &mut multi[..d]);
                for j in 0..d {
                    lo[j] = lo[j].min(multi[j]);
                    hi[j] = hi[j].max(multi[j]);
                }
            }
        }
        if !any {
            return None;
        }
        Some(
            (0..d)
                .map(|j| {
                    let (blo, _) = grid.bounds()[j];
                    let dx = grid.spacing(j);
                    (blo + lo[j] as f64 * dx, blo + (hi[j] + 1) as f64 * dx)
                })
                .collect(),
        )
    }

    /// Convolve the density with a normalized compactly supported bump of
    /// radius `eps`, using mirror boundary conditions.
    ///
    /// The scheme is a convex combination with symmetric taps, so constants
    /// are fixed points, the density range can only contract, and the total
    /// mass is preserved exactly (uniform reference weights required).
    pub fn mollify(&self, eps: f64) -> Result<GridMeasure> {
        let grid = self.grid();
        if !(eps > 0.0) {
            return Err(Error::BadKernelRadius { radius: eps });
        }
        if !self.reference.is_uniform() {
            return Err(Error::InvalidConfig(
                "mollification requires uniform reference weights".into(),
            ));
        }
        let mut density = self.density.clone();
        for axis in 0..grid.dim() {
            let (lo, hi) = grid.bounds()[axis];
            if eps > hi - lo {
                return Err(Error::BadKernelRadius { radius: eps });
            }
            let dx = grid.spacing(axis);
            let radius = (eps / dx).floor() as i64;
            // Quartic bump sampled at cell offsets, normalized to sum 1.
            let mut taps: Vec<f64> = (-radius..=radius)
                .map(|m| {
                    let u = m as f64 * dx / eps;
                    (1.0 - u * u).max(0.0).powi(2)
                })
                .collect();
            let sum: f64 = taps.iter().sum();
            for t in &mut taps {
                *t /= sum;
            }
            if taps.len() > 1 {
                density = convolve_axis_mirrored(grid, &density, axis, &taps, radius);
            }
        }
        GridMeasure::new(Arc::clone(&self.reference), density)
    }
}

/// Separable 1D pass of a symmetric kernel along `axis` with half-sample
/// mirror reflection at both ends.
fn convolve_axis_mirrored(
    grid: &Grid,
    field: &[f64],
    axis: usize,
    taps: &[f64],
    radius: i64,
) -> Vec<f64> {
    let d = grid.dim();
    let n_axis = grid.cells()[axis] as i64;
    let mut out = vec![0.0; field.len()];
    let mut multi = [0usize; MAX_DIM];
    for i in 0..field.len() {
        grid.multi_index(i, &mut multi[..d]);
        let base = multi[axis] as i64;
        let mut acc = 0.0;
        for (t, m) in taps.iter().zip(-radius..=radius) {
            let mut j = base + m;
            // Half-sample mirror: ..., 1, 0 | 0, 1, ..., n-1 | n-1, n-2, ...
            while j < 0 || j >= n_axis {
                if j < 0 {
                    j = -1 - j;
                }
                if j >= n_axis {
                    j = 2 * n_axis - 1 - j;
                }
            }
            let mut neighbor = multi;
            neighbor[axis] = j as usize;
            acc += t * field[grid.linear_index(&neighbor[..d])];
        }
        out[i] = acc;
    }
    out
}
