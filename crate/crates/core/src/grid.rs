//! Discrete classical data (phi0, phi1) on a square grid, energy densities,
//! symmetry actions and initial-data generators.
//!
//! The boundary model is clamped-to-constant: every field equals its base
//! value phi(infinity) on a margin ring of cells, the discrete stand-in for
//! "Schwartz modulo constants".  All spatial differences are intrinsic
//! (log_map between neighbors), so geodesic-image data reduces exactly to
//! scalar finite differences.

use crate::hyperbolic::{
    self, dist_sq, log_into, minkowski_inner, normalize_in_place, project_tangent_in_place,
    transport_into, HyperbolicPoint, LorentzRotation,
};
use crate::{CoreError, Result};

/// Data below this threshold counts as "supported away": generators require
/// profiles to sit under it on the margin ring before clamping exactly.
pub const SUPPORT_TOL: f64 = 1e-8;

/// Square grid of n x n cells with spacing h and a clamped margin ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub h: f64,
    pub margin: usize,
}

impl GridSpec {
    pub fn new(n: usize, h: f64, margin: usize) -> Result<Self> {
        if n < 16 {
            return Err(CoreError::InvalidGrid {
                reason: format!("n = {n} < 16"),
            });
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(CoreError::InvalidGrid {
                reason: format!("h = {h} must be positive"),
            });
        }
        if margin < 2 || 2 * margin >= n {
            return Err(CoreError::InvalidGrid {
                reason: format!("margin = {margin} outside [2, n/2)"),
            });
        }
        Ok(Self { n, h, margin })
    }

    pub fn half_width(&self) -> f64 {
        self.n as f64 * self.h / 2.0
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    /// Sample coordinates of cell (ix, iy).  Samples sit on the lattice
    /// x = i h - L (node-centered), so whole-cell translations and
    /// lattice-compatible shrinks resample without interpolation.
    #[inline]
    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        let half = self.half_width();
        ((ix as f64) * self.h - half, (iy as f64) * self.h - half)
    }

    #[inline]
    pub fn in_margin(&self, ix: usize, iy: usize) -> bool {
        ix < self.margin
            || iy < self.margin
            || ix >= self.n - self.margin
            || iy >= self.n - self.margin
    }

    /// Interior (non-margin) index range per axis.
    pub fn interior(&self) -> std::ops::Range<usize> {
        self.margin..self.n - self.margin
    }

    /// Largest |x| or |y| coordinate still inside the interior region.
    pub fn interior_half_width(&self) -> f64 {
        self.half_width() - (self.margin as f64) * self.h
    }
}

/// A map slice phi: grid -> H^m, constant (= base) on the margin ring.
#[derive(Debug, Clone)]
pub struct MapField {
    spec: GridSpec,
    m: usize,
    base: Vec<f64>,
    data: Vec<f64>, // cells * (m+1)
}

impl MapField {
    pub fn constant(spec: GridSpec, base: &HyperbolicPoint) -> Self {
        let m = base.dim();
        let d = m + 1;
        let mut data = vec![0.0; spec.cells() * d];
        for c in data.chunks_mut(d) {
            c.copy_from_slice(base.coords());
        }
        Self {
            spec,
            m,
            base: base.coords().to_vec(),
            data,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn base_point(&self) -> HyperbolicPoint {
        HyperbolicPoint::from_normalized(self.base.clone())
    }

    #[inline]
    pub fn point(&self, ix: usize, iy: usize) -> &[f64] {
        let d = self.m + 1;
        let o = self.spec.idx(ix, iy) * d;
        &self.data[o..o + d]
    }

    #[inline]
    pub fn point_mut(&mut self, ix: usize, iy: usize) -> &mut [f64] {
        let d = self.m + 1;
        let o = self.spec.idx(ix, iy) * d;
        &mut self.data[o..o + d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Force margin cells to exactly the base value.
    pub fn clamp_margin(&mut self) {
        let d = self.m + 1;
        let n = self.spec.n;
        for iy in 0..n {
            for ix in 0..n {
                if self.spec.in_margin(ix, iy) {
                    let o = self.spec.idx(ix, iy) * d;
                    self.data[o..o + d].copy_from_slice(&self.base);
                }
            }
        }
    }

    pub fn sup_dist_to_base(&self) -> f64 {
        let d = self.m + 1;
        let mut worst = 0.0f64;
        for c in self.data.chunks(d) {
            worst = worst.max(hyperbolic::dist(&self.base, c));
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.m + 1;
        for (i, c) in self.data.chunks(d).enumerate() {
            let sp = minkowski_inner(c, c);
            if !(sp + 1.0).abs().is_finite() || (sp + 1.0).abs() > 1e-9 || c[0] <= 0.0 {
                return Err(CoreError::NotOnSheet {
                    self_product: sp,
                    p0: c[0],
                })
                .map_err(|e| e.at_stage("map field cell validation"))
                .map_err(|e| {
                    let _ = i;
                    e
                });
            }
        }
        let n = self.spec.n;
        for iy in 0..n {
            for ix in 0..n {
                if self.spec.in_margin(ix, iy) && self.point(ix, iy) != &self.base[..] {
                    return Err(CoreError::InvalidGrid {
                        reason: format!("margin cell ({ix},{iy}) differs from base"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Ambient-coordinate tangent vectors per cell (phi1-like fields).
#[derive(Debug, Clone)]
pub struct TangentField {
    m: usize,
    data: Vec<f64>,
}

impl TangentField {
    pub fn zeros(spec: &GridSpec, m: usize) -> Self {
        Self {
            m,
            data: vec![0.0; spec.cells() * (m + 1)],
        }
    }

    #[inline]
    pub fn vec_at(&self, spec: &GridSpec, ix: usize, iy: usize) -> &[f64] {
        let d = self.m + 1;
        let o = spec.idx(ix, iy) * d;
        &self.data[o..o + d]
    }

    #[inline]
    pub fn vec_mut(&mut self, spec: &GridSpec, ix: usize, iy: usize) -> &mut [f64] {
        let d = self.m + 1;
        let o = spec.idx(ix, iy) * d;
        &mut self.data[o..o + d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Classical initial data: a map slice and a tangent field along it.
#[derive(Debug, Clone)]
pub struct DataPair {
    pub phi0: MapField,
    pub phi1: TangentField,
}

impl DataPair {
    pub fn constant(spec: GridSpec, base: &HyperbolicPoint) -> Self {
        Self {
            phi0: MapField::constant(spec, base),
            phi1: TangentField::zeros(&spec, base.dim()),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        self.phi0.spec()
    }

    pub fn dim(&self) -> usize {
        self.phi0.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.phi0.validate()?;
        let spec = *self.phi0.spec();
        for iy in 0..spec.n {
            for ix in 0..spec.n {
                let p = self.phi0.point(ix, iy);
                let v = self.phi1.vec_at(&spec, ix, iy);
                let inner = minkowski_inner(p, v);
                let scale = 1.0 + v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if inner.abs() > hyperbolic::TANGENT_TOL * scale {
                    return Err(CoreError::NotTangent {
                        inner,
                        tol: hyperbolic::TANGENT_TOL * scale,
                    });
                }
                if spec.in_margin(ix, iy) && v.iter().any(|x| *x != 0.0) {
                    return Err(CoreError::InvalidGrid {
                        reason: format!("phi1 nonzero on margin cell ({ix},{iy})"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Nonnegative energy density per cell (energy per unit area).
#[derive(Debug, Clone)]
pub struct EnergyDensityField {
    pub spec: GridSpec,
    pub t00: Vec<f64>,
}

impl EnergyDensityField {
    pub fn total(&self) -> f64 {
        self.spec.cell_area() * self.t00.iter().sum::<f64>()
    }
}

/// Squared intrinsic gradient at a cell as the mean of the one-sided
/// squared differences.  Summed over cells this counts every lattice edge
/// exactly once, which is what makes the discrete energy identity exact.
fn grad_sq_at(phi: &MapField, ix: usize, iy: usize) -> f64 {
    let spec = phi.spec();
    let n = spec.n;
    let p = phi.point(ix, iy);
    let inv_h2 = 1.0 / (spec.h * spec.h);
    let mut acc = 0.0;
    let neighbor = |jx: isize, jy: isize| -> &[f64] {
        if jx < 0 || jy < 0 || jx >= n as isize || jy >= n as isize {
            phi.base()
        } else {
            phi.point(jx as usize, jy as usize)
        }
    };
    let ix = ix as isize;
    let iy = iy as isize;
    for (dx, dy) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
        acc += dist_sq(p, neighbor(ix + dx, iy + dy)) * inv_h2;
    }
    0.5 * acc
}

/// T_00 = 1/2 |phi1|^2 + 1/2 |grad_x phi0|^2 with intrinsic differences.
pub fn energy_density(d: &DataPair) -> EnergyDensityField {
    let spec = *d.spec();
    let mut t00 = vec![0.0; spec.cells()];
    for iy in 0..spec.n {
        for ix in 0..spec.n {
            let v = d.phi1.vec_at(&spec, ix, iy);
            let kinetic = 0.5 * minkowski_inner(v, v).max(0.0);
            t00[spec.idx(ix, iy)] = kinetic + 0.5 * grad_sq_at(&d.phi0, ix, iy);
        }
    }
    EnergyDensityField { spec, t00 }
}

/// Conserved energy h^2 sum T_00.
pub fn total_energy(d: &DataPair) -> f64 {
    energy_density(d).total()
}

/// h^2 sum of T_00 over cells with |x - x0| <= r.
pub fn local_energy(e: &EnergyDensityField, x0: (f64, f64), r: f64) -> f64 {
    let spec = e.spec;
    let r2 = r * r;
    let mut acc = 0.0;
    for iy in 0..spec.n {
        for ix in 0..spec.n {
            let (cx, cy) = spec.cell_center(ix, iy);
            let dx = cx - x0.0;
            let dy = cy - x0.1;
            if dx * dx + dy * dy <= r2 {
                acc += e.t00[spec.idx(ix, iy)];
            }
        }
    }
    acc * spec.cell_area()
}

// ---------------------------------------------------------------------------
// Support bookkeeping
// ---------------------------------------------------------------------------

/// Bounding box (in cell indices) of cells where the data departs from base.
fn support_box(d: &DataPair) -> Option<(usize, usize, usize, usize)> {
    let spec = *d.spec();
    let mut bb: Option<(usize, usize, usize, usize)> = None;
    for iy in 0..spec.n {
        for ix in 0..spec.n {
            let p = d.phi0.point(ix, iy);
            let v = d.phi1.vec_at(&spec, ix, iy);
            let moved = hyperbolic::dist(p, d.phi0.base()) > SUPPORT_TOL
                || v.iter().map(|x| x * x).sum::<f64>().sqrt() > SUPPORT_TOL;
            if moved {
                bb = Some(match bb {
                    None => (ix, iy, ix, iy),
                    Some((x0, y0, x1, y1)) => (x0.min(ix), y0.min(iy), x1.max(ix), y1.max(iy)),
                });
            }
        }
    }
    bb
}

fn require_interior_box(
    spec: &GridSpec,
    bb: (f64, f64, f64, f64),
    reason: &str,
) -> Result<()> {
    let lim = spec.interior_half_width();
    let worst = bb.0.abs().max(bb.1.abs()).max(bb.2.abs()).max(bb.3.abs());
    if worst > lim {
        let needed = ((worst - lim) / spec.h).ceil() as usize + spec.margin;
        return Err(CoreError::SupportViolation {
            reason: reason.to_string(),
            required_cells: needed,
            margin_cells: spec.margin,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Symmetries
// ---------------------------------------------------------------------------

/// Bilinear sampler of (log phi0, transported phi1) in coordinates about base.
struct LogSampler<'a> {
    spec: GridSpec,
    d: usize,
    base: &'a [f64],
    log0: Vec<f64>,
    w1: Vec<f64>,
}

impl<'a> LogSampler<'a> {
    fn new(data: &'a DataPair) -> Self {
        let spec = *data.spec();
        let m = data.dim();
        let d = m + 1;
        let base = data.phi0.base();
        let mut log0 = vec![0.0; spec.cells() * d];
        let mut w1 = vec![0.0; spec.cells() * d];
        for iy in 0..spec.n {
            for ix in 0..spec.n {
                let o = spec.idx(ix, iy) * d;
                let p = data.phi0.point(ix, iy);
                log_into(base, p, &mut log0[o..o + d]);
                transport_into(p, base, data.phi1.vec_at(&spec, ix, iy), &mut w1[o..o + d]);
                project_tangent_in_place(base, &mut w1[o..o + d]);
            }
        }
        Self {
            spec,
            d,
            base,
            log0,
            w1,
        }
    }

    /// Sample both fields at a continuous position (bilinear; outside = base).
    fn sample(&self, pos: (f64, f64), log_out: &mut [f64], w_out: &mut [f64]) {
        let spec = &self.spec;
        let half = spec.half_width();
        let gx = (pos.0 + half) / spec.h;
        let gy = (pos.1 + half) / spec.h;
        let x0 = gx.floor();
        let y0 = gy.floor();
        let fx = gx - x0;
        let fy = gy - y0;
        log_out.fill(0.0);
        w_out.fill(0.0);
        for (cx, wxf) in [(x0 as isize, 1.0 - fx), (x0 as isize + 1, fx)] {
            for (cy, wyf) in [(y0 as isize, 1.0 - fy), (y0 as isize + 1, fy)] {
                let w = wxf * wyf;
                if w == 0.0 {
                    continue;
                }
                if cx < 0 || cy < 0 || cx >= spec.n as isize || cy >= spec.n as isize {
                    continue; // outside: base contributes zero log / zero phi1
                }
                let o = spec.idx(cx as usize, cy as usize) * self.d;
                for k in 0..self.d {
                    log_out[k] += w * self.log0[o + k];
                    w_out[k] += w * self.w1[o + k];
                }
            }
        }
    }

    /// Rebuild (phi0, phi1) at a cell from sampled log coordinates, with the
    /// velocity rescaled by `vel_scale`.
    fn emit(
        &self,
        sampled_log: &[f64],
        sampled_w: &[f64],
        vel_scale: f64,
        phi0_out: &mut [f64],
        phi1_out: &mut [f64],
    ) {
        hyperbolic::exp_into(self.base, sampled_log, phi0_out);
        normalize_in_place(phi0_out);
        transport_into(self.base, phi0_out, sampled_w, phi1_out);
        project_tangent_in_place(phi0_out, phi1_out);
        for v in phi1_out.iter_mut() {
            *v *= vel_scale;
        }
    }
}

/// Space translation: phi'(x) = phi(x - x0).  Whole-cell translations
/// resample exactly; otherwise bilinear interpolation in log coordinates.
pub fn sym_translate(d: &DataPair, x0: (f64, f64)) -> Result<DataPair> {
    let spec = *d.spec();
    let dim = d.dim();
    let amb = dim + 1;

    if let Some(bb) = support_box(d) {
        let (cx0, cy0) = spec.cell_center(bb.0, bb.1);
        let (cx1, cy1) = spec.cell_center(bb.2, bb.3);
        require_interior_box(
            &spec,
            (cx0 + x0.0, cy0 + x0.1, cx1 + x0.0, cy1 + x0.1),
            "translated support leaves the interior region",
        )?;
    }

    let kx = x0.0 / spec.h;
    let ky = x0.1 / spec.h;
    let lattice = (kx - kx.round()).abs() < 1e-9 && (ky - ky.round()).abs() < 1e-9;

    let mut out = DataPair::constant(spec, &d.phi0.base_point());
    if lattice {
        let kx = kx.round() as isize;
        let ky = ky.round() as isize;
        for iy in 0..spec.n {
            for ix in 0..spec.n {
                let sx = ix as isize - kx;
                let sy = iy as isize - ky;
                if sx < 0 || sy < 0 || sx >= spec.n as isize || sy >= spec.n as isize {
                    continue;
                }
                let (sx, sy) = (sx as usize, sy as usize);
                out.phi0
                    .point_mut(ix, iy)
                    .copy_from_slice(d.phi0.point(sx, sy));
                out.phi1
                    .vec_mut(&spec, ix, iy)
                    .copy_from_slice(d.phi1.vec_at(&spec, sx, sy));
            }
        }
    } else {
        let sampler = LogSampler::new(d);
        let mut lg = vec![0.0; amb];
        let mut wv = vec![0.0; amb];
        for iy in 0..spec.n {
            for ix in 0..spec.n {
                let (cx, cy) = spec.cell_center(ix, iy);
                sampler.sample((cx - x0.0, cy - x0.1), &mut lg, &mut wv);
                let mut p = vec![0.0; amb];
                let mut v = vec![0.0; amb];
                sampler.emit(&lg, &wv, 1.0, &mut p, &mut v);
                out.phi0.point_mut(ix, iy).copy_from_slice(&p);
                out.phi1.vec_mut(&spec, ix, iy).copy_from_slice(&v);
            }
        }
    }
    out.phi0.clamp_margin();
    clamp_phi1_margin(&mut out);
    Ok(out)
}

/// Time reversal: phi1 -> -phi1.
pub fn sym_time_reverse(d: &DataPair) -> DataPair {
    let mut out = d.clone();
    for v in out.phi1.data_mut().iter_mut() {
        *v = -*v;
    }
    out
}

/// Target rotation by U in SO+(m,1), applied pointwise.
pub fn sym_rotate(d: &DataPair, u: &LorentzRotation) -> DataPair {
    let spec = *d.spec();
    let dim = d.dim();
    let amb = dim + 1;
    let mut base = vec![0.0; amb];
    u.apply_coords_into(d.phi0.base(), &mut base);
    normalize_in_place(&mut base);
    let mut out = DataPair::constant(spec, &HyperbolicPoint::from_normalized(base));
    let mut tmp = vec![0.0; amb];
    for iy in 0..spec.n {
        for ix in 0..spec.n {
            u.apply_coords_into(d.phi0.point(ix, iy), &mut tmp);
            normalize_in_place(&mut tmp);
            out.phi0.point_mut(ix, iy).copy_from_slice(&tmp);
            u.apply_coords_into(d.phi1.vec_at(&spec, ix, iy), &mut tmp);
            {
                let p = out.phi0.point(ix, iy).to_vec();
                project_tangent_in_place(&p, &mut tmp);
            }
            out.phi1.vec_mut(&spec, ix, iy).copy_from_slice(&tmp);
        }
    }
    out.phi0.clamp_margin();
    clamp_phi1_margin(&mut out);
    out
}

/// Scaling: (phi0(x), phi1(x)) -> (phi0(x/lambda), phi1(x/lambda)/lambda).
pub fn sym_dilate(d: &DataPair, lambda: f64) -> Result<DataPair> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(CoreError::InvalidParameter {
            name: "lambda",
            reason: format!("{lambda} must be positive"),
        });
    }
    let spec = *d.spec();
    let dim = d.dim();
    let amb = dim + 1;

    if let Some(bb) = support_box(d) {
        let (cx0, cy0) = spec.cell_center(bb.0, bb.1);
        let (cx1, cy1) = spec.cell_center(bb.2, bb.3);
        require_interior_box(
            &spec,
            (
                cx0 * lambda,
                cy0 * lambda,
                cx1 * lambda,
                cy1 * lambda,
            ),
            "dilated support leaves the interior region",
        )?;
    }

    let sampler = LogSampler::new(d);
    let mut out = DataPair::constant(spec, &d.phi0.base_point());
    let mut lg = vec![0.0; amb];
    let mut wv = vec![0.0; amb];
    let inv = 1.0 / lambda;
    for iy in 0..spec.n {
        for ix in 0..spec.n {
            let (cx, cy) = spec.cell_center(ix, iy);
            sampler.sample((cx * inv, cy * inv), &mut lg, &mut wv);
            let mut p = vec![0.0; amb];
            let mut v = vec![0.0; amb];
            sampler.emit(&lg, &wv, inv, &mut p, &mut v);
            out.phi0.point_mut(ix, iy).copy_from_slice(&p);
            out.phi1.vec_mut(&spec, ix, iy).copy_from_slice(&v);
        }
    }
    out.phi0.clamp_margin();
    clamp_phi1_margin(&mut out);
    Ok(out)
}

fn clamp_phi1_margin(d: &mut DataPair) {
    let spec = *d.spec();
    for iy in 0..spec.n {
        for ix in 0..spec.n {
            if spec.in_margin(ix, iy) {
                d.phi1.vec_mut(&spec, ix, iy).fill(0.0);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Geodesic-image data from scalar profiles along a fixed direction:
/// phi0(x) = exp_base(u0(x) dir), phi1(x) = u1(x) * (dir transported).
pub fn make_geodesic_data(
    spec: GridSpec,
    m: usize,
    u0: &dyn Fn(f64, f64) -> f64,
    u1: &dyn Fn(f64, f64) -> f64,
    direction: &[f64],
) -> Result<DataPair> {
    if direction.len() != m {
        return Err(CoreError::DimensionMismatch {
            expected: m,
            got: direction.len(),
        });
    }
    let base = HyperbolicPoint::basepoint(m);
    let amb = m + 1;
    let mut dir_amb = vec![0.0; amb];
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "direction",
            reason: "zero direction".into(),
        });
    }
    for a in 0..m {
        dir_amb[a + 1] = direction[a] / norm;
    }

    // Margin ring must carry (numerically) vanishing profiles.
    for iy in 0..spec.n {
        for ix in 0..spec.n {
            if spec.in_margin(ix, iy) {
                let (x, y) = spec.cell_center(ix, iy);
                if u0(x, y).abs() > SUPPORT_TOL || u1(x, y).abs() > SUPPORT_TOL {
                    return Err(CoreError::SupportViolation {
                        reason: format!(
                            "profile exceeds {SUPPORT_TOL:.1e} on margin cell ({ix},{iy})"
                        ),
                        required_cells: spec.margin + 1,
                        margin_cells: spec.margin,
                    });
                }
            }
        }
    }

    let mut out = DataPair::constant(spec, &base);
    let mut v = vec![0.0; amb];
    let mut p = vec![0.0; amb];
    let mut w = vec![0.0; amb];
    for iy in spec.interior() {
        for ix in spec.interior() {
            let (x, y) = spec.cell_center(ix, iy);
            let a0 = u0(x, y);
            let a1 = u1(x, y);
            for k in 0..amb {
                v[k] = a0 * dir_amb[k];
            }
            hyperbolic::exp_into(base.coords(), &v, &mut p);
            normalize_in_place(&mut p);
            transport_into(base.coords(), &p, &dir_amb, &mut w);
            project_tangent_in_place(&p, &mut w);
            out.phi0.point_mut(ix, iy).copy_from_slice(&p);
            let dst = out.phi1.vec_mut(&spec, ix, iy);
            for k in 0..amb {
                dst[k] = a1 * w[k];
            }
        }
    }
    Ok(out)
}

/// One localized geodesic bump.
#[derive(Debug, Clone)]
pub struct Bump {
    pub center: (f64, f64),
    pub scale: f64,
    /// Unit direction in R^m (frame coordinates at the base point).
    pub direction: Vec<f64>,
    pub amplitude: f64,
    /// Amplitude of the phi1 profile along the same direction.
    pub velocity_amplitude: f64,
}

impl Bump {
    pub fn profile(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        (-(dx * dx + dy * dy) / (2.0 * self.scale * self.scale)).exp()
    }

    /// Radius beyond which the profile drops under SUPPORT_TOL.
    fn support_radius(&self) -> f64 {
        let a = self.amplitude.abs().max(self.velocity_amplitude.abs());
        if a <= SUPPORT_TOL {
            return 0.0;
        }
        self.scale * (2.0 * (a / SUPPORT_TOL).ln()).sqrt()
    }
}

/// Superposition of geodesic bumps via iterated exp-map displacements.
/// Returns the data and a warning channel for overlapping bumps.
pub fn make_multibump_data(
    spec: GridSpec,
    m: usize,
    bumps: &[Bump],
) -> Result<(DataPair, Vec<String>)> {
    let base = HyperbolicPoint::basepoint(m);
    let amb = m + 1;
    let mut warnings = Vec::new();

    let lim = spec.interior_half_width();
    for (k, b) in bumps.iter().enumerate() {
        if b.direction.len() != m {
            return Err(CoreError::DimensionMismatch {
                expected: m,
                got: b.direction.len(),
            });
        }
        let r = b.support_radius();
        let worst = b.center.0.abs().max(b.center.1.abs()) + r;
        if worst > lim {
            return Err(CoreError::SupportViolation {
                reason: format!("bump {k} support radius {r:.3} leaves the interior region"),
                required_cells: ((worst - lim) / spec.h).ceil() as usize + spec.margin,
                margin_cells: spec.margin,
            });
        }
    }
    for i in 0..bumps.len() {
        for j in i + 1..bumps.len() {
            let sep = ((bumps[i].center.0 - bumps[j].center.0).powi(2)
                + (bumps[i].center.1 - bumps[j].center.1).powi(2))
            .sqrt();
            let reach = 3.0 * (bumps[i].scale + bumps[j].scale);
            if sep < reach {
                warnings.push(format!(
                    "bumps {i} and {j} overlap: separation {sep:.3} < {reach:.3}"
                ));
            }
        }
    }

    let mut dirs = vec![0.0; bumps.len() * amb];
    for (k, b) in bumps.iter().enumerate() {
        let norm = b.direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        for a in 0..m {
            dirs[k * amb + a + 1] = b.direction[a] / norm;
        }
    }

    let mut out = DataPair::constant(spec, &base);
    let mut p = vec![0.0; amb];
    let mut q = vec![0.0; amb];
    let mut v = vec![0.0; amb];
    let mut w = vec![0.0; amb];
    for iy in spec.interior() {
        for ix in spec.interior() {
            let (x, y) = spec.cell_center(ix, iy);
            p.copy_from_slice(base.coords());
            let mut vel = vec![0.0; amb];
            for (k, b) in bumps.iter().enumerate() {
                let g = b.profile(x, y);
                let dir = &dirs[k * amb..(k + 1) * amb];
                // displace along this bump's transported direction
                transport_into(base.coords(), &p, dir, &mut w);
                project_tangent_in_place(&p, &mut w);
                for c in 0..amb {
                    v[c] = b.amplitude * g * w[c];
                }
                hyperbolic::exp_into(&p, &v, &mut q);
                normalize_in_place(&mut q);
                p.copy_from_slice(&q);
                for c in 0..amb {
                    vel[c] += b.velocity_amplitude * g * dir[c];
                }
            }
            // phi1: accumulate at base, then transport to the final point.
            transport_into(base.coords(), &p, &vel, &mut w);
            project_tangent_in_place(&p, &mut w);
            out.phi0.point_mut(ix, iy).copy_from_slice(&p);
            out.phi1.vec_mut(&spec, ix, iy).copy_from_slice(&w);
        }
    }
    out.phi0.clamp_margin();
    clamp_phi1_margin(&mut out);
    Ok((out, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn gaussian(amp: f64, sigma: f64) -> impl Fn(f64, f64) -> f64 {
        move |x, y| amp * (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
    }

    fn small_spec() -> GridSpec {
        GridSpec::new(64, 16.0 / 64.0, 4).unwrap()
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(8, 0.1, 2).is_err());
        assert!(GridSpec::new(32, -0.1, 2).is_err());
        assert!(GridSpec::new(32, 0.1, 1).is_err());
        assert!(GridSpec::new(32, 0.1, 16).is_err());
    }

    #[test]
    fn constant_data_has_zero_energy() {
        let d = DataPair::constant(small_spec(), &HyperbolicPoint::basepoint(2));
        let e = energy_density(&d);
        assert!(e.t00.iter().all(|v| *v == 0.0));
        assert_eq!(total_energy(&d), 0.0);
    }

    #[test]
    fn geodesic_energy_density_matches_scalar_stencil() {
        // For geodesic-image data the intrinsic neighbor distances equal the
        // scalar differences exactly, so the match is at rounding level.
        let spec = small_spec();
        let u0 = gaussian(0.5, 1.0);
        let u1 = gaussian(0.3, 1.0);
        let d = make_geodesic_data(spec, 2, &u0, &u1, &[1.0, 0.0]).unwrap();
        d.validate().unwrap();
        let e = energy_density(&d);
        let n = spec.n;
        let sample_u0 = |ix: isize, iy: isize| -> f64 {
            if ix < 0 || iy < 0 || ix >= n as isize || iy >= n as isize {
                return 0.0;
            }
            if spec.in_margin(ix as usize, iy as usize) {
                return 0.0;
            }
            let (x, y) = spec.cell_center(ix as usize, iy as usize);
            u0(x, y)
        };
        for iy in spec.interior() {
            for ix in spec.interior() {
                let (x, y) = spec.cell_center(ix, iy);
                let c = sample_u0(ix as isize, iy as isize);
                let mut grad = 0.0;
                for (dx, dy) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                    let du = sample_u0(ix as isize + dx, iy as isize + dy) - c;
                    grad += du * du / (spec.h * spec.h);
                }
                let want = 0.5 * u1(x, y).powi(2) + 0.25 * grad;
                let got = e.t00[spec.idx(ix, iy)];
                assert!(
                    (got - want).abs() < 1e-12 * (1.0 + want),
                    "cell ({ix},{iy}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn gaussian_total_energy_matches_closed_form() {
        // |grad u0|^2 integrates to pi A^2 independently of sigma.
        let spec = GridSpec::new(256, 16.0 / 256.0, 4).unwrap();
        let a = 0.5;
        let u0 = gaussian(a, 1.0);
        let d = make_geodesic_data(spec, 2, &u0, &|_, _| 0.0, &[1.0, 0.0]).unwrap();
        let e = total_energy(&d);
        let want = 0.5 * std::f64::consts::PI * a * a;
        assert!(
            (e - want).abs() < 1e-3 * want,
            "E = {e}, closed form {want}"
        );
    }

    #[test]
    fn energy_invariant_under_rotation() {
        let spec = small_spec();
        let d = make_geodesic_data(spec, 2, &gaussian(0.4, 1.0), &gaussian(0.2, 0.8), &[
            0.6, 0.8,
        ])
        .unwrap();
        let e0 = total_energy(&d);
        let u = LorentzRotation::spatial_rotation(2, 1, 2, 0.83);
        let e1 = total_energy(&sym_rotate(&d, &u));
        assert!((e0 - e1).abs() < 1e-12 * e0.max(1.0));
        let b = LorentzRotation::boost(2, 1, 0.4);
        let e2 = total_energy(&sym_rotate(&d, &b));
        assert!((e0 - e2).abs() < 1e-11 * e0.max(1.0));
    }

    #[test]
    fn time_reverse_is_involution() {
        let spec = small_spec();
        let d = make_geodesic_data(spec, 2, &gaussian(0.4, 1.0), &gaussian(0.2, 0.8), &[
            1.0, 0.0,
        ])
        .unwrap();
        let dd = sym_time_reverse(&sym_time_reverse(&d));
        assert_eq!(d.phi1.data(), dd.phi1.data());
        assert_eq!(d.phi0.data(), dd.phi0.data());
    }

    #[test]
    fn dilate_round_trip_on_lattice_compatible_factor() {
        let spec = small_spec();
        let d = make_geodesic_data(spec, 2, &gaussian(0.4, 0.5), &gaussian(0.2, 0.5), &[
            1.0, 0.0,
        ])
        .unwrap();
        let spread = sym_dilate(&d, 2.0).unwrap();
        let back = sym_dilate(&spread, 0.5).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in d.phi0.data().iter().zip(back.phi0.data()) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in d.phi1.data().iter().zip(back.phi1.data()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 1e-8, "round trip error {worst:.3e}");
    }

    #[test]
    fn dilate_preserves_energy_to_discretization_error() {
        let spec = GridSpec::new(512, 16.0 / 512.0, 4).unwrap();
        let d = make_geodesic_data(spec, 2, &gaussian(0.4, 0.65), &gaussian(0.2, 0.6), &[
            1.0, 0.0,
        ])
        .unwrap();
        let e0 = total_energy(&d);
        let e1 = total_energy(&sym_dilate(&d, 2.0).unwrap());
        assert!((e0 - e1).abs() < 1e-3 * e0, "E {e0} vs dilated {e1}");
    }

    #[test]
    fn dilate_reports_support_violation() {
        let spec = small_spec();
        let d = make_geodesic_data(spec, 2, &gaussian(0.4, 1.0), &|_, _| 0.0, &[1.0, 0.0])
            .unwrap();
        match sym_dilate(&d, 8.0) {
            Err(CoreError::SupportViolation { required_cells, .. }) => {
                assert!(required_cells > spec.margin);
            }
            other => panic!("expected support violation, got {other:?}"),
        }
    }

    #[test]
    fn lattice_translation_commutes_with_energy_density() {
        let spec = small_spec();
        let d = make_geodesic_data(spec, 2, &gaussian(0.4, 0.8), &gaussian(0.3, 0.6), &[
            0.0, 1.0,
        ])
        .unwrap();
        let shift = (2.0 * spec.h, -3.0 * spec.h);
        let moved = sym_translate(&d, shift).unwrap();
        let e_then = energy_density(&moved);
        let e_first = energy_density(&d);
        // translate the density by whole cells and compare bitwise
        for iy in spec.interior() {
            for ix in spec.interior() {
                let sx = ix as isize - 2;
                let sy = iy as isize + 3;
                if sx < 0 || sy < 0 || sx >= spec.n as isize || sy >= spec.n as isize {
                    continue;
                }
                if spec.in_margin(sx as usize, sy as usize) || spec.in_margin(ix, iy) {
                    continue;
                }
                let a = e_then.t00[spec.idx(ix, iy)];
                let b = e_first.t00[spec.idx(sx as usize, sy as usize)];
                assert_eq!(a.to_bits(), b.to_bits(), "cell ({ix},{iy})");
            }
        }
    }

    #[test]
    fn translations_compose_additively_on_lattice() {
        let spec = small_spec();
        let d = make_geodesic_data(spec, 2, &gaussian(0.4, 0.7), &gaussian(0.2, 0.6), &[
            1.0, 0.0,
        ])
        .unwrap();
        let h = spec.h;
        let one = sym_translate(&sym_translate(&d, (h, 2.0 * h)).unwrap(), (3.0 * h, -h)).unwrap();
        let two = sym_translate(&d, (4.0 * h, h)).unwrap();
        // cells that transit the margin ring get clamped, so agreement is
        // capped at the support threshold rather than bitwise
        let mut worst = 0.0f64;
        for (a, b) in one.phi0.data().iter().zip(two.phi0.data()) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in one.phi1.data().iter().zip(two.phi1.data()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst <= 2.0 * SUPPORT_TOL, "composition mismatch {worst:.3e}");
    }

    #[test]
    fn rotations_compose_multiplicatively() {
        let spec = small_spec();
        let d = make_geodesic_data(spec, 2, &gaussian(0.4, 0.8), &gaussian(0.2, 0.7), &[
            0.6, 0.8,
        ])
        .unwrap();
        let u1 = LorentzRotation::spatial_rotation(2, 1, 2, 0.31);
        let u2 = LorentzRotation::boost(2, 1, 0.22);
        let mut prod = vec![0.0; 9];
        crate::linalg::matmul(3, u2.matrix(), u1.matrix(), &mut prod);
        let u21 = LorentzRotation::new(2, prod).unwrap();
        let a = sym_rotate(&sym_rotate(&d, &u1), &u2);
        let b = sym_rotate(&d, &u21);
        let mut worst = 0.0f64;
        for (x, y) in a.phi0.data().iter().zip(b.phi0.data()) {
            worst = worst.max((x - y).abs());
        }
        for (x, y) in a.phi1.data().iter().zip(b.phi1.data()) {
            worst = worst.max((x - y).abs());
        }
        assert!(worst < 1e-12, "rotation composition defect {worst:.3e}");
    }

    #[test]
    fn shrink_dilations_compose_multiplicatively() {
        let spec = small_spec();
        let d = make_geodesic_data(spec, 2, &gaussian(0.4, 1.0), &gaussian(0.2, 0.9), &[
            1.0, 0.0,
        ])
        .unwrap();
        let one = sym_dilate(&sym_dilate(&d, 0.5).unwrap(), 0.5).unwrap();
        let two = sym_dilate(&d, 0.25).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in one.phi0.data().iter().zip(two.phi0.data()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 1e-12, "composition mismatch {worst:.3e}");
    }

    #[test]
    fn local_energy_limits() {
        let spec = small_spec();
        let d = make_geodesic_data(spec, 2, &gaussian(0.4, 0.8), &|_, _| 0.0, &[1.0, 0.0])
            .unwrap();
        let e = energy_density(&d);
        let diag = 2.0 * spec.half_width() * std::f64::consts::SQRT_2;
        assert_eq!(local_energy(&e, (0.0, 0.0), diag), e.total());
        // center off the sample lattice so a vanishing radius captures nothing
        assert_eq!(local_energy(&e, (0.37 * spec.h, 0.29 * spec.h), 1e-9), 0.0);
    }

    #[test]
    fn local_energy_scan_recovers_bump_center() {
        let spec = small_spec();
        let center = (1.5, -2.0);
        let u0 = move |x: f64, y: f64| {
            0.4 * (-((x - center.0).powi(2) + (y - center.1).powi(2)) / 0.5).exp()
        };
        let d = make_geodesic_data(spec, 2, &u0, &|_, _| 0.0, &[1.0, 0.0]).unwrap();
        let e = energy_density(&d);
        let mut best = (0.0, 0.0);
        let mut best_val = -1.0;
        for iy in spec.interior() {
            for ix in spec.interior() {
                let c = spec.cell_center(ix, iy);
                let v = local_energy(&e, c, 1.0);
                if v > best_val {
                    best_val = v;
                    best = c;
                }
            }
        }
        assert!((best.0 - center.0).abs() <= spec.h && (best.1 - center.1).abs() <= spec.h);
    }

    #[test]
    fn multibump_single_matches_geodesic() {
        let spec = small_spec();
        let bump = Bump {
            center: (0.5, -0.25),
            scale: 0.8,
            direction: vec![1.0, 0.0],
            amplitude: 0.4,
            velocity_amplitude: 0.2,
        };
        let (mb, warnings) = make_multibump_data(spec, 2, &[bump.clone()]).unwrap();
        assert!(warnings.is_empty());
        let u0 = |x: f64, y: f64| bump.amplitude * bump.profile(x, y);
        let u1 = |x: f64, y: f64| bump.velocity_amplitude * bump.profile(x, y);
        let g = make_geodesic_data(spec, 2, &u0, &u1, &[1.0, 0.0]).unwrap();
        for (a, b) in mb.phi0.data().iter().zip(g.phi0.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in mb.phi1.data().iter().zip(g.phi1.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn far_bumps_keep_their_local_energy() {
        let spec = small_spec();
        let mk = |c: (f64, f64)| Bump {
            center: c,
            scale: 0.5,
            direction: vec![1.0, 0.0],
            amplitude: 0.4,
            velocity_amplitude: 0.0,
        };
        let (single, _) = make_multibump_data(spec, 2, &[mk((0.0, 0.0))]).unwrap();
        let e_single = local_energy(&energy_density(&single), (0.0, 0.0), 2.5);
        let (two, warn) =
            make_multibump_data(spec, 2, &[mk((-3.0, -3.0)), mk((3.0, 3.0))]).unwrap();
        assert!(warn.is_empty());
        let e = energy_density(&two);
        for c in [(-3.0, -3.0), (3.0, 3.0)] {
            let le = local_energy(&e, c, 2.5);
            assert!(le >= (1.0 - 1e-2) * e_single, "{le} vs {e_single}");
        }
        // overlap goes to the warning channel, not failure
        let (_, warn) = make_multibump_data(spec, 2, &[mk((0.0, 0.0)), mk((0.5, 0.0))]).unwrap();
        assert!(!warn.is_empty());
    }

    #[test]
    fn generators_and_symmetries_keep_margin_invariant() {
        let spec = small_spec();
        let d = make_geodesic_data(spec, 2, &gaussian(0.4, 0.7), &gaussian(0.3, 0.6), &[
            0.6, -0.8,
        ])
        .unwrap();
        let variants = vec![
            d.clone(),
            sym_translate(&d, (0.3, -0.7)).unwrap(), // off-lattice
            sym_translate(&d, (spec.h, 0.0)).unwrap(),
            sym_rotate(&d, &LorentzRotation::boost(2, 2, 0.3)),
            sym_dilate(&d, 1.5).unwrap(),
            sym_time_reverse(&d),
        ];
        for v in &variants {
            v.validate().unwrap();
        }
    }

    #[test]
    fn geodesic_generator_rejects_wide_profiles() {
        let spec = small_spec();
        let err = make_geodesic_data(spec, 2, &gaussian(0.5, 4.0), &|_, _| 0.0, &[1.0, 0.0]);
        assert!(matches!(err, Err(CoreError::SupportViolation { .. })));
    }
}
