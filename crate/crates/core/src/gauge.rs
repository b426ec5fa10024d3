//! Caloric gauge frames over a heat ladder, differentiated fields, the
//! equations-of-motion residual checks, and the energy metric.
//!
//! Frames are anchored at the flat end of the ladder (parallel transport of
//! e(infinity) from the base point) and carried backward in s by parallel
//! transport along each cell's flow curve, which realizes a vanishing
//! s-connection directly.  Spatial structure is expressed through gauge
//! links: T_i(x) transports frame coordinates from cell x + h e_i to x, so
//! covariant differences never leave the orthogonal group and the discrete
//! dissipation bookkeeping stays exact.

use crate::grid::{GridSpec, MapField, TangentField};
use crate::heat::HeatLadder;
use crate::hyperbolic::{minkowski_inner, transport_into, OrthonormalFrame};
use crate::linalg;
use crate::quadrature::{ladder_weights, power_law_tail};
use crate::{CoreError, Result};

/// Orthonormal frames per (ladder point, cell).
pub struct FrameField {
    spec: GridSpec,
    m: usize,
    s_values: Vec<f64>,
    /// per ladder slice: cells * m * (m+1), row-major (cell, axis, component)
    frames: Vec<Vec<f64>>,
    e_inf: OrthonormalFrame,
}

impl FrameField {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn s_values(&self) -> &[f64] {
        &self.s_values
    }

    pub fn e_inf(&self) -> &OrthonormalFrame {
        &self.e_inf
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        &self.frames[k]
    }

    /// Axis `a` of the frame at ladder point `k`, cell (ix, iy).
    #[inline]
    pub fn axis<'a>(&'a self, k: usize, ix: usize, iy: usize, a: usize) -> &'a [f64] {
        axis_of(&self.frames[k], &self.spec, self.m, ix, iy, a)
    }

    /// Replace e_inf by e_inf o U^{-1} (U in SO(m)), rotating every frame:
    /// derivative fields transform as psi -> U psi.
    pub fn rotate_coordinates(&self, u: &[f64]) -> FrameField {
        let m = self.m;
        let d = m + 1;
        let frames = self
            .frames
            .iter()
            .map(|slice| {
                let cells = slice.len() / (m * d);
                let mut out = vec![0.0; slice.len()];
                for c in 0..cells {
                    for a in 0..m {
                        let dst = &mut out[(c * m + a) * d..(c * m + a + 1) * d];
                        for b in 0..m {
                            let w = u[a * m + b];
                            let src = &slice[(c * m + b) * d..(c * m + b + 1) * d];
                            for k in 0..d {
                                dst[k] += w * src[k];
                            }
                        }
                    }
                }
                out
            })
            .collect();
        FrameField {
            spec: self.spec,
            m,
            s_values: self.s_values.clone(),
            frames,
            e_inf: self.e_inf.rotate_coordinates(u),
        }
    }
}

#[inline]
fn axis_of<'a>(
    slice: &'a [f64],
    spec: &GridSpec,
    m: usize,
    ix: usize,
    iy: usize,
    a: usize,
) -> &'a [f64] {
    let d = m + 1;
    let o = (spec.idx(ix, iy) * m + a) * d;
    &slice[o..o + d]
}

/// Frame coordinates of an ambient tangent vector v at (ix, iy):
/// out[a] = <v, e_a>.
#[inline]
fn coeffs_at(slice: &[f64], spec: &GridSpec, m: usize, ix: usize, iy: usize, v: &[f64], out: &mut [f64]) {
    for (a, dst) in out.iter_mut().enumerate().take(m) {
        *dst = minkowski_inner(v, axis_of(slice, spec, m, ix, iy, a));
    }
}

/// Build the caloric gauge over a flowed ladder.
///
/// The ladder must be flat at its far end: the frame there is the parallel
/// transport of `e_inf` from the base point, and any residual distance to
/// the flat limit enters only as a global, s-independent rotation that all
/// gauge-invariant quantities ignore.
pub fn construct_caloric_gauge(
    ladder: &HeatLadder,
    e_inf: &OrthonormalFrame,
    flat_tol: f64,
) -> Result<FrameField> {
    let spec = *ladder.spec();
    let m = e_inf.dim();
    let d = m + 1;
    let sup = ladder.final_sup_dist();
    if sup > flat_tol {
        return Err(CoreError::NotFlat {
            sup_dist: sup,
            tol: flat_tol,
            s: *ladder.s_values().last().unwrap(),
        });
    }
    let base = ladder.slice(0).base();
    if e_inf.base().coords() != base {
        return Err(CoreError::InvalidParameter {
            name: "e_inf",
            reason: "frame is not anchored at the ladder base point".into(),
        });
    }

    let cells = spec.cells();
    let kmax = ladder.len() - 1;
    let mut frames: Vec<Vec<f64>> = vec![Vec::new(); ladder.len()];

    // Far end: transport e_inf from the base point to each cell value.
    let mut last = vec![0.0; cells * m * d];
    {
        let phi = ladder.slice(kmax);
        for iy in 0..spec.n {
            for ix in 0..spec.n {
                let p = phi.point(ix, iy);
                let o = (spec.idx(ix, iy) * m) * d;
                for a in 0..m {
                    transport_into(base, p, e_inf.axis(a), &mut last[o + a * d..o + (a + 1) * d]);
                }
                orthonormalize_cell(&mut last[o..o + m * d], p, m);
            }
        }
    }
    frames[kmax] = last;

    // Backward transport along each cell's flow curve, slice by slice.
    for k in (0..kmax).rev() {
        let phi_hi = ladder.slice(k + 1);
        let phi_lo = ladder.slice(k);
        let prev = &frames[k + 1];
        let mut cur = vec![0.0; cells * m * d];
        for iy in 0..spec.n {
            for ix in 0..spec.n {
                let p_hi = phi_hi.point(ix, iy);
                let p_lo = phi_lo.point(ix, iy);
                let o = (spec.idx(ix, iy) * m) * d;
                for a in 0..m {
                    transport_into(
                        p_hi,
                        p_lo,
                        &prev[o + a * d..o + (a + 1) * d],
                        &mut cur[o + a * d..o + (a + 1) * d],
                    );
                }
                orthonormalize_cell(&mut cur[o..o + m * d], p_lo, m);
            }
        }
        frames[k] = cur;
    }

    Ok(FrameField {
        spec,
        m,
        s_values: ladder.s_values().to_vec(),
        frames,
        e_inf: e_inf.clone(),
    })
}

/// One Gram-Schmidt pass in the tangent space at p (transport is an exact
/// isometry, so this only absorbs rounding).
fn orthonormalize_cell(axes: &mut [f64], p: &[f64], m: usize) {
    let d = p.len();
    for a in 0..m {
        let (done, rest) = axes.split_at_mut(a * d);
        let row = &mut rest[..d];
        let g = minkowski_inner(row, p);
        for k in 0..d {
            row[k] += g * p[k];
        }
        for b in 0..a {
            let prev = &done[b * d..(b + 1) * d];
            let g = minkowski_inner(row, prev);
            for k in 0..d {
                row[k] -= g * prev[k];
            }
        }
        let inv = 1.0 / minkowski_inner(row, row).max(1e-300).sqrt();
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
}

// ---------------------------------------------------------------------------
// Per-slice derived quantities
// ---------------------------------------------------------------------------

/// psi_s at ladder point k: frame coordinates of the tension field.
pub fn psi_s_slice(ladder: &HeatLadder, frames: &FrameField, k: usize) -> Vec<f64> {
    let spec = *ladder.spec();
    let m = frames.m;
    let d = m + 1;
    let mut tension = vec![0.0; spec.cells() * d];
    crate::heat::tension_into(ladder.slice(k), &mut tension, ladder.params().jobs);
    let mut out = vec![0.0; spec.cells() * m];
    let slice = frames.slice(k);
    for iy in spec.interior() {
        for ix in spec.interior() {
            let go = spec.idx(ix, iy);
            coeffs_at(
                slice,
                &spec,
                m,
                ix,
                iy,
                &tension[go * d..(go + 1) * d],
                &mut out[go * m..(go + 1) * m],
            );
        }
    }
    out
}

/// Forward-difference derivative fields psi_i(x) = e^{-1} log_phi(x)
/// phi(x + h e_i) / h, for i = 1, 2; cells * 2m, zero where the forward
/// neighbor leaves the grid.
pub fn psi_x_forward_slice(ladder: &HeatLadder, frames: &FrameField, k: usize) -> Vec<f64> {
    let spec = *ladder.spec();
    let m = frames.m;
    let d = m + 1;
    let n = spec.n;
    let phi = ladder.slice(k);
    let slice = frames.slice(k);
    let inv_h = 1.0 / spec.h;
    let mut out = vec![0.0; spec.cells() * 2 * m];
    let mut lg = vec![0.0; d];
    for iy in 0..n {
        for ix in 0..n {
            let go = spec.idx(ix, iy);
            for (i, (jx, jy)) in [(ix + 1, iy), (ix, iy + 1)].into_iter().enumerate() {
                if jx >= n || jy >= n {
                    continue;
                }
                crate::hyperbolic::log_into(phi.point(ix, iy), phi.point(jx, jy), &mut lg);
                let dst = &mut out[(go * 2 + i) * m..(go * 2 + i + 1) * m];
                coeffs_at(slice, &spec, m, ix, iy, &lg, dst);
                for v in dst.iter_mut() {
                    *v *= inv_h;
                }
            }
        }
    }
    out
}

/// Centered derivative fields psi_i(x) = e^{-1} (log to forward neighbor
/// minus log to backward neighbor) / 2h; used by the O(h^2) identity checks.
pub fn psi_x_centered_slice(ladder: &HeatLadder, frames: &FrameField, k: usize) -> Vec<f64> {
    let spec = *ladder.spec();
    let m = frames.m;
    let d = m + 1;
    let n = spec.n;
    let phi = ladder.slice(k);
    let slice = frames.slice(k);
    let inv_2h = 1.0 / (2.0 * spec.h);
    let mut out = vec![0.0; spec.cells() * 2 * m];
    let mut lg = vec![0.0; d];
    let mut diff = vec![0.0; d];
    for iy in 1..n - 1 {
        for ix in 1..n - 1 {
            let go = spec.idx(ix, iy);
            let p = phi.point(ix, iy);
            for (i, ((fx, fy), (bx, by))) in [
                ((ix + 1, iy), (ix - 1, iy)),
                ((ix, iy + 1), (ix, iy - 1)),
            ]
            .into_iter()
            .enumerate()
            {
                crate::hyperbolic::log_into(p, phi.point(fx, fy), &mut diff);
                crate::hyperbolic::log_into(p, phi.point(bx, by), &mut lg);
                for kk in 0..d {
                    diff[kk] -= lg[kk];
                }
                let dst = &mut out[(go * 2 + i) * m..(go * 2 + i + 1) * m];
                coeffs_at(slice, &spec, m, ix, iy, &diff, dst);
                for v in dst.iter_mut() {
                    *v *= inv_2h;
                }
            }
        }
    }
    out
}

/// Gauge links at ladder point k: T_i(x) transports frame coordinates from
/// cell x + h e_i to x.  Layout: cells * 2 * m * m (direction-major).
pub fn links_slice(ladder: &HeatLadder, frames: &FrameField, k: usize) -> Vec<f64> {
    let spec = *ladder.spec();
    let m = frames.m;
    let d = m + 1;
    let n = spec.n;
    let phi = ladder.slice(k);
    let slice = frames.slice(k);
    let mut out = vec![0.0; spec.cells() * 2 * m * m];
    // identity links where the neighbor is missing
    for c in 0..spec.cells() {
        for i in 0..2 {
            for a in 0..m {
                out[((c * 2 + i) * m + a) * m + a] = 1.0;
            }
        }
    }
    let mut moved = vec![0.0; d];
    for iy in 0..n {
        for ix in 0..n {
            let go = spec.idx(ix, iy);
            let p = phi.point(ix, iy);
            for (i, (jx, jy)) in [(ix + 1, iy), (ix, iy + 1)].into_iter().enumerate() {
                if jx >= n || jy >= n {
                    continue;
                }
                let q = phi.point(jx, jy);
                let t = &mut out[(go * 2 + i) * m * m..(go * 2 + i + 1) * m * m];
                for b in 0..m {
                    transport_into(q, p, axis_of(slice, &spec, m, jx, jy, b), &mut moved);
                    for a in 0..m {
                        // column b of T = transported e_b in x-frame coords
                        t[a * m + b] = minkowski_inner(&moved, axis_of(slice, &spec, m, ix, iy, a));
                    }
                }
            }
        }
    }
    out
}

/// Cell-centered connection matrices A_i(x) in so(m) from the forward and
/// backward links through the inverse Cayley transform; cells * 2 * m * m.
pub fn connection_slice(spec: &GridSpec, m: usize, links: &[f64]) -> Vec<f64> {
    let n = spec.n;
    let mm = m * m;
    let mut out = vec![0.0; spec.cells() * 2 * mm];
    let inv_2h = 1.0 / (2.0 * spec.h);
    for iy in 1..n - 1 {
        for ix in 1..n - 1 {
            let go = spec.idx(ix, iy);
            for i in 0..2 {
                let fwd = &links[(go * 2 + i) * mm..(go * 2 + i + 1) * mm];
                let (bx, by) = if i == 0 { (ix - 1, iy) } else { (ix, iy - 1) };
                let gb = spec.idx(bx, by);
                let bwd_link = &links[(gb * 2 + i) * mm..(gb * 2 + i + 1) * mm];
                // transport x-h e_i -> x is the transpose of the stored link
                let mut bwd = vec![0.0; mm];
                for a in 0..m {
                    for b in 0..m {
                        bwd[a * m + b] = bwd_link[b * m + a];
                    }
                }
                let ca_f = linalg::cayley_inv(m, fwd);
                let ca_b = linalg::cayley_inv(m, &bwd);
                let dst = &mut out[(go * 2 + i) * mm..(go * 2 + i + 1) * mm];
                for kk in 0..mm {
                    dst[kk] = (ca_f[kk] - ca_b[kk]) * inv_2h;
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Differentiated fields
// ---------------------------------------------------------------------------

/// The caloric-gauge representation: R^m-valued derivative fields and so(m)
/// connection fields per (ladder point, cell).
pub struct DifferentiatedFields {
    pub spec: GridSpec,
    pub m: usize,
    pub s_values: Vec<f64>,
    /// per slice: cells * m
    pub psi_s: Vec<Vec<f64>>,
    /// per slice: cells * 2m, forward differences (exact edge bookkeeping)
    pub psi_x: Vec<Vec<f64>>,
    /// per slice: cells * m; s = 0 from phi1, s > 0 filled by the covariant
    /// extension (see `psi_t_mode`)
    pub psi_t: Vec<Option<Vec<f64>>>,
    /// per slice: cells * 2 * m * m, cell-centered
    pub a_x: Vec<Vec<f64>>,
    /// per slice when a time direction is available: cells * m * m
    pub a_t: Vec<Option<Vec<f64>>>,
    pub psi_t_mode: &'static str,
}

impl DifferentiatedFields {
    /// ||psi_x(0)||^2 + ||psi_t(0)||^2 over the grid (equals 2E).
    pub fn energy_norms_at_zero(&self) -> (f64, f64) {
        let area = self.spec.cell_area();
        let gx = area * self.psi_x[0].iter().map(|v| v * v).sum::<f64>();
        let gt = self.psi_t[0]
            .as_ref()
            .map(|v| area * v.iter().map(|x| x * x).sum::<f64>())
            .unwrap_or(0.0);
        (gx, gt)
    }
}

/// Assemble the differentiated fields of a data pair over a flowed ladder.
/// psi_t is populated at s = 0 only; the covariant extension in the
/// spectral module fills the rest.
pub fn derivative_fields(
    ladder: &HeatLadder,
    frames: &FrameField,
    phi1: &TangentField,
) -> Result<DifferentiatedFields> {
    let spec = *ladder.spec();
    let m = frames.m;
    if frames.s_values.len() != ladder.len() {
        return Err(CoreError::DimensionMismatch {
            expected: ladder.len(),
            got: frames.s_values.len(),
        });
    }
    let mut psi_s = Vec::with_capacity(ladder.len());
    let mut psi_x = Vec::with_capacity(ladder.len());
    let mut a_x = Vec::with_capacity(ladder.len());
    for k in 0..ladder.len() {
        psi_s.push(psi_s_slice(ladder, frames, k));
        psi_x.push(psi_x_forward_slice(ladder, frames, k));
        let links = links_slice(ladder, frames, k);
        a_x.push(connection_slice(&spec, m, &links));
    }
    let mut psi_t = vec![None; ladder.len()];
    psi_t[0] = Some(psi_t_zero_slice(ladder, frames, phi1));
    Ok(DifferentiatedFields {
        spec,
        m,
        s_values: ladder.s_values().to_vec(),
        psi_s,
        psi_x,
        psi_t,
        a_x,
        a_t: vec![None; ladder.len()],
        psi_t_mode: "initial-slice",
    })
}

/// psi_t(0) = e(0)^{-1} phi1.
pub fn psi_t_zero_slice(ladder: &HeatLadder, frames: &FrameField, phi1: &TangentField) -> Vec<f64> {
    let spec = *ladder.spec();
    let m = frames.m;
    let slice = frames.slice(0);
    let mut out = vec![0.0; spec.cells() * m];
    for iy in 0..spec.n {
        for ix in 0..spec.n {
            let go = spec.idx(ix, iy);
            coeffs_at(
                slice,
                &spec,
                m,
                ix,
                iy,
                phi1.vec_at(&spec, ix, iy),
                &mut out[go * m..(go + 1) * m],
            );
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Identity checks
// ---------------------------------------------------------------------------

fn l2_of_cells(spec: &GridSpec, sq_per_cell: impl Iterator<Item = f64>) -> f64 {
    (spec.cell_area() * sq_per_cell.sum::<f64>()).sqrt()
}

/// Covariant centered difference of an R^m field v (cells * 2m layout is the
/// centered psi; this helper differentiates a general per-cell R^m field).
fn covariant_centered_diff(
    spec: &GridSpec,
    m: usize,
    links: &[f64],
    field: &[f64],
    dir: usize,
    ix: usize,
    iy: usize,
    stride: usize,
    offset: usize,
    out: &mut [f64],
) {
    let n = spec.n;
    let (fx, fy) = if dir == 0 { (ix + 1, iy) } else { (ix, iy + 1) };
    let (bx, by) = if dir == 0 { (ix - 1, iy) } else { (ix, iy - 1) };
    let go = spec.idx(ix, iy);
    let gf = spec.idx(fx, fy);
    let gb = spec.idx(bx, by);
    let mm = m * m;
    let t_fwd = &links[(go * 2 + dir) * mm..(go * 2 + dir + 1) * mm];
    let t_bwd_link = &links[(gb * 2 + dir) * mm..(gb * 2 + dir + 1) * mm];
    let vf = &field[gf * stride + offset..gf * stride + offset + m];
    let vb = &field[gb * stride + offset..gb * stride + offset + m];
    let inv_2h = 1.0 / (2.0 * spec.h);
    for a in 0..m {
        let mut fwd = 0.0;
        let mut bwd = 0.0;
        for b in 0..m {
            fwd += t_fwd[a * m + b] * vf[b];
            bwd += t_bwd_link[b * m + a] * vb[b]; // transpose transports backward
        }
        out[a] = (fwd - bwd) * inv_2h;
    }
    let _ = n;
}

/// Zero-torsion residual ||D_1 psi_2 - D_2 psi_1|| per ladder point,
/// with centered fields and centered covariant differences.
pub fn check_torsion(ladder: &HeatLadder, frames: &FrameField) -> Vec<(f64, f64)> {
    let spec = *ladder.spec();
    let m = frames.m;
    let mut out = Vec::with_capacity(ladder.len());
    for k in 0..ladder.len() {
        let links = links_slice(ladder, frames, k);
        let psi_c = psi_x_centered_slice(ladder, frames, k);
        let mut acc = 0.0;
        let mut d1p2 = vec![0.0; m];
        let mut d2p1 = vec![0.0; m];
        for iy in spec.interior() {
            for ix in spec.interior() {
                covariant_centered_diff(&spec, m, &links, &psi_c, 0, ix, iy, 2 * m, m, &mut d1p2);
                covariant_centered_diff(&spec, m, &links, &psi_c, 1, ix, iy, 2 * m, 0, &mut d2p1);
                for a in 0..m {
                    let r = d1p2[a] - d2p1[a];
                    acc += r * r;
                }
            }
        }
        out.push((ladder.s_values()[k], l2_of_cells(&spec, std::iter::once(acc))));
    }
    out
}

/// Curvature residual ||d_1 A_2 - d_2 A_1 + [A_1, A_2] + psi_1 ^ psi_2||
/// per ladder point (Frobenius norm per cell, centered stencils).
pub fn check_curvature(ladder: &HeatLadder, frames: &FrameField) -> Vec<(f64, f64)> {
    let spec = *ladder.spec();
    let m = frames.m;
    let mm = m * m;
    let inv_2h = 1.0 / (2.0 * spec.h);
    let mut out = Vec::with_capacity(ladder.len());
    for k in 0..ladder.len() {
        let links = links_slice(ladder, frames, k);
        let a_field = connection_slice(&spec, m, &links);
        let psi_c = psi_x_centered_slice(ladder, frames, k);
        let mut acc = 0.0;
        let mut comm = vec![0.0; mm];
        for iy in spec.interior() {
            for ix in spec.interior() {
                let go = spec.idx(ix, iy);
                let gxp = spec.idx(ix + 1, iy);
                let gxm = spec.idx(ix - 1, iy);
                let gyp = spec.idx(ix, iy + 1);
                let gym = spec.idx(ix, iy - 1);
                let a1 = &a_field[(go * 2) * mm..(go * 2 + 1) * mm];
                let a2 = &a_field[(go * 2 + 1) * mm..(go * 2 + 2) * mm];
                linalg::matmul(m, a1, a2, &mut comm);
                let p1 = &psi_c[go * 2 * m..(go * 2 + 1) * m];
                let p2 = &psi_c[(go * 2 + 1) * m..(go * 2 + 2) * m];
                for r in 0..m {
                    for c in 0..mm / m {
                        let idx = r * m + c;
                        // d_1 A_2 - d_2 A_1 (centered)
                        let da = (a_field[(gxp * 2 + 1) * mm + idx]
                            - a_field[(gxm * 2 + 1) * mm + idx])
                            * inv_2h
                            - (a_field[(gyp * 2) * mm + idx] - a_field[(gym * 2) * mm + idx])
                                * inv_2h;
                        let commutator = comm[idx] - comm[c * m + r];
                        // here [A1,A2]_{rc} = (A1 A2 - A2 A1)_{rc}; using the
                        // skewness of comm's transpose structure
                        let wedge = p1[r] * p2[c] - p2[r] * p1[c];
                        let res = da + commutator + wedge;
                        acc += res * res;
                    }
                }
            }
        }
        out.push((ladder.s_values()[k], l2_of_cells(&spec, std::iter::once(acc))));
    }
    out
}

/// Heat-flow residual ||psi_s - D_i psi_i|| per ladder point, with the
/// centered independent stencil (O(h^2), order-measurable).
pub fn check_heatflow_eq(ladder: &HeatLadder, frames: &FrameField) -> Vec<(f64, f64)> {
    let spec = *ladder.spec();
    let m = frames.m;
    let mut out = Vec::with_capacity(ladder.len());
    for k in 0..ladder.len() {
        let links = links_slice(ladder, frames, k);
        let psi_c = psi_x_centered_slice(ladder, frames, k);
        let psi_s = psi_s_slice(ladder, frames, k);
        let mut acc = 0.0;
        let mut d1 = vec![0.0; m];
        let mut d2 = vec![0.0; m];
        for iy in spec.interior() {
            for ix in spec.interior() {
                let go = spec.idx(ix, iy);
                covariant_centered_diff(&spec, m, &links, &psi_c, 0, ix, iy, 2 * m, 0, &mut d1);
                covariant_centered_diff(&spec, m, &links, &psi_c, 1, ix, iy, 2 * m, m, &mut d2);
                for a in 0..m {
                    let r = psi_s[go * m + a] - d1[a] - d2[a];
                    acc += r * r;
                }
            }
        }
        out.push((ladder.s_values()[k], l2_of_cells(&spec, std::iter::once(acc))));
    }
    out
}

/// Heat-flow residual with the compatible stencil (backward covariant
/// difference of forward psi): an exact lattice identity, reported as the
/// sanity route (rounding-level for any data).
pub fn check_heatflow_identity(ladder: &HeatLadder, frames: &FrameField) -> Vec<(f64, f64)> {
    let spec = *ladder.spec();
    let m = frames.m;
    let mm = m * m;
    let inv_h = 1.0 / spec.h;
    let mut out = Vec::with_capacity(ladder.len());
    for k in 0..ladder.len() {
        let links = links_slice(ladder, frames, k);
        let psi_f = psi_x_forward_slice(ladder, frames, k);
        let psi_s = psi_s_slice(ladder, frames, k);
        let mut acc = 0.0;
        for iy in spec.interior() {
            for ix in spec.interior() {
                let go = spec.idx(ix, iy);
                for a in 0..m {
                    let mut div = 0.0;
                    for dir in 0..2 {
                        let (bx, by) = if dir == 0 { (ix - 1, iy) } else { (ix, iy - 1) };
                        let gb = spec.idx(bx, by);
                        let own = psi_f[(go * 2 + dir) * m + a];
                        let t_b = &links[(gb * 2 + dir) * mm..(gb * 2 + dir + 1) * mm];
                        let mut back = 0.0;
                        for b in 0..m {
                            back += t_b[b * m + a] * psi_f[(gb * 2 + dir) * m + b];
                        }
                        div += (own - back) * inv_h;
                    }
                    let r = psi_s[go * m + a] - div;
                    acc += r * r;
                }
            }
        }
        out.push((ladder.s_values()[k], l2_of_cells(&spec, std::iter::once(acc))));
    }
    out
}

/// Discrete A_s residual at interior ladder points: the skew frame
/// components of the centered s-derivative of the frames,
/// (A_s)_{ab}(s_k) = < (e_a(s_{k+1}) - e_a(s_{k-1})) / (s_{k+1} - s_{k-1}),
/// e_b(s_k) >.  The construction transports over single intervals, so this
/// two-interval stencil sees the holonomy between consecutive chords and is
/// a genuine (second-order small, order-measurable) consistency check of
/// A_s = 0; it vanishes to rounding in the abelian case where all hops lie
/// on one geodesic.
pub fn check_a_s(ladder: &HeatLadder, frames: &FrameField) -> Vec<(f64, f64)> {
    let spec = *ladder.spec();
    let m = frames.m;
    let d = m + 1;
    let s = ladder.s_values();
    let mut out = Vec::with_capacity(ladder.len().saturating_sub(2));
    for k in 1..ladder.len() - 1 {
        let ds2 = s[k + 1] - s[k - 1];
        let fr_lo = frames.slice(k - 1);
        let fr_md = frames.slice(k);
        let fr_hi = frames.slice(k + 1);
        let mut acc = 0.0;
        let mut dd = vec![0.0; d];
        for iy in spec.interior() {
            for ix in spec.interior() {
                for a in 0..m {
                    let lo = axis_of(fr_lo, &spec, m, ix, iy, a);
                    let hi = axis_of(fr_hi, &spec, m, ix, iy, a);
                    for kk in 0..d {
                        dd[kk] = (hi[kk] - lo[kk]) / ds2;
                    }
                    for b in 0..m {
                        if b == a {
                            continue;
                        }
                        let ab = minkowski_inner(&dd, axis_of(fr_md, &spec, m, ix, iy, b));
                        acc += 0.5 * ab * ab;
                    }
                }
            }
        }
        out.push((s[k], l2_of_cells(&spec, std::iter::once(acc))));
    }
    out
}

/// Sup-norm size reports for the derivative fields:
/// (sup_s s^{1/2} ||psi_x(s)||_inf, integral of ||psi_x(s)||_inf^2 ds).
pub fn parabolic_size_report(ladder: &HeatLadder, frames: &FrameField) -> (f64, f64) {
    let _spec = *ladder.spec();
    let m = frames.m;
    let s = ladder.s_values();
    let mut sup_scaled = 0.0f64;
    let mut sups = Vec::with_capacity(s.len());
    for k in 0..ladder.len() {
        let psi = psi_x_centered_slice(ladder, frames, k);
        let mut sup = 0.0f64;
        for c in psi.chunks(2 * m) {
            let mut norm2 = 0.0;
            for v in c {
                norm2 += v * v;
            }
            sup = sup.max(norm2.sqrt());
        }
        sups.push(sup * sup);
        sup_scaled = sup_scaled.max(s[k].sqrt() * sup);
    }
    let w = ladder_weights(s);
    let integral: f64 = w.iter().zip(&sups).map(|(a, b)| a * b).sum();
    (sup_scaled, integral)
}

// ---------------------------------------------------------------------------
// Connection via the integral route and the energy metric
// ---------------------------------------------------------------------------

/// A_x at each ladder point by quadrature of psi_s ^ psi_x over (s, inf),
/// with the power-law tail policy; returns per-point sup discrepancy against
/// the link-based route.  Uses centered psi_x for the wedge.
pub fn connection_integral_check(ladder: &HeatLadder, frames: &FrameField) -> Vec<(f64, f64)> {
    let spec = *ladder.spec();
    let m = frames.m;
    let mm = m * m;
    let cells = spec.cells();
    let s = ladder.s_values();
    let kn = s.len();
    // wedge integrand per slice: cells * 2 * m * m
    let mut wedges: Vec<Vec<f64>> = Vec::with_capacity(kn);
    let mut direct: Vec<Vec<f64>> = Vec::with_capacity(kn);
    let mut wedge_norm: Vec<f64> = Vec::with_capacity(kn);
    for k in 0..kn {
        let psi_s = psi_s_slice(ladder, frames, k);
        let psi_c = psi_x_centered_slice(ladder, frames, k);
        let links = links_slice(ladder, frames, k);
        direct.push(connection_slice(&spec, m, &links));
        let mut w = vec![0.0; cells * 2 * mm];
        let mut norm = 0.0;
        for c in 0..cells {
            for i in 0..2 {
                for a in 0..m {
                    for b in 0..m {
                        let v = psi_s[c * m + a] * psi_c[(c * 2 + i) * m + b]
                            - psi_s[c * m + b] * psi_c[(c * 2 + i) * m + a];
                        w[(c * 2 + i) * mm + a * m + b] = v;
                        norm += v * v;
                    }
                }
            }
        }
        wedge_norm.push((spec.cell_area() * norm).sqrt());
        wedges.push(w);
    }
    // cumulative quadrature from the top: A(s_k) = int_{s_k}^{inf}
    let mut acc = vec![0.0; cells * 2 * mm];
    // tail beyond s_max, distributed proportionally to the final integrand
    let tail = power_law_tail(s, &wedge_norm, 1.0);
    let last_norm = wedge_norm[kn - 1].max(1e-300);
    for (i, v) in wedges[kn - 1].iter().enumerate() {
        acc[i] = v / last_norm * tail;
    }
    let mut out = vec![(0.0, 0.0); kn];
    out[kn - 1] = (
        s[kn - 1],
        sup_matrix_diff(&acc, &direct[kn - 1], spec.margin, &spec, m),
    );
    for k in (0..kn - 1).rev() {
        let half = 0.5 * (s[k + 1] - s[k]);
        for i in 0..acc.len() {
            acc[i] += half * (wedges[k][i] + wedges[k + 1][i]);
        }
        out[k] = (s[k], sup_matrix_diff(&acc, &direct[k], spec.margin, &spec, m));
    }
    out
}

fn sup_matrix_diff(a: &[f64], b: &[f64], margin: usize, spec: &GridSpec, m: usize) -> f64 {
    let mm = m * m;
    let mut worst = 0.0f64;
    for iy in margin..spec.n - margin {
        for ix in margin..spec.n - margin {
            let go = spec.idx(ix, iy);
            for i in 0..2 {
                let o = (go * 2 + i) * mm;
                let mut fr = 0.0;
                for kk in 0..mm {
                    let d = a[o + kk] - b[o + kk];
                    fr += d * d;
                }
                worst = worst.max(fr.sqrt());
            }
        }
    }
    worst
}

/// The energy-metric payload of one differentiated field: psi_s per ladder
/// point and psi_t at s = 0.  `psi_s_tail` carries the exact remaining
/// psi_s mass beyond s_max (the Dirichlet energy of the final heat slice);
/// it completes d(Psi, 0)^2 to the full energy.
pub struct MetricField<'a> {
    pub s_values: &'a [f64],
    pub psi_s: &'a [Vec<f64>],
    pub psi_t0: &'a [f64],
    pub spec: &'a GridSpec,
    pub m: usize,
    pub psi_s_tail: f64,
}

impl<'a> MetricField<'a> {
    pub fn of(f: &'a DifferentiatedFields) -> Result<Self> {
        let psi_t0 = f.psi_t[0].as_ref().ok_or(CoreError::MissingTimeData {
            context: "energy metric needs psi_t(0)",
        })?;
        Ok(Self {
            s_values: &f.s_values,
            psi_s: &f.psi_s,
            psi_t0,
            spec: &f.spec,
            m: f.m,
            psi_s_tail: 0.0,
        })
    }

    /// Attach the exact remainder from the ladder's final Dirichlet energy.
    pub fn with_tail(mut self, dirichlet_at_s_max: f64) -> Self {
        self.psi_s_tail = dirichlet_at_s_max;
        self
    }
}

/// Energy metric between two differentiated fields:
/// sqrt( int ||delta psi_s||^2 ds + 1/2 ||delta psi_t(0)||^2 ),
/// quadratured over the ladder with the power-law tail policy.  When
/// `quotient` is set, the distance is minimized over a global rotation
/// U in SO(m) acting on the second field (orthogonal Procrustes on the
/// cross-correlation, determinant-corrected).
pub fn energy_metric(f1: &MetricField, f2: &MetricField, quotient: bool) -> Result<f64> {
    if f1.spec != f2.spec || f1.m != f2.m || f1.s_values.len() != f2.s_values.len() {
        return Err(CoreError::DimensionMismatch {
            expected: f1.s_values.len(),
            got: f2.s_values.len(),
        });
    }
    let m = f1.m;
    let area = f1.spec.cell_area();
    let w = ladder_weights(f1.s_values);
    let rotation = if quotient {
        let mut cross = vec![0.0; m * m];
        for k in 0..f1.s_values.len() {
            let (a, b) = (&f1.psi_s[k], &f2.psi_s[k]);
            for c in 0..a.len() / m {
                for r in 0..m {
                    for q in 0..m {
                        cross[r * m + q] += w[k] * area * a[c * m + r] * b[c * m + q];
                    }
                }
            }
        }
        for (c, (x, y)) in f1
            .psi_t0
            .chunks(m)
            .zip(f2.psi_t0.chunks(m))
            .enumerate()
        {
            let _ = c;
            for r in 0..m {
                for q in 0..m {
                    cross[r * m + q] += 0.5 * area * x[r] * y[q];
                }
            }
        }
        Some(linalg::procrustes_rotation(m, &cross))
    } else {
        None
    };

    let mut per_s: Vec<f64> = Vec::with_capacity(f1.s_values.len());
    let mut rotated = vec![0.0; m];
    for k in 0..f1.s_values.len() {
        let (a, b) = (&f1.psi_s[k], &f2.psi_s[k]);
        let mut acc = 0.0;
        for c in 0..a.len() / m {
            let bb = &b[c * m..(c + 1) * m];
            let aref = &a[c * m..(c + 1) * m];
            let bslice: &[f64] = if let Some(u) = &rotation {
                linalg::matvec(m, u, bb, &mut rotated);
                &rotated
            } else {
                bb
            };
            for r in 0..m {
                let d = aref[r] - bslice[r];
                acc += d * d;
            }
        }
        per_s.push(area * acc);
    }
    let mut total: f64 = w.iter().zip(&per_s).map(|(a, b)| a * b).sum();
    // generic pairs have no exact remainder; extrapolate the difference
    total += power_law_tail(f1.s_values, &per_s, 1.0);
    let mut t_acc = 0.0;
    for (x, y) in f1.psi_t0.chunks(m).zip(f2.psi_t0.chunks(m)) {
        let yb: &[f64] = if let Some(u) = &rotation {
            linalg::matvec(m, u, y, &mut rotated);
            &rotated
        } else {
            y
        };
        for r in 0..m {
            let d = x[r] - yb[r];
            t_acc += d * d;
        }
    }
    total += 0.5 * area * t_acc;
    Ok(total.max(0.0).sqrt())
}

/// d(Psi, 0)^2: the energy of a differentiated field (quadrature plus the
/// exact psi_s remainder plus the psi_t(0) half-mass).
pub fn field_energy(f: &MetricField) -> f64 {
    let area = f.spec.cell_area();
    let w = ladder_weights(f.s_values);
    let per_s: Vec<f64> = f
        .psi_s
        .iter()
        .map(|v| area * v.iter().map(|x| x * x).sum::<f64>())
        .collect();
    let mut total: f64 = w.iter().zip(&per_s).map(|(a, b)| a * b).sum();
    total += f.psi_s_tail;
    total += 0.5 * area * f.psi_t0.iter().map(|x| x * x).sum::<f64>();
    total
}

// ---------------------------------------------------------------------------
// Wave tension
// ---------------------------------------------------------------------------

/// Gauge data of one time slice at s = 0: the map slice, the caloric frame
/// at s = 0, and psi_t(0) in that frame.
pub struct TimeSliceGauge {
    pub phi: MapField,
    pub frame0: Vec<f64>,
    pub psi_t0: Vec<f64>,
}

impl TimeSliceGauge {
    pub fn new(ladder: &HeatLadder, frames: &FrameField, phi1: &TangentField) -> Self {
        Self {
            phi: ladder.slice(0).clone(),
            frame0: frames.slice(0).to_vec(),
            psi_t0: psi_t_zero_slice(ladder, frames, phi1),
        }
    }
}

/// The wave-tension field w = -D_t psi_t + D_i psi_i at s = 0, from gauges
/// at three consecutive times (t - dt, t, t + dt).  The time-covariant
/// derivative uses frame transport between the slices; the spatial
/// divergence is the frame representation of the tension field.  Returns
/// the per-cell values (cells * m).
pub fn wave_tension(
    before: &TimeSliceGauge,
    center: &TimeSliceGauge,
    after: &TimeSliceGauge,
    dt: f64,
) -> Result<Vec<f64>> {
    let spec = *center.phi.spec();
    let m = center.psi_t0.len() / spec.cells();
    let d = m + 1;
    if before.psi_t0.len() != center.psi_t0.len() || after.psi_t0.len() != center.psi_t0.len() {
        return Err(CoreError::MissingTimeData {
            context: "wave tension needs three compatible time slices",
        });
    }
    let mut tension = vec![0.0; spec.cells() * d];
    crate::heat::tension_into(&center.phi, &mut tension, 1);
    let mut out = vec![0.0; spec.cells() * m];
    let mut moved = vec![0.0; d];
    let inv_2dt = 1.0 / (2.0 * dt);
    for iy in spec.interior() {
        for ix in spec.interior() {
            let go = spec.idx(ix, iy);
            let p = center.phi.point(ix, iy);
            // time links: coefficients of the neighbors' frames in the
            // center frame after transport to p
            let mut dtpsi = vec![0.0; m];
            for (sign, side) in [(1.0, after), (-1.0, before)] {
                let q = side.phi.point(ix, iy);
                // transported psi_t of the side slice, expressed at p:
                // sum_b psi_b PT(e_b(side))
                let mut amb = vec![0.0; d];
                for b in 0..m {
                    let e_b = axis_of(&side.frame0, &spec, m, ix, iy, b);
                    transport_into(q, p, e_b, &mut moved);
                    let coef = side.psi_t0[go * m + b];
                    for kk in 0..d {
                        amb[kk] += coef * moved[kk];
                    }
                }
                for a in 0..m {
                    let e_a = axis_of(&center.frame0, &spec, m, ix, iy, a);
                    dtpsi[a] += sign * minkowski_inner(&amb, e_a) * inv_2dt;
                }
            }
            for a in 0..m {
                let e_a = axis_of(&center.frame0, &spec, m, ix, iy, a);
                let div = minkowski_inner(&tension[go * d..(go + 1) * d], e_a);
                out[go * m + a] = -dtpsi[a] + div;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_geodesic_data, make_multibump_data, Bump, DataPair, GridSpec};
    use crate::heat::{heat_flow, LadderParams};
    use crate::hyperbolic::standard_frame;
    use crate::linalg::cayley;

    fn spec_n(n: usize) -> GridSpec {
        GridSpec::new(n, 16.0 / n as f64, 4).unwrap()
    }

    fn gaussian(amp: f64, sigma: f64) -> impl Fn(f64, f64) -> f64 {
        move |x, y| amp * (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
    }

    fn generic_data(spec: GridSpec) -> DataPair {
        let bumps = vec![
            Bump {
                center: (-1.6, -0.9),
                scale: 0.7,
                direction: vec![1.0, 0.0],
                amplitude: 0.45,
                velocity_amplitude: 0.2,
            },
            Bump {
                center: (1.4, 1.1),
                scale: 0.6,
                direction: vec![0.0, 1.0],
                amplitude: 0.4,
                velocity_amplitude: -0.15,
            },
        ];
        make_multibump_data(spec, 2, &bumps).unwrap().0
    }

    fn pipeline(_spec: GridSpec, d: &DataPair, s_max: f64, rho: f64) -> (HeatLadder, FrameField) {
        let mut params = LadderParams::new(s_max).with_jobs(2);
        params.ratio = rho;
        let ladder = heat_flow(&d.phi0, &params).unwrap();
        let frames = construct_caloric_gauge(&ladder, &standard_frame(2), 1.0).unwrap();
        (ladder, frames)
    }

    #[test]
    fn constant_map_gives_constant_frames_and_zero_fields() {
        let spec = spec_n(32);
        let d = DataPair::constant(spec, &crate::hyperbolic::HyperbolicPoint::basepoint(2));
        let (ladder, frames) = pipeline(spec, &d, 0.5, 1.3);
        let e_inf = standard_frame(2);
        for k in 0..ladder.len() {
            for iy in 0..spec.n {
                for ix in 0..spec.n {
                    for a in 0..2 {
                        assert_eq!(frames.axis(k, ix, iy, a), e_inf.axis(a));
                    }
                }
            }
            assert!(psi_s_slice(&ladder, &frames, k).iter().all(|v| *v == 0.0));
            assert!(psi_x_forward_slice(&ladder, &frames, k)
                .iter()
                .all(|v| *v == 0.0));
        }
    }

    #[test]
    fn abelian_reduction_has_flat_connection() {
        // geodesic data along e1: the parallel frame family, A = 0
        let spec = spec_n(48);
        let d = make_geodesic_data(spec, 2, &gaussian(0.5, 0.9), &gaussian(0.2, 0.8), &[
            1.0, 0.0,
        ])
        .unwrap();
        let (ladder, frames) = pipeline(spec, &d, 1.0, 1.2);
        for k in [0, ladder.len() / 2, ladder.len() - 1] {
            let links = links_slice(&ladder, &frames, k);
            let a = connection_slice(&spec, 2, &links);
            let sup = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            assert!(sup < 1e-8, "abelian A_x sup {sup:.3e} at k={k}");
        }
        // torsion and curvature residuals vanish to rounding in this case
        for (_, r) in check_torsion(&ladder, &frames) {
            assert!(r < 1e-8, "abelian torsion {r:.3e}");
        }
        for (_, r) in check_curvature(&ladder, &frames) {
            assert!(r < 1e-8, "abelian curvature {r:.3e}");
        }
        // the compatible heat-flow stencil is an exact lattice identity
        for (_, r) in check_heatflow_identity(&ladder, &frames) {
            assert!(r < 1e-10, "identity-route heatflow {r:.3e}");
        }
        // psi_s matches the scalar Laplacian of the geodesic coordinate
        let psi_s = psi_s_slice(&ladder, &frames, 0);
        let basis = crate::scalar::SineBasis::for_grid(spec);
        let c0 = basis.forward(&crate::scalar::ScalarField::from_profile(
            spec,
            &gaussian(0.5, 0.9),
        ));
        let n_int = basis.n_interior();
        let mut lap = crate::scalar::SpectralCoeffs::zeros(n_int);
        for k in 0..n_int {
            for j in 0..n_int {
                lap.c[k * n_int + j] = -basis.eigenvalue(j, k) * c0.c[k * n_int + j];
            }
        }
        let lap_phys = basis.inverse(&lap);
        let mut worst = 0.0f64;
        for iy in spec.interior() {
            for ix in spec.interior() {
                let go = spec.idx(ix, iy);
                worst = worst.max((psi_s[go * 2] - lap_phys.data[go]).abs());
                worst = worst.max(psi_s[go * 2 + 1].abs());
            }
        }
        assert!(worst < 1e-9, "psi_s vs scalar Laplacian sup {worst:.3e}");
    }

    #[test]
    fn energy_norm_identity_at_s_zero() {
        let spec = spec_n(48);
        let d = generic_data(spec);
        let (ladder, frames) = pipeline(spec, &d, 0.2, 1.3);
        let fields = derivative_fields(&ladder, &frames, &d.phi1).unwrap();
        let (gx, gt) = fields.energy_norms_at_zero();
        let e = crate::grid::total_energy(&d);
        assert!(
            (gx + gt - 2.0 * e).abs() < 1e-6 * e,
            "norms {gx} + {gt} vs 2E = {}",
            2.0 * e
        );
    }

    #[test]
    fn identity_residuals_converge_at_second_order() {
        // simultaneous h and ladder refinement on the generic datum
        let mut tor = Vec::new();
        let mut cur = Vec::new();
        let mut hfl = Vec::new();
        let mut asr = Vec::new();
        for (n, rho) in [(32usize, 1.42), (64, 1.19)] {
            let spec = spec_n(n);
            let d = generic_data(spec);
            let (ladder, frames) = pipeline(spec, &d, 0.25, rho);
            let pick = |v: Vec<(f64, f64)>| -> f64 {
                // compare residuals near a fixed heat time s ~ 0.1
                v.iter()
                    .min_by(|a, b| {
                        (a.0 - 0.1).abs().partial_cmp(&(b.0 - 0.1).abs()).unwrap()
                    })
                    .unwrap()
                    .1
            };
            tor.push(pick(check_torsion(&ladder, &frames)));
            cur.push(pick(check_curvature(&ladder, &frames)));
            hfl.push(pick(check_heatflow_eq(&ladder, &frames)));
            asr.push(pick(check_a_s(&ladder, &frames)));
        }
        for (name, v) in [("torsion", &tor), ("curvature", &cur), ("heatflow", &hfl), ("A_s", &asr)]
        {
            let slope = (v[0] / v[1]).log2();
            assert!(
                slope > 1.6,
                "{name} residual slope {slope:.2} ({v:?})"
            );
        }
    }

    #[test]
    fn gauge_equivariance_under_frame_rotation() {
        let spec = spec_n(32);
        let d = generic_data(spec);
        let (ladder, frames) = pipeline(spec, &d, 0.2, 1.3);
        let angle: f64 = 0.7;
        let u = vec![angle.cos(), -angle.sin(), angle.sin(), angle.cos()];
        let rotated = frames.rotate_coordinates(&u);
        // psi -> U psi
        let p0 = psi_s_slice(&ladder, &frames, 1);
        let p1 = psi_s_slice(&ladder, &rotated, 1);
        let mut worst = 0.0f64;
        for c in 0..spec.cells() {
            let want0 = u[0] * p0[c * 2] + u[1] * p0[c * 2 + 1];
            let want1 = u[2] * p0[c * 2] + u[3] * p0[c * 2 + 1];
            worst = worst.max((p1[c * 2] - want0).abs());
            worst = worst.max((p1[c * 2 + 1] - want1).abs());
        }
        assert!(worst < 1e-10, "psi equivariance defect {worst:.3e}");
        // A -> U A U^{-1}
        let links0 = links_slice(&ladder, &frames, 1);
        let links1 = links_slice(&ladder, &rotated, 1);
        let a0 = connection_slice(&spec, 2, &links0);
        let a1 = connection_slice(&spec, 2, &links1);
        let mut worst = 0.0f64;
        let mut tmp = vec![0.0; 4];
        let mut want = vec![0.0; 4];
        for c in 0..spec.cells() * 2 {
            linalg::matmul(2, &u, &a0[c * 4..(c + 1) * 4], &mut tmp);
            // U A U^T
            for r in 0..2 {
                for q in 0..2 {
                    want[r * 2 + q] = tmp[r * 2] * u[q * 2] + tmp[r * 2 + 1] * u[q * 2 + 1];
                }
            }
            for kk in 0..4 {
                worst = worst.max((a1[c * 4 + kk] - want[kk]).abs());
            }
        }
        assert!(worst < 1e-10, "A equivariance defect {worst:.3e}");
    }

    #[test]
    fn connection_routes_agree_and_refine() {
        let mut sups = Vec::new();
        for (n, rho) in [(32usize, 1.42), (64, 1.19)] {
            let spec = spec_n(n);
            let d = generic_data(spec);
            let (ladder, frames) = pipeline(spec, &d, 4.0, rho);
            let diffs = connection_integral_check(&ladder, &frames);
            // compare near s = 0 where A is largest
            sups.push(diffs[0].1);
        }
        assert!(
            sups[0] / sups[1] > 2.0,
            "integral-route agreement did not refine: {sups:?}"
        );
    }

    #[test]
    fn metric_properties() {
        // n = 64 keeps the bump scales well resolved (sigma ~ 2.6 h), so the
        // sub-s_min transient carries no visible dissipation
        let spec = spec_n(64);
        let d = generic_data(spec);
        let (ladder, frames) = pipeline(spec, &d, 8.0, 1.1);
        let fields = derivative_fields(&ladder, &frames, &d.phi1).unwrap();
        let tail = *ladder.dirichlet_energies().last().unwrap();
        let mf = MetricField::of(&fields).unwrap().with_tail(tail);
        // d(f, f) = 0
        assert_eq!(energy_metric(&mf, &mf, false).unwrap(), 0.0);
        // raw distance to a rotated copy is positive; the quotient vanishes
        let angle: f64 = 1.1;
        let u = vec![angle.cos(), -angle.sin(), angle.sin(), angle.cos()];
        let rot_frames = frames.rotate_coordinates(&u);
        let rot_fields = derivative_fields(&ladder, &rot_frames, &d.phi1).unwrap();
        let mr = MetricField::of(&rot_fields).unwrap();
        let raw = energy_metric(&mf, &mr, false).unwrap();
        let quot = energy_metric(&mf, &mr, true).unwrap();
        assert!(raw > 1e-2, "raw distance {raw:.3e}");
        assert!(quot < 1e-8, "quotient distance {quot:.3e}");
        // d(f, 0)^2 recovers the energy
        let e = crate::grid::total_energy(&d);
        let fe = field_energy(&mf);
        assert!(
            (fe - e).abs() < 1e-3 * e,
            "field energy {fe} vs E {e} (rel {:.3e})",
            (fe - e).abs() / e
        );
    }

    #[test]
    fn non_flat_ladder_rejected() {
        let spec = spec_n(32);
        let d = generic_data(spec);
        let params = LadderParams::new(0.05).with_jobs(1);
        let ladder = heat_flow(&d.phi0, &params).unwrap();
        match construct_caloric_gauge(&ladder, &standard_frame(2), 1e-6) {
            Err(CoreError::NotFlat { sup_dist, .. }) => assert!(sup_dist > 1e-6),
            other => panic!("expected NotFlat, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn cayley_roundtrip_on_links() {
        // links are orthogonal; Cayley forth and back reproduces them
        let spec = spec_n(32);
        let d = generic_data(spec);
        let (ladder, frames) = pipeline(spec, &d, 0.1, 1.4);
        let links = links_slice(&ladder, &frames, 1);
        for c in spec.cells() / 3..spec.cells() / 3 + 50 {
            let t = &links[c * 2 * 4..c * 2 * 4 + 4];
            let s = linalg::cayley_inv(2, t);
            let back = cayley(2, &s);
            for kk in 0..4 {
                assert!((t[kk] - back[kk]).abs() < 1e-12);
            }
        }
    }
}
