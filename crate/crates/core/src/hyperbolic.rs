//! Exact geometry of H^m in the hyperboloid model.
//!
//! Points live on the upper sheet of <p,p>_M = -1 in R^{1+m} with the
//! Minkowski form <a,b>_M = -a0 b0 + sum_i ai bi.  Geodesics, exponential and
//! logarithm maps and parallel transport are closed-form, and the isometry
//! group SO(m,1) acts linearly, which keeps every operation here algebraic.
//!
//! The low-level slice kernels avoid the cancellation-prone expression
//! cosh(d) - 1 = -<p,q> - 1 by working with the difference vector q - p, so
//! nearby points keep full relative accuracy.

use crate::linalg;
use crate::rng::SplitMix64;
use crate::{CoreError, Result};

/// Sheet invariant tolerance after normalization.
pub const SHEET_TOL: f64 = 1e-12;
/// Tangency validation tolerance.
pub const TANGENT_TOL: f64 = 1e-9;

const SERIES_SWITCH: f64 = 1e-4;

// ---------------------------------------------------------------------------
// Slice kernels (ambient dimension m+1)
// ---------------------------------------------------------------------------

/// Minkowski inner product -a0 b0 + sum_i ai bi.
pub fn minkowski_inner(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = -a[0] * b[0];
    for k in 1..a.len() {
        acc += a[k] * b[k];
    }
    acc
}

/// cosh(d(p,q)) - 1, computed stably through the difference vector.
pub fn cosh_dist_minus_one(p: &[f64], q: &[f64]) -> f64 {
    // u = -<p, q - p> since <p,p> = -1.
    let mut acc = p[0] * (q[0] - p[0]);
    for k in 1..p.len() {
        acc -= p[k] * (q[k] - p[k]);
    }
    acc.max(0.0)
}

fn dist_from_u(u: f64) -> f64 {
    if u < SERIES_SWITCH {
        // d^2 = 2u - u^2/3 + 4u^3/45 + O(u^4)
        (2.0 * u * (1.0 - u / 6.0 + 2.0 * u * u / 45.0)).sqrt()
    } else {
        (1.0 + u).acosh()
    }
}

/// Geodesic distance d(p,q) = arccosh(-<p,q>_M).
pub fn dist(p: &[f64], q: &[f64]) -> f64 {
    dist_from_u(cosh_dist_minus_one(p, q))
}

/// d(p,q)^2 without the square root (cheaper for energy sums).
pub fn dist_sq(p: &[f64], q: &[f64]) -> f64 {
    let u = cosh_dist_minus_one(p, q);
    if u < SERIES_SWITCH {
        2.0 * u * (1.0 - u / 6.0 + 2.0 * u * u / 45.0)
    } else {
        let d = (1.0 + u).acosh();
        d * d
    }
}

/// d / sinh(d) as a function of u = cosh(d) - 1.
fn log_scale(u: f64) -> f64 {
    if u < SERIES_SWITCH {
        1.0 - u / 3.0 + 2.0 * u * u / 15.0
    } else {
        dist_from_u(u) / (u * (u + 2.0)).sqrt()
    }
}

/// out = log_p(q); the Riemannian logarithm, |out| = d(p,q).
pub fn log_into(p: &[f64], q: &[f64], out: &mut [f64]) {
    let u = cosh_dist_minus_one(p, q);
    let f = log_scale(u);
    for k in 0..p.len() {
        out[k] = f * ((q[k] - p[k]) - u * p[k]);
    }
}

/// out = exp_p(v) for tangent v at p.
pub fn exp_into(p: &[f64], v: &[f64], out: &mut [f64]) {
    let theta2 = minkowski_inner(v, v).max(0.0);
    let theta = theta2.sqrt();
    if theta < 1e-14 {
        out.copy_from_slice(p);
        return;
    }
    let (a, b) = if theta < 1e-4 {
        (
            1.0 + theta2 / 2.0 + theta2 * theta2 / 24.0,
            1.0 + theta2 / 6.0 + theta2 * theta2 / 120.0,
        )
    } else {
        (theta.cosh(), theta.sinh() / theta)
    };
    for k in 0..p.len() {
        out[k] = a * p[k] + b * v[k];
    }
}

/// out = parallel transport of tangent v from p to q along the geodesic.
///
/// PT(v) = v + <v,q>/(1 - <p,q>) (p + q); exact isometry, no transcendentals.
pub fn transport_into(p: &[f64], q: &[f64], v: &[f64], out: &mut [f64]) {
    let u = cosh_dist_minus_one(p, q);
    let g = minkowski_inner(v, q) / (2.0 + u);
    for k in 0..p.len() {
        out[k] = v[k] + g * (p[k] + q[k]);
    }
}

/// Rescale p by 1/sqrt(-<p,p>) back onto the sheet (and keep p0 > 0).
///
/// -<p,p> is evaluated through terms of size p0^2, so beyond coordinates of
/// about 1e6 the rescaling factor carries more noise than it removes;
/// `renormalize_moderate` applies it only in the well-conditioned regime.
pub fn normalize_in_place(p: &mut [f64]) {
    let s2 = -minkowski_inner(p, p);
    debug_assert!(s2 > 0.0, "point left the interior cone");
    let inv = 1.0 / s2.sqrt();
    for x in p.iter_mut() {
        *x *= inv;
    }
    if p[0] < 0.0 {
        for x in p.iter_mut() {
            *x = -*x;
        }
    }
}

/// Renormalize only near the base scale.
///
/// Exponentials of almost-tangent vectors sit off the sheet by
/// ~ e^{2 theta} * eps (rounding in the tangency is amplified by
/// 2 cosh sinh), and rescaling such a point turns that harmless normal
/// offset into a radial distance error.  The logarithm cancels the normal
/// component exactly, so far-out points are best left as computed.
pub fn renormalize_moderate(p: &mut [f64]) {
    if p[0].abs() < 30.0 {
        normalize_in_place(p);
    }
}

/// Project an ambient vector onto the tangent space at p: w + <w,p> p.
pub fn project_tangent_in_place(p: &[f64], w: &mut [f64]) {
    let g = minkowski_inner(w, p);
    for k in 0..p.len() {
        w[k] += g * p[k];
    }
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// A point on the upper sheet of the hyperboloid, embedding coordinates in
/// R^{1+m}.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicPoint {
    coords: Vec<f64>,
}

impl HyperbolicPoint {
    /// Validate and normalize embedding coordinates onto the sheet.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let self_product = minkowski_inner(&coords, &coords);
        let cond = 1.0 + coords[0] * coords[0];
        if !self_product.is_finite()
            || coords[0] <= 0.0
            || (self_product + 1.0).abs() > 1e-9 * cond
        {
            return Err(CoreError::NotOnSheet {
                self_product,
                p0: coords[0],
            });
        }
        let mut coords = coords;
        renormalize_moderate(&mut coords);
        Ok(Self { coords })
    }

    /// The basepoint (1, 0, ..., 0) of H^m.
    pub fn basepoint(m: usize) -> Self {
        let mut coords = vec![0.0; m + 1];
        coords[0] = 1.0;
        Self { coords }
    }

    pub(crate) fn from_normalized(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn sheet_defect(&self) -> f64 {
        (minkowski_inner(&self.coords, &self.coords) + 1.0).abs()
    }

    pub fn dist(&self, other: &Self) -> f64 {
        dist(&self.coords, &other.coords)
    }
}

/// A tangent vector at a point of H^m.
#[derive(Debug, Clone)]
pub struct TangentVector {
    base: HyperbolicPoint,
    vec: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: HyperbolicPoint, vec: Vec<f64>) -> Result<Self> {
        if vec.len() != base.coords.len() {
            return Err(CoreError::DimensionMismatch {
                expected: base.coords.len(),
                got: vec.len(),
            });
        }
        let inner = minkowski_inner(&base.coords, &vec);
        let scale = 1.0 + vec.iter().map(|x| x * x).sum::<f64>().sqrt();
        if inner.abs() > TANGENT_TOL * scale {
            return Err(CoreError::NotTangent {
                inner,
                tol: TANGENT_TOL * scale,
            });
        }
        let mut vec = vec;
        project_tangent_in_place(&base.coords, &mut vec);
        Ok(Self { base, vec })
    }

    pub fn zero(base: HyperbolicPoint) -> Self {
        let d = base.coords.len();
        Self {
            base,
            vec: vec![0.0; d],
        }
    }

    pub fn base(&self) -> &HyperbolicPoint {
        &self.base
    }

    pub fn vec(&self) -> &[f64] {
        &self.vec
    }

    /// Induced norm; <v,v>_M is nonnegative on tangent spaces.
    pub fn norm(&self) -> f64 {
        minkowski_inner(&self.vec, &self.vec).max(0.0).sqrt()
    }
}

/// An oriented orthonormal frame e_1..e_m of the tangent space at a point.
#[derive(Debug, Clone)]
pub struct OrthonormalFrame {
    base: HyperbolicPoint,
    /// m rows of length m+1, row a = axis e_a.
    axes: Vec<f64>,
}

impl OrthonormalFrame {
    pub fn base(&self) -> &HyperbolicPoint {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        let d = self.base.coords.len();
        &self.axes[a * d..(a + 1) * d]
    }

    pub fn axes_flat(&self) -> &[f64] {
        &self.axes
    }

    /// Frame coordinates of an ambient tangent vector: (e^{-1} v)_a = <v, e_a>.
    pub fn coeffs_into(&self, v: &[f64], out: &mut [f64]) {
        let m = self.dim();
        for a in 0..m {
            out[a] = minkowski_inner(v, self.axis(a));
        }
    }

    /// Ambient vector from frame coordinates: sum_a c_a e_a.
    pub fn combine_into(&self, c: &[f64], out: &mut [f64]) {
        let m = self.dim();
        out.fill(0.0);
        for a in 0..m {
            let e = self.axis(a);
            for k in 0..e.len() {
                out[k] += c[a] * e[k];
            }
        }
    }

    /// Largest deviation of <e_a, e_b> from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let m = self.dim();
        let mut worst = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((minkowski_inner(self.axis(a), self.axis(b)) - want).abs());
            }
        }
        worst
    }

    /// Precompose with U^{-1} for U in SO(m): new axis a = sum_b U[a][b] e_b.
    /// Maps derivative-field coordinates psi to U psi.
    pub fn rotate_coordinates(&self, u: &[f64]) -> Self {
        let m = self.dim();
        let d = m + 1;
        let mut axes = vec![0.0; m * d];
        for a in 0..m {
            for b in 0..m {
                let w = u[a * m + b];
                let src = self.axis(b);
                for k in 0..d {
                    axes[a * d + k] += w * src[k];
                }
            }
        }
        Self {
            base: self.base.clone(),
            axes,
        }
    }
}

/// An element of SO+(m,1) acting on embedding coordinates.
#[derive(Debug, Clone)]
pub struct LorentzRotation {
    m: usize,
    mat: Vec<f64>, // (m+1) x (m+1) row-major
}

impl LorentzRotation {
    /// Validate U^T eta U = eta, det = +1 and upper-sheet preservation.
    pub fn new(m: usize, mat: Vec<f64>) -> Result<Self> {
        let d = m + 1;
        if mat.len() != d * d {
            return Err(CoreError::DimensionMismatch {
                expected: d * d,
                got: mat.len(),
            });
        }
        let mut defect = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                // (U^T eta U)_{rc} = -U_{0r} U_{0c} + sum_k U_{kr} U_{kc}
                let mut acc = -mat[r] * mat[c];
                for k in 1..d {
                    acc += mat[k * d + r] * mat[k * d + c];
                }
                let eta = if r != c {
                    0.0
                } else if r == 0 {
                    -1.0
                } else {
                    1.0
                };
                defect = defect.max((acc - eta).abs());
            }
        }
        if defect > 1e-10 {
            return Err(CoreError::InvalidRotation {
                reason: format!("U^T eta U deviates from eta by {defect:.3e}"),
            });
        }
        if mat[0] < 1.0 - 1e-12 {
            return Err(CoreError::InvalidRotation {
                reason: format!("does not preserve the upper sheet: U00 = {:.6e}", mat[0]),
            });
        }
        let determinant = linalg::det(d, &mat);
        if (determinant - 1.0).abs() > 1e-8 {
            return Err(CoreError::InvalidRotation {
                reason: format!("det = {determinant:.12e}, expected +1"),
            });
        }
        Ok(Self { m, mat })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            m,
            mat: linalg::identity(m + 1),
        }
    }

    /// Rotation by `angle` in the spatial plane (i, j), 1-based spatial axes.
    pub fn spatial_rotation(m: usize, i: usize, j: usize, angle: f64) -> Self {
        assert!(i >= 1 && j >= 1 && i <= m && j <= m && i != j);
        let d = m + 1;
        let mut mat = linalg::identity(d);
        let (c, s) = (angle.cos(), angle.sin());
        mat[i * d + i] = c;
        mat[j * d + j] = c;
        mat[i * d + j] = -s;
        mat[j * d + i] = s;
        Self { m, mat }
    }

    /// Boost of rapidity `chi` along spatial axis `i` (1-based).
    pub fn boost(m: usize, i: usize, chi: f64) -> Self {
        assert!(i >= 1 && i <= m);
        let d = m + 1;
        let mut mat = linalg::identity(d);
        let (ch, sh) = (chi.cosh(), chi.sinh());
        mat[0] = ch;
        mat[i] = sh;
        mat[i * d] = sh;
        mat[i * d + i] = ch;
        Self { m, mat }
    }

    /// Embed U0 in SO(m) as a target rotation fixing the basepoint.
    pub fn from_so_m(m: usize, u0: &[f64]) -> Result<Self> {
        let d = m + 1;
        let mut mat = linalg::identity(d);
        for r in 0..m {
            for c in 0..m {
                mat[(r + 1) * d + (c + 1)] = u0[r * m + c];
            }
        }
        Self::new(m, mat)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> &[f64] {
        &self.mat
    }

    pub fn apply_coords_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.m + 1;
        for r in 0..d {
            let row = &self.mat[r * d..(r + 1) * d];
            out[r] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn apply_point(&self, p: &HyperbolicPoint) -> HyperbolicPoint {
        let mut out = vec![0.0; self.m + 1];
        self.apply_coords_into(p.coords(), &mut out);
        renormalize_moderate(&mut out);
        HyperbolicPoint::from_normalized(out)
    }

    pub fn apply_tangent(&self, v: &TangentVector) -> TangentVector {
        let mut vec = vec![0.0; self.m + 1];
        self.apply_coords_into(v.vec(), &mut vec);
        let base = self.apply_point(v.base());
        project_tangent_in_place(base.coords(), &mut vec);
        TangentVector { base, vec }
    }

    pub fn apply_frame(&self, f: &OrthonormalFrame) -> OrthonormalFrame {
        let m = self.m;
        let d = m + 1;
        let base = self.apply_point(f.base());
        let mut axes = vec![0.0; m * d];
        for a in 0..m {
            let (head, tail) = axes.split_at_mut(a * d);
            let _ = head;
            self.apply_coords_into(f.axis(a), &mut tail[..d]);
        }
        OrthonormalFrame { base, axes }
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Riemannian exponential; `v` must be based at `p`.
pub fn exp_map(p: &HyperbolicPoint, v: &TangentVector) -> Result<HyperbolicPoint> {
    if v.base().dist(p) > 1e-9 {
        return Err(CoreError::InvalidParameter {
            name: "v",
            reason: "tangent vector is not based at p".into(),
        });
    }
    let mut out = vec![0.0; p.coords.len()];
    exp_into(p.coords(), v.vec(), &mut out);
    renormalize_moderate(&mut out);
    Ok(HyperbolicPoint::from_normalized(out))
}

/// Riemannian logarithm; globally defined on H^m.
pub fn log_map(p: &HyperbolicPoint, q: &HyperbolicPoint) -> TangentVector {
    let mut vec = vec![0.0; p.coords.len()];
    log_into(p.coords(), q.coords(), &mut vec);
    TangentVector {
        base: p.clone(),
        vec,
    }
}

/// Parallel transport of `v` (based at `p`) to `q` along the geodesic.
pub fn parallel_transport(
    p: &HyperbolicPoint,
    q: &HyperbolicPoint,
    v: &TangentVector,
) -> Result<TangentVector> {
    if v.base().dist(p) > 1e-9 {
        return Err(CoreError::InvalidParameter {
            name: "v",
            reason: "tangent vector is not based at p".into(),
        });
    }
    let mut vec = vec![0.0; p.coords.len()];
    transport_into(p.coords(), q.coords(), v.vec(), &mut vec);
    project_tangent_in_place(q.coords(), &mut vec);
    Ok(TangentVector {
        base: q.clone(),
        vec,
    })
}

/// Tangential projection of an arbitrary ambient vector.
pub fn project_to_tangent(p: &HyperbolicPoint, w: &[f64]) -> TangentVector {
    let mut vec = w.to_vec();
    project_tangent_in_place(p.coords(), &mut vec);
    project_tangent_in_place(p.coords(), &mut vec); // second pass absorbs rounding
    TangentVector {
        base: p.clone(),
        vec,
    }
}

/// Gram-Schmidt orthonormalization of seed rows projected to T_p H.
///
/// `seed` holds m rows of length m+1.  Deterministic given the seed; the
/// orientation (determinant together with the base point) is made positive
/// by flipping the last axis if needed.
pub fn frame_at(p: &HyperbolicPoint, seed: &[f64]) -> Result<OrthonormalFrame> {
    let m = p.dim();
    let d = m + 1;
    if seed.len() != m * d {
        return Err(CoreError::DimensionMismatch {
            expected: m * d,
            got: seed.len(),
        });
    }
    let mut axes = vec![0.0; m * d];
    for a in 0..m {
        let mut row = seed[a * d..(a + 1) * d].to_vec();
        let scale = 1.0 + row.iter().map(|x| x * x).sum::<f64>().sqrt();
        project_tangent_in_place(p.coords(), &mut row);
        for _pass in 0..2 {
            for b in 0..a {
                let prev = &axes[b * d..(b + 1) * d];
                let g = minkowski_inner(&row, prev);
                for k in 0..d {
                    row[k] -= g * prev[k];
                }
            }
        }
        let norm = minkowski_inner(&row, &row).max(0.0).sqrt();
        if norm <= 1e-10 * scale {
            return Err(CoreError::RankDeficientSeed { row: a, norm });
        }
        for (k, x) in row.iter().enumerate() {
            axes[a * d + k] = x / norm;
        }
    }
    let mut frame = OrthonormalFrame {
        base: p.clone(),
        axes,
    };
    if frame_orientation_det(&frame) < 0.0 {
        let last = (m - 1) * d;
        for k in 0..d {
            frame.axes[last + k] = -frame.axes[last + k];
        }
    }
    Ok(frame)
}

/// Determinant of the (m+1)x(m+1) matrix [p; e_1; ...; e_m].
pub fn frame_orientation_det(f: &OrthonormalFrame) -> f64 {
    let d = f.base.coords.len();
    let mut mat = vec![0.0; d * d];
    mat[..d].copy_from_slice(f.base.coords());
    mat[d..].copy_from_slice(&f.axes);
    linalg::det(d, &mat)
}

/// The standard frame at the basepoint: (e_a)^k = delta_{a,k}.
pub fn standard_frame(m: usize) -> OrthonormalFrame {
    let d = m + 1;
    let mut axes = vec![0.0; m * d];
    for a in 0..m {
        axes[a * d + a + 1] = 1.0;
    }
    OrthonormalFrame {
        base: HyperbolicPoint::basepoint(m),
        axes,
    }
}

// ---------------------------------------------------------------------------
// Randomized fixtures (deterministic; used by tests and the random preset)
// ---------------------------------------------------------------------------

/// Random tangent vector at `p` with coordinates ~ scale * N(0,1).
pub fn random_tangent_at(p: &HyperbolicPoint, scale: f64, rng: &mut SplitMix64) -> TangentVector {
    let d = p.coords.len();
    let mut vec: Vec<f64> = (0..d).map(|_| scale * rng.gaussian()).collect();
    project_tangent_in_place(p.coords(), &mut vec);
    TangentVector {
        base: p.clone(),
        vec,
    }
}

/// Random point within roughly `scale` of `p` (exp of a random tangent).
pub fn random_point_near(p: &HyperbolicPoint, scale: f64, rng: &mut SplitMix64) -> HyperbolicPoint {
    let v = random_tangent_at(p, scale, rng);
    exp_map(p, &v).expect("tangent constructed at p")
}
