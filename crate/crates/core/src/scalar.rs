//! Scalar reference solutions on the clamped grid.
//!
//! The margin ring pins fields to zero, so the interior 5-point Laplacian is
//! diagonalized exactly by the discrete sine basis.  That gives semigroup
//! solutions of the heat and wave equations that are exact in time for the
//! semi-discrete system, which the manifold solvers are tested against: for
//! geodesic-image data the intrinsic stencils reduce to these scalar ones
//! identically, so disagreements isolate time-stepping and gauge errors.

use crate::grid::GridSpec;

/// A scalar field on the full grid (zero on the margin ring).
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub spec: GridSpec,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            data: vec![0.0; spec.cells()],
        }
    }

    /// Sample a profile at interior nodes; the margin stays exactly zero.
    pub fn from_profile(spec: GridSpec, f: &dyn Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(spec);
        for iy in spec.interior() {
            for ix in spec.interior() {
                let (x, y) = spec.cell_center(ix, iy);
                out.data[spec.idx(ix, iy)] = f(x, y);
            }
        }
        out
    }

    pub fn sup_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// h^2 sum of squares.
    pub fn l2_sq(&self) -> f64 {
        self.spec.cell_area() * self.data.iter().map(|v| v * v).sum::<f64>()
    }
}

/// Spectral coefficients over the interior sine basis.
#[derive(Debug, Clone)]
pub struct SpectralCoeffs {
    pub n_int: usize,
    pub c: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn zeros(n_int: usize) -> Self {
        Self {
            n_int,
            c: vec![0.0; n_int * n_int],
        }
    }
}

/// Orthonormal discrete sine basis over the interior nodes of a grid.
pub struct SineBasis {
    spec: GridSpec,
    n_int: usize,
    /// table[j * n_int + x] = sqrt(2/(N+1)) sin(pi (j+1)(x+1)/(N+1))
    table: Vec<f64>,
    /// 1D eigenvalues of the negative 5-point Laplacian per axis index.
    lambda1: Vec<f64>,
}

impl SineBasis {
    pub fn for_grid(spec: GridSpec) -> Self {
        let n_int = spec.n - 2 * spec.margin;
        let np1 = (n_int + 1) as f64;
        let norm = (2.0 / np1).sqrt();
        let mut table = vec![0.0; n_int * n_int];
        for j in 0..n_int {
            for x in 0..n_int {
                table[j * n_int + x] =
                    norm * (std::f64::consts::PI * (j as f64 + 1.0) * (x as f64 + 1.0) / np1).sin();
            }
        }
        let lambda1 = (0..n_int)
            .map(|j| {
                let s = (std::f64::consts::PI * (j as f64 + 1.0) / (2.0 * np1)).sin();
                4.0 / (spec.h * spec.h) * s * s
            })
            .collect();
        Self {
            spec,
            n_int,
            table,
            lambda1,
        }
    }

    pub fn n_interior(&self) -> usize {
        self.n_int
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Eigenvalue of -Laplacian for mode (j, k).
    #[inline]
    pub fn eigenvalue(&self, j: usize, k: usize) -> f64 {
        self.lambda1[j] + self.lambda1[k]
    }

    fn apply_1d(&self, src: &[f64], dst: &mut [f64], n: usize) {
        for row in 0..n {
            let s = &src[row * n..(row + 1) * n];
            let d = &mut dst[row * n..(row + 1) * n];
            for j in 0..n {
                let t = &self.table[j * n..(j + 1) * n];
                d[j] = t.iter().zip(s).map(|(a, b)| a * b).sum();
            }
        }
    }

    fn transform(&self, interior: &[f64]) -> Vec<f64> {
        let n = self.n_int;
        let mut tmp = vec![0.0; n * n];
        let mut out = vec![0.0; n * n];
        self.apply_1d(interior, &mut tmp, n);
        let mut tr = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                tr[c * n + r] = tmp[r * n + c];
            }
        }
        self.apply_1d(&tr, &mut out, n);
        let mut res = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                res[c * n + r] = out[r * n + c];
            }
        }
        res
    }

    /// Forward transform of the interior values of a field.
    pub fn forward(&self, f: &ScalarField) -> SpectralCoeffs {
        let n = self.n_int;
        let m = self.spec.margin;
        let mut interior = vec![0.0; n * n];
        for y in 0..n {
            for x in 0..n {
                interior[y * n + x] = f.data[self.spec.idx(x + m, y + m)];
            }
        }
        SpectralCoeffs {
            n_int: n,
            c: self.transform(&interior),
        }
    }

    /// Inverse transform (the orthonormal basis is self-inverse).
    pub fn inverse(&self, coeffs: &SpectralCoeffs) -> ScalarField {
        let n = self.n_int;
        let m = self.spec.margin;
        let interior = self.transform(&coeffs.c);
        let mut out = ScalarField::zeros(self.spec);
        for y in 0..n {
            for x in 0..n {
                out.data[self.spec.idx(x + m, y + m)] = interior[y * n + x];
            }
        }
        out
    }

    /// Coefficients evolved by the heat semigroup e^{s Laplacian}.
    pub fn heat_coeffs(&self, c0: &SpectralCoeffs, s: f64) -> SpectralCoeffs {
        let n = self.n_int;
        let mut c = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                c[k * n + j] = c0.c[k * n + j] * (-s * self.eigenvalue(j, k)).exp();
            }
        }
        SpectralCoeffs { n_int: n, c }
    }

    /// ||e^{s Lap} u||_{L^2}^2 from coefficients.
    pub fn heat_l2_sq(&self, c0: &SpectralCoeffs, s: f64) -> f64 {
        self.weighted_sq(c0, s, |_| 1.0)
    }

    /// ||grad e^{s Lap} u||^2 in the summation-by-parts (edge) sense.
    pub fn heat_grad_sq(&self, c0: &SpectralCoeffs, s: f64) -> f64 {
        self.weighted_sq(c0, s, |l| l)
    }

    /// ||Lap e^{s Lap} u||_{L^2}^2.
    pub fn heat_lap_sq(&self, c0: &SpectralCoeffs, s: f64) -> f64 {
        self.weighted_sq(c0, s, |l| l * l)
    }

    fn weighted_sq(&self, c0: &SpectralCoeffs, s: f64, w: impl Fn(f64) -> f64) -> f64 {
        let n = self.n_int;
        let area = self.spec.cell_area();
        let mut acc = 0.0;
        for k in 0..n {
            for j in 0..n {
                let l = self.eigenvalue(j, k);
                let a = c0.c[k * n + j] * (-s * l).exp();
                acc += w(l) * a * a;
            }
        }
        area * acc
    }

    /// Scalar linear-wave evolution, exact in time for the semi-discrete
    /// system: returns (u(t), du/dt(t)) coefficients.
    pub fn wave_coeffs(
        &self,
        c0: &SpectralCoeffs,
        c1: &SpectralCoeffs,
        t: f64,
    ) -> (SpectralCoeffs, SpectralCoeffs) {
        let n = self.n_int;
        let mut pos = vec![0.0; n * n];
        let mut vel = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                let om = self.eigenvalue(j, k).sqrt();
                let i = k * n + j;
                if om < 1e-300 {
                    pos[i] = c0.c[i] + t * c1.c[i];
                    vel[i] = c1.c[i];
                } else {
                    let (sn, cs) = (om * t).sin_cos();
                    pos[i] = cs * c0.c[i] + sn / om * c1.c[i];
                    vel[i] = -om * sn * c0.c[i] + cs * c1.c[i];
                }
            }
        }
        (
            SpectralCoeffs { n_int: n, c: pos },
            SpectralCoeffs { n_int: n, c: vel },
        )
    }

    /// 1/2 ||grad u||^2 (edge sense) from coefficients.
    pub fn dirichlet_energy(&self, c: &SpectralCoeffs) -> f64 {
        0.5 * self.weighted_sq(c, 0.0, |l| l)
    }
}

/// Explicit 5-point Laplacian at interior nodes (Dirichlet margin).
pub fn laplacian_5pt(spec: &GridSpec, src: &[f64], dst: &mut [f64], jobs: usize) {
    let n = spec.n;
    let inv_h2 = 1.0 / (spec.h * spec.h);
    let margin = spec.margin;
    crate::par::for_rows(jobs, dst, n, |iy, row| {
        if iy < margin || iy >= n - margin {
            row.fill(0.0);
            return;
        }
        for (ix, out) in row.iter_mut().enumerate() {
            if ix < margin || ix >= n - margin {
                *out = 0.0;
                continue;
            }
            let c = src[iy * n + ix];
            *out = (src[iy * n + ix + 1]
                + src[iy * n + ix - 1]
                + src[(iy + 1) * n + ix]
                + src[(iy - 1) * n + ix]
                - 4.0 * c)
                * inv_h2;
        }
    });
}

pub struct HeatScratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    mid: Vec<f64>,
}

impl HeatScratch {
    pub fn new(cells: usize) -> Self {
        Self {
            k1: vec![0.0; cells],
            k2: vec![0.0; cells],
            mid: vec![0.0; cells],
        }
    }
}

/// Advance the scalar heat equation by one Heun step of size ds.
/// Mirrors the stepping of the manifold solvers for the pointwise-dominance
/// comparison.
pub fn heat_step_heun(
    spec: &GridSpec,
    u: &mut [f64],
    ds: f64,
    scratch: &mut HeatScratch,
    jobs: usize,
) {
    laplacian_5pt(spec, u, &mut scratch.k1, jobs);
    for i in 0..u.len() {
        scratch.mid[i] = u[i] + ds * scratch.k1[i];
    }
    laplacian_5pt(spec, &scratch.mid, &mut scratch.k2, jobs);
    for i in 0..u.len() {
        u[i] += 0.5 * ds * (scratch.k1[i] + scratch.k2[i]);
    }
}
