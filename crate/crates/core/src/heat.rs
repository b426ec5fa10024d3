//! Harmonic map heat flow along a geometric heat-time ladder.
//!
//! The flow `d phi/ds = tension(phi)` is the L^2 gradient flow of the
//! intrinsic forward-difference Dirichlet energy, with the tension field
//! assembled from log_map stencils.  Integration is explicit (Heun) with
//! substeps bounded by c h^2, renormalizing to the sheet every substep;
//! slices are recorded at the ladder points.  This is the main cost center
//! of the pipeline: the substep count per octave is (s_{k+1} - s_k)/(c h^2).

use crate::grid::{GridSpec, MapField};
use crate::hyperbolic::{dist_sq, log_into, normalize_in_place};
use crate::par;
use crate::{CoreError, Result};

/// Ladder and substepping parameters for the heat flow.
#[derive(Debug, Clone, Copy)]
pub struct LadderParams {
    /// First positive ladder point; defaults to h^2/4 when `None`.
    pub s_min: Option<f64>,
    /// Geometric ratio between consecutive ladder points.
    pub ratio: f64,
    /// Final heat time.
    pub s_max: f64,
    /// Substep safety factor c in `ds <= c h^2`.
    pub substep_safety: f64,
    /// Stencil worker threads.
    pub jobs: usize,
}

impl LadderParams {
    pub fn new(s_max: f64) -> Self {
        Self {
            s_min: None,
            ratio: 1.1,
            s_max,
            substep_safety: 0.2,
            jobs: 1,
        }
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs;
        self
    }

    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        if !(self.s_max > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "s_max",
                reason: format!("{} must be positive", self.s_max),
            });
        }
        if !(self.ratio > 1.0) {
            return Err(CoreError::InvalidParameter {
                name: "ratio",
                reason: format!("{} must exceed 1", self.ratio),
            });
        }
        if !(self.substep_safety > 0.0 && self.substep_safety <= 0.25) {
            return Err(CoreError::InvalidParameter {
                name: "substep_safety",
                reason: format!("{} outside (0, 0.25]", self.substep_safety),
            });
        }
        if let Some(s_min) = self.s_min {
            if !(s_min > 0.0 && s_min < self.s_max) {
                return Err(CoreError::InvalidParameter {
                    name: "s_min",
                    reason: format!("{s_min} outside (0, s_max)"),
                });
            }
        }
        let _ = spec;
        Ok(())
    }

    pub fn effective_s_min(&self, spec: &GridSpec) -> f64 {
        self.s_min.unwrap_or(spec.h * spec.h / 4.0)
    }
}

/// Ladder abscissae: 0, s_min, s_min*rho, ..., ending exactly at s_max.
pub fn ladder_s_values(spec: &GridSpec, params: &LadderParams) -> Vec<f64> {
    let mut s = vec![0.0];
    let mut v = params.effective_s_min(spec).min(params.s_max);
    while v < params.s_max * (1.0 - 1e-12) {
        s.push(v);
        v *= params.ratio;
    }
    s.push(params.s_max);
    s
}

/// The map extended in heat time, sampled on the ladder.
#[derive(Debug)]
pub struct HeatLadder {
    s_values: Vec<f64>,
    slices: Vec<MapField>,
    dirichlet: Vec<f64>,
    params: LadderParams,
}

impl HeatLadder {
    pub fn s_values(&self) -> &[f64] {
        &self.s_values
    }

    pub fn len(&self) -> usize {
        self.s_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_values.is_empty()
    }

    pub fn slice(&self, k: usize) -> &MapField {
        &self.slices[k]
    }

    pub fn slices(&self) -> &[MapField] {
        &self.slices
    }

    pub fn dirichlet_energies(&self) -> &[f64] {
        &self.dirichlet
    }

    pub fn params(&self) -> &LadderParams {
        &self.params
    }

    pub fn spec(&self) -> &GridSpec {
        self.slices[0].spec()
    }

    pub fn final_slice(&self) -> &MapField {
        self.slices.last().expect("ladder has at least s = 0")
    }

    /// Sup distance of the final slice to the base value.
    pub fn final_sup_dist(&self) -> f64 {
        self.final_slice().sup_dist_to_base()
    }
}

/// Intrinsic tension field (log-map 5-point stencil) at interior cells.
/// `out` holds cells * (m+1) reals; margin rows are zeroed.
pub fn tension_into(phi: &MapField, out: &mut [f64], jobs: usize) {
    let spec = *phi.spec();
    let n = spec.n;
    let m = phi.dim();
    let d = m + 1;
    let inv_h2 = 1.0 / (spec.h * spec.h);
    let margin = spec.margin;
    let data = phi.data();
    par::for_rows(jobs, out, n * d, |iy, row| {
        if iy < margin || iy >= n - margin {
            row.fill(0.0);
            return;
        }
        let mut lg = [0.0f64; 8];
        let lg = &mut lg[..d];
        for ix in 0..n {
            let dst = &mut row[ix * d..(ix + 1) * d];
            if ix < margin || ix >= n - margin {
                dst.fill(0.0);
                continue;
            }
            let p = &data[(iy * n + ix) * d..(iy * n + ix + 1) * d];
            dst.fill(0.0);
            for (jx, jy) in [
                (ix + 1, iy),
                (ix - 1, iy),
                (ix, iy + 1),
                (ix, iy - 1),
            ] {
                let q = &data[(jy * n + jx) * d..(jy * n + jx + 1) * d];
                log_into(p, q, lg);
                for k in 0..d {
                    dst[k] += lg[k];
                }
            }
            for v in dst.iter_mut() {
                *v *= inv_h2;
            }
        }
    });
}

/// Dirichlet energy: half the sum of squared intrinsic edge differences,
/// identical (in exact arithmetic) to the spatial part of the energy density.
pub fn dirichlet_energy(phi: &MapField) -> f64 {
    let spec = *phi.spec();
    let n = spec.n;
    let m = phi.dim();
    let d = m + 1;
    let data = phi.data();
    let row_energy = |iy: usize| -> f64 {
        let mut acc = 0.0;
        for ix in 0..n {
            let p = &data[(iy * n + ix) * d..(iy * n + ix + 1) * d];
            if ix + 1 < n {
                acc += dist_sq(p, &data[(iy * n + ix + 1) * d..(iy * n + ix + 2) * d]);
            }
            if iy + 1 < n {
                acc += dist_sq(p, &data[((iy + 1) * n + ix) * d..((iy + 1) * n + ix + 1) * d]);
            }
        }
        acc
    };
    0.5 * (0..n).map(row_energy).sum::<f64>()
}

struct HeunScratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    mid: Vec<f64>,
}

impl HeunScratch {
    fn new(len: usize) -> Self {
        Self {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            mid: vec![0.0; len],
        }
    }
}

/// One Heun substep of the heat flow, renormalizing every stage.
fn heat_substep(phi: &mut MapField, ds: f64, scratch: &mut HeunScratch, jobs: usize) {
    let spec = *phi.spec();
    let n = spec.n;
    let d = phi.dim() + 1;
    let margin = spec.margin;
    tension_into(phi, &mut scratch.k1, jobs);
    {
        let src = phi.data();
        let k1 = &scratch.k1;
        par::for_rows(jobs, &mut scratch.mid, n * d, |iy, row| {
            if iy < margin || iy >= n - margin {
                row.copy_from_slice(&src[iy * n * d..(iy + 1) * n * d]);
                return;
            }
            for ix in 0..n {
                let o = ix * d;
                let go = (iy * n + ix) * d;
                let cell = &mut row[o..o + d];
                cell.copy_from_slice(&src[go..go + d]);
                if ix < margin || ix >= n - margin {
                    continue;
                }
                for k in 0..d {
                    cell[k] += ds * k1[go + k];
                }
                normalize_in_place(cell);
            }
        });
    }
    let mid = MapFieldView {
        spec,
        dim: phi.dim(),
        data: &scratch.mid,
    };
    tension_view_into(&mid, &mut scratch.k2, jobs);
    {
        let k1 = &scratch.k1;
        let k2 = &scratch.k2;
        par::for_rows(jobs, phi.data_mut(), n * d, |iy, row| {
            if iy < margin || iy >= n - margin {
                return;
            }
            for ix in margin..n - margin {
                let o = ix * d;
                let go = (iy * n + ix) * d;
                let cell = &mut row[o..o + d];
                for k in 0..d {
                    cell[k] += 0.5 * ds * (k1[go + k] + k2[go + k]);
                }
                normalize_in_place(cell);
            }
        });
    }
}

/// Borrowed view used for the predictor stage.
struct MapFieldView<'a> {
    spec: GridSpec,
    dim: usize,
    data: &'a [f64],
}

fn tension_view_into(phi: &MapFieldView<'_>, out: &mut [f64], jobs: usize) {
    let spec = phi.spec;
    let n = spec.n;
    let d = phi.dim + 1;
    let inv_h2 = 1.0 / (spec.h * spec.h);
    let margin = spec.margin;
    let data = phi.data;
    par::for_rows(jobs, out, n * d, |iy, row| {
        if iy < margin || iy >= n - margin {
            row.fill(0.0);
            return;
        }
        let mut lg = [0.0f64; 8];
        let lg = &mut lg[..d];
        for ix in 0..n {
            let dst = &mut row[ix * d..(ix + 1) * d];
            if ix < margin || ix >= n - margin {
                dst.fill(0.0);
                continue;
            }
            let p = &data[(iy * n + ix) * d..(iy * n + ix + 1) * d];
            dst.fill(0.0);
            for (jx, jy) in [
                (ix + 1, iy),
                (ix - 1, iy),
                (ix, iy + 1),
                (ix, iy - 1),
            ] {
                let q = &data[(jy * n + jx) * d..(jy * n + jx + 1) * d];
                log_into(p, q, lg);
                for k in 0..d {
                    dst[k] += lg[k];
                }
            }
            for v in dst.iter_mut() {
                *v *= inv_h2;
            }
        }
    });
}

fn check_finite(phi: &MapField, step: usize, s: f64) -> Result<()> {
    if phi.data().iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite { step, at: s });
    }
    Ok(())
}

/// Integrate the heat flow from `phi` and record slices at the ladder points.
pub fn heat_flow(phi: &MapField, params: &LadderParams) -> Result<HeatLadder> {
    let spec = *phi.spec();
    params.validate(&spec)?;
    let s_values = ladder_s_values(&spec, params);
    flow_along(phi, params, &s_values)
}

fn flow_along(phi: &MapField, params: &LadderParams, s_values: &[f64]) -> Result<HeatLadder> {
    let spec = *phi.spec();
    let ds_cap = params.substep_safety * spec.h * spec.h;
    let mut current = phi.clone();
    let mut slices = Vec::with_capacity(s_values.len());
    let mut dirichlet = Vec::with_capacity(s_values.len());
    let e0 = dirichlet_energy(&current);
    slices.push(current.clone());
    dirichlet.push(e0);
    let mut scratch = HeunScratch::new(current.data().len());
    let tol = 1e-10 * e0 + 1e-300;
    let mut step = 0usize;
    for k in 1..s_values.len() {
        let span = s_values[k] - s_values[k - 1];
        let nsub = (span / ds_cap).ceil().max(1.0) as usize;
        let ds = span / nsub as f64;
        for _ in 0..nsub {
            heat_substep(&mut current, ds, &mut scratch, params.jobs);
            step += 1;
        }
        check_finite(&current, step, s_values[k])?;
        let e = dirichlet_energy(&current);
        if e > dirichlet[k - 1] + tol {
            return Err(CoreError::EnergyIncrease {
                s_from: s_values[k - 1],
                s_to: s_values[k],
                increase: e - dirichlet[k - 1],
                limit: tol,
            });
        }
        slices.push(current.clone());
        dirichlet.push(e);
    }
    Ok(HeatLadder {
        s_values: s_values.to_vec(),
        slices,
        dirichlet,
        params: *params,
    })
}

/// Outcome of flowing until the map is flat.
#[derive(Debug)]
pub enum FlatOutcome {
    /// First ladder time with sup distance to base below tolerance.
    Flat { s_star: f64, ladder: HeatLadder },
    /// Cap reached before flattening (an explicit result, not an error).
    NotFlatByCap {
        s_cap: f64,
        sup_dist: f64,
        ladder: HeatLadder,
    },
}

/// Extend the ladder until the sup distance to base drops below `tol`,
/// or `s_cap` is exceeded.
pub fn flow_until_flat(
    phi: &MapField,
    tol: f64,
    params: &LadderParams,
    s_cap: f64,
) -> Result<FlatOutcome> {
    if !(tol > 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "tol",
            reason: format!("{tol} must be positive"),
        });
    }
    let spec = *phi.spec();
    params.validate(&spec)?;
    if phi.sup_dist_to_base() <= tol {
        let ladder = HeatLadder {
            s_values: vec![0.0],
            slices: vec![phi.clone()],
            dirichlet: vec![dirichlet_energy(phi)],
            params: *params,
        };
        return Ok(FlatOutcome::Flat {
            s_star: 0.0,
            ladder,
        });
    }
    // Build an open-ended ladder up to the cap.
    let mut s_values = vec![0.0];
    let mut v = params.effective_s_min(&spec);
    while v <= s_cap {
        s_values.push(v);
        v *= params.ratio;
    }
    // Integrate incrementally, stopping at the first flat slice.
    let ds_cap = params.substep_safety * spec.h * spec.h;
    let mut current = phi.clone();
    let mut slices = vec![current.clone()];
    let mut dirichlet = vec![dirichlet_energy(&current)];
    let mut scratch = HeunScratch::new(current.data().len());
    let mut step = 0usize;
    for k in 1..s_values.len() {
        let span = s_values[k] - s_values[k - 1];
        let nsub = (span / ds_cap).ceil().max(1.0) as usize;
        let ds = span / nsub as f64;
        for _ in 0..nsub {
            heat_substep(&mut current, ds, &mut scratch, params.jobs);
            step += 1;
        }
        check_finite(&current, step, s_values[k])?;
        slices.push(current.clone());
        dirichlet.push(dirichlet_energy(&current));
        if current.sup_dist_to_base() <= tol {
            let s_star = s_values[k];
            let ladder = HeatLadder {
                s_values: s_values[..=k].to_vec(),
                slices,
                dirichlet,
                params: *params,
            };
            return Ok(FlatOutcome::Flat { s_star, ladder });
        }
    }
    let sup_dist = current.sup_dist_to_base();
    let ladder = HeatLadder {
        s_values,
        slices,
        dirichlet,
        params: *params,
    };
    Ok(FlatOutcome::NotFlatByCap {
        s_cap,
        sup_dist,
        ladder,
    })
}
