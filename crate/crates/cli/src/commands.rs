//! The batch commands: simulate, heatflow, esd, verify, localize.
//!
//! Each command builds its data from the configuration, runs the pipeline,
//! writes plot-ready CSVs and snapshots into the output directory, records
//! measured values and pass/fail checks, and writes the run summary last.

use crate::config::RunConfig;
use crate::summary::RunSummary;
use caloric_core::csvio::CsvWriter;
use caloric_core::gauge::{self, TimeSliceGauge};
use caloric_core::grid::{
    energy_density, make_geodesic_data, make_multibump_data, total_energy, Bump, DataPair,
    GridSpec,
};
use caloric_core::heat::{self, LadderParams};
use caloric_core::hyperbolic::{log_into, HyperbolicPoint};
use caloric_core::localize;
use caloric_core::rng::SplitMix64;
use caloric_core::scalar::{ScalarField, SineBasis};
use caloric_core::snapshot;
use caloric_core::spectral::{self, EsdParams, SymmetryOp};
use caloric_core::wave::{self, WaveParams};
use caloric_core::CoreError;
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or data constraints: exit code 3.
    Config(String),
    /// Numerical abort inside a solver: exit code 4.
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Numerical(m) => write!(f, "numerical abort: {m}"),
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

fn classify(e: CoreError) -> CliError {
    fn is_numerical(e: &CoreError) -> bool {
        match e {
            CoreError::NonFinite { .. }
            | CoreError::ConstraintDrift { .. }
            | CoreError::EnergyIncrease { .. }
            | CoreError::CovariantUnstable { .. }
            | CoreError::NotFlat { .. } => true,
            CoreError::Stage { source, .. } => is_numerical(source),
            _ => false,
        }
    }
    if is_numerical(&e) {
        CliError::Numerical(e.to_string())
    } else {
        CliError::Config(e.to_string())
    }
}

fn io_err(e: CoreError) -> CliError {
    CliError::Numerical(e.to_string())
}

type CmdResult = Result<RunSummary, CliError>;

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub out: PathBuf,
    pub jobs: usize,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a RunConfig, out: PathBuf, jobs: usize) -> Result<Self, CliError> {
        std::fs::create_dir_all(&out)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
        Ok(Self { cfg, out, jobs })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

pub fn build_spec(cfg: &RunConfig) -> Result<GridSpec, CliError> {
    let n = cfg.usize("n")?;
    let half = cfg.f64("half_width")?;
    let margin = cfg.usize("margin")?;
    if !(half > 0.0) {
        return Err(CliError::Config(format!("half_width {half} must be positive")));
    }
    GridSpec::new(n, 2.0 * half / n as f64, margin).map_err(classify)
}

fn parse_direction(cfg: &RunConfig, m: usize) -> Result<Vec<f64>, CliError> {
    let dir = cfg.f64_list("data.dir")?;
    if dir.len() != m {
        return Err(CliError::Config(format!(
            "data.dir has {} components, expected m = {m}",
            dir.len()
        )));
    }
    Ok(dir)
}

fn parse_bumps(cfg: &RunConfig, m: usize) -> Result<Vec<Bump>, CliError> {
    let raw = cfg.get("data.bumps")?;
    let mut bumps = Vec::new();
    for (i, part) in raw.split(';').enumerate() {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let nums: Result<Vec<f64>, _> = part.split(',').map(|p| p.trim().parse::<f64>()).collect();
        let nums = nums.map_err(|_| {
            CliError::Config(format!("data.bumps entry {i}: bad number in '{part}'"))
        })?;
        if nums.len() != 5 + m {
            return Err(CliError::Config(format!(
                "data.bumps entry {i}: expected cx,cy,sigma,amp,vel_amp and {m} direction components"
            )));
        }
        bumps.push(Bump {
            center: (nums[0], nums[1]),
            scale: nums[2],
            amplitude: nums[3],
            velocity_amplitude: nums[4],
            direction: nums[5..].to_vec(),
        });
    }
    if bumps.is_empty() {
        return Err(CliError::Config("data.bumps is empty".into()));
    }
    Ok(bumps)
}

/// Build the initial data named by the configuration.
pub fn build_data(cfg: &RunConfig) -> Result<DataPair, CliError> {
    let d = build_data_inner(cfg)?;
    let lambda = cfg.f64("data.dilate")?;
    if lambda != 1.0 {
        return caloric_core::grid::sym_dilate(&d, lambda).map_err(classify);
    }
    Ok(d)
}

fn build_data_inner(cfg: &RunConfig) -> Result<DataPair, CliError> {
    let spec = build_spec(cfg)?;
    let m = cfg.usize("m")?;
    if m < 1 || m > 6 {
        return Err(CliError::Config(format!("m = {m} outside [1, 6]")));
    }
    match cfg.get("data.kind")? {
        "constant" => Ok(DataPair::constant(spec, &HyperbolicPoint::basepoint(m))),
        "gaussian" => {
            let amp = cfg.f64("data.amp")?;
            let sigma = cfg.f64("data.sigma")?;
            let vamp = cfg.f64("data.vel_amp")?;
            let vsigma = cfg.f64("data.vel_sigma")?;
            let (cx, cy) = (cfg.f64("data.center_x")?, cfg.f64("data.center_y")?);
            let dir = parse_direction(cfg, m)?;
            let u0 = move |x: f64, y: f64| {
                amp * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp()
            };
            let u1 = move |x: f64, y: f64| {
                vamp * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * vsigma * vsigma)).exp()
            };
            make_geodesic_data(spec, m, &u0, &u1, &dir).map_err(classify)
        }
        "velocity-bump" => {
            let vamp = cfg.f64("data.vel_amp")?;
            let vsigma = cfg.f64("data.vel_sigma")?;
            let (cx, cy) = (cfg.f64("data.center_x")?, cfg.f64("data.center_y")?);
            let dir = parse_direction(cfg, m)?;
            let u1 = move |x: f64, y: f64| {
                vamp * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * vsigma * vsigma)).exp()
            };
            make_geodesic_data(spec, m, &|_, _| 0.0, &u1, &dir).map_err(classify)
        }
        "multibump" => {
            let bumps = parse_bumps(cfg, m)?;
            let (d, warnings) = make_multibump_data(spec, m, &bumps).map_err(classify)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            Ok(d)
        }
        "random-smooth" => {
            // fixed draw ranges so every resolution sees the same datum
            // (refinement studies sample one continuum field)
            let mut rng = SplitMix64::new(cfg.u64("seed")?);
            let count = cfg.usize("data.random_bumps")?.max(1);
            let mut bumps = Vec::with_capacity(count);
            for _ in 0..count {
                let sigma = rng.range(0.7, 0.85);
                let mut dir: Vec<f64> = (0..m).map(|_| rng.gaussian()).collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                dir.iter_mut().for_each(|x| *x /= norm);
                bumps.push(Bump {
                    center: (rng.range(-1.8, 1.8), rng.range(-1.8, 1.8)),
                    scale: sigma,
                    amplitude: rng.range(0.12, 0.3) * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 },
                    velocity_amplitude: rng.range(0.05, 0.18)
                        * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 },
                    direction: dir,
                });
            }
            let (d, _warnings) = make_multibump_data(spec, m, &bumps).map_err(classify)?;
            Ok(d)
        }
        other => Err(CliError::Config(format!("unknown data.kind '{other}'"))),
    }
}

pub fn ladder_params(cfg: &RunConfig, jobs: usize) -> Result<LadderParams, CliError> {
    let mut p = LadderParams::new(cfg.f64("ladder.s_max")?).with_jobs(jobs);
    p.ratio = cfg.f64("ladder.rho")?;
    p.substep_safety = cfg.f64("ladder.substep_c")?;
    let s_min = cfg.f64("ladder.s_min")?;
    if s_min > 0.0 {
        p.s_min = Some(s_min);
    }
    Ok(p)
}

fn esd_params(cfg: &RunConfig, jobs: usize) -> Result<EsdParams, CliError> {
    let mut p = EsdParams::new(ladder_params(cfg, jobs)?);
    p.flat_tol = cfg.f64("caloric.flat_tol")?;
    p.tail_decades = cfg.f64("esd.tail_decades")?;
    p.dominance = cfg.bool("esd.dominance")?;
    Ok(p)
}

/// Signed geodesic coordinate along a direction (abelian data diagnostics).
fn geodesic_coords(phi: &caloric_core::grid::MapField, dir: &[f64]) -> Vec<f64> {
    let spec = *phi.spec();
    let m = phi.dim();
    let base = phi.base();
    let mut amb = vec![0.0; m + 1];
    for a in 0..m {
        amb[a + 1] = dir[a];
    }
    let mut out = vec![0.0; spec.cells()];
    let mut lg = vec![0.0; m + 1];
    for iy in 0..spec.n {
        for ix in 0..spec.n {
            log_into(base, phi.point(ix, iy), &mut lg);
            out[spec.idx(ix, iy)] =
                caloric_core::hyperbolic::minkowski_inner(&lg, &amb);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn cmd_simulate(ctx: &Ctx) -> CmdResult {
    let cfg = ctx.cfg;
    let mut summary = RunSummary::new("simulate", cfg.hash());
    let d = build_data(cfg)?;
    let spec = *d.spec();
    let cfl = cfg.f64("wave.cfl")?;
    let t_end = cfg.f64("wave.t_end")?;
    let outputs = cfg.usize("wave.outputs")?.max(2);
    let params = WaveParams::new(cfl).with_jobs(ctx.jobs);
    // step-aligned output times so residuals can use adjacent slices
    let steps = (t_end / (cfl * spec.h)).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let every = (steps / (outputs - 1)).max(1);
    let times: Vec<f64> = (0..outputs)
        .map(|k| ((k * every).min(steps) as f64) * dt)
        .collect();
    let tr = wave::evolve_wave(&d, (0.0, t_end), &params, &times).map_err(classify)?;

    let series = wave::energy_series(&tr);
    let mut csv = CsvWriter::create(
        &ctx.path("energy.csv"),
        "t [time], E [energy], constraint_drift [abs]",
    )
    .map_err(io_err)?;
    for (t, e, drift) in &series {
        csv.row(&[*t, *e, *drift]).map_err(io_err)?;
    }
    csv.finish().map_err(io_err)?;
    summary.artifact(&ctx.path("energy.csv"));

    let e0 = series[0].1;
    let drift = series
        .iter()
        .map(|(_, e, _)| (e - e0).abs())
        .fold(0.0f64, f64::max)
        / e0.max(1e-300);
    summary.check_le("energy_drift_rel", drift, cfg.f64("wave.drift_tol")?);
    // blowup policy: gradient-sup growth is reported, never regularized
    let density_sup = |d: &DataPair| -> f64 {
        energy_density(d).t00.iter().fold(0.0f64, |a, v| a.max(*v)).sqrt()
    };
    summary.value("gradient_sup_initial", density_sup(tr.slice(0)));
    summary.value("gradient_sup_final", density_sup(tr.slice(tr.len() - 1)));
    let worst_constraint = series.iter().map(|x| x.2).fold(0.0f64, f64::max);
    summary.check_le("constraint_drift", worst_constraint, 1e-9);

    let cone_r0 = cfg.f64("wave.cone_r0")?;
    if cone_r0 > 0.0 {
        let leaks = wave::lightcone_leak(&tr, (0.0, 0.0), cone_r0);
        let mut csv = CsvWriter::create(
            &ctx.path("cone.csv"),
            "t [time], exterior_energy [energy outside B(0, r0 + t)]",
        )
        .map_err(io_err)?;
        for (t, leak) in &leaks {
            csv.row(&[*t, *leak]).map_err(io_err)?;
        }
        csv.finish().map_err(io_err)?;
        summary.artifact(&ctx.path("cone.csv"));
        let worst = leaks.iter().map(|x| x.1).fold(0.0f64, f64::max);
        summary.check_le(
            "cone_leak_rel",
            worst / e0.max(1e-300),
            cfg.f64("wave.cone_leak_tol")?,
        );
    }

    if cfg.get("data.kind")? == "gaussian" {
        // geodesic reduction: compare against the semi-discrete wave solution
        let m = cfg.usize("m")?;
        let dir = parse_direction(cfg, m)?;
        let basis = SineBasis::for_grid(spec);
        let amp = cfg.f64("data.amp")?;
        let sigma = cfg.f64("data.sigma")?;
        let vamp = cfg.f64("data.vel_amp")?;
        let vsigma = cfg.f64("data.vel_sigma")?;
        let (cx, cy) = (cfg.f64("data.center_x")?, cfg.f64("data.center_y")?);
        let c0 = basis.forward(&ScalarField::from_profile(spec, &|x, y| {
            amp * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp()
        }));
        let c1 = basis.forward(&ScalarField::from_profile(spec, &|x, y| {
            vamp * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * vsigma * vsigma)).exp()
        }));
        let mut csv = CsvWriter::create(
            &ctx.path("oracle.csv"),
            "t [time], sup_error [sup |u_num - u_oracle|]",
        )
        .map_err(io_err)?;
        let mut final_err = 0.0;
        for (k, t) in tr.times().iter().enumerate() {
            let (pos, _) = basis.wave_coeffs(&c0, &c1, *t);
            let want = basis.inverse(&pos);
            let got = geodesic_coords(&tr.slice(k).phi0, &dir);
            let sup = got
                .iter()
                .zip(&want.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            csv.row(&[*t, sup]).map_err(io_err)?;
            final_err = sup;
        }
        csv.finish().map_err(io_err)?;
        summary.artifact(&ctx.path("oracle.csv"));
        summary.value("oracle_sup_error", final_err);
        let tol = cfg.f64("wave.oracle_tol")?;
        if tol > 0.0 {
            summary.check("oracle_sup_error_bound", final_err <= tol);
        }
    }

    // residual of the middle stored slice when spacing is uniform
    if tr.len() >= 3 {
        let k = tr.len() / 2;
        if let Ok(r) = wave::wave_residual(&tr, k) {
            let l2 = (spec.cell_area() * r.iter().map(|v| v * v).sum::<f64>()).sqrt();
            summary.value("wave_residual_l2", l2);
        }
    }

    if let Some((prev, cur)) = tr.final_state() {
        let path = ctx.path("checkpoint.cgwm");
        snapshot::save_wave_checkpoint(&spec, d.dim(), d.phi0.base(), prev, cur, &path)
            .map_err(io_err)?;
        summary.artifact(&path);
    }

    summary.write(&ctx.out).map_err(|e| CliError::Numerical(e.to_string()))?;
    summary.artifact(&ctx.path("summary.txt"));
    Ok(summary)
}

// ---------------------------------------------------------------------------
// heatflow
// ---------------------------------------------------------------------------

pub fn cmd_heatflow(ctx: &Ctx) -> CmdResult {
    let cfg = ctx.cfg;
    let mut summary = RunSummary::new("heatflow", cfg.hash());
    let d = build_data(cfg)?;
    let params = ladder_params(cfg, ctx.jobs)?;
    let ladder = heat::heat_flow(&d.phi0, &params).map_err(classify)?;
    let mut csv = CsvWriter::create(
        &ctx.path("dirichlet.csv"),
        "s [heat time], dirichlet_energy [energy]",
    )
    .map_err(io_err)?;
    for (s, e) in ladder.s_values().iter().zip(ladder.dirichlet_energies()) {
        csv.row(&[*s, *e]).map_err(io_err)?;
    }
    csv.finish().map_err(io_err)?;
    summary.artifact(&ctx.path("dirichlet.csv"));
    let path = ctx.path("final_slice.cgwm");
    snapshot::save_map_field(ladder.final_slice(), &path).map_err(io_err)?;
    summary.artifact(&path);
    let e = ladder.dirichlet_energies();
    let monotone = e.windows(2).all(|w| w[1] <= w[0] + 1e-10 * e[0]);
    summary.check("dirichlet_monotone", monotone);
    summary.value("flat_sup_dist", ladder.final_sup_dist());
    summary.value("dirichlet_initial", e[0]);
    summary.value("dirichlet_final", *e.last().unwrap());
    summary.write(&ctx.out).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// esd
// ---------------------------------------------------------------------------

pub fn cmd_esd(ctx: &Ctx) -> CmdResult {
    let cfg = ctx.cfg;
    let mut summary = RunSummary::new("esd", cfg.hash());
    let d = build_data(cfg)?;
    let spec = *d.spec();
    let params = esd_params(cfg, ctx.jobs)?;
    let out = spectral::esd(&d, &params).map_err(classify)?;

    let mut csv = CsvWriter::create(
        &ctx.path("esd.csv"),
        "s [heat time], esd [energy density in s], weight [quadrature]",
    )
    .map_err(io_err)?;
    for (s, v, w) in &out.profile.samples {
        csv.row(&[*s, *v, *w]).map_err(io_err)?;
    }
    csv.finish().map_err(io_err)?;
    summary.artifact(&ctx.path("esd.csv"));

    snapshot::save_data_pair(&d, &ctx.path("data.cgwm")).map_err(io_err)?;
    summary.artifact(&ctx.path("data.cgwm"));

    summary.value("E", out.energy);
    summary.value("integral", out.profile.integral());
    summary.value("tail", out.profile.tail_estimate);
    summary.value("tail_fit", out.tail_fit);
    summary.check_le(
        "energy_identity_residual",
        out.identity_residual,
        cfg.f64("esd.identity_tol")?,
    );
    let monotone = out.psi_t_l2.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    summary.check("psi_t_mass_monotone", monotone);
    summary.check(
        "integral_below_energy",
        out.profile.integral() <= out.energy * (1.0 + 1e-3) + 1e-14,
    );
    summary.value("esd_max_adjacent_jump", out.profile.max_adjacent_jump());
    if params.dominance {
        // |psi_t(0)| is the pointwise norm of phi1 (frames are isometric)
        let mut u0_sup = 0.0f64;
        for iy in 0..spec.n {
            for ix in 0..spec.n {
                let v = d.phi1.vec_at(&spec, ix, iy);
                u0_sup = u0_sup
                    .max(caloric_core::hyperbolic::minkowski_inner(v, v).max(0.0).sqrt());
            }
        }
        summary.check_le(
            "dominance_violation",
            out.dominance_violation.unwrap_or(0.0),
            cfg.f64("esd.dominance_tol")? * u0_sup.max(1e-300),
        );
    }

    // symmetry law checks
    let tol_exact = cfg.f64("esd.translate_tol")?;
    let shift = cfg.f64_list("esd.check_translate")?;
    if shift.len() == 2 {
        let v = spectral::esd_symmetry_check(&d, &SymmetryOp::Translate((shift[0], shift[1])), &params)
            .map_err(classify)?;
        summary.check_le("esd_translate_discrepancy", v, tol_exact);
    }
    if cfg.bool("esd.check_timerev")? {
        let v = spectral::esd_symmetry_check(&d, &SymmetryOp::TimeReverse, &params)
            .map_err(classify)?;
        summary.check_le("esd_timerev_discrepancy", v, tol_exact);
    }
    let angle = cfg.f64("esd.check_rotate_angle")?;
    if angle != 0.0 {
        let m = d.dim();
        if m >= 2 {
            let u = caloric_core::hyperbolic::LorentzRotation::spatial_rotation(m, 1, 2, angle);
            let v = spectral::esd_symmetry_check(&d, &SymmetryOp::Rotate(u), &params)
                .map_err(classify)?;
            summary.check_le("esd_rotate_discrepancy", v, tol_exact);
        }
    }
    let chi = cfg.f64("esd.check_boost")?;
    if chi != 0.0 {
        let m = d.dim();
        let u = caloric_core::hyperbolic::LorentzRotation::boost(m, 1, chi);
        let v = spectral::esd_symmetry_check(&d, &SymmetryOp::Rotate(u), &params)
            .map_err(classify)?;
        summary.check_le("esd_boost_discrepancy", v, 10.0 * tol_exact);
    }
    let lambda = cfg.f64("esd.check_dilate")?;
    if lambda > 0.0 && lambda != 1.0 {
        let v = spectral::esd_symmetry_check(&d, &SymmetryOp::Dilate(lambda), &params)
            .map_err(classify)?;
        summary.check_le("esd_dilate_discrepancy", v, cfg.f64("esd.dilate_tol")?);
    }

    summary.write(&ctx.out).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct GaugeProbe {
    h: f64,
    torsion: f64,
    curvature: f64,
    heatflow: f64,
    a_s: f64,
    heatflow_identity: f64,
    mass_diffusion: f64,
}

fn probe_at(v: &[(f64, f64)], s_probe: f64) -> f64 {
    v.iter()
        .min_by(|a, b| {
            (a.0 - s_probe)
                .abs()
                .partial_cmp(&(b.0 - s_probe).abs())
                .unwrap()
        })
        .map(|x| x.1)
        .unwrap_or(f64::NAN)
}

fn gauge_probe(cfg: &RunConfig, level: usize, jobs: usize) -> Result<GaugeProbe, CliError> {
    // level 0 is the configured grid; level j halves n j times and widens
    // the ladder ratio so that the log-step scales with h
    let mut local = cfg.clone();
    let n = cfg.usize("n")?;
    let shift = 1usize << level;
    if n % shift != 0 || n / shift < 16 {
        return Err(CliError::Config(format!(
            "n = {n} cannot be halved {level} times (grids must stay >= 16 cells)"
        )));
    }
    local
        .assign(&format!("n={}", n / shift))
        .map_err(CliError::from)?;
    let rho = cfg.f64("ladder.rho")?;
    let rho_level = rho.powi(shift as i32);
    local
        .assign(&format!("ladder.rho={rho_level}"))
        .map_err(CliError::from)?;
    let d = build_data(&local)?;
    let params = ladder_params(&local, jobs)?;
    let ladder = heat::heat_flow(&d.phi0, &params).map_err(classify)?;
    let e_inf = spectral::frame_at_base(&d).map_err(classify)?;
    let frames =
        gauge::construct_caloric_gauge(&ladder, &e_inf, cfg.f64("caloric.flat_tol")?)
            .map_err(classify)?;
    let s_probe = cfg.f64("verify.s_probe")?;
    let torsion = probe_at(&gauge::check_torsion(&ladder, &frames), s_probe);
    let curvature = probe_at(&gauge::check_curvature(&ladder, &frames), s_probe);
    let heatflow = probe_at(&gauge::check_heatflow_eq(&ladder, &frames), s_probe);
    let a_s = probe_at(&gauge::check_a_s(&ladder, &frames), s_probe);
    let heatflow_identity = gauge::check_heatflow_identity(&ladder, &frames)
        .iter()
        .map(|x| x.1)
        .fold(0.0f64, f64::max);
    let mass_diffusion = if cfg.bool("verify.covariant")? {
        let u0 = gauge::psi_t_zero_slice(&ladder, &frames, &d.phi1);
        let sol = spectral::covariant_heat_solve(
            &u0,
            &ladder,
            &frames,
            &spectral::CovariantOptions {
                dominance: false,
                jobs,
            },
        )
        .map_err(classify)?;
        probe_at(&spectral::check_mass_diffusion(&sol, &ladder, &frames), s_probe)
    } else {
        f64::NAN
    };
    Ok(GaugeProbe {
        h: d.spec().h,
        torsion,
        curvature,
        heatflow,
        a_s,
        heatflow_identity,
        mass_diffusion,
    })
}

fn ls_slope(hs: &[f64], res: &[f64]) -> f64 {
    // slope of ln(res) against ln(h): the measured convergence order
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(res)
        .filter(|(_, r)| **r > 0.0)
        .map(|(h, r)| (h.ln(), r.ln()))
        .collect();
    let n = pts.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    sxy / sxx
}

pub fn cmd_verify(ctx: &Ctx) -> CmdResult {
    let cfg = ctx.cfg;
    let mut summary = RunSummary::new("verify", cfg.hash());
    let d = build_data(cfg)?;
    let params = ladder_params(cfg, ctx.jobs)?;
    let flat_tol = cfg.f64("caloric.flat_tol")?;

    if cfg.bool("verify.gauge")? {
        let ladder = heat::heat_flow(&d.phi0, &params).map_err(classify)?;
        let e_inf = spectral::frame_at_base(&d).map_err(classify)?;
        let frames =
            gauge::construct_caloric_gauge(&ladder, &e_inf, flat_tol).map_err(classify)?;
        let torsion = gauge::check_torsion(&ladder, &frames);
        let curvature = gauge::check_curvature(&ladder, &frames);
        let heatflow = gauge::check_heatflow_eq(&ladder, &frames);
        let a_s = gauge::check_a_s(&ladder, &frames);
        let mut csv = CsvWriter::create(
            &ctx.path("residuals.csv"),
            "s [heat time], torsion [L2], curvature [L2], heatflow [L2], As_residual [L2]",
        )
        .map_err(io_err)?;
        for (k, (s, t)) in torsion.iter().enumerate() {
            let a = if k == 0 {
                a_s.first().map(|x| x.1).unwrap_or(0.0)
            } else {
                probe_at(&a_s, *s)
            };
            csv.row(&[*s, *t, curvature[k].1, heatflow[k].1, a])
                .map_err(io_err)?;
        }
        csv.finish().map_err(io_err)?;
        summary.artifact(&ctx.path("residuals.csv"));

        let s_probe = cfg.f64("verify.s_probe")?;
        summary.value("torsion_residual", probe_at(&torsion, s_probe));
        summary.value("curvature_residual", probe_at(&curvature, s_probe));
        summary.value("heatflow_residual", probe_at(&heatflow, s_probe));
        summary.value("a_s_residual", probe_at(&a_s, s_probe));
        let identity = gauge::check_heatflow_identity(&ladder, &frames)
            .iter()
            .map(|x| x.1)
            .fold(0.0f64, f64::max);
        summary.check_le("heatflow_identity_route", identity, 1e-10);

        // connection: link route against the integral route
        let routes = gauge::connection_integral_check(&ladder, &frames);
        summary.value("connection_route_sup_at_0", routes[0].1);

        let (sup_scaled, integ) = gauge::parabolic_size_report(&ladder, &frames);
        summary.value("parabolic_sup_scaled", sup_scaled);
        summary.value("parabolic_integral", integ);

        if cfg.get("data.kind")? == "gaussian" || cfg.get("data.kind")? == "velocity-bump" {
            // abelian reduction: flat connection and vanishing identities
            let abelian_tol = cfg.f64("verify.abelian_tol")?;
            let mut a_sup = 0.0f64;
            for k in [0, ladder.len() / 2, ladder.len() - 1] {
                let links = gauge::links_slice(&ladder, &frames, k);
                let a = gauge::connection_slice(d.spec(), d.dim(), &links);
                a_sup = a_sup.max(a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
            }
            summary.check_le("abelian_connection_sup", a_sup, abelian_tol);
            let t_sup = torsion.iter().map(|x| x.1).fold(0.0f64, f64::max);
            summary.check_le("abelian_torsion", t_sup, abelian_tol);
            let c_sup = curvature.iter().map(|x| x.1).fold(0.0f64, f64::max);
            summary.check_le("abelian_curvature", c_sup, abelian_tol);
            let as_sup = a_s.iter().map(|x| x.1).fold(0.0f64, f64::max);
            summary.check_le("abelian_a_s", as_sup, abelian_tol);
        }

        if cfg.bool("verify.covariant")? {
            let u0 = gauge::psi_t_zero_slice(&ladder, &frames, &d.phi1);
            let m = d.dim();
            let u0_sup = u0
                .chunks(m)
                .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0f64, f64::max);
            let viol =
                spectral::check_pointwise_dominance(&u0, &ladder, &frames, ctx.jobs)
                    .map_err(classify)?;
            summary.check_le("dominance_violation", viol, 1e-6 * u0_sup.max(1e-300));
            let sol = spectral::covariant_heat_solve(
                &u0,
                &ladder,
                &frames,
                &spectral::CovariantOptions {
                    dominance: false,
                    jobs: ctx.jobs,
                },
            )
            .map_err(classify)?;
            let monotone = sol.l2_sq.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
            summary.check("psi_t_mass_monotone", monotone);
            let worst_entry = spectral::check_energy_inequality(&sol, &ladder, &frames)
                .iter()
                .map(|x| x.1)
                .fold(f64::NEG_INFINITY, f64::max);
            summary.check_le(
                "energy_inequality_max_entry",
                worst_entry,
                1e-8 * sol.l2_sq[0].max(1e-300),
            );
            summary.value(
                "mass_diffusion_residual",
                probe_at(
                    &spectral::check_mass_diffusion(&sol, &ladder, &frames),
                    cfg.f64("verify.s_probe")?,
                ),
            );
            // parabolic scaling report: sup_s s^{1/2} ||u(s)||_inf, which
            // stays bounded by the initial L^2 mass
            let m = d.dim();
            let mut sup_scaled = 0.0f64;
            for (k, &s_k) in sol.s_values.iter().enumerate() {
                let sup = sol.slices[k]
                    .chunks(m)
                    .map(|c| c.iter().map(|v| v * v).sum::<f64>())
                    .fold(0.0f64, f64::max)
                    .sqrt();
                sup_scaled = sup_scaled.max(s_k.sqrt() * sup);
            }
            summary.value("covariant_scaled_sup", sup_scaled);
        }

        // derivative-field recovery from the s-integral of D_x psi_s
        let psi_eq = spectral::psi_eq_check(&ladder, &frames);
        summary.value("psi_eq_sup_at_0", psi_eq[0].1);
    }

    // refinement study: orders across grid halvings
    let levels = cfg.usize("verify.refine_levels")?;
    if levels > 0 {
        let mut hs = Vec::new();
        let mut table: Vec<GaugeProbe> = Vec::new();
        for level in (0..=levels).rev() {
            let probe = gauge_probe(cfg, level, ctx.jobs)?;
            hs.push(probe.h);
            table.push(probe);
        }
        let mut csv = CsvWriter::create(
            &ctx.path("orders.csv"),
            "h [spacing], torsion, curvature, heatflow, As_residual, mass_diffusion [L2 residuals]",
        )
        .map_err(io_err)?;
        for p in &table {
            csv.row(&[p.h, p.torsion, p.curvature, p.heatflow, p.a_s, p.mass_diffusion])
                .map_err(io_err)?;
        }
        csv.finish().map_err(io_err)?;
        summary.artifact(&ctx.path("orders.csv"));
        let order_tol = cfg.f64("verify.order_tol")?;
        let tor: Vec<f64> = table.iter().map(|p| p.torsion).collect();
        let cur: Vec<f64> = table.iter().map(|p| p.curvature).collect();
        let hfl: Vec<f64> = table.iter().map(|p| p.heatflow).collect();
        let asr: Vec<f64> = table.iter().map(|p| p.a_s).collect();
        summary.check_ge("order_torsion", ls_slope(&hs, &tor), order_tol);
        summary.check_ge("order_curvature", ls_slope(&hs, &cur), order_tol);
        summary.check_ge("order_heatflow", ls_slope(&hs, &hfl), order_tol);
        summary.check_ge("order_a_s", ls_slope(&hs, &asr), order_tol);
        let idmax = table
            .iter()
            .map(|p| p.heatflow_identity)
            .fold(0.0f64, f64::max);
        summary.check_le("heatflow_identity_route_all_levels", idmax, 1e-10);
        if cfg.bool("verify.covariant")? {
            let mdf: Vec<f64> = table.iter().map(|p| p.mass_diffusion).collect();
            summary.check_ge("order_mass_diffusion", ls_slope(&hs, &mdf), 0.8);
        }
    }

    // energy metric: identity of indiscernibles, SO(m) quotient, energy
    if cfg.bool("verify.metric")? {
        let ladder = heat::heat_flow(&d.phi0, &params).map_err(classify)?;
        let e_inf = spectral::frame_at_base(&d).map_err(classify)?;
        let frames =
            gauge::construct_caloric_gauge(&ladder, &e_inf, flat_tol).map_err(classify)?;
        let fields = gauge::derivative_fields(&ladder, &frames, &d.phi1).map_err(classify)?;
        let tail = *ladder.dirichlet_energies().last().unwrap();
        let mf = gauge::MetricField::of(&fields).map_err(classify)?.with_tail(tail);
        let self_dist = gauge::energy_metric(&mf, &mf, false).map_err(classify)?;
        summary.check_le("metric_self_distance", self_dist, 0.0);
        let m = d.dim();
        let angle: f64 = 1.1;
        let mut u = vec![0.0; m * m];
        u[0] = angle.cos();
        u[1] = -angle.sin();
        u[m] = angle.sin();
        u[m + 1] = angle.cos();
        for a in 2..m {
            u[a * m + a] = 1.0;
        }
        let rot_frames = frames.rotate_coordinates(&u);
        let rot_fields =
            gauge::derivative_fields(&ladder, &rot_frames, &d.phi1).map_err(classify)?;
        let mr = gauge::MetricField::of(&rot_fields).map_err(classify)?.with_tail(tail);
        let raw = gauge::energy_metric(&mf, &mr, false).map_err(classify)?;
        summary.value("metric_raw_rotated", raw);
        summary.check("metric_raw_rotated_positive", raw > 1e-3);
        let quot = gauge::energy_metric(&mf, &mr, true).map_err(classify)?;
        summary.check_le("metric_quotient_rotated", quot, 1e-8);
        let fe = gauge::field_energy(&mf);
        let e = total_energy(&d);
        summary.check_le(
            "metric_energy_rel",
            (fe - e).abs() / e.max(1e-300),
            1e-3,
        );
    }

    // wave tension at s = 0 on an evolved trajectory
    if cfg.bool("verify.wave_tension")? {
        let value = wave_tension_value(cfg, &d, ctx.jobs)?;
        summary.check_le(
            "wave_tension_rel",
            value,
            cfg.f64("verify.wave_tension_tol")?,
        );
    }

    summary.write(&ctx.out).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(summary)
}

/// ||w(0)||_{L^2} / sqrt(E) on an evolved slice triple.
pub fn wave_tension_value(cfg: &RunConfig, d: &DataPair, jobs: usize) -> Result<f64, CliError> {
    let spec = *d.spec();
    let cfl = cfg.f64("wave.cfl")?;
    let t_end = cfg.f64("wave.t_end")?;
    let params = WaveParams::new(cfl).with_jobs(jobs);
    let steps = (t_end / (cfl * spec.h)).ceil().max(4.0) as usize;
    let dt = t_end / steps as f64;
    let mid = steps / 2;
    let times: Vec<f64> = [(mid - 1) as f64, mid as f64, (mid + 1) as f64]
        .iter()
        .map(|k| k * dt)
        .collect();
    let tr = wave::evolve_wave(d, (0.0, t_end), &params, &times).map_err(classify)?;
    // ||w(0)|| is frame-independent (the computation is geometric and the
    // frames enter only as an isometric read-out), so a minimal ladder
    // suffices for the per-slice gauges
    let mut ladder = ladder_params(cfg, jobs)?;
    ladder.s_max = spec.h * spec.h;
    let e_inf = spectral::frame_at_base(d).map_err(classify)?;
    let mut gauges = Vec::with_capacity(3);
    for k in 0..3 {
        let slice = tr.slice(k);
        let lad = heat::heat_flow(&slice.phi0, &ladder).map_err(classify)?;
        let frames =
            gauge::construct_caloric_gauge(&lad, &e_inf, f64::INFINITY).map_err(classify)?;
        gauges.push(TimeSliceGauge::new(&lad, &frames, &slice.phi1));
    }
    let w = gauge::wave_tension(&gauges[0], &gauges[1], &gauges[2], tr.dt() * ((mid) - (mid - 1)) as f64)
        .map_err(classify)?;
    let l2 = (spec.cell_area() * w.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let e = total_energy(d);
    Ok(l2 / e.max(1e-300).sqrt())
}

// ---------------------------------------------------------------------------
// localize
// ---------------------------------------------------------------------------

pub fn cmd_localize(ctx: &Ctx) -> CmdResult {
    let cfg = ctx.cfg;
    let mut summary = RunSummary::new("localize", cfg.hash());
    let d = build_data(cfg)?;
    let spec = *d.spec();
    let mut params = esd_params(cfg, ctx.jobs)?;
    params.store_fields = true;

    let eps_rel = cfg.f64("localize.eps_rel")?;
    if !(0.0 < eps_rel && eps_rel < 1.0) {
        return Err(CliError::Config(format!(
            "localize.eps_rel = {eps_rel} outside (0, 1)"
        )));
    }
    let out = spectral::esd(&d, &params).map_err(classify)?;
    let total = out.profile.total();
    let s0 = localize::find_frequency_scale(&out.profile, eps_rel * total).map_err(classify)?;
    summary.value("s_scale", s0);

    let e = energy_density(&d);
    let r_cfg = cfg.f64("localize.center_radius")?;
    let radius = if r_cfg > 0.0 { r_cfg } else { s0.sqrt().max(2.0 * spec.h) };
    let (center, captured) = localize::find_spatial_center(&e, radius);
    summary.value("x_center", center.0);
    summary.value("y_center", center.1);
    summary.value("captured_energy", captured);

    // concentration radius table
    let mut radius_table = Vec::new();
    let mut csv = CsvWriter::create(
        &ctx.path("radius.csv"),
        "eps [exterior energy], radius [length]",
    )
    .map_err(io_err)?;
    let e_total = e.total();
    for frac in cfg.f64_list("localize.radius_eps")? {
        let r = localize::concentration_radius(&e, center, frac * e_total);
        csv.row(&[frac * e_total, r]).map_err(io_err)?;
        radius_table.push((frac, r));
    }
    csv.finish().map_err(io_err)?;
    summary.artifact(&ctx.path("radius.csv"));
    let monotone = radius_table.windows(2).all(|w| w[1].1 >= w[0].1 || w[1].0 >= w[0].0);
    summary.check("radius_table_monotone", monotone);

    // pigeonhole gap
    let gap_lo = cfg.f64("localize.gap_lo")?;
    let gap_hi = cfg.f64("localize.gap_hi")?;
    if gap_lo > 0.0 && gap_hi > gap_lo {
        let k_list = cfg.f64_list("localize.k_list")?;
        let floor_rel = cfg.f64("localize.floor_rel")?;
        let gap = localize::pigeonhole_gap(&out.profile, gap_lo, gap_hi, &k_list, floor_rel)
            .map_err(classify)?;
        summary.value("gap_s_prime", gap.s_prime);
        summary.value("gap_k", gap.k);
        summary.value("gap_annulus_mass", gap.annulus_mass);
        summary.check("gap_floor_met", gap.floor_met);
    }

    // tightness table over the configured radii and window
    {
        let ladder = heat::heat_flow(&d.phi0, &params.ladder).map_err(classify)?;
        let e_inf = spectral::frame_at_base(&d).map_err(classify)?;
        let frames = gauge::construct_caloric_gauge(&ladder, &e_inf, params.flat_tol)
            .map_err(classify)?;
        let u0 = gauge::psi_t_zero_slice(&ladder, &frames, &d.phi1);
        let sol = spectral::covariant_heat_solve(
            &u0,
            &ladder,
            &frames,
            &spectral::CovariantOptions {
                dominance: false,
                jobs: ctx.jobs,
            },
        )
        .map_err(classify)?;
        let window = (cfg.f64("localize.window_lo")?, cfg.f64("localize.window_hi")?);
        let r_list = cfg.f64_list("localize.r_list")?;
        let rows = localize::tightness_report(&ladder, &frames, &sol, window, &r_list);
        let mut csv = CsvWriter::create(
            &ctx.path("tightness.csv"),
            "R [length], psi_s_mass_outside [energy], psi_t_mass_outside [energy]",
        )
        .map_err(io_err)?;
        for (r, a, b) in &rows {
            csv.row(&[*r, *a, *b]).map_err(io_err)?;
        }
        csv.finish().map_err(io_err)?;
        summary.artifact(&ctx.path("tightness.csv"));
        let monotone = rows
            .windows(2)
            .all(|w| w[1].1 <= w[0].1 + 1e-14 && w[1].2 <= w[0].2 + 1e-14);
        summary.check("tightness_monotone", monotone);
        if let Some(exp) = localize::fitted_radial_exponent(&rows, 1) {
            summary.check_le("tightness_exponent", exp, cfg.f64("localize.exponent_tol")?);
        }
    }

    // normalization round trip
    if !cfg.bool("localize.normalize")? {
        summary.write(&ctx.out).map_err(|e| CliError::Numerical(e.to_string()))?;
        return Ok(summary);
    }
    let normalized = localize::normalize_data(&d, s0, center).map_err(classify)?;
    snapshot::save_data_pair(&normalized, &ctx.path("normalized.cgwm")).map_err(io_err)?;
    summary.artifact(&ctx.path("normalized.cgwm"));
    summary.value(
        "energy_preservation_rel",
        (total_energy(&normalized) - total_energy(&d)).abs() / total_energy(&d).max(1e-300),
    );
    let out2 = spectral::esd(&normalized, &params).map_err(classify)?;
    let s0b = localize::find_frequency_scale(&out2.profile, eps_rel * out2.profile.total())
        .map_err(classify)?;
    summary.value("normalized_scale", s0b);
    let rho = cfg.f64("ladder.rho")?;
    summary.check(
        "normalized_scale_in_band",
        s0b >= 1.0 / rho && s0b <= rho,
    );
    let e2 = energy_density(&normalized);
    let radius2 = if r_cfg > 0.0 { r_cfg } else { s0b.sqrt().max(2.0 * spec.h) };
    let (c2, _) = localize::find_spatial_center(&e2, radius2);
    summary.value("normalized_center_x", c2.0);
    summary.value("normalized_center_y", c2.1);
    summary.check(
        "normalized_center_within_h",
        c2.0.abs() <= spec.h && c2.1.abs() <= spec.h,
    );

    // flat key-value report
    {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(ctx.path("report.txt"))
                .map_err(|e| CliError::Numerical(e.to_string()))?,
        );
        let w = |f: &mut dyn Write, k: &str, v: f64| {
            let _ = writeln!(f, "{k}={}", caloric_core::csvio::fmt(v));
        };
        w(&mut f, "s_scale", s0);
        w(&mut f, "x_center", center.0);
        w(&mut f, "y_center", center.1);
        w(&mut f, "captured_energy", captured);
        w(&mut f, "normalized_scale", s0b);
        w(&mut f, "normalized_center_x", c2.0);
        w(&mut f, "normalized_center_y", c2.1);
        for (i, (frac, r)) in radius_table.iter().enumerate() {
            w(&mut f, &format!("radius.{i}.eps_frac"), *frac);
            w(&mut f, &format!("radius.{i}.value"), *r);
        }
        f.flush().map_err(|e| CliError::Numerical(e.to_string()))?;
        summary.artifact(&ctx.path("report.txt"));
    }

    summary.write(&ctx.out).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(summary)
}
