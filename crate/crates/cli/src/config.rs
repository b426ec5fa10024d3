//! Flat key=value run configuration with typed validation.
//!
//! Sources are layered: defaults, then a named preset, then the config
//! file, then `--set` overrides (later wins).  Unknown keys are rejected so
//! typos fail loudly.  The sorted key=value list feeds a stable hash that
//! the run summary records.

use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = Result<T, ConfigError>;

/// Every key the tool understands, with a one-line description.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    ("m", "target dimension (hyperbolic space H^m), >= 1"),
    ("n", "grid cells per side, >= 16"),
    ("half_width", "domain half width L; the grid covers [-L, L)"),
    ("margin", "clamped boundary ring width in cells, >= 2"),
    ("seed", "deterministic seed for randomized data kinds"),
    ("data.kind", "constant | gaussian | velocity-bump | multibump | random-smooth"),
    ("data.amp", "gaussian: phi0 profile amplitude"),
    ("data.sigma", "gaussian: phi0 profile width"),
    ("data.vel_amp", "gaussian / velocity-bump: phi1 profile amplitude"),
    ("data.vel_sigma", "gaussian / velocity-bump: phi1 profile width"),
    ("data.center_x", "profile center x"),
    ("data.center_y", "profile center y"),
    ("data.dir", "unit direction in R^m, comma separated"),
    (
        "data.bumps",
        "multibump: semicolon list of cx,cy,sigma,amp,vel_amp,d1,..,dm",
    ),
    ("data.random_bumps", "random-smooth: number of bumps"),
    ("data.dilate", "apply the scaling symmetry to the built data (1 = off)"),
    ("wave.cfl", "time step factor dt = cfl h, in (0, 0.5]"),
    ("wave.t_end", "evolution span [0, t_end]"),
    ("wave.outputs", "number of stored slices (evenly spaced)"),
    ("wave.drift_tol", "relative energy drift check threshold"),
    ("wave.cone_r0", "light cone check radius (0 disables)"),
    ("wave.cone_leak_tol", "cone leak threshold relative to E"),
    ("wave.oracle_tol", "geodesic oracle sup-error threshold"),
    ("ladder.rho", "geometric ladder ratio, > 1"),
    ("ladder.s_min", "first positive ladder point (0 = h^2/4 default)"),
    ("ladder.s_max", "final heat time"),
    ("ladder.substep_c", "substep safety factor c in ds <= c h^2"),
    ("caloric.flat_tol", "required sup distance to base at s_max"),
    ("esd.tail_decades", "trailing decades for the diagnostic tail fit"),
    ("esd.identity_tol", "energy identity residual threshold"),
    ("esd.dominance", "track the pointwise dominance margin (true/false)"),
    ("esd.dominance_tol", "dominance threshold relative to sup |psi_t(0)|"),
    ("esd.check_translate", "dx,dy for the translation ESD check (empty = off)"),
    ("esd.check_timerev", "run the time-reversal ESD check (true/false)"),
    ("esd.check_rotate_angle", "target rotation angle check (0 = off)"),
    ("esd.check_boost", "target boost rapidity check (0 = off)"),
    ("esd.check_dilate", "dilation factor check (0 = off)"),
    ("esd.translate_tol", "translation/time-reversal/rotation discrepancy threshold"),
    ("esd.dilate_tol", "dilation discrepancy threshold"),
    ("verify.gauge", "run torsion/curvature/heatflow/A_s residuals (true/false)"),
    ("verify.covariant", "run covariant heat checks (true/false)"),
    ("verify.wave_tension", "run the wave tension check (true/false)"),
    ("verify.refine_levels", "grid halvings for the order study (0 = off)"),
    ("verify.s_probe", "heat time at which residuals are compared"),
    ("verify.order_tol", "required convergence order"),
    ("verify.abelian_tol", "abelian residual threshold (geodesic data)"),
    ("verify.wave_tension_tol", "||w(0)|| / sqrt(E) threshold"),
    ("verify.metric", "run the energy metric checks (true/false)"),
    ("localize.eps_rel", "frequency-scale quantile (fraction of total mass)"),
    ("localize.normalize", "run the normalization round trip (true/false)"),
    ("localize.center_radius", "energy scan radius (0 = sqrt(s0))"),
    ("localize.radius_eps", "comma list of exterior-mass fractions"),
    ("localize.k_list", "comma list of pigeonhole K values"),
    ("localize.floor_rel", "pigeonhole mass floor relative to total"),
    ("localize.gap_lo", "pigeonhole scan lower s (0 = off)"),
    ("localize.gap_hi", "pigeonhole scan upper s"),
    ("localize.r_list", "comma list of tightness radii"),
    ("localize.window_lo", "tightness s-window lower edge"),
    ("localize.window_hi", "tightness s-window upper edge"),
    ("localize.exponent_tol", "required fitted radial exponent (at most)"),
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut values = BTreeMap::new();
        let defaults: &[(&str, &str)] = &[
            ("m", "2"),
            ("n", "64"),
            ("half_width", "8"),
            ("margin", "4"),
            ("seed", "20377"),
            ("data.kind", "gaussian"),
            ("data.amp", "0.5"),
            ("data.sigma", "1.0"),
            ("data.vel_amp", "0"),
            ("data.vel_sigma", "1.0"),
            ("data.center_x", "0"),
            ("data.center_y", "0"),
            ("data.dir", "1,0"),
            ("data.bumps", ""),
            ("data.random_bumps", "6"),
            ("data.dilate", "1"),
            ("wave.cfl", "0.25"),
            ("wave.t_end", "1.0"),
            ("wave.outputs", "5"),
            ("wave.drift_tol", "1e-4"),
            ("wave.cone_r0", "0"),
            ("wave.cone_leak_tol", "1e-6"),
            ("wave.oracle_tol", "0"),
            ("ladder.rho", "1.1"),
            ("ladder.s_min", "0"),
            ("ladder.s_max", "10"),
            ("ladder.substep_c", "0.2"),
            ("caloric.flat_tol", "0.05"),
            ("esd.tail_decades", "1.0"),
            ("esd.identity_tol", "1e-3"),
            ("esd.dominance", "false"),
            ("esd.dominance_tol", "1e-6"),
            ("esd.check_translate", ""),
            ("esd.check_timerev", "false"),
            ("esd.check_rotate_angle", "0"),
            ("esd.check_boost", "0"),
            ("esd.check_dilate", "0"),
            ("esd.translate_tol", "1e-10"),
            ("esd.dilate_tol", "1e-2"),
            ("verify.gauge", "true"),
            ("verify.covariant", "false"),
            ("verify.wave_tension", "false"),
            ("verify.refine_levels", "0"),
            ("verify.s_probe", "0.1"),
            ("verify.order_tol", "1.9"),
            ("verify.abelian_tol", "1e-8"),
            ("verify.wave_tension_tol", "1e-3"),
            ("verify.metric", "false"),
            ("localize.eps_rel", "0.8"),
            ("localize.normalize", "true"),
            ("localize.center_radius", "0"),
            ("localize.radius_eps", "0.5,0.2,0.1,0.05"),
            ("localize.k_list", "5,3,2"),
            ("localize.floor_rel", "1e-12"),
            ("localize.gap_lo", "0"),
            ("localize.gap_hi", "0"),
            ("localize.r_list", "1,1.5,2,3"),
            ("localize.window_lo", "0.01"),
            ("localize.window_hi", "1"),
            ("localize.exponent_tol", "-1.5"),
        ];
        for (k, v) in defaults {
            values.insert((*k).to_string(), (*v).to_string());
        }
        Self { values }
    }
}

impl RunConfig {
    /// The named acceptance presets.
    pub fn preset(name: &str) -> CResult<Self> {
        let mut cfg = Self::default();
        match name {
            "geodesic-gaussian" => {
                cfg.set_pairs(&[
                    ("n", "256"),
                    ("half_width", "8"),
                    ("data.kind", "gaussian"),
                    ("data.amp", "0.5"),
                    ("data.sigma", "1.0"),
                    ("data.vel_amp", "0.25"),
                    ("data.vel_sigma", "1.1"),
                    ("ladder.s_max", "10"),
                ]);
            }
            "multibump" => {
                cfg.set_pairs(&[
                    ("n", "256"),
                    ("half_width", "8"),
                    ("data.kind", "multibump"),
                    (
                        "data.bumps",
                        "-1.6,-0.9,0.8,0.45,0.2,1,0;1.6,1.1,0.45,0.4,-0.15,0,1",
                    ),
                    ("ladder.s_max", "10"),
                ]);
            }
            "random-smooth" => {
                cfg.set_pairs(&[
                    ("n", "64"),
                    ("half_width", "8"),
                    ("margin", "2"),
                    ("data.kind", "random-smooth"),
                    ("data.random_bumps", "6"),
            ("data.dilate", "1"),
                    ("ladder.s_max", "0.5"),
                    ("caloric.flat_tol", "1.0"),
                ]);
            }
            other => {
                return Err(ConfigError(format!(
                    "unknown preset '{other}' (expected geodesic-gaussian, multibump or random-smooth)"
                )))
            }
        }
        Ok(cfg)
    }

    fn set_pairs(&mut self, pairs: &[(&str, &str)]) {
        for (k, v) in pairs {
            self.values.insert((*k).to_string(), (*v).to_string());
        }
    }

    /// Apply a `key=value` assignment (config file line or --set argument).
    pub fn assign(&mut self, assignment: &str) -> CResult<()> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| {
            ConfigError(format!("expected key=value, got '{assignment}'"))
        })?;
        let k = k.trim();
        let v = v.trim();
        if !KNOWN_KEYS.iter().any(|(known, _)| *known == k) {
            return Err(ConfigError(format!("unknown key '{k}'")));
        }
        self.values.insert(k.to_string(), v.to_string());
        Ok(())
    }

    /// Parse a flat key=value file; '#' starts a comment, blank lines skip.
    pub fn load_file(&mut self, path: &std::path::Path) -> CResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.assign(line)
                .map_err(|e| ConfigError(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> CResult<&str> {
        self.values
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| ConfigError(format!("missing key '{key}'")))
    }

    pub fn f64(&self, key: &str) -> CResult<f64> {
        self.get(key)?
            .parse()
            .map_err(|_| ConfigError(format!("key '{key}' is not a number: '{}'", self.values[key])))
    }

    pub fn usize(&self, key: &str) -> CResult<usize> {
        self.get(key)?
            .parse()
            .map_err(|_| ConfigError(format!("key '{key}' is not an integer: '{}'", self.values[key])))
    }

    pub fn u64(&self, key: &str) -> CResult<u64> {
        self.get(key)?
            .parse()
            .map_err(|_| ConfigError(format!("key '{key}' is not an integer: '{}'", self.values[key])))
    }

    pub fn bool(&self, key: &str) -> CResult<bool> {
        match self.get(key)? {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(ConfigError(format!(
                "key '{key}' is not a boolean: '{other}'"
            ))),
        }
    }

    pub fn f64_list(&self, key: &str) -> CResult<Vec<f64>> {
        let raw = self.get(key)?;
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| ConfigError(format!("key '{key}': bad number '{p}'")))
            })
            .collect()
    }

    /// Stable FNV-1a hash of the sorted key=value pairs.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (k, v) in &self.values {
            for b in k.bytes().chain([b'='].into_iter()).chain(v.bytes()).chain([b'\n']) {
                h ^= b as u64;
                h = h.wrapping_mul(0x100_0000_01b3);
            }
        }
        h
    }

    /// Render the canonical sorted key=value text.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.values.iter()
    }
}
