use thiserror::Error;

/// Errors produced across the solver and diagnostic pipeline.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("vector is not tangent at its base point: |<v,p>| = {inner:.3e} exceeds {tol:.3e}")]
    NotTangent { inner: f64, tol: f64 },

    #[error("point is not on the upper hyperboloid sheet: <p,p> = {self_product:.17e}, p0 = {p0:.17e}")]
    NotOnSheet { self_product: f64, p0: f64 },

    #[error("frame seed row {row} is linearly dependent after projection (residual norm {norm:.3e})")]
    RankDeficientSeed { row: usize, norm: f64 },

    #[error("matrix is not a Lorentz rotation: {reason}")]
    InvalidRotation { reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid grid spec: {reason}")]
    InvalidGrid { reason: String },

    #[error("data support violation: {reason}; required margin {required_cells} cells, have {margin_cells}")]
    SupportViolation {
        reason: String,
        required_cells: usize,
        margin_cells: usize,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value at step {step} (t or s = {at:.6e})")]
    NonFinite { step: usize, at: f64 },

    #[error("constraint drift {drift:.3e} exceeded {limit:.3e} at step {step}")]
    ConstraintDrift { step: usize, drift: f64, limit: f64 },

    #[error("Dirichlet energy increased by {increase:.3e} (limit {limit:.3e}) across [{s_from:.6e}, {s_to:.6e}]")]
    EnergyIncrease {
        s_from: f64,
        s_to: f64,
        increase: f64,
        limit: f64,
    },

    #[error("ladder is not flat: sup distance to base {sup_dist:.3e} exceeds {tol:.3e} at s = {s:.6e}")]
    NotFlat { sup_dist: f64, tol: f64, s: f64 },

    #[error("covariant heat solve unstable: norm grew by factor {growth:.3e} at s = {s:.6e}")]
    CovariantUnstable { growth: f64, s: f64 },

    #[error("missing time direction: {context}")]
    MissingTimeData { context: &'static str },

    #[error("epsilon {eps:.6e} is not below the total mass {total:.6e}")]
    EpsAboveTotal { eps: f64, total: f64 },

    #[error("empty scan range [{lo:.6e}, {hi:.6e}]")]
    EmptyRange { lo: f64, hi: f64 },

    #[error("snapshot error: {reason}")]
    Snapshot { reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CoreError>,
    },
}

impl CoreError {
    /// Wrap an error with a pipeline stage label.
    pub fn at_stage(self, stage: &'static str) -> Self {
        CoreError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
