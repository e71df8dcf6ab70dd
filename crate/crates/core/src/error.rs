use thiserror::Error;

/// Which small-divisor condition an offending mode violated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivisorKind {
    /// `|i<k,w> - eps*lambda_j|` against the iteration threshold.
    Eigenvalue,
    /// `|i<k,w> - eps*(lambda_i - lambda_j)|` against the iteration threshold.
    Difference,
    /// `|<k,w>|` against the Diophantine threshold of the frequency.
    Frequency,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("width violation: requested rho = {requested}, series is only declared analytic up to {declared}")]
    WidthViolation { requested: f64, declared: f64 },

    #[error("small divisor at k = {k:?}: |d| = {magnitude:e} is below the floor {floor:e}")]
    SmallDivisor { k: Vec<i32>, magnitude: f64, floor: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("truncation overflow: {modes} modes exceed the budget of {budget}")]
    TruncationOverflow { modes: usize, budget: usize },

    #[error("degenerate spectrum: eigenvalues {i} and {j} coincide (gap {gap:e})")]
    DegenerateSpectrum { i: usize, j: usize, gap: f64 },

    #[error("singular spectrum: eigenvalue {i} has modulus {modulus:e}")]
    SingularSpectrum { i: usize, modulus: f64 },

    #[error("matrix lies outside the admissible ball: |A' - A| = {distance:e} >= alpha = {alpha:e}")]
    OutsideBall { distance: f64, alpha: f64 },

    #[error("perturbation conclusion violated: {0}")]
    ConclusionViolation(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("degenerate Jacobian at the equilibrium (smallest singular value {sigma_min:e})")]
    DegenerateJacobian { sigma_min: f64 },

    #[error("epsilon too large: eps*|Du| = {value} exceeds 1/2")]
    EpsilonTooLarge { value: f64 },

    #[error("resonant epsilon at step m = {m}: mode k = {k:?}, eigen index {i}{}, |lhs| = {lhs:e} < rhs = {rhs:e}",
        .j.map(|j| format!(",{j}")).unwrap_or_default())]
    Resonant {
        m: usize,
        kind: DivisorKind,
        k: Vec<i32>,
        i: usize,
        j: Option<usize>,
        lhs: f64,
        rhs: f64,
    },

    #[error("divergence: norms grew for {window} consecutive steps ending at m = {m}")]
    Divergence { m: usize, window: usize },

    #[error("iteration cap m_max = {m_max} reached before the stopping tolerance")]
    MaxIterations { m_max: usize },

    #[error("domain radius exhausted at step m = {m} (r = {r:e})")]
    RadiusExhausted { m: usize, r: f64 },

    #[error("Neumann series diverges: eps*|S| = {value} >= 1")]
    NeumannDivergence { value: f64 },

    #[error("Sylvester right-hand side has nonzero mean {mean:e}")]
    NonzeroMean { mean: f64 },

    #[error("invalid exponents: {0}")]
    InvalidExponents(String),

    #[error("homogeneity check failed: defect {defect:e} at sample {sample}")]
    Homogeneity { defect: f64, sample: usize },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integration blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("step rejected: dt = {dt} exceeds the stability bound {bound}")]
    StepRejected { dt: f64, bound: f64 },

    #[error("strict ledger: check `{0}` failed")]
    LedgerViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
