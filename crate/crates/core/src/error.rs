use thiserror::Error;

/// Errors raised while constructing or evaluating candidates.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QemError {
    #[error("dimension {0} is below 2")]
    DimensionTooSmall(usize),
    #[error("signature entry {value} at index {index} is not +1 or -1")]
    InvalidSignatureEntry { index: usize, value: f64 },
    #[error("length mismatch: expected {expected}, got {got} ({what})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("degenerate invariant: all coefficients are zero")]
    DegenerateInvariant,
    #[error("translation invariant must have a = 0 and a nonzero direction")]
    InvalidTranslation,
    #[error("metric matrix is singular at {point:?} (pivot {pivot:e})")]
    SingularMetric { point: Vec<f64>, pivot: f64 },
    #[error("finite-difference step {step} is invalid or leaves the domain box")]
    InvalidStep { step: f64 },
    #[error("xi = {xi} lies outside the profile domain [{lo}, {hi}]")]
    OutsideDomain { xi: f64, lo: f64, hi: f64 },
    #[error("{which} = {value:e} is below the conditioning floor at xi = {xi}")]
    BelowFloor {
        which: &'static str,
        value: f64,
        xi: f64,
    },
    #[error("h must be strictly positive, found {value} at xi = {xi}")]
    NonPositivePotential { value: f64, xi: f64 },
    #[error("m = {0} is outside (0, inf)")]
    InvalidM(f64),
    #[error("family requires m > n - 2 (n = {n}, m = {m}); complex roots are not supported")]
    RootCondition { n: usize, m: f64 },
    #[error("integration constants c1, c2 are both zero")]
    ZeroConstants,
    #[error("h vanishes inside the interval near xi = {xi}")]
    PotentialVanishes { xi: f64 },
    #[error("interval [{lo}, {hi}] is empty or invalid")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("phi vanishes at xi = {xi} (singular reduction point)")]
    SingularReduction { xi: f64 },
    #[error("step {step} too coarse: half-step agreement {agreement:e} exceeds {tolerance:e}")]
    StepTooCoarse {
        step: f64,
        agreement: f64,
        tolerance: f64,
    },
    #[error("sampler is constant on the box: no invariant direction")]
    ConstantSampler,
    #[error("phi' vanishes on the whole domain: witness is vacuous")]
    VacuousWitness,
    #[error("witness requires {0}")]
    WitnessPrecondition(&'static str),
    #[error("fluid decomposition requires m = 1, got {0}")]
    FluidRequiresUnitM(f64),
    #[error("grid sampling exhausted after {attempts} attempts ({accepted} of {requested} accepted)")]
    GridExhausted {
        attempts: usize,
        accepted: usize,
        requested: usize,
    },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("m = inf requires an explicit potential f")]
    MissingPotential,
}

pub type Result<T> = std::result::Result<T, QemError>;
