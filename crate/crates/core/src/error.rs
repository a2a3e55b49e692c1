use num_complex::Complex64;
use thiserror::Error;

/// Admissibility conditions checked when assembling a reduced model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// `P` has full row rank.
    FullRank,
    /// `ker P` is conditioned invariant for `(S, L)`.
    ConditionedInvariant,
    /// `Q` is the weighted right inverse of `P`.
    RightInverse,
    /// `ker P` is invariant under `S - Delta L`.
    DeltaInvariant,
    /// `sigma(F)` and `sigma(S)` are disjoint.
    SpectraDisjoint,
}

/// Which dynamics failed a stability test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    System,
    Model,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("spectra overlap: minimum distance {distance:.3e} below tolerance {tolerance:.3e}")]
    SpectraOverlap { distance: f64, tolerance: f64 },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailure,
    #[error("pair is not observable")]
    NotObservable,
    #[error("target eigenvalues are not closed under conjugation")]
    TargetsNotConjugateClosed,
    #[error("interpolation points are not closed under conjugation")]
    NotConjugateClosed,
    #[error("duplicate interpolation point {0}")]
    DuplicatePoint(Complex64),
    #[error("selection of {r} eigenvalues splits a complex conjugate pair")]
    PairSplit { r: usize },
    #[error("repeated eigenvalue {0} has no well-defined eigenvector")]
    DegenerateEigenvalue(Complex64),
    #[error("matrix is rank deficient: expected rank {expected}, found {found}")]
    RankDeficient { expected: usize, found: usize },
    #[error("evaluation point {0} lies in the spectrum")]
    PointInSpectrum(Complex64),
    #[error("admissibility conditions violated: {0:?}")]
    NotAdmissible(Vec<Condition>),
    #[error("ker P is not conditioned invariant (residual {residual:.3e})")]
    NotConditionedInvariant { residual: f64 },
    #[error("resonance between sigma(A) and the degree-{degree} sums of sigma(S)")]
    Resonance { degree: usize },
    #[error("requested degree {requested} exceeds supported maximum {max}")]
    DegreeOverflow { requested: usize, max: usize },
    #[error("truncation order {order} exceeds series degree {degree}")]
    OrderExceedsDegree { order: usize, degree: usize },
    #[error("sample set is empty")]
    EmptySampleSet,
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("averaging window contains fewer than two samples")]
    EmptyWindow,
    #[error("{which:?} dynamics are not asymptotically stable")]
    Unstable { which: Which },
    #[error("generator matrix is not skew-symmetric")]
    NotSkewSymmetric,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
