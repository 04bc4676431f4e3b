use std::fmt;

/// Modelling hypotheses that a law or model can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assumption {
    /// E log|A| < 0.
    Contraction,
    /// E|A|^a = 1 for some a > 0.
    CriticalMoment,
    /// E|A|^(a+e) < infinity for some e > 0.
    HigherMoment,
    /// The law of log|A| on {A != 0} is not supported on a lattice.
    NonArithmetic,
    /// Cramer's condition for the tilted step law.
    StronglyNonLattice,
    /// Bounded density-type increments of log A.
    HolderIncrements,
    /// P(A >= 0) = 1.
    NonNegativeCoefficient,
    /// P(A < 0) > 0.
    SignedCoefficient,
    /// x^a P(B > x) slowly varying with a nonincreasing survival.
    RegularVariation,
    /// E B_+^a = infinity.
    InfiniteNoiseMoment,
    /// E A^e B_+^(a-e) < infinity for some e.
    MixedMoment,
    /// E A^a 1{A > 0} < 1 for the positive-part recursion.
    SubcriticalPositivePart,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Assumption::Contraction => "contraction E log|A| < 0",
            Assumption::CriticalMoment => "critical moment E|A|^a = 1",
            Assumption::HigherMoment => "higher moment E|A|^(a+e) finite",
            Assumption::NonArithmetic => "non-arithmetic log|A|",
            Assumption::StronglyNonLattice => "strongly non-lattice tilted step law",
            Assumption::HolderIncrements => "Holder increments of the law of log A",
            Assumption::NonNegativeCoefficient => "nonnegative coefficient A",
            Assumption::SignedCoefficient => "signed coefficient P(A < 0) > 0",
            Assumption::RegularVariation => "regularly varying noise tail",
            Assumption::InfiniteNoiseMoment => "infinite noise moment E B_+^a",
            Assumption::MixedMoment => "mixed moment E A^e B_+^(a-e) finite",
            Assumption::SubcriticalPositivePart => "subcritical positive part E A^a 1{A>0} < 1",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{assumption} not satisfiable: {detail}")]
    Hypothesis {
        assumption: Assumption,
        detail: String,
    },

    #[error("quadrature did not converge: value {value:e}, achieved error {error:e}, requested {requested:e}")]
    Quadrature {
        value: f64,
        error: f64,
        requested: f64,
    },

    #[error("refused: {0}")]
    Refused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn hypothesis(assumption: Assumption, detail: impl Into<String>) -> Self {
        Error::Hypothesis {
            assumption,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
