//! Discrete-time batch queues with Bernoulli-geometric batches, tandem
//! networks of such queues, and the directed first-passage percolation
//! model whose time constants they determine.
//!
//! Queue amounts, percolation weights, time constants and the optimizer
//! are generic over the scalar; the aliases below fix the common choices.
//! Distributions and statistics work in `f64`.

pub mod distributions;
pub mod error;
pub mod format;
pub mod optimize;
pub mod percolation;
pub mod queue;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod tandem;
pub mod timeconstants;
pub mod verify;

pub use distributions::{DistSpec, Draw};
pub use error::{Error, Result};
pub use percolation::{first_passage, JumpField, PathQuery, WeightField};
pub use queue::{markov_oracle, simulate, stationary_law, step, QueueParams, StationaryLaw, Trace};
pub use rng::RandomStream;
pub use scalar::{Amount, Real};
pub use stats::TestResult;
pub use tandem::{simulate_tandem, TandemConfig, TandemTrace};
pub use timeconstants::{CurveResult, TimeConstantQuery};

/// Queue trace with integer batches.
pub type IntTrace = Trace<u64>;
/// Queue trace with real-valued batches (Ber-Exp and exponential laws).
pub type RealTrace = Trace<f64>;
pub type IntTandemTrace = TandemTrace<u64>;
pub type RealTandemTrace = TandemTrace<f64>;
pub type IntField = WeightField<u64>;
pub type RealField = WeightField<f64>;
pub type Curve = CurveResult<f64>;
