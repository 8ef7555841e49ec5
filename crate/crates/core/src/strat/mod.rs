//! Multi-indices, iterated integrals and the Gaussian increment law.

mod index;
mod law;
mod operator;
mod path;

pub use index::{
    expected_iterated_integral, hierarchical_set, iterated_moment, remainder_set, words_up_to_weight, IndexSet,
    IteratedMoment, MultiIndex, MAX_DIM, MAX_WEIGHT,
};
pub use law::{IncrementLaw, IncrementSamples};
pub use operator::{apply_l_operator, ScalarField, VectorFields};
pub use path::{monte_carlo_moments, pathwise_integral, MomentEstimate, PiecewiseLinearPath, WordBasis};
