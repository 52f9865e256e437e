//! Digit-frequency laws and stationary finite-order Markov measures on a
//! bounded digit alphabet.

mod frequency;
mod geometry;
mod measure;

pub use frequency::{
    truncate_frequencies, FrequencyVector, FrequencyVectorSpec, LogMomentClass, Tail,
    MASS_TOLERANCE,
};
pub use geometry::{CylinderGeometry, CYLINDER_BUDGET};
pub use measure::{MarkovMeasure, ROW_SUM_TOLERANCE, STATIONARITY_TOLERANCE};
