//! Goodness-of-fit tests for univariate and multivariate samples, with
//! Monte Carlo calibration on reproducible random streams.
//!
//! The building blocks are the order statistic and probability integral
//! transform ([`sample`]), the EDF statistics ([`edf`]), binned chi-square
//! tests ([`binned`]), Neyman's smooth test ([`smooth`]), the three-region
//! test ([`region`]), the energy test ([`energy`]) and Mardia's moments
//! ([`multinormal`]). [`statistic::GofTest`] ties a statistic to a null
//! hypothesis; [`calibrate`] turns it into p-values; [`powerlab`] runs
//! power studies.

pub mod binned;
pub mod calibrate;
pub mod cli;
pub mod edf;
pub mod energy;
pub mod error;
pub mod eventfile;
pub mod hypothesis;
pub mod multinormal;
pub mod numeric;
pub mod powerlab;
pub mod region;
pub mod rng;
pub mod sample;
pub mod smooth;
pub mod statistic;

pub use calibrate::{p_value, NullDistribution, Tail};
pub use error::{GofError, Result};
pub use hypothesis::{Hypothesis, MvGaussian, Sampler, UnivariateModel};
pub use rng::RandomStream;
pub use sample::Sample;
pub use statistic::{GofTest, Statistic, TestOutcome};
