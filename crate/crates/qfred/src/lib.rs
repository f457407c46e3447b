//! Exact model reduction of continuous-time quantum filters.
//!
//! The pipeline: compute the observable operator space of a measured
//! quantum system ([`observability`]), close it into a *-algebra and
//! decompose it ([`algebra`]), factor the orthogonal conditional expectation
//! onto it ([`condexp`]) and reduce every operator of the model
//! ([`reduction`]). [`sde`] co-simulates full and reduced filters on shared
//! measurement records.

pub mod error;
pub mod linops;
pub mod observability;
pub mod algebra;
pub mod condexp;
pub mod reduction;
pub mod models;
pub mod pipeline;
pub mod sde;
pub mod io;
pub mod cli;

pub use error::{Error, Result};
