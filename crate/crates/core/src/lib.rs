//! Quasi-radial trees and limit-set dimension experiments for free groups
//! acting on their Cayley trees and on Schreier quotients.

pub mod acceptance;
pub mod arcs;
pub mod dimension;
pub mod error;
pub mod experiment;
pub mod floyd;
pub mod graphcore;
pub mod myrberg;
pub mod qrtree;
pub mod schreier;
pub mod words;

pub use error::{Error, Result};
pub use words::{Letter, Word};
