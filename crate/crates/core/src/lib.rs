//! Rank password composition policies by the uniformity of the password
//! distributions they induce.
//!
//! The pipeline: ingest a leaked password corpus into a rank-ordered
//! probability [`Distribution`](corpus::Distribution), impose a candidate
//! [policy](policy::PolicyPredicate), redistribute the probability mass of the
//! rejected passwords under a [reselection behaviour](reselect::ReselectionMode),
//! fit a power law to the resulting rank/probability curve
//! ([`powerlaw`]), and order policies by how close the fitted exponent sits to
//! zero — a perfectly uniform distribution has exponent zero, and flatter is
//! better ([`ranking`]). [`immunity`] checks policies against fixed attack
//! dictionaries, and [`pacpal`] is a small scripting language for comparing
//! and ranking previously fitted curves.

pub mod corpus;
pub mod immunity;
pub mod pacpal;
pub mod policy;
pub mod powerlaw;
pub mod ranking;
pub mod reselect;

pub use corpus::{CleanseReport, Distribution, FrequencyRecord, PasswordProbability};
pub use policy::{PolicyCatalog, PolicyPredicate, Wordlist};
pub use powerlaw::FittedCurve;
pub use reselect::ReselectionMode;
