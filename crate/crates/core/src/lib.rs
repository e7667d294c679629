//! Truncated Novikov arithmetic, Laurent multiseries, chart atlases,
//! Maurer–Cartan checks and critical loci of potentials.

pub mod atlas;
pub mod crit;
pub mod expr;
pub mod format;
pub mod mc;
pub mod models;
pub mod multiseries;
pub mod novikov;
