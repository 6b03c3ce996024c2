//! Numerical checks of the conditions, variance bounds and auxiliary facts
//! that feed the normal approximation bound for the occupancy count.

pub mod conditions;
pub mod corollary;
pub mod efron_stein;
pub mod grid;
pub mod helpers;
pub mod lemma32;

pub use conditions::{check_condition1, check_condition2_3_5, check_condition4, ConditionReport, McBudget};
pub use corollary::check_corollary41;
pub use efron_stein::{efron_stein_variances, EfronSteinReport};
pub use grid::Grid;
pub use helpers::{check_helper_inequalities, HelperRanges};
pub use lemma32::{check_lemma32, Lemma32Ranges};
