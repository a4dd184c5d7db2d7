//! Braces, pre-Lie rings and the modified group of flows over finite abelian p-groups.

pub mod arith;
pub mod brace;
pub mod budget;
pub mod corpus;
pub mod corr;
pub mod error;
pub mod flows;
pub mod pgroup;
pub mod prelie;
pub mod props;
pub mod report;
mod search;

pub use brace::{Brace, BraceKind, BraceReport, Metadata};
pub use budget::{Budget, Mode};
pub use error::{Error, Result};
pub use pgroup::{BoxSubgroup, GElement, GroupShape, PullbackChoice, Subgroup};
pub use prelie::{PreLie, XiContext};
pub use props::PropertyReport;
pub use report::{Format, Report, Section, Status};
