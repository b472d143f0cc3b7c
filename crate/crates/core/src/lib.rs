//! Time-domain enclosure method: forward wave solver, elliptic comparison
//! problems and the indicator pipeline that reads obstacle distance off
//! boundary-free data on a source ball.

pub mod elliptic;
pub mod error;
pub mod grid;
pub mod indicator;
pub mod logspace;
pub mod medium;
pub mod region;
pub mod report;
pub mod sweep;
pub mod validate;
pub mod wave;

pub use error::{Error, ErrorFamily, Result};
pub use grid::{Grid, ScalarField};
pub use indicator::{IndicatorSeries, Verdict, VerdictClass};
pub use logspace::SignedLog;
pub use medium::{load_scenario, MediumFields, Mode, Scenario, ScenarioConfig};
pub use region::RegionSpec;
