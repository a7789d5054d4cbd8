//! Benchmark harness for the CAIS samplers: experiment configs, seeded
//! Monte Carlo suites, parameter sweeps and CSV output.

pub mod config;
pub mod suite;
pub mod sweep;

pub use config::{parse_spec, ConfigError, ExperimentSpec, Preset};
pub use suite::{execute, run_suite, HarnessError, SuiteResult};
pub use sweep::{sweep, SweepParam};
