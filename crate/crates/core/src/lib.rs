pub mod edge;
pub mod experiment;
pub mod gbdt;
pub mod hpo;
pub mod netsim;
pub mod orchestrator;
pub mod telemetry;
