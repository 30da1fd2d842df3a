pub mod agent;
pub mod atom;
pub mod rng;
pub mod scenario;
pub mod condition;
pub mod automaton;
pub mod dialog;
pub mod world;
pub mod effector;
pub mod policy;
pub mod anticipator;
pub mod runtime;
pub mod bench;
pub mod cli;
