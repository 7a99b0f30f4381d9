pub mod commands;
pub mod config;
pub mod data;
pub mod engine;
pub mod experiment;
pub mod forest;
pub mod linear;
pub mod model;
pub mod networks;
pub mod osga;
pub mod rng;
