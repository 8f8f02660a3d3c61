pub mod cli;
pub mod corpus;
pub mod embedio;
pub mod fusion;
pub mod gcn;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod synth;

mod binio;
