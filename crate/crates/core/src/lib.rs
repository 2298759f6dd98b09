pub mod cluster;
pub mod config;
pub mod corpus;
pub mod extract;
pub mod gateway;
pub mod graph;
pub mod pipeline;
pub mod prompts;
pub mod sentiment;
