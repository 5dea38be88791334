pub mod agent;
pub mod config;
pub mod database;
pub mod dataset;
pub mod entity;
pub mod extractor;
pub mod gateway;
pub mod guard;
pub mod prompts;
pub mod session;
pub mod validator;
