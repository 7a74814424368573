//! Hint generation for buggy programs, validated by simulated students.

pub mod codedist;
pub mod config;
pub mod corpus;
pub mod domain;
pub mod gateway;
pub mod judge;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod validator;
