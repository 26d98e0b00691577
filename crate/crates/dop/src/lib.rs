//! Tree-fragment grammar toolkit.

pub mod cli;
pub mod config;
pub mod eval;
pub mod fragments;
pub mod grammar;
pub mod heads;
pub mod model;
pub mod parser;
pub mod treebank;
