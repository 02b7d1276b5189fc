#![no_std]

extern crate alloc;

pub mod data;
pub mod eval;
pub mod federation;
pub mod gan;
pub mod linalg;
pub mod nn;
pub mod rng;
pub mod wire;
