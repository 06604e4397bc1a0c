#![no_std]
extern crate alloc;

pub mod classifier;
pub mod construction;
pub mod corpus;
pub mod groupoids;
pub mod groups;
pub mod harmonic;
pub mod linalg;
pub mod markov;
pub mod rational;
