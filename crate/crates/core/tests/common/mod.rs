//! Oracles shared by several test targets.
#![allow(dead_code)]

pub mod graphs;
pub mod quadrature;
pub mod latent_toy;
