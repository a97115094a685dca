//! Causal Bayesian networks that predict, explain and prevent action failures.
//!
//! Episodes are discretized into quantile intervals ([`discretize`]), a graph
//! is learned with PC-stable ([`pc`]) and CPTs are fitted ([`cpt`]) into a
//! [`model::CausalModel`]. [`inference`] predicts success, [`search`] finds the
//! closest successful intervals and [`prevention`] turns them into a corrected
//! action. [`sim`] is a cube-stacking simulator and [`harness`] runs the
//! experiments on it.

pub mod citest;
pub mod cpt;
pub mod data;
pub mod discretize;
pub mod error;
pub mod goal;
pub mod graph;
pub mod inference;
pub mod model;
pub mod pc;
pub mod prevention;
pub mod search;
pub mod variables;
pub mod sim;
pub mod harness;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/discretization.md")]
    mod discretization {}
    #[doc = include_str!("../../../book/src/structure.md")]
    mod structure {}
    #[doc = include_str!("../../../book/src/parameters.md")]
    mod parameters {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/prevention.md")]
    mod prevention {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
