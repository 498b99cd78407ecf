pub mod approx;
pub mod env;
pub mod harness;
pub mod sac;
pub mod tasks;
