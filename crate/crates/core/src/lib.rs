//! Orbit statistics, invariant measures and witness constructions for
//! linear operators on sequence spaces.

pub mod density;
pub mod experiments;
pub mod measures;
pub mod operators;
pub mod rotation;
pub mod seed;
pub mod space;
pub mod steinhaus;
pub mod witnesses;
