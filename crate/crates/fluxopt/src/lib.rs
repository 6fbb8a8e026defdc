//! Simulation and optimal-control library for the magnetizing current of an
//! induction machine under a load-torque step.
//!
//! The machine is reduced to its rotor-flux dynamics in field-oriented (d-q)
//! coordinates; the stator current components `i_sd` / `i_sq` act as inputs.
//! The library computes steady-state loss-optimal operating points, solves
//! the fixed-horizon transient optimization by single shooting on the costate
//! initial value, and provides the cheap closed-form policies (`i_sd = i_sq /
//! gamma` for a current-independent inductance, the `zeta` stationarity rule
//! under magnetic saturation) that approximate the exact solutions.
//!
//! Scenario plumbing (JSON scenario specs, table suites, CSV emission) lives
//! in [`scenario`]; the `fluxopt` binary in the companion CLI crate is a thin
//! wrapper over that module.

pub mod motor;
pub mod numerics;
pub mod presets;
pub mod saturation;
pub mod scenario;
pub mod simulate;
pub mod speedloop;
pub mod steady;
pub mod transient;
