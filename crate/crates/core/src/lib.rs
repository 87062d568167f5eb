//! Standard and penalized IMEX Runge-Kutta schemes for kinetic equations
//! with stiff BGK or Boltzmann collisions, together with the linear stability
//! and asymptotic-preserving analysis of the underlying Butcher tableaux.

pub mod tableau;
pub mod stability;
pub mod phase_space;
pub mod transport;
pub mod collision;
pub mod solver;
