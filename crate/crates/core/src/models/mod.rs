//! Built-in benchmark systems.

pub mod bicycle;
pub mod random;
pub mod traffic;

pub use bicycle::{Bicycle, BicycleBound, BicycleError, Integrator};
pub use random::RandomSystem;
pub use traffic::{NetworkError, NetworkSpec, TrafficNetwork};
