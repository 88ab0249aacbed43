pub mod linalg;
pub mod network;
pub mod coupling;
pub mod signal;
pub mod integrator;
pub mod continuous;
pub mod discrete;
pub mod scenario;
