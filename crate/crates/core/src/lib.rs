pub mod generator;
pub mod instance;
pub mod parallel;
pub mod trips;
pub mod bigpairs;
pub mod schedule;
pub mod validator;
pub mod insertion;
pub mod ttopt;
pub mod nodemip;
pub mod pipeline;
