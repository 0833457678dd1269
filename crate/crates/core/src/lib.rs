pub mod dynamics;
pub mod geometry;
pub mod optimizer;
pub mod planner;
pub mod sampling;
pub mod scenario;
pub mod solution;
pub mod timeline;
pub mod validate;
