//! Core library of the mobiman stack: geometry and kinematics, robot model
//! assembly, a kinematic world simulator, motion and task planners, and the
//! backend-independent robot handle contract.

pub mod collision;
pub mod control;
pub mod geometry;
pub mod hal;
pub mod kinematics;
pub mod manip;
pub mod model;
pub mod nav;
pub mod task;
pub mod urdf;
pub mod world;
