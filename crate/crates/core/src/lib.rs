pub mod backend;
pub mod cognition;
pub mod decision;
pub mod emo;
pub mod evolution;
pub mod model;
pub mod world;
