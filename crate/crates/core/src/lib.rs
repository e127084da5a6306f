//! Rigidity analysis for bar frameworks and tensegrities.

pub mod fixtures;
pub mod framework;
pub mod holeyhedron;
pub mod linalg;
pub mod lift;
pub mod linear;
pub mod render;
pub mod report;
pub mod second_order;
pub mod synthesis;
pub mod tolerances;
pub mod triangulate;
pub mod verify;
pub mod wolfe;

pub use fixtures::make_example;
pub use framework::{
    evaluate_trivial_flex, load_framework, Assignment, Configuration, Framework, FrameworkError,
    Graph, Member, TrivialFlex,
};
pub use tolerances::Tolerances;
