//! Model-based baseline controllers.

pub mod adjoint;
pub mod backstepping;
