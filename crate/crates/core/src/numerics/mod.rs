//! Numerical building blocks shared by the kernel, Kac-Rice and complex-zero modules.

pub mod quadrature;
pub mod special;

pub use quadrature::tanh_sinh;
pub use special::{elliptic_e, log_sum_exp, EULER_GAMMA};
