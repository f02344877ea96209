//! Small numerical toolbox shared by the estimation modules: adaptive
//! quadrature, bracketed root finding, order statistics, isotonic projection,
//! the digamma function and a regularized symmetric solver.

mod linalg;
mod quadrature;
mod roots;
mod special;
mod stats;

pub use linalg::{regularized_cholesky, RegularizedCholesky};
pub use quadrature::{integrate, integrate_split, QuadratureOptions};
pub use roots::{bisect, bracketed_root, expand_bracket};
pub use special::digamma;
pub use stats::{mad, median, pava, quantile_sorted};
