//! Numerical substrate: compensated summation, Pochhammer symbols, the
//! `2F2(1,1;3/2,2;z)` series and adaptive Gauss–Kronrod quadrature with
//! declared logarithmic singularities.

mod quadrature;
mod special;

pub use quadrature::{adaptive_quad, QuadratureResult, QuadratureSpec};
pub use special::{hyp2f2_1_1_3h_2, pochhammer, NeumaierSum, SeriesResult, HYP2F2_DEFAULT_TOL};
