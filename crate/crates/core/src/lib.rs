//! Pressureless Euler flow on curved surfaces: geodesic characteristics,
//! hodograph solutions, closed-form families and a finite-difference oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod closed_forms;
pub mod field;
pub mod geodesics;
pub mod geometry;
pub mod grid;
pub mod hodograph;
pub mod io;
pub mod ode;
pub mod oracle;
