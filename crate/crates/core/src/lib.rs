// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod evolution;
pub mod geometry;
pub mod numerics;
pub mod observability;
pub mod spectral;
pub mod textfmt;
pub mod transmutation;
