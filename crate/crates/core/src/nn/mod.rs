//! Reverse-mode differentiation and 3D convolution building blocks.

mod gradcheck;
mod graph;
mod kernels;
mod params;
mod real;
mod sparse;
mod suite;

pub use gradcheck::{gradcheck, relative_error, GradcheckReport, ParamSet, REL_ERR_FLOOR};
pub use graph::{Geom, Graph, Var, LOG_CLAMP};
pub use kernels::{conv_backward_bias, conv_backward_input, conv_backward_weight, conv_forward};
pub use params::{AdamConfig, Param, ParamId, ParamStore, CKP_MAGIC, CKP_VERSION};
pub use real::Real;
pub use sparse::{
    conv_out_dims, dense_rulebook, kernel_offsets, sparse_rulebook, submanifold_rulebook, Rulebook, SparseLayout,
    NO_NEIGHBOR,
};
pub use suite::{op_gradcheck_suite, OpCheck, SUITE_EPS, SUITE_PROBES};
