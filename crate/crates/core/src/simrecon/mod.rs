//! Total operator assembly, measurement simulation, reconstruction and
//! image-quality scores.

mod assemble;
mod metrics;
mod noise;
mod pinv;
mod tv;

pub use assemble::{assemble_q, assemble_q_capped, BlockIndex, TotalOperator, MAX_OPERATOR_BYTES};
pub use metrics::{psnr, ssim};
pub use noise::{simulate_measurement, Measurement};
pub use pinv::{pinv_reconstruct, PINV_RCOND};
pub use tv::{tv_reconstruct, InnerSolver, ReconResult, TvOptions};
