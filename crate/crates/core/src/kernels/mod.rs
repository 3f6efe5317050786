//! Kernel evaluations: static kernels, the signature kernel (explicit
//! truncated signatures and the PDE solver), the MMD-based K2 kernel, the
//! parameter kernel, the product kernel and Gram assembly.

mod mmd;
mod product;
mod signature;
mod static_kernel;

pub use mmd::{k2_kernel_eval, mmd_sq_unbiased, Bandwidth, K2KernelConfig};
pub use product::{
    base_cross, base_gram, gram_matrix, product_kernel_eval, GramKind, GramMatrix, PreparedSeries,
    ProductKernel, SeriesKernel, SummaryKernelConfig,
};
pub use signature::{
    signature_kernel_eval, truncated_sig_inner, truncated_signature, SignatureKernelConfig,
    SignatureTensors, MAX_DYADIC_ORDER,
};
pub use static_kernel::{aniso_rbf_eval, rbf_eval, AnisoRbfConfig, RbfConfig, StaticKernel};
