//! Quadrilateral finite elements for the planar relaxed micromorphic model
//! in antiplane shear.
//!
//! The continuum couples a scalar displacement `u` with a planar micro
//! distortion field `zeta` through the energy
//!
//! ```text
//! I(u, zeta) = integral of  mu_e |grad u - zeta|^2 + mu_micro |zeta|^2
//!             + (mu_macro Lc^2 / 2) (curl zeta)^2 - u f - <zeta, omega>
//! ```
//!
//! where `curl zeta = d zeta_2/dx - d zeta_1/dy` is the scalar 2D curl.
//! The crate provides:
//!
//! * [`mesh`]: structured and perturbed quadrilateral meshes with a global
//!   edge table and named node/edge tags,
//! * [`refspaces`]: reference-element bases (tensor Lagrange, edge-based
//!   Nedelec of first kind, discontinuous L2) and Gauss quadrature,
//! * [`piola`]: bilinear geometry maps and the covariant Piola transform,
//! * [`assembly`]: element matrices and global system assembly for the
//!   primal hybrid, mixed hybrid, nodal, and full-gradient formulations,
//! * [`linsys`]: sparse direct solves with residual reporting,
//! * [`analysis`]: field evaluation, error norms, energies, and rates,
//! * [`cases`]: the benchmark problem registry with manufactured loads.

pub mod analysis;
pub mod assembly;
pub mod cases;
pub mod linsys;
pub mod mesh;
pub mod par;
pub mod piola;
pub mod refspaces;
