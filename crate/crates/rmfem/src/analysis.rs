//! Post-processing of solved systems: field evaluation on elements, exact
//! and solution-intrinsic error norms, discrete energies, and observed
//! convergence rates.
//!
//! All element loops run through [`crate::par`] and reduce in element order,
//! so reported numbers are bitwise identical for any thread count.

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::assembly::{map_bases, DofMap, Formulation, MaterialParams, ReferenceCache};
use crate::cases::BenchmarkCase;
use crate::mesh::QuadMesh;
use crate::par;
use crate::refspaces::{gauss_rule, QuadratureRule};

/// Default quadrature order for error integrals of order-`k` solutions: one
/// order finer than assembly so the error measurement does not share the
/// assembly rule's blind spots.
pub fn default_error_quad(k: usize) -> usize {
    k + 3
}

/// A solved coefficient vector bound to its mesh and dof layout.
///
/// The struct borrows rather than owns so one solution can be measured
/// against several references (for instance the limit fields of an
/// `Lc`-parametrized case) without copies.
pub struct FieldSolution<'a> {
    pub mesh: &'a QuadMesh,
    pub dof_map: &'a DofMap,
    pub coeffs: &'a [f64],
}

/// All discrete fields evaluated at one mapped quadrature point.
#[derive(Debug, Clone)]
pub struct PointSample {
    /// Physical coordinates.
    pub x: Vector2<f64>,
    /// Quadrature weight times Jacobian determinant.
    pub wdet: f64,
    pub u: f64,
    pub grad_u: Vector2<f64>,
    pub zeta: Vector2<f64>,
    pub curl_zeta: f64,
    /// Componentwise gradient of the microdistortion, rows are components;
    /// available for the nodal formulations only.
    pub grad_zeta: Option<Matrix2<f64>>,
    /// Moment stress, mixed formulation only.
    pub m: Option<f64>,
}

impl<'a> FieldSolution<'a> {
    pub fn new(mesh: &'a QuadMesh, dof_map: &'a DofMap, coeffs: &'a [f64]) -> Self {
        assert_eq!(
            coeffs.len(),
            dof_map.total(),
            "coefficient vector does not match the dof layout"
        );
        Self {
            mesh,
            dof_map,
            coeffs,
        }
    }

    pub fn formulation(&self) -> Formulation {
        self.dof_map.formulation
    }

    /// Evaluates every field at the quadrature points of `cache` on element
    /// `e`. The cache must be built for this solution's formulation.
    pub fn element_samples(&self, e: usize, cache: &ReferenceCache) -> Vec<PointSample> {
        let u_dofs = self.dof_map.elem_u_dofs(self.mesh, e);
        let z_dofs = self.dof_map.elem_zeta_dofs(self.mesh, e);
        let m_dofs = self.dof_map.elem_m_dofs(e);
        let signs: Vec<f64> = z_dofs.iter().map(|&(_, s)| s).collect();
        let geo = self.mesh.geometry(e);
        let mapped = map_bases(cache, &geo, &signs);
        let nodal = !self.formulation().is_hybrid();
        mapped
            .iter()
            .enumerate()
            .map(|(q, p)| {
                let mut u = 0.0;
                let mut grad_u = Vector2::zeros();
                for (i, &g) in u_dofs.iter().enumerate() {
                    let c = self.coeffs[g];
                    u += c * cache.lag_values[q][i];
                    grad_u += c * p.grads[i];
                }
                let mut zeta = Vector2::zeros();
                let mut curl_zeta = 0.0;
                for (j, &(g, _)) in z_dofs.iter().enumerate() {
                    let c = self.coeffs[g];
                    zeta += c * p.thetas[j];
                    curl_zeta += c * p.curls[j];
                }
                let grad_zeta = nodal.then(|| {
                    let mut gz = Matrix2::zeros();
                    for (i, grad) in p.zeta_grads.iter().enumerate() {
                        let cx = self.coeffs[z_dofs[2 * i].0];
                        let cy = self.coeffs[z_dofs[2 * i + 1].0];
                        gz[(0, 0)] += cx * grad.x;
                        gz[(0, 1)] += cx * grad.y;
                        gz[(1, 0)] += cy * grad.x;
                        gz[(1, 1)] += cy * grad.y;
                    }
                    gz
                });
                let m = (!m_dofs.is_empty()).then(|| {
                    m_dofs
                        .iter()
                        .enumerate()
                        .map(|(r, &g)| self.coeffs[g] * cache.l2_values[q][r])
                        .sum()
                });
                PointSample {
                    x: p.x,
                    wdet: p.wdet,
                    u,
                    grad_u,
                    zeta,
                    curl_zeta,
                    grad_zeta,
                    m,
                }
            })
            .collect()
    }

    /// Evaluates every field at a single reference point of element `e`.
    pub fn sample_at(&self, e: usize, xi: f64, eta: f64) -> PointSample {
        let rule = QuadratureRule {
            points: vec![(xi, eta)],
            weights: vec![1.0],
        };
        let cache = ReferenceCache::new(self.formulation(), rule);
        self.element_samples(e, &cache).remove(0)
    }
}

/// Error and solution norms from one quadrature pass.
///
/// Norms against exact fields are `NaN` when the case does not define the
/// corresponding field; `graddiff` and `curlnorm` are intrinsic to the
/// discrete solution and always present. The `H(curl)` norm obeys
/// `hcurl_zeta^2 = l2_zeta^2 + l2_curl_zeta^2` by construction.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub l2_u: f64,
    pub l2_zeta: f64,
    pub l2_curl_zeta: f64,
    pub hcurl_zeta: f64,
    pub rel_l2_u: f64,
    pub rel_l2_zeta: f64,
    pub rel_hcurl_zeta: f64,
    /// `|grad u_h - zeta_h|` in `L^2`, the coupling defect.
    pub graddiff: f64,
    /// `|curl zeta_h|` in `L^2`.
    pub curlnorm: f64,
    pub ndof_u: usize,
    pub ndof_zeta: usize,
    pub ndof_m: usize,
    /// Mesh size: the largest element diagonal.
    pub h: f64,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(
        "case \"{0}\" has piecewise exact fields; the mesh has elements straddling a kink line, \
         so elementwise quadrature of the error would integrate across a derivative jump"
    )]
    KinkStraddlingMesh(String),
    #[error(
        "quadrature point at x = {x} lies on the kink line x = {line} of case \"{case}\"; \
         the exact derivative is undefined there"
    )]
    QuadraturePointOnKink { case: String, x: f64, line: f64 },
}

fn domain_scale(case: &BenchmarkCase) -> f64 {
    (case.upper[0] - case.lower[0])
        .abs()
        .max((case.upper[1] - case.lower[1]).abs())
}

fn nearest_kink(case: &BenchmarkCase, x: f64) -> f64 {
    case.kink_lines
        .iter()
        .map(|&line| (x - line).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Central-difference curl of the exact microdistortion, used when a case
/// supplies `zeta` but no closed-form curl. The step shrinks near kink lines
/// so the stencil never crosses one.
fn fd_curl(case: &BenchmarkCase, params: &MaterialParams, x: f64, y: f64) -> f64 {
    let zeta = case
        .zeta_exact
        .expect("finite-difference curl needs the exact microdistortion");
    let mut d = 1e-5 * domain_scale(case);
    let gap = nearest_kink(case, x);
    if gap.is_finite() {
        d = d.min(0.45 * gap);
    }
    let dzy_dx = (zeta(x + d, y, params).y - zeta(x - d, y, params).y) / (2.0 * d);
    let dzx_dy = (zeta(x, y + d, params).x - zeta(x, y - d, params).x) / (2.0 * d);
    dzy_dx - dzx_dy
}

#[derive(Default, Clone, Copy)]
struct NormSums {
    err_u: f64,
    nrm_u: f64,
    err_z: f64,
    nrm_z: f64,
    err_c: f64,
    nrm_c: f64,
    graddiff: f64,
    curlnorm: f64,
    min_kink_gap: f64,
    /// Physical x of the point realizing `min_kink_gap`.
    gap_at: f64,
}

/// Measures the solution against the exact fields of `case` by elementwise
/// Gauss quadrature of order `quad_order`.
///
/// `params` feeds the exact-field evaluators (several cases are
/// `Lc`-parametrized); it is legitimate to measure a solution against a
/// different case than the one it was solved with, which is how errors
/// versus limit fields are computed.
pub fn error_norms(
    sol: &FieldSolution,
    case: &BenchmarkCase,
    params: &MaterialParams,
    quad_order: usize,
) -> Result<ErrorReport, AnalysisError> {
    if !case.mesh_avoids_kinks(sol.mesh) {
        return Err(AnalysisError::KinkStraddlingMesh(case.name.to_string()));
    }
    let cache = ReferenceCache::new(sol.formulation(), gauss_rule(quad_order));
    let u_exact = case.u_exact;
    let zeta_exact = case.zeta_exact;
    let curl_exact = case.curl_zeta_exact;
    let n_elems = sol.mesh.elems.len();

    let per_element = par::map_elements(n_elems, |e| {
        let mut s = NormSums {
            min_kink_gap: f64::INFINITY,
            ..NormSums::default()
        };
        for p in sol.element_samples(e, &cache) {
            let (x, y) = (p.x.x, p.x.y);
            let gap = nearest_kink(case, x);
            if gap < s.min_kink_gap {
                s.min_kink_gap = gap;
                s.gap_at = x;
            }
            if let Some(u) = u_exact {
                let ue = u(x, y, params);
                s.err_u += (p.u - ue) * (p.u - ue) * p.wdet;
                s.nrm_u += ue * ue * p.wdet;
            }
            if let Some(z) = zeta_exact {
                let ze = z(x, y, params);
                s.err_z += (p.zeta - ze).norm_squared() * p.wdet;
                s.nrm_z += ze.norm_squared() * p.wdet;
                let ce = match curl_exact {
                    Some(c) => c(x, y, params),
                    None => fd_curl(case, params, x, y),
                };
                s.err_c += (p.curl_zeta - ce) * (p.curl_zeta - ce) * p.wdet;
                s.nrm_c += ce * ce * p.wdet;
            }
            s.graddiff += (p.grad_u - p.zeta).norm_squared() * p.wdet;
            s.curlnorm += p.curl_zeta * p.curl_zeta * p.wdet;
        }
        s
    });

    let mut total = NormSums {
        min_kink_gap: f64::INFINITY,
        ..NormSums::default()
    };
    for s in &per_element {
        total.err_u += s.err_u;
        total.nrm_u += s.nrm_u;
        total.err_z += s.err_z;
        total.nrm_z += s.nrm_z;
        total.err_c += s.err_c;
        total.nrm_c += s.nrm_c;
        total.graddiff += s.graddiff;
        total.curlnorm += s.curlnorm;
        if s.min_kink_gap < total.min_kink_gap {
            total.min_kink_gap = s.min_kink_gap;
            total.gap_at = s.gap_at;
        }
    }
    if !case.kink_lines.is_empty() && total.min_kink_gap <= 1e-12 * domain_scale(case) {
        let x = total.gap_at;
        let line = case
            .kink_lines
            .iter()
            .copied()
            .min_by(|a, b| (x - a).abs().total_cmp(&(x - b).abs()))
            .unwrap();
        return Err(AnalysisError::QuadraturePointOnKink {
            case: case.name.to_string(),
            x,
            line,
        });
    }

    let ratio = |err: f64, nrm: f64| if nrm > 0.0 { err / nrm } else { f64::NAN };
    let (l2_u, rel_l2_u) = if u_exact.is_some() {
        (total.err_u.sqrt(), ratio(total.err_u.sqrt(), total.nrm_u.sqrt()))
    } else {
        (f64::NAN, f64::NAN)
    };
    let (l2_zeta, l2_curl, hcurl, rel_l2_zeta, rel_hcurl) = if zeta_exact.is_some() {
        let hcurl = (total.err_z + total.err_c).sqrt();
        (
            total.err_z.sqrt(),
            total.err_c.sqrt(),
            hcurl,
            ratio(total.err_z.sqrt(), total.nrm_z.sqrt()),
            ratio(hcurl, (total.nrm_z + total.nrm_c).sqrt()),
        )
    } else {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    };

    let h = (0..n_elems)
        .map(|e| {
            let geo = sol.mesh.geometry(e);
            let d1 = (geo.corner(2) - geo.corner(0)).norm();
            let d2 = (geo.corner(3) - geo.corner(1)).norm();
            d1.max(d2)
        })
        .fold(0.0, f64::max);

    Ok(ErrorReport {
        l2_u,
        l2_zeta,
        l2_curl_zeta: l2_curl,
        hcurl_zeta: hcurl,
        rel_l2_u,
        rel_l2_zeta,
        rel_hcurl_zeta: rel_hcurl,
        graddiff: total.graddiff.sqrt(),
        curlnorm: total.curlnorm.sqrt(),
        ndof_u: sol.dof_map.n_u,
        ndof_zeta: sol.dof_map.n_zeta,
        ndof_m: sol.dof_map.n_m,
        h,
    })
}

/// Discrete energy of the solution by elementwise quadrature:
///
/// ```text
/// integral of  mu_e |grad u - zeta|^2 + mu_micro |zeta|^2
///            + (mu_macro Lc^2 / 2) (curl zeta)^2        (curl formulations)
///            + (mu_macro Lc^2 / 2) |grad zeta|^2        (full gradient)
///            - u f - <zeta, omega>                      (include_loads)
/// ```
///
/// At the infinite-`Lc` sentinel the curl term is dropped: the limit energy
/// lives on curl-free fields where it contributes nothing.
pub fn energy(
    sol: &FieldSolution,
    params: &MaterialParams,
    case: &BenchmarkCase,
    include_loads: bool,
) -> f64 {
    let cache = ReferenceCache::new(
        sol.formulation(),
        gauss_rule(default_error_quad(sol.formulation().order())),
    );
    let full_gradient = matches!(sol.formulation(), Formulation::FullGradientNodal(_));
    let curl_weight = params.curl_weight();
    let per_element = par::map_elements(sol.mesh.elems.len(), |e| {
        let mut acc = 0.0;
        for p in sol.element_samples(e, &cache) {
            let defect = p.grad_u - p.zeta;
            let mut density =
                params.mu_e * defect.norm_squared() + params.mu_micro * p.zeta.norm_squared();
            if let Some(w) = curl_weight {
                density += 0.5
                    * w
                    * if full_gradient {
                        p.grad_zeta.expect("nodal sample").norm_squared()
                    } else {
                        p.curl_zeta * p.curl_zeta
                    };
            }
            if include_loads {
                let (x, y) = (p.x.x, p.x.y);
                density -= p.u * (case.f_load)(x, y, params)
                    + p.zeta.dot(&(case.omega_load)(x, y, params));
            }
            acc += density * p.wdet;
        }
        acc
    });
    per_element.iter().sum()
}

/// Observed convergence rates between successive `(h, error)` records:
/// `rate_i = log(e_i / e_{i+1}) / log(h_i / h_{i+1})`. A vanishing error
/// (exact capture) yields `NaN`, the not-a-rate marker.
pub fn convergence_rate(records: &[(f64, f64)]) -> Vec<f64> {
    records
        .windows(2)
        .map(|w| {
            let (h0, e0) = w[0];
            let (h1, e1) = w[1];
            debug_assert!(h1 < h0, "mesh sizes must be strictly decreasing");
            if e0 <= 0.0 || e1 <= 0.0 {
                f64::NAN
            } else {
                (e0 / e1).ln() / (h0 / h1).ln()
            }
        })
        .collect()
}
