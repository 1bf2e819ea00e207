//! Element matrices, degree-of-freedom numbering, and global assembly for
//! the four discretizations of the planar micromorphic model:
//!
//! * `PrimalHybrid`: scalar Lagrange displacement with edge-element
//!   microdistortion, the formulation the energy is naturally posed in.
//! * `MixedHybrid`: the same spaces plus a cellwise moment stress and, when
//!   the microdistortion is constrained on the whole boundary, one scalar
//!   multiplier pinning its mean. Stays well conditioned for large `Lc` and
//!   admits the exact limit problem at `Lc = inf`.
//! * `PrimalNodal`: both fields in (vector) Lagrange spaces.
//! * `FullGradientNodal`: nodal spaces with the full gradient of the
//!   microdistortion in place of its curl.
//!
//! Element integration works off reference-basis values precomputed once per
//! quadrature rule ([`ReferenceCache`]); only Jacobians are evaluated per
//! element.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cases::BenchmarkCase;
use crate::mesh::QuadMesh;
use crate::piola::{map_curl, map_h1, map_hcurl, ElementGeometry};
use crate::refspaces::{
    gauss_1d, gauss_rule, L2Basis, LagrangeBasis, LagrangeDof, NedelecBasis, NedelecDof,
    QuadratureRule,
};

/// The curl penalty length, with an explicit sentinel for the limit problem
/// so that `Lc -> inf` never enters floating-point arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CharacteristicLength {
    Finite(f64),
    Infinite,
}

impl CharacteristicLength {
    pub fn is_infinite(&self) -> bool {
        matches!(self, CharacteristicLength::Infinite)
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            CharacteristicLength::Finite(v) => Some(*v),
            CharacteristicLength::Infinite => None,
        }
    }
}

impl std::fmt::Display for CharacteristicLength {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CharacteristicLength::Finite(v) => write!(f, "{v}"),
            CharacteristicLength::Infinite => write!(f, "inf"),
        }
    }
}

/// Dimensionless material constants of the energy density
/// `mu_e |grad u - zeta|^2 + mu_micro |zeta|^2 + (mu_macro Lc^2 / 2) (curl zeta)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub mu_e: f64,
    pub mu_micro: f64,
    pub mu_macro: f64,
    pub l_c: CharacteristicLength,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            mu_e: 1.0,
            mu_micro: 1.0,
            mu_macro: 1.0,
            l_c: CharacteristicLength::Finite(1.0),
        }
    }
}

impl MaterialParams {
    pub fn with_lc(self, l_c: CharacteristicLength) -> Self {
        Self { l_c, ..self }
    }

    /// Weight `mu_macro Lc^2` of the curl term; `None` for the `Lc = inf`
    /// sentinel, where the term becomes the constraint `curl zeta = 0`.
    pub fn curl_weight(&self) -> Option<f64> {
        self.l_c.value().map(|lc| self.mu_macro * lc * lc)
    }

    pub fn validate(&self) -> Result<(), AssemblyError> {
        let lc_ok = match self.l_c {
            CharacteristicLength::Finite(v) => v >= 0.0 && v.is_finite(),
            CharacteristicLength::Infinite => true,
        };
        if self.mu_e > 0.0 && self.mu_micro > 0.0 && self.mu_macro >= 0.0 && lc_ok {
            Ok(())
        } else {
            Err(AssemblyError::InvalidParams)
        }
    }
}

/// Discretization choice; the payload is the polynomial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formulation {
    PrimalHybrid(usize),
    MixedHybrid(usize),
    PrimalNodal(usize),
    FullGradientNodal(usize),
}

impl Formulation {
    pub fn order(&self) -> usize {
        match *self {
            Formulation::PrimalHybrid(k)
            | Formulation::MixedHybrid(k)
            | Formulation::PrimalNodal(k)
            | Formulation::FullGradientNodal(k) => k,
        }
    }

    /// Edge elements for the microdistortion (as opposed to nodal ones).
    pub fn is_hybrid(&self) -> bool {
        matches!(
            self,
            Formulation::PrimalHybrid(_) | Formulation::MixedHybrid(_)
        )
    }

    pub fn is_mixed(&self) -> bool {
        matches!(self, Formulation::MixedHybrid(_))
    }

    fn base_name(&self) -> &'static str {
        match self {
            Formulation::PrimalHybrid(_) => "primal-hybrid",
            Formulation::MixedHybrid(_) => "mixed-hybrid",
            Formulation::PrimalNodal(_) => "primal-nodal",
            Formulation::FullGradientNodal(_) => "full-gradient",
        }
    }

    pub fn validate(&self) -> Result<(), AssemblyError> {
        if (1..=2).contains(&self.order()) {
            Ok(())
        } else {
            Err(AssemblyError::UnsupportedOrder(self.order(), self.base_name()))
        }
    }
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.base_name())
    }
}

impl std::str::FromStr for Formulation {
    type Err = String;

    /// Parses `name` or `name:k`, defaulting to order 1.
    fn from_str(s: &str) -> Result<Self, String> {
        let (name, order) = match s.split_once(':') {
            Some((n, k)) => (
                n,
                k.parse::<usize>()
                    .map_err(|_| format!("invalid order in formulation '{s}'"))?,
            ),
            None => (s, 1),
        };
        match name {
            "primal-hybrid" => Ok(Formulation::PrimalHybrid(order)),
            "mixed-hybrid" => Ok(Formulation::MixedHybrid(order)),
            "primal-nodal" => Ok(Formulation::PrimalNodal(order)),
            "full-gradient" => Ok(Formulation::FullGradientNodal(order)),
            _ => Err(format!(
                "unknown formulation '{name}' (expected primal-hybrid, mixed-hybrid, primal-nodal, or full-gradient)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("material constants must satisfy mu_e > 0, mu_micro > 0, mu_macro >= 0, Lc >= 0")]
    InvalidParams,
    #[error("order {0} is not supported by the {1} formulation")]
    UnsupportedOrder(usize, &'static str),
    #[error("case '{0}' references tag '{1}', which the mesh does not define")]
    UnknownTag(String, String),
    #[error("the mixed formulation is undefined at Lc = 0 (the moment stress divides by mu_macro Lc^2)")]
    MixedAtLcZero,
    #[error("Lc = inf selects the limit problem, which only the mixed formulation can pose")]
    PrimalAtLcInfinity,
    #[error("microdistortion Dirichlet tags must lie inside the displacement Dirichlet boundary")]
    CouplingViolation,
    #[error("no displacement dof is constrained; the system would be singular")]
    NoDisplacementConstraint,
    #[error("nodal tangential constraints need axis-aligned boundary edges; edge ({0}, {1}) is skew")]
    SkewBoundaryEdge(usize, usize),
}

/// Default Gauss rule for element integrals of order-`k` spaces: `k + 2`
/// points per axis, exact on affine elements and validated against a finer
/// oracle on bilinear ones.
pub fn default_rule(k: usize) -> QuadratureRule {
    gauss_rule(k + 2)
}

/// Reference-basis values tabulated at the quadrature points, shared by all
/// elements of an assembly or evaluation pass.
pub struct ReferenceCache {
    pub formulation: Formulation,
    pub rule: QuadratureRule,
    pub lagrange: LagrangeBasis,
    /// Lagrange values per quadrature point.
    pub lag_values: Vec<DVector<f64>>,
    /// Lagrange reference gradients per quadrature point (`ndofs x 2`).
    pub lag_grads: Vec<DMatrix<f64>>,
    /// Edge-element basis (hybrid formulations only).
    pub nedelec: Option<NedelecBasis>,
    /// Edge-element values per quadrature point.
    pub ned_values: Vec<Vec<Vector2<f64>>>,
    /// Edge-element reference curls per quadrature point.
    pub ned_curls: Vec<DVector<f64>>,
    /// Moment-stress basis (mixed only).
    pub l2: Option<L2Basis>,
    pub l2_values: Vec<DVector<f64>>,
}

impl ReferenceCache {
    pub fn new(formulation: Formulation, rule: QuadratureRule) -> Self {
        let k = formulation.order();
        let lagrange = LagrangeBasis::new(k);
        let lag_values = rule.points.iter().map(|&(x, e)| lagrange.eval(x, e)).collect();
        let lag_grads = rule.points.iter().map(|&(x, e)| lagrange.grad(x, e)).collect();
        let (nedelec, ned_values, ned_curls) = if formulation.is_hybrid() {
            let basis = NedelecBasis::new(k);
            let values = rule.points.iter().map(|&(x, e)| basis.eval(x, e)).collect();
            let curls = rule.points.iter().map(|&(x, e)| basis.curl(x, e)).collect();
            (Some(basis), values, curls)
        } else {
            (None, Vec::new(), Vec::new())
        };
        let (l2, l2_values) = if formulation.is_mixed() {
            let basis = L2Basis::new(k);
            let values = rule.points.iter().map(|&(x, e)| basis.eval(x, e)).collect();
            (Some(basis), values)
        } else {
            (None, Vec::new())
        };
        Self {
            formulation,
            rule,
            lagrange,
            lag_values,
            lag_grads,
            nedelec,
            ned_values,
            ned_curls,
            l2,
            l2_values,
        }
    }

    pub fn with_default_rule(formulation: Formulation) -> Self {
        Self::new(formulation, default_rule(formulation.order()))
    }

    /// Scalar displacement dofs per element.
    pub fn n_u(&self) -> usize {
        self.lagrange.ndofs()
    }

    /// Microdistortion dofs per element.
    pub fn n_zeta(&self) -> usize {
        match &self.nedelec {
            Some(basis) => basis.ndofs(),
            None => 2 * self.lagrange.ndofs(),
        }
    }

    /// Moment-stress dofs per element (0 unless mixed).
    pub fn n_m(&self) -> usize {
        self.l2.as_ref().map_or(0, L2Basis::ndofs)
    }
}

/// The three element stiffness contributions over the local
/// `u`-then-`zeta` dof block.
#[derive(Debug, Clone)]
pub struct ElementMatrices {
    /// Elastic coupling `2 mu_e <grad u - zeta, grad du - dzeta>`.
    pub k_e: DMatrix<f64>,
    /// Micro term `2 mu_micro <zeta, dzeta>`.
    pub k_micro: DMatrix<f64>,
    /// Curl (or, for the full-gradient formulation, gradient) term with
    /// weight `mu_macro Lc^2`; zero when `Lc` is the infinite sentinel.
    pub k_macro: DMatrix<f64>,
}

/// Per-quadrature-point physical basis data for one element.
pub(crate) struct MappedBases {
    /// Quadrature weight times Jacobian determinant.
    pub(crate) wdet: f64,
    /// Physical coordinates of the quadrature point.
    pub(crate) x: Vector2<f64>,
    pub(crate) grads: Vec<Vector2<f64>>,
    pub(crate) thetas: Vec<Vector2<f64>>,
    pub(crate) curls: Vec<f64>,
    /// Gradients of the nodal microdistortion components (nodal only, one
    /// per scalar Lagrange dof).
    pub(crate) zeta_grads: Vec<Vector2<f64>>,
}

pub(crate) fn map_bases(
    cache: &ReferenceCache,
    geo: &ElementGeometry,
    signs: &[f64],
) -> Vec<MappedBases> {
    let nu = cache.n_u();
    cache
        .rule
        .points
        .iter()
        .zip(cache.rule.weights.iter())
        .enumerate()
        .map(|(q, (&(xi, eta), &w))| {
            let p = geo.at(xi, eta);
            let grads: Vec<Vector2<f64>> = (0..nu)
                .map(|i| {
                    map_h1(
                        &p.inv_jt,
                        Vector2::new(cache.lag_grads[q][(i, 0)], cache.lag_grads[q][(i, 1)]),
                    )
                })
                .collect();
            let (thetas, curls, zeta_grads) = match &cache.nedelec {
                Some(basis) => {
                    let nz = basis.ndofs();
                    let thetas = (0..nz)
                        .map(|j| map_hcurl(&p.inv_jt, signs[j], cache.ned_values[q][j]))
                        .collect();
                    let curls = (0..nz)
                        .map(|j| map_curl(signs[j], cache.ned_curls[q][j], p.det_j))
                        .collect();
                    (thetas, curls, Vec::new())
                }
                None => {
                    // Vector Lagrange: dof 2i is N_i e_x, dof 2i + 1 is
                    // N_i e_y; curl(N e_x) = -dN/dy, curl(N e_y) = dN/dx.
                    let mut thetas = Vec::with_capacity(2 * nu);
                    let mut curls = Vec::with_capacity(2 * nu);
                    for i in 0..nu {
                        let n = cache.lag_values[q][i];
                        thetas.push(Vector2::new(n, 0.0));
                        thetas.push(Vector2::new(0.0, n));
                        curls.push(-grads[i][1]);
                        curls.push(grads[i][0]);
                    }
                    (thetas, curls, grads.clone())
                }
            };
            MappedBases {
                wdet: w * p.det_j,
                x: p.x,
                grads,
                thetas,
                curls,
                zeta_grads,
            }
        })
        .collect()
}

fn stiffness_core(
    params: &MaterialParams,
    cache: &ReferenceCache,
    points: &[MappedBases],
    full_gradient: bool,
) -> ElementMatrices {
    let nu = cache.n_u();
    let nz = cache.n_zeta();
    let n = nu + nz;
    let mut k_e = DMatrix::zeros(n, n);
    let mut k_micro = DMatrix::zeros(n, n);
    let mut k_macro = DMatrix::zeros(n, n);
    let weight = params.curl_weight().unwrap_or(0.0);
    for p in points {
        for i in 0..nu {
            for j in 0..nu {
                k_e[(i, j)] += 2.0 * params.mu_e * p.grads[i].dot(&p.grads[j]) * p.wdet;
            }
            for j in 0..nz {
                let v = -2.0 * params.mu_e * p.grads[i].dot(&p.thetas[j]) * p.wdet;
                k_e[(i, nu + j)] += v;
                k_e[(nu + j, i)] += v;
            }
        }
        for i in 0..nz {
            for j in 0..nz {
                let mass = p.thetas[i].dot(&p.thetas[j]) * p.wdet;
                k_e[(nu + i, nu + j)] += 2.0 * params.mu_e * mass;
                k_micro[(nu + i, nu + j)] += 2.0 * params.mu_micro * mass;
                if !full_gradient {
                    // The explicit grouping keeps the entry bitwise
                    // symmetric in (i, j).
                    k_macro[(nu + i, nu + j)] += weight * (p.curls[i] * p.curls[j]) * p.wdet;
                }
            }
        }
        if full_gradient {
            // <grad zeta, grad dzeta> contracts componentwise, so only
            // same-component dof pairs couple.
            for i in 0..nu {
                for j in 0..nu {
                    let v = weight * p.zeta_grads[i].dot(&p.zeta_grads[j]) * p.wdet;
                    k_macro[(nu + 2 * i, nu + 2 * j)] += v;
                    k_macro[(nu + 2 * i + 1, nu + 2 * j + 1)] += v;
                }
            }
        }
    }
    ElementMatrices {
        k_e,
        k_micro,
        k_macro,
    }
}

/// Element stiffness blocks for the hybrid (edge-element) formulations.
/// `signs` is the per-dof orientation vector from [`DofMap::elem_zeta_dofs`].
pub fn element_matrices_hybrid(
    params: &MaterialParams,
    geo: &ElementGeometry,
    cache: &ReferenceCache,
    signs: &[f64],
) -> ElementMatrices {
    debug_assert!(cache.nedelec.is_some());
    stiffness_core(params, cache, &map_bases(cache, geo, signs), false)
}

/// Element stiffness blocks for the nodal formulation.
pub fn element_matrices_nodal(
    params: &MaterialParams,
    geo: &ElementGeometry,
    cache: &ReferenceCache,
) -> ElementMatrices {
    debug_assert!(cache.nedelec.is_none());
    stiffness_core(params, cache, &map_bases(cache, geo, &[]), false)
}

/// Element stiffness blocks for the full-gradient comparison formulation:
/// like [`element_matrices_nodal`] but with `mu_macro Lc^2 <grad zeta, grad dzeta>`
/// as the macro term.
pub fn element_matrices_fullgrad(
    params: &MaterialParams,
    geo: &ElementGeometry,
    cache: &ReferenceCache,
) -> ElementMatrices {
    debug_assert!(cache.nedelec.is_none());
    stiffness_core(params, cache, &map_bases(cache, geo, &[]), true)
}

fn rhs_core(
    cache: &ReferenceCache,
    points: &[MappedBases],
    f: impl Fn(f64, f64) -> f64,
    omega: impl Fn(f64, f64) -> Vector2<f64>,
) -> DVector<f64> {
    let nu = cache.n_u();
    let nz = cache.n_zeta();
    let mut rhs = DVector::zeros(nu + nz);
    for (q, p) in points.iter().enumerate() {
        let fv = f(p.x[0], p.x[1]);
        let ov = omega(p.x[0], p.x[1]);
        for i in 0..nu {
            rhs[i] += cache.lag_values[q][i] * fv * p.wdet;
        }
        for j in 0..nz {
            rhs[nu + j] += p.thetas[j].dot(&ov) * p.wdet;
        }
    }
    rhs
}

/// Element load vector: `int N_i f` over the displacement block and
/// `int <theta_i, omega>` over the microdistortion block.
pub fn element_rhs(
    geo: &ElementGeometry,
    cache: &ReferenceCache,
    signs: &[f64],
    f: impl Fn(f64, f64) -> f64,
    omega: impl Fn(f64, f64) -> Vector2<f64>,
) -> DVector<f64> {
    rhs_core(cache, &map_bases(cache, geo, signs), f, omega)
}

/// Global dof numbering and Dirichlet data.
///
/// Layout: displacement dofs first (node dofs in mesh-node order, then
/// `k - 1` per global edge ordered along the edge direction, then cell
/// dofs), followed by microdistortion dofs (hybrid: `k` moments per edge
/// then cell dofs; nodal: an interleaved x/y pair per scalar dof), then
/// moment-stress dofs per element, then the optional mean multiplier.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub formulation: Formulation,
    pub n_u: usize,
    pub n_zeta: usize,
    pub n_m: usize,
    pub n_lambda: usize,
    /// Prescribed value per dof; `None` marks a free dof.
    pub prescribed: Vec<Option<f64>>,
    n_nodes: usize,
    n_edges: usize,
    lag_kinds: Vec<LagrangeDof>,
    ned_kinds: Vec<NedelecDof>,
}

impl DofMap {
    pub fn new(mesh: &QuadMesh, formulation: Formulation, with_lambda: bool) -> Self {
        let k = formulation.order();
        let n_nodes = mesh.nodes.len();
        let n_edges = mesh.edge_table.edges.len();
        let n_elems = mesh.elems.len();
        let n_scalar = n_nodes + n_edges * (k - 1) + n_elems * (k - 1) * (k - 1);
        let n_zeta = if formulation.is_hybrid() {
            n_edges * k + n_elems * 2 * k * (k - 1)
        } else {
            2 * n_scalar
        };
        let n_m = if formulation.is_mixed() {
            n_elems * k * k
        } else {
            0
        };
        let n_lambda = usize::from(formulation.is_mixed() && with_lambda);
        let total = n_scalar + n_zeta + n_m + n_lambda;
        let lag_kinds = LagrangeBasis::new(k).dof_kinds().to_vec();
        let ned_kinds = if formulation.is_hybrid() {
            NedelecBasis::new(k).dof_kinds().to_vec()
        } else {
            Vec::new()
        };
        Self {
            formulation,
            n_u: n_scalar,
            n_zeta,
            n_m,
            n_lambda,
            prescribed: vec![None; total],
            n_nodes,
            n_edges,
            lag_kinds,
            ned_kinds,
        }
    }

    pub fn total(&self) -> usize {
        self.n_u + self.n_zeta + self.n_m + self.n_lambda
    }

    pub fn offset_zeta(&self) -> usize {
        self.n_u
    }

    pub fn offset_m(&self) -> usize {
        self.n_u + self.n_zeta
    }

    pub fn lambda_dof(&self) -> Option<usize> {
        (self.n_lambda == 1).then(|| self.total() - 1)
    }

    fn order(&self) -> usize {
        self.formulation.order()
    }

    /// Scalar Lagrange dof for a mesh node.
    pub fn u_node_dof(&self, node: usize) -> usize {
        node
    }

    /// Scalar Lagrange dof `i` (0-based from the `lo` end) on a global edge.
    pub fn u_edge_dof(&self, edge: usize, i: usize) -> usize {
        self.n_nodes + edge * (self.order() - 1) + i
    }

    /// Microdistortion edge dof for a Legendre moment on a global edge
    /// (hybrid formulations).
    pub fn zeta_edge_dof(&self, edge: usize, moment: usize) -> usize {
        self.offset_zeta() + edge * self.order() + moment
    }

    /// Microdistortion component dof of a scalar Lagrange dof (nodal
    /// formulations); `comp` is 0 for x, 1 for y.
    pub fn zeta_nodal_dof(&self, scalar_dof: usize, comp: usize) -> usize {
        self.offset_zeta() + 2 * scalar_dof + comp
    }

    /// Global displacement dofs of an element, in local Lagrange dof order.
    pub fn elem_u_dofs(&self, mesh: &QuadMesh, e: usize) -> Vec<usize> {
        let k = self.order();
        let per_cell = (k - 1) * (k - 1);
        let cell_base = self.n_nodes + self.n_edges * (k - 1) + e * per_cell;
        self.lag_kinds
            .iter()
            .map(|kind| match *kind {
                LagrangeDof::Vertex(v) => mesh.elems[e][v],
                LagrangeDof::Edge { edge, index } => {
                    let (ge, psi) = mesh.edge_table.elem_edges[e][edge];
                    // Local edge dofs run along the counterclockwise
                    // direction; flip to the global lo -> hi order.
                    let i = if psi > 0.0 { index } else { k - 2 - index };
                    self.u_edge_dof(ge, i)
                }
                LagrangeDof::Cell(i) => cell_base + i,
            })
            .collect()
    }

    /// Global microdistortion dofs of an element with orientation signs, in
    /// local basis order. Nodal dofs always carry sign `+1`; hybrid edge
    /// moments carry `psi` for even moments (the odd, linear moment is
    /// invariant because tangent and parameter flip together).
    pub fn elem_zeta_dofs(&self, mesh: &QuadMesh, e: usize) -> Vec<(usize, f64)> {
        let k = self.order();
        if self.formulation.is_hybrid() {
            let per_cell = 2 * k * (k - 1);
            let cell_base = self.offset_zeta() + self.n_edges * k + e * per_cell;
            self.ned_kinds
                .iter()
                .map(|kind| match *kind {
                    NedelecDof::Edge { edge, moment } => {
                        let (ge, psi) = mesh.edge_table.elem_edges[e][edge];
                        let sign = if moment % 2 == 0 { psi } else { 1.0 };
                        (self.zeta_edge_dof(ge, moment), sign)
                    }
                    NedelecDof::Cell(i) => (cell_base + i, 1.0),
                })
                .collect()
        } else {
            let scalars = self.elem_u_dofs(mesh, e);
            let mut dofs = Vec::with_capacity(2 * scalars.len());
            for &g in &scalars {
                dofs.push((self.zeta_nodal_dof(g, 0), 1.0));
                dofs.push((self.zeta_nodal_dof(g, 1), 1.0));
            }
            dofs
        }
    }

    /// Global moment-stress dofs of an element; empty unless mixed.
    pub fn elem_m_dofs(&self, e: usize) -> Vec<usize> {
        if !self.formulation.is_mixed() {
            return Vec::new();
        }
        let k = self.order();
        let per_cell = k * k;
        (0..per_cell)
            .map(|i| self.offset_m() + e * per_cell + i)
            .collect()
    }

    /// Records a Dirichlet value. Repeated prescriptions must agree, which
    /// holds for tag overlaps fed from a single boundary field.
    pub fn prescribe(&mut self, dof: usize, value: f64) {
        debug_assert!(
            self.prescribed[dof].is_none_or(|old| (old - value).abs() <= 1e-12 * (1.0 + value.abs())),
            "conflicting Dirichlet values on dof {dof}"
        );
        self.prescribed[dof] = Some(value);
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.prescribed[dof].is_some()
    }
}

/// Assembled sparse system in triplet form, prior to factorization.
/// Constrained dofs are already eliminated symmetrically: their rows and
/// columns carry only a unit diagonal and the prescribed value on the right
/// hand side.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub n: usize,
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    pub dof_map: DofMap,
}

impl LinearSystem {
    /// Dense form for small systems (tests and diagnostics).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.triplets {
            a[(i, j)] += v;
        }
        a
    }
}

/// Interpolation moments of the tangential trace of `g` on the straight
/// edge from `lo` to `hi`, in the global `lo -> hi` orientation. These are
/// exactly the edge-element dof functionals pushed to the physical edge:
/// the covariant map preserves tangential line integrals, so the constant
/// moment is half the line integral of `<g, tau>` and the linear moment is
/// its Legendre-weighted companion. Constants and linear tangential traces
/// are reproduced exactly.
pub fn edge_tangential_moments(
    lo: [f64; 2],
    hi: [f64; 2],
    g: impl Fn(f64, f64) -> Vector2<f64>,
) -> [f64; 2] {
    // With the unnormalized chord T = hi - lo of length L and arc element
    // ds = (L/2) dt, the factor L cancels: (L/4) <g, tau> = (1/4) <g, T>.
    let chord = Vector2::new(hi[0] - lo[0], hi[1] - lo[1]);
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let (gt, gw) = gauss_1d(4);
    let mut moments = [0.0; 2];
    for (&t, &w) in gt.iter().zip(&gw) {
        let x = mid[0] + 0.5 * t * chord.x;
        let y = mid[1] + 0.5 * t * chord.y;
        let trace = g(x, y).dot(&chord);
        moments[0] += 0.25 * w * trace;
        moments[1] += 0.75 * w * t * trace;
    }
    moments
}

/// Edge-element Dirichlet moments implied by the consistent coupling
/// condition: the tangential trace of the microdistortion is tied to the
/// tangential derivative of the prescribed displacement along every
/// microdistortion-constrained edge. Returns `(edge index, [constant
/// moment, linear moment])` pairs; the caller uses the first `k` moments.
///
/// Along a straight edge the tangential derivative integrates exactly:
/// the constant moment is `(u(hi) - u(lo)) / 2` and the linear moment
/// follows by parts, so a constant displacement yields zero constraints.
pub fn consistent_coupling(
    case: &BenchmarkCase,
    mesh: &QuadMesh,
) -> Result<Vec<(usize, [f64; 2])>, AssemblyError> {
    let u_edges = tagged_edges(mesh, case, case.u_dirichlet_tags)?;
    let zeta_edges = tagged_edges(mesh, case, case.zeta_dirichlet_tags)?;
    if !zeta_edges.iter().all(|e| u_edges.contains(e)) {
        return Err(AssemblyError::CouplingViolation);
    }
    let params = &case.default_params;
    let (gt, gw) = gauss_1d(4);
    let mut values = Vec::with_capacity(zeta_edges.len());
    for &edge in &zeta_edges {
        let (a, b) = mesh.edge_table.edges[edge];
        let (lo, hi) = (mesh.nodes[a], mesh.nodes[b]);
        let u_lo = (case.u_bc)(lo[0], lo[1], params);
        let u_hi = (case.u_bc)(hi[0], hi[1], params);
        // int_{-1}^{1} u(X(t)) dt for the integrated-by-parts linear moment
        // (3/2) (u(hi) + u(lo) - int u dt).
        let mut u_int = 0.0;
        for (&t, &w) in gt.iter().zip(&gw) {
            let x = (lo[0] + hi[0]) / 2.0 + 0.5 * t * (hi[0] - lo[0]);
            let y = (lo[1] + hi[1]) / 2.0 + 0.5 * t * (hi[1] - lo[1]);
            u_int += w * (case.u_bc)(x, y, params);
        }
        values.push((
            edge,
            [(u_hi - u_lo) / 2.0, 1.5 * (u_hi + u_lo - u_int)],
        ));
    }
    Ok(values)
}

/// Sorted, deduplicated edge indices under the given tags; errors on a tag
/// the mesh does not define.
fn tagged_edges(
    mesh: &QuadMesh,
    case: &BenchmarkCase,
    tags: &[&str],
) -> Result<Vec<usize>, AssemblyError> {
    let mut edges = Vec::new();
    for &name in tags {
        let tag = mesh.tag(name).ok_or_else(|| {
            AssemblyError::UnknownTag(case.name.to_string(), name.to_string())
        })?;
        edges.extend_from_slice(&tag.edges);
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

/// Applies the case's Dirichlet data to the dof map: displacement values by
/// interpolation of `u_bc` at the constrained lattice points,
/// microdistortion values by tangential moments of `zeta_bc` on constrained
/// edges (hybrid) or its tangential components at constrained nodes (nodal,
/// axis-aligned edges only).
fn build_constraints(
    mesh: &QuadMesh,
    formulation: Formulation,
    params: &MaterialParams,
    case: &BenchmarkCase,
    dof_map: &mut DofMap,
) -> Result<(), AssemblyError> {
    let k = formulation.order();
    for &name in case.u_dirichlet_tags {
        let tag = mesh.tag(name).ok_or_else(|| {
            AssemblyError::UnknownTag(case.name.to_string(), name.to_string())
        })?;
        for &node in &tag.nodes {
            let [x, y] = mesh.nodes[node];
            dof_map.prescribe(dof_map.u_node_dof(node), (case.u_bc)(x, y, params));
        }
        for &edge in &tag.edges {
            let (a, b) = mesh.edge_table.edges[edge];
            for i in 0..k - 1 {
                let frac = (i + 1) as f64 / k as f64;
                let x = mesh.nodes[a][0] + frac * (mesh.nodes[b][0] - mesh.nodes[a][0]);
                let y = mesh.nodes[a][1] + frac * (mesh.nodes[b][1] - mesh.nodes[a][1]);
                dof_map.prescribe(dof_map.u_edge_dof(edge, i), (case.u_bc)(x, y, params));
            }
        }
    }

    let zeta_edges = tagged_edges(mesh, case, case.zeta_dirichlet_tags)?;
    for &edge in &zeta_edges {
        let (a, b) = mesh.edge_table.edges[edge];
        let (lo, hi) = (mesh.nodes[a], mesh.nodes[b]);
        if formulation.is_hybrid() {
            let m = edge_tangential_moments(lo, hi, |x, y| (case.zeta_bc)(x, y, params));
            for moment in 0..k {
                dof_map.prescribe(dof_map.zeta_edge_dof(edge, moment), m[moment]);
            }
        } else {
            // Nodal spaces can only pin whole components; on an axis-aligned
            // edge the tangential component is a coordinate one.
            let len = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
            let comp = if (hi[1] - lo[1]).abs() <= 1e-12 * len {
                0
            } else if (hi[0] - lo[0]).abs() <= 1e-12 * len {
                1
            } else {
                return Err(AssemblyError::SkewBoundaryEdge(a, b));
            };
            let mut lattice = vec![
                (dof_map.u_node_dof(a), lo[0], lo[1]),
                (dof_map.u_node_dof(b), hi[0], hi[1]),
            ];
            for i in 0..k - 1 {
                let frac = (i + 1) as f64 / k as f64;
                lattice.push((
                    dof_map.u_edge_dof(edge, i),
                    lo[0] + frac * (hi[0] - lo[0]),
                    lo[1] + frac * (hi[1] - lo[1]),
                ));
            }
            for (scalar_dof, x, y) in lattice {
                let g = (case.zeta_bc)(x, y, params);
                dof_map.prescribe(dof_map.zeta_nodal_dof(scalar_dof, comp), g[comp]);
            }
        }
    }

    if !(0..dof_map.n_u).any(|d| dof_map.is_constrained(d)) {
        return Err(AssemblyError::NoDisplacementConstraint);
    }
    Ok(())
}

/// Per-element output of the assembly loop: triplets with constrained rows
/// and columns already eliminated, plus right-hand-side increments. Elements
/// are processed independently (possibly in parallel) and folded in element
/// order, so the assembled system is bitwise reproducible for any thread
/// count.
struct ElementContribution {
    triplets: Vec<(usize, usize, f64)>,
    rhs: Vec<(usize, f64)>,
}

fn scatter_eliminated(
    dof_map: &DofMap,
    dofs: &[usize],
    k_full: &DMatrix<f64>,
    rhs_local: &DVector<f64>,
) -> ElementContribution {
    let mut out = ElementContribution {
        triplets: Vec::with_capacity(dofs.len() * dofs.len()),
        rhs: Vec::with_capacity(dofs.len()),
    };
    for (li, &gi) in dofs.iter().enumerate() {
        if dof_map.is_constrained(gi) {
            continue;
        }
        let mut r = rhs_local[li];
        for (lj, &gj) in dofs.iter().enumerate() {
            let v = k_full[(li, lj)];
            if v == 0.0 {
                continue;
            }
            match dof_map.prescribed[gj] {
                // Symmetric elimination: constrained columns move to the
                // right-hand side.
                Some(val) => r -= v * val,
                None => out.triplets.push((gi, gj, v)),
            }
        }
        if r != 0.0 {
            out.rhs.push((gi, r));
        }
    }
    out
}

/// Assembles the constrained global system for `case` on `mesh` with the
/// default quadrature rule.
pub fn assemble(
    mesh: &QuadMesh,
    formulation: Formulation,
    params: &MaterialParams,
    case: &BenchmarkCase,
) -> Result<LinearSystem, AssemblyError> {
    assemble_with_rule(mesh, formulation, params, case, default_rule(formulation.order()))
}

/// [`assemble`] with an explicit quadrature rule.
pub fn assemble_with_rule(
    mesh: &QuadMesh,
    formulation: Formulation,
    params: &MaterialParams,
    case: &BenchmarkCase,
    rule: QuadratureRule,
) -> Result<LinearSystem, AssemblyError> {
    params.validate()?;
    formulation.validate()?;
    if formulation.is_mixed() && params.curl_weight() == Some(0.0) {
        return Err(AssemblyError::MixedAtLcZero);
    }
    if !formulation.is_mixed() && params.l_c.is_infinite() {
        return Err(AssemblyError::PrimalAtLcInfinity);
    }

    // The mean of the moment stress is only determined (and, by the Stokes
    // identity, zero) when the microdistortion's tangential trace is
    // prescribed on the whole boundary; pin it by a scalar multiplier then.
    let zeta_edges = tagged_edges(mesh, case, case.zeta_dirichlet_tags)?;
    let with_lambda = formulation.is_mixed() && {
        let mut covered = vec![false; mesh.edge_table.edges.len()];
        for &e in &zeta_edges {
            covered[e] = true;
        }
        mesh.edge_table
            .incidence
            .iter()
            .enumerate()
            .all(|(e, &inc)| inc != 1 || covered[e])
    };

    let mut dof_map = DofMap::new(mesh, formulation, with_lambda);
    build_constraints(mesh, formulation, params, case, &mut dof_map)?;

    let cache = ReferenceCache::new(formulation, rule);
    let full_gradient = matches!(formulation, Formulation::FullGradientNodal(_));
    let eps = if formulation.is_mixed() {
        // 1 / (mu_macro Lc^2); the sentinel drops the block entirely, which
        // is the exact limit problem enforcing curl zeta = 0.
        params.curl_weight().map(|w| 1.0 / w)
    } else {
        None
    };

    let n = dof_map.total();
    let nu = cache.n_u();
    let nz = cache.n_zeta();
    let nm = cache.n_m();
    let n_local = nu + nz + nm;
    let dof_map_ref = &dof_map;
    let cache_ref = &cache;

    let contributions = crate::par::map_elements(mesh.elems.len(), move |e| {
        let geo = mesh.geometry(e);
        let zeta = dof_map_ref.elem_zeta_dofs(mesh, e);
        let signs: Vec<f64> = zeta.iter().map(|&(_, s)| s).collect();
        let points = map_bases(cache_ref, &geo, &signs);
        let mats = stiffness_core(params, cache_ref, &points, full_gradient);

        let mut k_full = DMatrix::zeros(n_local, n_local);
        for i in 0..nu + nz {
            for j in 0..nu + nz {
                k_full[(i, j)] = mats.k_e[(i, j)] + mats.k_micro[(i, j)];
                if !formulation.is_mixed() {
                    k_full[(i, j)] += mats.k_macro[(i, j)];
                }
            }
        }
        if formulation.is_mixed() {
            for (q, p) in points.iter().enumerate() {
                let w = cache_ref.rule.weights[q];
                let l2v = &cache_ref.l2_values[q];
                for i in 0..nm {
                    for j in 0..nz {
                        // int curl theta_j q_i dX: the Piola curl carries
                        // 1/det J, so det J cancels against the measure.
                        let v = w * (signs[j] * cache_ref.ned_curls[q][j]) * l2v[i];
                        k_full[(nu + nz + i, nu + j)] += v;
                        k_full[(nu + j, nu + nz + i)] += v;
                    }
                    if let Some(eps) = eps {
                        for j in 0..nm {
                            k_full[(nu + nz + i, nu + nz + j)] -=
                                eps * (l2v[i] * l2v[j]) * p.wdet;
                        }
                    }
                }
            }
        }

        let mut rhs_local = DVector::zeros(n_local);
        rhs_local
            .rows_mut(0, nu + nz)
            .copy_from(&rhs_core(cache_ref, &points, |x, y| (case.f_load)(x, y, params), |x, y| {
                (case.omega_load)(x, y, params)
            }));

        let mut dofs: Vec<usize> = dof_map_ref.elem_u_dofs(mesh, e);
        dofs.extend(zeta.iter().map(|&(d, _)| d));
        let m_dofs = dof_map_ref.elem_m_dofs(e);
        dofs.extend_from_slice(&m_dofs);

        let mut out = scatter_eliminated(dof_map_ref, &dofs, &k_full, &rhs_local);
        if let Some(lambda) = dof_map_ref.lambda_dof() {
            // Mean constraint row/column: int q_i dX per cell dof.
            for (i, &gm) in m_dofs.iter().enumerate() {
                let mut c = 0.0;
                for (q, p) in points.iter().enumerate() {
                    c += cache_ref.l2_values[q][i] * p.wdet;
                }
                out.triplets.push((gm, lambda, c));
                out.triplets.push((lambda, gm, c));
            }
        }
        out
    });

    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; n];
    for contribution in contributions {
        triplets.extend(contribution.triplets);
        for (i, v) in contribution.rhs {
            rhs[i] += v;
        }
    }
    for dof in 0..n {
        if let Some(val) = dof_map.prescribed[dof] {
            triplets.push((dof, dof, 1.0));
            rhs[dof] = val;
        }
    }

    Ok(LinearSystem {
        n,
        triplets,
        rhs,
        dof_map,
    })
}
