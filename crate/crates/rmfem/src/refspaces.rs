//! Reference-element function spaces on `Xi = [-1,1]^2`.
//!
//! Three families are provided, all in a fixed local dof order:
//!
//! * [`LagrangeBasis`]: tensor-product Lagrange polynomials `Q^k` on the
//!   uniform `(k+1) x (k+1)` lattice, `k = 1..=3`. Vertex dofs come first
//!   (corners counterclockwise from `(-1,-1)`), then edge-interior dofs per
//!   edge in counterclockwise direction, then cell-interior dofs.
//! * [`NedelecBasis`]: edge elements of the first kind,
//!   `Pe^k = Q^{k-1,k} x Q^{k,k-1}`, `k = 1..=2`. Edge dofs are Legendre
//!   moments of the tangential trace; each edge function is normalized so
//!   its own-edge tangential trace is the matching Legendre polynomial
//!   (`1` for the constant moment, `t` for the linear moment).
//! * [`L2Basis`]: discontinuous `Q^{k-1}` used for the curl multiplier.
//!
//! Local edge numbering and counterclockwise tangents:
//!
//! ```text
//!   edge 0: eta = -1, tangent (+1, 0)      3 <--- 2
//!   edge 1: xi  = +1, tangent ( 0,+1)      |      ^
//!   edge 2: eta = +1, tangent (-1, 0)      v      |
//!   edge 3: xi  = -1, tangent ( 0,-1)      0 ---> 1
//! ```

use nalgebra::{DMatrix, DVector, Vector2};

/// Corner coordinates in local dof order.
pub const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Local vertex pairs (start, end) of each edge, counterclockwise.
pub const EDGE_VERTICES: [(usize, usize); 4] = [(0, 1), (1, 2), (2, 3), (3, 0)];

/// Counterclockwise unit tangents of the local edges.
pub const EDGE_TANGENTS: [(f64, f64); 4] = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];

/// Maps the edge parameter `t` in `[-1,1]` to reference coordinates,
/// running along the counterclockwise tangent.
pub fn edge_point(edge: usize, t: f64) -> (f64, f64) {
    match edge {
        0 => (t, -1.0),
        1 => (1.0, t),
        2 => (-t, 1.0),
        3 => (-1.0, -t),
        _ => panic!("edge index {edge} out of range"),
    }
}

/// One-dimensional Gauss-Legendre rule on `[-1,1]`.
///
/// Supported sizes are `1..=6`; nodes are exact to f64 precision.
pub fn gauss_1d(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3.0f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0 / 5.0f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0 / 5.0f64).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0 / 5.0f64).sqrt()).sqrt();
            let wa = (18.0 + 30.0f64.sqrt()) / 36.0;
            let wb = (18.0 - 30.0f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let a = (5.0 - 2.0 * (10.0 / 7.0f64).sqrt()).sqrt() / 3.0;
            let b = (5.0 + 2.0 * (10.0 / 7.0f64).sqrt()).sqrt() / 3.0;
            let wa = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
            (
                vec![-b, -a, 0.0, a, b],
                vec![wb, wa, 128.0 / 225.0, wa, wb],
            )
        }
        6 => (
            vec![
                -0.932469514203152,
                -0.661209386466265,
                -0.238619186083197,
                0.238619186083197,
                0.661209386466265,
                0.932469514203152,
            ],
            vec![
                0.171324492379170,
                0.360761573048139,
                0.467913934572691,
                0.467913934572691,
                0.360761573048139,
                0.171324492379170,
            ],
        ),
        _ => panic!("gauss_1d supports 1..=6 points, got {n}"),
    }
}

/// Tensor-product Gauss rule on the reference square.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

/// `n x n` tensor Gauss-Legendre rule, `n = 1..=6`.
pub fn gauss_rule(n: usize) -> QuadratureRule {
    let (x, w) = gauss_1d(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (j, &eta) in x.iter().enumerate() {
        for (i, &xi) in x.iter().enumerate() {
            points.push((xi, eta));
            weights.push(w[i] * w[j]);
        }
    }
    QuadratureRule { points, weights }
}

/// Kind of a Lagrange dof on the reference square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagrangeDof {
    /// Corner dof, vertex index `0..4` counterclockwise.
    Vertex(usize),
    /// Edge-interior dof: local edge and position `0..k-1` along the
    /// counterclockwise tangent.
    Edge { edge: usize, index: usize },
    /// Cell-interior dof, row-major with `xi` fastest.
    Cell(usize),
}

/// Tensor-product Lagrange basis `Q^k` on the uniform lattice.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    k: usize,
    nodes: Vec<f64>,
    /// (i, j) lattice indices per dof, in local dof order.
    lattice: Vec<(usize, usize)>,
    kinds: Vec<LagrangeDof>,
}

impl LagrangeBasis {
    pub fn new(k: usize) -> Self {
        assert!((1..=3).contains(&k), "Lagrange order must be 1..=3, got {k}");
        let nodes: Vec<f64> = (0..=k).map(|i| -1.0 + 2.0 * i as f64 / k as f64).collect();
        let mut lattice = Vec::with_capacity((k + 1) * (k + 1));
        let mut kinds = Vec::with_capacity((k + 1) * (k + 1));
        // Corners counterclockwise.
        for (v, &(cx, cy)) in CORNERS.iter().enumerate() {
            let i = if cx < 0.0 { 0 } else { k };
            let j = if cy < 0.0 { 0 } else { k };
            lattice.push((i, j));
            kinds.push(LagrangeDof::Vertex(v));
        }
        // Edge-interior dofs along counterclockwise tangents.
        for edge in 0..4 {
            for s in 1..k {
                let (i, j) = match edge {
                    0 => (s, 0),
                    1 => (k, s),
                    2 => (k - s, k),
                    _ => (0, k - s),
                };
                lattice.push((i, j));
                kinds.push(LagrangeDof::Edge { edge, index: s - 1 });
            }
        }
        // Cell-interior dofs.
        let mut c = 0;
        for j in 1..k {
            for i in 1..k {
                lattice.push((i, j));
                kinds.push(LagrangeDof::Cell(c));
                c += 1;
            }
        }
        Self { k, nodes, lattice, kinds }
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn ndofs(&self) -> usize {
        self.lattice.len()
    }

    pub fn dof_kinds(&self) -> &[LagrangeDof] {
        &self.kinds
    }

    /// Reference coordinates of each dof, in local dof order.
    pub fn dof_points(&self) -> Vec<(f64, f64)> {
        self.lattice
            .iter()
            .map(|&(i, j)| (self.nodes[i], self.nodes[j]))
            .collect()
    }

    fn lag_1d(&self, i: usize, x: f64) -> f64 {
        let mut v = 1.0;
        for m in 0..=self.k {
            if m != i {
                v *= (x - self.nodes[m]) / (self.nodes[i] - self.nodes[m]);
            }
        }
        v
    }

    fn lag_1d_deriv(&self, i: usize, x: f64) -> f64 {
        let mut sum = 0.0;
        for m in 0..=self.k {
            if m == i {
                continue;
            }
            let mut term = 1.0 / (self.nodes[i] - self.nodes[m]);
            for l in 0..=self.k {
                if l != i && l != m {
                    term *= (x - self.nodes[l]) / (self.nodes[i] - self.nodes[l]);
                }
            }
            sum += term;
        }
        sum
    }

    /// Basis values at `(xi, eta)`, in local dof order.
    pub fn eval(&self, xi: f64, eta: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.ndofs(),
            self.lattice
                .iter()
                .map(|&(i, j)| self.lag_1d(i, xi) * self.lag_1d(j, eta)),
        )
    }

    /// Reference gradients at `(xi, eta)`: `ndofs x 2`, columns `(d/dxi, d/deta)`.
    pub fn grad(&self, xi: f64, eta: f64) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.ndofs(), 2);
        for (row, &(i, j)) in self.lattice.iter().enumerate() {
            g[(row, 0)] = self.lag_1d_deriv(i, xi) * self.lag_1d(j, eta);
            g[(row, 1)] = self.lag_1d(i, xi) * self.lag_1d_deriv(j, eta);
        }
        g
    }
}

/// Kind of a Nedelec dof.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NedelecDof {
    /// Legendre moment `moment` (0 = constant, 1 = linear) of the tangential
    /// trace on the local edge.
    Edge { edge: usize, moment: usize },
    /// Interior moment against the cell test fields.
    Cell(usize),
}

/// Edge elements of the first kind on the reference square.
///
/// For `k = 1` the four functions are, in edge order,
///
/// ```text
/// theta_0 = ((1 - eta)/2, 0)    theta_1 = (0, (1 + xi)/2)
/// theta_2 = ((-1 - eta)/2, 0)   theta_3 = (0, (xi - 1)/2)
/// ```
///
/// each with constant reference curl `1/2` and tangential trace `1` along
/// its own edge (counterclockwise). For `k = 2` the twelve functions are
/// built by inverting the dof-duality system on the monomial basis of
/// `Q^{1,2} x Q^{2,1}` and rescaling edge functions to the same trace
/// convention; the four interior functions are dual to the cell moments
/// against `(1,0), (xi,0), (0,1), (0,eta)`.
#[derive(Debug, Clone)]
pub struct NedelecBasis {
    k: usize,
    /// Monomial coefficients, one column per basis function.
    /// Row layout for k=2: x-component on [1, xi, eta, xi eta, eta^2, xi eta^2],
    /// then y-component on [1, xi, eta, xi eta, xi^2, xi^2 eta].
    coeffs: DMatrix<f64>,
    kinds: Vec<NedelecDof>,
}

/// Legendre polynomials used for edge moments.
fn legendre(q: usize, t: f64) -> f64 {
    match q {
        0 => 1.0,
        1 => t,
        _ => panic!("edge moments use Legendre degrees 0..=1, got {q}"),
    }
}

impl NedelecBasis {
    pub fn new(k: usize) -> Self {
        assert!((1..=2).contains(&k), "Nedelec order must be 1..=2, got {k}");
        let mut kinds = Vec::new();
        for edge in 0..4 {
            for moment in 0..k {
                kinds.push(NedelecDof::Edge { edge, moment });
            }
        }
        for c in 0..2 * k * (k - 1) {
            kinds.push(NedelecDof::Cell(c));
        }
        let coeffs = if k == 1 {
            // Columns are the closed-form functions above on the monomial
            // rows [1, eta] (x-component) and [1, xi] (y-component).
            DMatrix::from_column_slice(
                4,
                4,
                &[
                    // theta_0 = ((1-eta)/2, 0)
                    0.5, -0.5, 0.0, 0.0,
                    // theta_1 = (0, (1+xi)/2)
                    0.0, 0.0, 0.5, 0.5,
                    // theta_2 = ((-1-eta)/2, 0)
                    -0.5, -0.5, 0.0, 0.0,
                    // theta_3 = (0, (xi-1)/2)
                    0.0, 0.0, -0.5, 0.5,
                ],
            )
        } else {
            Self::build_k2(&kinds)
        };
        Self { k, coeffs, kinds }
    }

    /// Monomial exponents `(a, b)` per row: x-component spans `xi^a eta^b`
    /// with `a <= k-1, b <= k`, y-component with `a <= k, b <= k-1`.
    fn monomials(k: usize) -> (Vec<(i32, i32)>, Vec<(i32, i32)>) {
        let mut mx = Vec::new();
        let mut my = Vec::new();
        for b in 0..=k as i32 {
            for a in 0..k as i32 {
                mx.push((a, b));
            }
        }
        for b in 0..k as i32 {
            for a in 0..=k as i32 {
                my.push((a, b));
            }
        }
        (mx, my)
    }

    fn eval_monomial(exps: &[(i32, i32)], coeffs: &[f64], xi: f64, eta: f64) -> f64 {
        exps.iter()
            .zip(coeffs)
            .map(|(&(a, b), &c)| c * xi.powi(a) * eta.powi(b))
            .sum()
    }

    fn build_k2(kinds: &[NedelecDof]) -> DMatrix<f64> {
        let (mx, my) = Self::monomials(2);
        let dim = mx.len() + my.len();
        assert_eq!(dim, 12);
        let (gx, gw) = gauss_1d(4);
        // Duality matrix: row per dof functional, column per monomial field.
        let mut v = DMatrix::zeros(dim, dim);
        for (row, kind) in kinds.iter().enumerate() {
            for col in 0..dim {
                let field = |xi: f64, eta: f64| -> Vector2<f64> {
                    if col < mx.len() {
                        let (a, b) = mx[col];
                        Vector2::new(xi.powi(a) * eta.powi(b), 0.0)
                    } else {
                        let (a, b) = my[col - mx.len()];
                        Vector2::new(0.0, xi.powi(a) * eta.powi(b))
                    }
                };
                v[(row, col)] = match *kind {
                    NedelecDof::Edge { edge, moment } => {
                        let (tx, ty) = EDGE_TANGENTS[edge];
                        let tangent = Vector2::new(tx, ty);
                        gx.iter()
                            .zip(&gw)
                            .map(|(&t, &w)| {
                                let (xi, eta) = edge_point(edge, t);
                                w * legendre(moment, t) * field(xi, eta).dot(&tangent)
                            })
                            .sum()
                    }
                    NedelecDof::Cell(c) => {
                        let test = move |xi: f64, eta: f64| -> Vector2<f64> {
                            match c {
                                0 => Vector2::new(1.0, 0.0),
                                1 => Vector2::new(xi, 0.0),
                                2 => Vector2::new(0.0, 1.0),
                                _ => Vector2::new(0.0, eta),
                            }
                        };
                        let mut s = 0.0;
                        for (&e2, &w2) in gx.iter().zip(&gw) {
                            for (&e1, &w1) in gx.iter().zip(&gw) {
                                s += w1 * w2 * field(e1, e2).dot(&test(e1, e2));
                            }
                        }
                        s
                    }
                };
            }
        }
        // With V[m][c] = F_m(monomial_c), the dual-basis coefficients are
        // the columns of V^{-1}. Rescale edge functions so own-edge traces
        // are the Legendre polynomials.
        let mut coeffs = v
            .try_inverse()
            .expect("Nedelec k=2 dof/monomial system is unisolvent");
        for (i, kind) in kinds.iter().enumerate() {
            if let NedelecDof::Edge { moment, .. } = *kind {
                let scale = if moment == 0 { 2.0 } else { 2.0 / 3.0 };
                for r in 0..dim {
                    coeffs[(r, i)] *= scale;
                }
            }
        }
        coeffs
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn ndofs(&self) -> usize {
        self.kinds.len()
    }

    /// Edge dofs per edge (`k`).
    pub fn edge_dofs(&self) -> usize {
        self.k
    }

    /// Interior dofs (`2k(k-1)`).
    pub fn cell_dofs(&self) -> usize {
        2 * self.k * (self.k - 1)
    }

    pub fn dof_kinds(&self) -> &[NedelecDof] {
        &self.kinds
    }

    /// Vector values of all basis functions at `(xi, eta)`.
    pub fn eval(&self, xi: f64, eta: f64) -> Vec<Vector2<f64>> {
        let (mx, my) = Self::monomials(self.k);
        (0..self.ndofs())
            .map(|n| {
                let col = self.coeffs.column(n);
                let cx = &col.as_slice()[..mx.len()];
                let cy = &col.as_slice()[mx.len()..];
                Vector2::new(
                    Self::eval_monomial(&mx, cx, xi, eta),
                    Self::eval_monomial(&my, cy, xi, eta),
                )
            })
            .collect()
    }

    /// Reference curls `d theta_y / d xi - d theta_x / d eta` at `(xi, eta)`.
    pub fn curl(&self, xi: f64, eta: f64) -> DVector<f64> {
        let (mx, my) = Self::monomials(self.k);
        DVector::from_iterator(
            self.ndofs(),
            (0..self.ndofs()).map(|n| {
                let col = self.coeffs.column(n);
                let cx = &col.as_slice()[..mx.len()];
                let cy = &col.as_slice()[mx.len()..];
                let mut s = 0.0;
                for (&(a, b), &c) in my.iter().zip(cy) {
                    if a > 0 {
                        s += c * a as f64 * xi.powi(a - 1) * eta.powi(b);
                    }
                }
                for (&(a, b), &c) in mx.iter().zip(cx) {
                    if b > 0 {
                        s -= c * b as f64 * xi.powi(a) * eta.powi(b - 1);
                    }
                }
                s
            }),
        )
    }

    /// Tangential trace of basis function `n` at parameter `t` of `edge`,
    /// with respect to the counterclockwise tangent.
    pub fn edge_trace(&self, n: usize, edge: usize, t: f64) -> f64 {
        let (xi, eta) = edge_point(edge, t);
        let (tx, ty) = EDGE_TANGENTS[edge];
        let v = self.eval(xi, eta);
        v[n].x * tx + v[n].y * ty
    }

    /// Interpolation coefficients of a smooth field: Legendre edge moments
    /// and interior moments, matching the basis normalization so that any
    /// field already in `Pe^k` is reproduced exactly.
    pub fn interpolate(&self, field: impl Fn(f64, f64) -> Vector2<f64>) -> DVector<f64> {
        let (gx, gw) = gauss_1d(6);
        let mut coeffs = DVector::zeros(self.ndofs());
        for (i, kind) in self.kinds.iter().enumerate() {
            coeffs[i] = match *kind {
                NedelecDof::Edge { edge, moment } => {
                    let (tx, ty) = EDGE_TANGENTS[edge];
                    let tangent = Vector2::new(tx, ty);
                    let raw: f64 = gx
                        .iter()
                        .zip(&gw)
                        .map(|(&t, &w)| {
                            let (xi, eta) = edge_point(edge, t);
                            w * legendre(moment, t) * field(xi, eta).dot(&tangent)
                        })
                        .sum();
                    // Own-edge trace of the basis function is P_moment, so
                    // divide by the moment of P_moment against itself.
                    if moment == 0 {
                        raw / 2.0
                    } else {
                        raw * 3.0 / 2.0
                    }
                }
                NedelecDof::Cell(c) => {
                    // Cell moments of the edge functions vanish by the dual
                    // construction, so the raw moment is the coefficient.
                    let test = move |xi: f64, eta: f64| -> Vector2<f64> {
                        match c {
                            0 => Vector2::new(1.0, 0.0),
                            1 => Vector2::new(xi, 0.0),
                            2 => Vector2::new(0.0, 1.0),
                            _ => Vector2::new(0.0, eta),
                        }
                    };
                    let mut s = 0.0;
                    for (&e2, &w2) in gx.iter().zip(&gw) {
                        for (&e1, &w1) in gx.iter().zip(&gw) {
                            s += w1 * w2 * field(e1, e2).dot(&test(e1, e2));
                        }
                    }
                    s
                }
            };
        }
        coeffs
    }
}

/// Discontinuous `Q^{k-1}` basis for the curl multiplier space.
#[derive(Debug, Clone)]
pub struct L2Basis {
    k: usize,
}

impl L2Basis {
    pub fn new(k: usize) -> Self {
        assert!((1..=2).contains(&k), "L2 order must be 1..=2, got {k}");
        Self { k }
    }

    pub fn ndofs(&self) -> usize {
        self.k * self.k
    }

    /// Basis values at `(xi, eta)`: `{1}` for k=1, `{1, xi, eta, xi eta}`
    /// for k=2.
    pub fn eval(&self, xi: f64, eta: f64) -> DVector<f64> {
        match self.k {
            1 => DVector::from_element(1, 1.0),
            _ => DVector::from_vec(vec![1.0, xi, eta, xi * eta]),
        }
    }
}
