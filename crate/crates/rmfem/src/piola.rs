//! Bilinear quadrilateral geometry and the maps that push reference-element
//! quantities onto physical elements.
//!
//! Scalar basis functions transfer by composition, so their gradients pick up
//! an inverse-transpose Jacobian factor. Tangentially continuous vector
//! fields use the covariant Piola transform, which preserves line integrals
//! along mapped curves; the curl of a covariantly mapped field scales with
//! the inverse Jacobian determinant. Orientation signs that reconcile local
//! and global edge directions are supplied by the caller per basis function.

use nalgebra::{Matrix2, Vector2};

use crate::refspaces::CORNERS;

/// Bilinear image of the reference square `[-1, 1]^2`.
///
/// Corners are listed counterclockwise starting at the image of `(-1, -1)`.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    corners: [Vector2<f64>; 4],
}

/// Geometry data evaluated at a single reference point.
#[derive(Debug, Clone, Copy)]
pub struct MappedPoint {
    /// Physical location of the reference point.
    pub x: Vector2<f64>,
    /// Jacobian `d(x, y) / d(xi, eta)` of the bilinear map.
    pub jac: Matrix2<f64>,
    /// Jacobian determinant.
    pub det_j: f64,
    /// Inverse transpose of the Jacobian.
    pub inv_jt: Matrix2<f64>,
}

impl ElementGeometry {
    pub fn new(corners: [[f64; 2]; 4]) -> Self {
        Self {
            corners: corners.map(Vector2::from),
        }
    }

    pub fn corner(&self, i: usize) -> Vector2<f64> {
        self.corners[i]
    }

    /// Physical image of a reference point.
    pub fn map(&self, xi: f64, eta: f64) -> Vector2<f64> {
        let mut x = Vector2::zeros();
        for (c, &(xc, ec)) in self.corners.iter().zip(CORNERS.iter()) {
            x += 0.25 * (1.0 + xi * xc) * (1.0 + eta * ec) * c;
        }
        x
    }

    /// Jacobian of the bilinear map at a reference point.
    pub fn jacobian(&self, xi: f64, eta: f64) -> Matrix2<f64> {
        let mut jac = Matrix2::zeros();
        for (c, &(xc, ec)) in self.corners.iter().zip(CORNERS.iter()) {
            let dxi = 0.25 * xc * (1.0 + eta * ec);
            let deta = 0.25 * ec * (1.0 + xi * xc);
            jac.m11 += dxi * c[0];
            jac.m12 += deta * c[0];
            jac.m21 += dxi * c[1];
            jac.m22 += deta * c[1];
        }
        jac
    }

    /// Evaluates the map, Jacobian, determinant, and inverse transpose at
    /// once. Panics if the element is degenerate at the point.
    pub fn at(&self, xi: f64, eta: f64) -> MappedPoint {
        let jac = self.jacobian(xi, eta);
        let det_j = jac.m11 * jac.m22 - jac.m12 * jac.m21;
        assert!(
            det_j.abs() > f64::MIN_POSITIVE,
            "element Jacobian is singular at ({xi}, {eta})"
        );
        let inv_jt = Matrix2::new(jac.m22, -jac.m21, -jac.m12, jac.m11) / det_j;
        MappedPoint {
            x: self.map(xi, eta),
            jac,
            det_j,
            inv_jt,
        }
    }

    /// Whether the bilinear map preserves orientation on the whole element.
    ///
    /// The Jacobian determinant of a bilinear map is itself bilinear in the
    /// reference coordinates, so its extrema sit at the reference corners;
    /// checking the four corner values is exact.
    pub fn detj_positive(&self) -> bool {
        CORNERS
            .iter()
            .all(|&(xi, eta)| self.jacobian(xi, eta).determinant() > 0.0)
    }
}

/// Physical gradient of a scalar basis function from its reference gradient.
pub fn map_h1(inv_jt: &Matrix2<f64>, ref_grad: Vector2<f64>) -> Vector2<f64> {
    inv_jt * ref_grad
}

/// Covariant Piola transform of a reference vector field value.
///
/// `psi` is the orientation sign of the associated edge dof, `+1` when the
/// local edge direction agrees with the global one (interior dofs always
/// pass `+1`).
pub fn map_hcurl(inv_jt: &Matrix2<f64>, psi: f64, v: Vector2<f64>) -> Vector2<f64> {
    psi * inv_jt * v
}

/// Physical curl of a covariantly mapped field from its reference curl.
pub fn map_curl(psi: f64, ref_curl: f64, det_j: f64) -> f64 {
    psi * ref_curl / det_j
}
