//! Symmetric quadrature rules on the reference tetrahedron and triangle.
//!
//! Tet weights sum to 1/6 and triangle weights to 1/2, the reference
//! volumes, so integrals are w · |det J| · f without extra factors. All
//! rules have positive weights; mass matrices assembled with them stay
//! positive definite.

use crate::{Error, Result};

/// Quadrature points in barycentric coordinates with matching weights.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    points: Vec<[f64; 4]>,
    weights: Vec<f64>,
    degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn points(&self) -> &[[f64; 4]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Triangle rule; the fourth barycentric slot of [`QuadratureRule`] is
/// unused and kept at zero.
pub type FacetQuadratureRule = QuadratureRule;

fn s31(points: &mut Vec<[f64; 4]>, weights: &mut Vec<f64>, b: f64, w: f64) {
    let a = 1.0 - 3.0 * b;
    for slot in 0..4 {
        let mut p = [b; 4];
        p[slot] = a;
        points.push(p);
        weights.push(w);
    }
}

fn s22(points: &mut Vec<[f64; 4]>, weights: &mut Vec<f64>, c: f64, w: f64) {
    let d = 0.5 - c;
    for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
        let mut p = [d; 4];
        p[i] = c;
        p[j] = c;
        points.push(p);
        weights.push(w);
    }
}

/// Rule exact for polynomials of (at least) the requested degree on the
/// reference tetrahedron. Supported degrees: 1 through 4.
pub fn tet_quadrature(degree: usize) -> Result<QuadratureRule> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match degree {
        1 => {
            points.push([0.25; 4]);
            weights.push(1.0 / 6.0);
        }
        2 => {
            let b = (5.0 - 5f64.sqrt()) / 20.0;
            s31(&mut points, &mut weights, b, 1.0 / 24.0);
        }
        3 => {
            points.push([0.25; 4]);
            weights.push(-2.0 / 15.0);
            s31(&mut points, &mut weights, 1.0 / 6.0, 3.0 / 40.0);
        }
        4 => {
            // 14-point rule, exact through degree 5.
            s31(&mut points, &mut weights, 0.31088591926330061, 0.11268792571801585 / 6.0);
            s31(&mut points, &mut weights, 0.09273525031089123, 0.07349304311636196 / 6.0);
            s22(&mut points, &mut weights, 0.04550370412564965, 0.04254602077708147 / 6.0);
        }
        other => return Err(Error::UnsupportedDegree(other)),
    }
    Ok(QuadratureRule { points, weights, degree })
}

/// Rule exact for polynomials of (at least) the requested degree on the
/// reference triangle. Supported degrees: 1 through 4.
pub fn triangle_quadrature(degree: usize) -> Result<FacetQuadratureRule> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let perm3 = |points: &mut Vec<[f64; 4]>, weights: &mut Vec<f64>, a: f64, w: f64| {
        let b = (1.0 - a) / 2.0;
        for slot in 0..3 {
            let mut p = [b, b, b, 0.0];
            p[slot] = a;
            points.push(p);
            weights.push(w);
        }
    };
    match degree {
        1 => {
            points.push([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]);
            weights.push(0.5);
        }
        2 => {
            perm3(&mut points, &mut weights, 2.0 / 3.0, 1.0 / 6.0);
        }
        3 | 4 => {
            // 6-point rule, exact through degree 4.
            perm3(&mut points, &mut weights, 1.0 - 2.0 * 0.445948490915965, 0.223381589678011 / 2.0);
            perm3(&mut points, &mut weights, 1.0 - 2.0 * 0.091576213509771, 0.109951743655322 / 2.0);
        }
        other => return Err(Error::UnsupportedDegree(other)),
    }
    Ok(QuadratureRule { points, weights, degree })
}
