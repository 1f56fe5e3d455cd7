//! Planar affine and projective transforms.
//!
//! Homographies are built from exactly four point correspondences by direct
//! Gaussian elimination on the 8×8 system obtained with `m33 = 1`. Points are
//! similarity-normalized (centroid at the origin, mean radius √2) before the
//! solve so that pixel-scale coordinates do not wreck the conditioning.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Triangle area below which three points count as collinear (px²).
pub const DEGENERATE_AREA: f64 = 1e-9;
/// Smallest acceptable pivot / determinant magnitude.
pub const SINGULAR_EPS: f64 = 1e-12;
/// `|Z|` below which a mapped point is treated as lying on the horizon line.
pub const HORIZON_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("degenerate correspondence: {0}")]
    DegenerateCorrespondence(String),
    #[error("singular linear system")]
    SingularSystem,
    #[error("point ({x}, {y}) maps to infinity")]
    PointAtInfinity { x: f64, y: f64 },
    #[error("source and target quadrilaterals have opposite winding")]
    WindingMismatch,
    #[error("non-finite matrix entry")]
    NonFinite,
}

/// A point in the plane. Serializes as a two-element array `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// Signed area of the triangle `abc` (positive for counter-clockwise in a y-up frame).
pub fn signed_triangle_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

/// Shoelace signed area of a polygon.
pub fn signed_polygon_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (p, q) = (pts[i], pts[(i + 1) % n]);
            p.x * q.y - q.x * p.y
        })
        .sum();
    0.5 * twice
}

/// True iff any three of the four points span a triangle of area below [`DEGENERATE_AREA`].
pub fn is_degenerate_quad(pts: &[Point2; 4]) -> bool {
    const TRIPLES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    TRIPLES.iter().any(|t| {
        let area = signed_triangle_area(pts[t[0]], pts[t[1]], pts[t[2]]).abs();
        !(area >= DEGENERATE_AREA)
    })
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve_dense<const N: usize>(
    mut a: [[f64; N]; N],
    mut b: [f64; N],
) -> Result<[f64; N], GeomError> {
    for col in 0..N {
        let pivot_row = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if !(a[pivot_row][col].abs() >= SINGULAR_EPS) {
            return Err(GeomError::SingularSystem);
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..N {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..N {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Ok(x)
}

/// 2×3 affine map `(x, y) ↦ (m11 x + m12 y + m13, m21 x + m22 y + m23)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AffineMap {
    pub m: [[f64; 3]; 2],
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    };

    pub fn new(m: [[f64; 3]; 2]) -> Result<Self, GeomError> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if !(det.abs() >= SINGULAR_EPS) {
            return Err(GeomError::SingularSystem);
        }
        Ok(Self { m })
    }

    /// Builds the affine map taking `src[k]` to `dst[k]` for all three pairs.
    pub fn from_correspondences(src: &[Point2; 3], dst: &[Point2; 3]) -> Result<Self, GeomError> {
        let area = signed_triangle_area(src[0], src[1], src[2]).abs();
        if !(area >= DEGENERATE_AREA) {
            return Err(GeomError::DegenerateCorrespondence(
                "source points are collinear".into(),
            ));
        }
        // The two output rows share one 3×3 system.
        let a = [
            [src[0].x, src[0].y, 1.0],
            [src[1].x, src[1].y, 1.0],
            [src[2].x, src[2].y, 1.0],
        ];
        let row_x = solve_dense(a, [dst[0].x, dst[1].x, dst[2].x])?;
        let row_y = solve_dense(a, [dst[0].y, dst[1].y, dst[2].y])?;
        Self::new([row_x, row_y])
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        let m = &self.m;
        Point2::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2],
        )
    }

    /// The same map as a homography with a `0 0 1` bottom row.
    pub fn to_homography(&self) -> Homography {
        let m = &self.m;
        Homography {
            m: [m[0], m[1], [0.0, 0.0, 1.0]],
        }
    }
}

impl TryFrom<Vec<f64>> for AffineMap {
    type Error = String;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        if v.len() != 6 {
            return Err(format!("expected 6 entries, got {}", v.len()));
        }
        Self::new([[v[0], v[1], v[2]], [v[3], v[4], v[5]]]).map_err(|e| e.to_string())
    }
}

impl From<AffineMap> for Vec<f64> {
    fn from(a: AffineMap) -> Self {
        a.m.iter().flatten().copied().collect()
    }
}

/// Convenience wrapper for [`AffineMap::from_correspondences`].
pub fn affine_from_correspondences(
    src: &[Point2; 3],
    dst: &[Point2; 3],
) -> Result<AffineMap, GeomError> {
    AffineMap::from_correspondences(src, dst)
}

pub fn apply_affine(a: &AffineMap, p: Point2) -> Point2 {
    a.apply(p)
}

/// Four source corners and their four target corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadCorrespondence {
    pub src: [Point2; 4],
    pub dst: [Point2; 4],
}

impl QuadCorrespondence {
    pub fn new(src: [Point2; 4], dst: [Point2; 4]) -> Result<Self, GeomError> {
        if is_degenerate_quad(&src) {
            return Err(GeomError::DegenerateCorrespondence(
                "three source points are collinear".into(),
            ));
        }
        if is_degenerate_quad(&dst) {
            return Err(GeomError::DegenerateCorrespondence(
                "three target points are collinear".into(),
            ));
        }
        Ok(Self { src, dst })
    }
}

/// Invertible 3×3 projective map, stored with `m33 = 1` whenever `m33 ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Homography {
    m: [[f64; 3]; 3],
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Canonical scale: divide by `m33`, or by the largest-magnitude entry when `m33 = 0`.
fn normalize(mut m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let s = if m[2][2] != 0.0 {
        m[2][2]
    } else {
        m.iter()
            .flatten()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(1.0)
    };
    if s != 0.0 && s != 1.0 {
        m.iter_mut().flatten().for_each(|v| *v /= s);
    }
    m
}

/// Similarity transform moving the centroid to the origin with mean radius √2.
fn conditioning(pts: &[Point2; 4]) -> [[f64; 3]; 3] {
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mean_r = pts.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / 4.0;
    let s = if mean_r > 0.0 {
        std::f64::consts::SQRT_2 / mean_r
    } else {
        1.0
    };
    [[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]]
}

fn apply_raw(m: &[[f64; 3]; 3], p: Point2) -> (f64, f64, f64) {
    (
        m[0][0] * p.x + m[0][1] * p.y + m[0][2],
        m[1][0] * p.x + m[1][1] * p.y + m[1][2],
        m[2][0] * p.x + m[2][1] * p.y + m[2][2],
    )
}

impl Homography {
    pub const IDENTITY: Homography = Homography {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Wraps a raw matrix, normalizing its scale. Rejects non-finite or singular input.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self, GeomError> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        let m = normalize(m);
        if !(det3(&m).abs() >= SINGULAR_EPS) {
            return Err(GeomError::SingularSystem);
        }
        Ok(Self { m })
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            m: [[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]],
        }
    }

    pub fn scaling(sx: f64, sy: f64) -> Result<Self, GeomError> {
        Self::from_matrix([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn determinant(&self) -> f64 {
        det3(&self.m)
    }

    pub fn is_affine(&self) -> bool {
        self.m[2][0] == 0.0 && self.m[2][1] == 0.0
    }

    /// Solves for the map taking each `src` corner onto the matching `dst` corner.
    pub fn from_correspondences(q: &QuadCorrespondence) -> Result<Self, GeomError> {
        let t_src = conditioning(&q.src);
        let t_dst = conditioning(&q.dst);
        let norm = |t: &[[f64; 3]; 3], p: Point2| {
            let (x, y, _) = apply_raw(t, p);
            Point2::new(x, y)
        };

        let mut a = [[0.0; 8]; 8];
        let mut b = [0.0; 8];
        for k in 0..4 {
            let s = norm(&t_src, q.src[k]);
            let d = norm(&t_dst, q.dst[k]);
            a[2 * k] = [s.x, s.y, 1.0, 0.0, 0.0, 0.0, -d.x * s.x, -d.x * s.y];
            b[2 * k] = d.x;
            a[2 * k + 1] = [0.0, 0.0, 0.0, s.x, s.y, 1.0, -d.y * s.x, -d.y * s.y];
            b[2 * k + 1] = d.y;
        }
        let h = solve_dense(a, b)?;
        let hn = [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]];

        // Undo the conditioning: H = T_dst⁻¹ · Hn · T_src.
        let s = t_dst[0][0];
        let t_dst_inv = [
            [1.0 / s, 0.0, -t_dst[0][2] / s],
            [0.0, 1.0 / s, -t_dst[1][2] / s],
            [0.0, 0.0, 1.0],
        ];
        Self::from_matrix(mat_mul(&t_dst_inv, &mat_mul(&hn, &t_src)))
    }

    /// Projects `p`: `(X/Z, Y/Z)` with `(X, Y, Z) = m · (x, y, 1)`.
    pub fn map_point(&self, p: Point2) -> Result<Point2, GeomError> {
        let (x, y, z) = apply_raw(&self.m, p);
        if !(z.abs() >= HORIZON_EPS) {
            return Err(GeomError::PointAtInfinity { x: p.x, y: p.y });
        }
        Ok(Point2::new(x / z, y / z))
    }

    pub fn invert(&self) -> Result<Self, GeomError> {
        let m = &self.m;
        let det = det3(m);
        if !(det.abs() >= SINGULAR_EPS) {
            return Err(GeomError::SingularSystem);
        }
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        let mut inv = adj;
        inv.iter_mut().flatten().for_each(|v| *v /= det);
        Self::from_matrix(inv)
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &Homography) -> Homography {
        // Product of two invertible matrices is invertible, so only the scale changes.
        Homography {
            m: normalize(mat_mul(&self.m, &first.m)),
        }
    }

    /// Largest absolute entry-wise difference from `other`.
    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for Homography {
    type Error = String;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        if v.len() != 9 {
            return Err(format!("expected 9 entries, got {}", v.len()));
        }
        Self::from_matrix([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
            .map_err(|e| e.to_string())
    }
}

impl From<Homography> for Vec<f64> {
    fn from(h: Homography) -> Self {
        h.m.iter().flatten().copied().collect()
    }
}

pub fn homography_from_correspondences(q: &QuadCorrespondence) -> Result<Homography, GeomError> {
    Homography::from_correspondences(q)
}

pub fn map_point(h: &Homography, p: Point2) -> Result<Point2, GeomError> {
    h.map_point(p)
}

pub fn invert(h: &Homography) -> Result<Homography, GeomError> {
    h.invert()
}

/// `h2 ∘ h1`.
pub fn compose(h2: &Homography, h1: &Homography) -> Homography {
    h2.compose(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn unit_square() -> [Point2; 4] {
        [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]
    }

    /// Closed-form unit-square → quad projective map (Heckbert), independent of the solver.
    fn square_to_quad_oracle(q: &[Point2; 4]) -> [[f64; 3]; 3] {
        let [p0, p1, p2, p3] = *q;
        let sx = p0.x - p1.x + p2.x - p3.x;
        let sy = p0.y - p1.y + p2.y - p3.y;
        let (dx1, dx2) = (p1.x - p2.x, p3.x - p2.x);
        let (dy1, dy2) = (p1.y - p2.y, p3.y - p2.y);
        let den = dx1 * dy2 - dx2 * dy1;
        let g = (sx * dy2 - dx2 * sy) / den;
        let h = (dx1 * sy - sx * dy1) / den;
        [
            [p1.x - p0.x + g * p1.x, p3.x - p0.x + h * p3.x, p0.x],
            [p1.y - p0.y + g * p1.y, p3.y - p0.y + h * p3.y, p0.y],
            [g, h, 1.0],
        ]
    }

    fn close(a: Point2, b: Point2, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol
    }

    #[test]
    fn affine_identity_and_scaling() {
        let src = [p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)];
        let a = affine_from_correspondences(&src, &src).unwrap();
        assert_eq!(a, AffineMap::IDENTITY);

        let dst = [p(0.0, 0.0), p(2.0, 0.0), p(0.0, 2.0)];
        let a = affine_from_correspondences(&src, &dst).unwrap();
        assert_eq!(a.m, [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0]]);
        assert_eq!(apply_affine(&a, p(1.0, 1.0)), p(2.0, 2.0));
    }

    #[test]
    fn affine_general_solution() {
        // Elimination by hand: the x-row from (0,0)->1, (1,0)->3, (0,1)->1 gives (2, 0, 1);
        // the y-row from 2, 2, 5 gives (0, 3, 2).
        let src = [p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)];
        let dst = [p(1.0, 2.0), p(3.0, 2.0), p(1.0, 5.0)];
        let a = affine_from_correspondences(&src, &dst).unwrap();
        let expected = [[2.0, 0.0, 1.0], [0.0, 3.0, 2.0]];
        for (r, e) in a.m.iter().flatten().zip(expected.iter().flatten()) {
            assert!((r - e).abs() < 1e-12);
        }
        for k in 0..3 {
            assert!(close(a.apply(src[k]), dst[k], 1e-9));
        }
        assert!(close(a.apply(p(1.0, 1.0)), p(3.0, 5.0), 1e-12));
        assert_eq!(apply_affine(&AffineMap::IDENTITY, p(3.0, 4.0)), p(3.0, 4.0));
    }

    #[test]
    fn affine_rejects_collinear() {
        let src = [p(0.0, 0.0), p(1.0, 1.0), p(2.0, 2.0)];
        assert!(matches!(
            affine_from_correspondences(&src, &src),
            Err(GeomError::DegenerateCorrespondence(_))
        ));
    }

    #[test]
    fn homography_identity_and_scale() {
        let sq = unit_square();
        let h = homography_from_correspondences(&QuadCorrespondence::new(sq, sq).unwrap()).unwrap();
        assert!(h.max_abs_diff(&Homography::IDENTITY) < 1e-12);

        let dst = sq.map(|q| p(2.0 * q.x, 2.0 * q.y));
        let h = homography_from_correspondences(&QuadCorrespondence::new(sq, dst).unwrap()).unwrap();
        let expected = Homography::scaling(2.0, 2.0).unwrap();
        assert!(h.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn homography_trapezoid_matches_closed_form() {
        let sq = unit_square();
        let dst = [p(0.0, 0.0), p(4.0, 0.0), p(3.0, 1.0), p(1.0, 1.0)];
        let oracle = square_to_quad_oracle(&dst);
        // Frozen from the closed form above.
        assert_eq!(oracle, [[4.0, 2.0, 0.0], [0.0, 2.0, 0.0], [0.0, 1.0, 1.0]]);

        let h = homography_from_correspondences(&QuadCorrespondence::new(sq, dst).unwrap()).unwrap();
        for (a, b) in h.matrix().iter().flatten().zip(oracle.iter().flatten()) {
            assert!((a - b).abs() < 1e-9, "{:?}", h);
        }
        for k in 0..4 {
            assert!(close(h.map_point(sq[k]).unwrap(), dst[k], 1e-9));
        }
        // X = 3, Y = 1, Z = 1.5
        let mid = h.map_point(p(0.5, 0.5)).unwrap();
        assert!(close(mid, p(2.0, 2.0 / 3.0), 1e-9));
    }

    #[test]
    fn map_point_divides_by_z() {
        let h = Homography::from_matrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert_eq!(h.map_point(p(1.0, 1.0)).unwrap(), p(0.5, 0.5));
        assert_eq!(Homography::IDENTITY.map_point(p(5.0, 7.0)).unwrap(), p(5.0, 7.0));
        assert!(matches!(
            h.map_point(p(-1.0, 3.0)),
            Err(GeomError::PointAtInfinity { .. })
        ));
    }

    #[test]
    fn invert_and_compose_basics() {
        assert_eq!(Homography::IDENTITY.invert().unwrap(), Homography::IDENTITY);
        let s = Homography::scaling(2.0, 2.0).unwrap();
        assert_eq!(s.invert().unwrap(), Homography::scaling(0.5, 0.5).unwrap());

        let t = Homography::translation(1.0, 0.0);
        assert_eq!(compose(&t, &s).map_point(p(1.0, 1.0)).unwrap(), p(3.0, 2.0));

        let sq = unit_square();
        let dst = [p(0.0, 0.0), p(4.0, 0.0), p(3.0, 1.0), p(1.0, 1.0)];
        let h = homography_from_correspondences(&QuadCorrespondence::new(sq, dst).unwrap()).unwrap();
        assert!(compose(&Homography::IDENTITY, &h).max_abs_diff(&h) < 1e-15);
        assert!(compose(&h, &h.invert().unwrap()).max_abs_diff(&Homography::IDENTITY) < 1e-9);
        assert!(h.invert().unwrap().invert().unwrap().max_abs_diff(&h) < 1e-9);
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]];
        assert_eq!(Homography::from_matrix(m), Err(GeomError::SingularSystem));
    }

    #[test]
    fn normalization_uses_largest_entry_when_m33_is_zero() {
        let h = Homography::from_matrix([[0.0, 4.0, 1.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(h.matrix()[0][1], 1.0);
        assert_eq!(h.matrix()[1][0], 0.5);
    }

    #[test]
    fn degenerate_quads() {
        assert!(is_degenerate_quad(&[p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0), p(0.0, 1.0)]));
        assert!(!is_degenerate_quad(&unit_square()));
        assert!(is_degenerate_quad(&[p(0.0, 0.0), p(1e-10, 0.0), p(0.0, 1.0), p(1.0, 1.0)]));
        assert!(is_degenerate_quad(&[p(f64::NAN, 0.0), p(1.0, 0.0), p(0.0, 1.0), p(1.0, 1.0)]));

        let collinear = [p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0), p(0.0, 1.0)];
        assert!(QuadCorrespondence::new(collinear, unit_square()).is_err());
        assert!(QuadCorrespondence::new(unit_square(), collinear).is_err());
    }

    #[test]
    fn json_layout_is_row_major() {
        let h = Homography::translation(3.0, 4.0);
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, "[1.0,0.0,3.0,0.0,1.0,4.0,0.0,0.0,1.0]");
        let back: Homography = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
        let a: AffineMap = serde_json::from_str("[2,0,1,0,3,2]").unwrap();
        assert_eq!(a.apply(p(1.0, 1.0)), p(3.0, 5.0));
        assert!(serde_json::from_str::<Homography>("[1,2,3]").is_err());
        let pt: Point2 = serde_json::from_str("[1.5, -2]").unwrap();
        assert_eq!(pt, p(1.5, -2.0));
    }
}
