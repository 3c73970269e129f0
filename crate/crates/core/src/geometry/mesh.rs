use crate::error::{Error, Result};
use crate::scalar::Real;

const MIN_AREA: f64 = 1e-12;

/// Indexed triangle mesh with every face of positive area.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh<R = f64> {
    vertices: Vec<[R; 3]>,
    faces: Vec<[usize; 3]>,
}

pub(crate) fn sub<R: Real>(a: [R; 3], b: [R; 3]) -> [R; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross<R: Real>(a: [R; 3], b: [R; 3]) -> [R; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm<R: Real>(a: [R; 3]) -> R {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

impl<R: Real> TriangleMesh<R> {
    pub fn new(vertices: Vec<[R; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::Degenerate("mesh has no faces".into()));
        }
        if let Some(i) = vertices.iter().flatten().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: "mesh vertex".into(),
                index: i / 3,
            });
        }
        let mesh = Self { vertices, faces };
        for (fi, f) in mesh.faces.iter().enumerate() {
            if f.iter().any(|&v| v >= mesh.vertices.len()) {
                return Err(Error::Degenerate(format!("face {fi} index out of range")));
            }
            if mesh.face_area(fi).as_f64() <= MIN_AREA {
                return Err(Error::Degenerate(format!("face {fi} has zero area")));
            }
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[[R; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn triangle(&self, fi: usize) -> [[R; 3]; 3] {
        self.faces[fi].map(|v| self.vertices[v])
    }

    pub fn face_area(&self, fi: usize) -> R {
        let [a, b, c] = self.triangle(fi);
        norm(cross(sub(b, a), sub(c, a))) * R::lit(0.5)
    }

    pub fn total_area(&self) -> R {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Concatenates another mesh (no vertex welding).
    pub fn merge(&mut self, other: &Self) {
        let off = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces.extend(other.faces.iter().map(|f| f.map(|v| v + off)));
    }

    /// Applies `f` to every vertex, re-validating face areas.
    pub fn map_vertices(&self, f: impl Fn([R; 3]) -> [R; 3]) -> Result<Self> {
        Self::new(self.vertices.iter().map(|&v| f(v)).collect(), self.faces.clone())
    }

    pub fn bounds(&self) -> ([R; 3], [R; 3]) {
        let mut lo = [R::infinity(); 3];
        let mut hi = [R::neg_infinity(); 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_faces() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 2]]).is_err());
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriangleMesh::<f64>::new(v, vec![]).is_err());
    }

    #[test]
    fn area_of_right_triangle() {
        let m = TriangleMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert!((m.total_area() - 1.0f64).abs() < 1e-15);
    }
}
