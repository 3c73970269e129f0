use crate::error::{Error, Result};
use crate::scalar::Real;

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<R = f64> {
    rotation: [[R; 3]; 3],
    translation: [R; 3],
}

const ORTHO_TOL: f64 = 1e-9;

impl<R: Real> RigidTransform<R> {
    pub fn identity() -> Self {
        let (o, z) = (R::one(), R::zero());
        Self {
            rotation: [[o, z, z], [z, o, z], [z, z, o]],
            translation: [z; 3],
        }
    }

    /// Validates that `rotation` is orthonormal with determinant +1.
    pub fn new(rotation: [[R; 3]; 3], translation: [R; 3]) -> Result<Self> {
        let t = Self { rotation, translation };
        let tol = R::lit(ORTHO_TOL).max(R::epsilon() * R::lit(64.0));
        for i in 0..3 {
            for j in 0..3 {
                let dot: R = (0..3).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let want = if i == j { R::one() } else { R::zero() };
                if (dot - want).abs() > tol {
                    return Err(Error::invalid("rotation is not orthonormal"));
                }
            }
        }
        if (t.determinant() - R::one()).abs() > tol {
            return Err(Error::invalid("rotation has determinant -1"));
        }
        Ok(t)
    }

    pub(crate) fn from_parts_unchecked(rotation: [[R; 3]; 3], translation: [R; 3]) -> Self {
        Self { rotation, translation }
    }

    pub fn translation_only(translation: [R; 3]) -> Self {
        Self {
            translation,
            ..Self::identity()
        }
    }

    /// Rotation by `angle` radians about the unit `axis`, then translation.
    pub fn from_axis_angle(axis: [R; 3], angle: R, translation: [R; 3]) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let [x, y, z] = axis.map(|a| a / n);
        let (s, c) = angle.sin_cos();
        let k = R::one() - c;
        let rotation = [
            [c + x * x * k, x * y * k - z * s, x * z * k + y * s],
            [y * x * k + z * s, c + y * y * k, y * z * k - x * s],
            [z * x * k - y * s, z * y * k + x * s, c + z * z * k],
        ];
        Self { rotation, translation }
    }

    pub fn rotation(&self) -> &[[R; 3]; 3] {
        &self.rotation
    }

    pub fn translation(&self) -> &[R; 3] {
        &self.translation
    }

    pub fn determinant(&self) -> R {
        let m = &self.rotation;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn apply(&self, p: [R; 3]) -> [R; 3] {
        let m = &self.rotation;
        std::array::from_fn(|i| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2] + self.translation[i])
    }

    /// `self` after `first`: `p -> self(first(p))`.
    pub fn compose(&self, first: &Self) -> Self {
        let (a, b) = (&self.rotation, &first.rotation);
        let rotation = std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()));
        let translation = self.apply(first.translation);
        Self { rotation, translation }
    }

    /// Largest absolute entry-wise difference of rotation and translation.
    pub fn max_abs_diff(&self, other: &Self) -> R {
        let mut d = R::zero();
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.rotation[i][j] - other.rotation[i][j]).abs());
            }
            d = d.max((self.translation[i] - other.translation[i]).abs());
        }
        d
    }
}
