use nalgebra::Vector3;

use crate::sh::Direction;

/// Orthonormal tangent frame with `n` as the local +z axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub t: Vector3<f64>,
    pub b: Vector3<f64>,
    pub n: Vector3<f64>,
}

impl Frame {
    /// Deterministic tangent from the normal alone (Frisvad's construction
    /// with the branch-free sign fix).
    pub fn from_normal(n: &Vector3<f64>) -> Self {
        let n = n.normalize();
        let sign = 1f64.copysign(n.z);
        let a = -1.0 / (sign + n.z);
        let b = n.x * n.y * a;
        let t = Vector3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
        let bt = Vector3::new(b, sign + n.y * n.y * a, -n.y);
        Frame { t, b: bt, n }
    }

    /// Frame with an explicit tangent, orthogonalized against `n`.
    pub fn with_tangent(n: &Vector3<f64>, t: &Vector3<f64>) -> Self {
        let n = n.normalize();
        let t = (t - n * n.dot(t)).normalize();
        Frame { t, b: n.cross(&t), n }
    }

    pub fn to_world(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.t * v.x + self.b * v.y + self.n * v.z
    }

    pub fn to_local(&self, v: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.t.dot(v), self.b.dot(v), self.n.dot(v))
    }

    pub fn dir_to_world(&self, d: &Direction) -> Vector3<f64> {
        self.to_world(&d.to_vector())
    }

    pub fn dir_to_local(&self, v: &Vector3<f64>) -> Direction {
        Direction::from_vector(&self.to_local(v))
    }
}
