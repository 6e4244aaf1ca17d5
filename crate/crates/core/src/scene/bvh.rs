//! Bounding-volume hierarchy over mesh triangles for exact ray casting.

use nalgebra::Vector3;

use super::mesh::Mesh;

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub dir: Vector3<f64>,
}

/// Closest intersection along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: usize,
    /// Barycentric weights of the triangle's three vertices.
    pub bary: [f64; 3],
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vector3<f64>,
    max: Vector3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            min: Vector3::repeat(f64::INFINITY),
            max: Vector3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vector3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn hit(&self, o: &Vector3<f64>, inv: &Vector3<f64>, t_max: f64) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.min[k] - o[k]) * inv[k];
            let b = (self.max[k] - o[k]) * inv[k];
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            // NaN from 0 * inf leaves the bound unchanged
            if lo > t0 {
                t0 = lo;
            }
            if hi < t1 {
                t1 = hi;
            }
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
pub struct Bvh {
    tris: Vec<[Vector3<f64>; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn build(mesh: &Mesh) -> Self {
        let tris: Vec<_> = (0..mesh.triangles.len()).map(|t| mesh.triangle(t)).collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            build_node(&tris, &mut order, 0, tris.len(), &mut nodes);
        }
        Bvh { tris, order, nodes }
    }

    /// Nearest hit with `t` in `(t_min, t_max)`.
    pub fn intersect(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<Hit> {
        self.traverse(ray, t_min, t_max, false)
    }

    /// Whether anything blocks the ray within `(t_min, t_max)`.
    pub fn occluded(&self, ray: &Ray, t_min: f64, t_max: f64) -> bool {
        self.traverse(ray, t_min, t_max, true).is_some()
    }

    fn traverse(&self, ray: &Ray, t_min: f64, t_max: f64, any: bool) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = ray.dir.map(|d| 1.0 / d);
        let mut best: Option<Hit> = None;
        let mut limit = t_max;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            match &self.nodes[i] {
                Node::Leaf { bounds, start, end } => {
                    if !bounds.hit(&ray.origin, &inv, limit) {
                        continue;
                    }
                    for &t in &self.order[*start..*end] {
                        if let Some((d, b)) = intersect_triangle(ray, &self.tris[t]) {
                            if d > t_min && d < limit {
                                limit = d;
                                best = Some(Hit { t: d, triangle: t, bary: b });
                                if any {
                                    return best;
                                }
                            }
                        }
                    }
                }
                Node::Inner { bounds, left, right } => {
                    if bounds.hit(&ray.origin, &inv, limit) {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        best
    }
}

fn build_node(tris: &[[Vector3<f64>; 3]], order: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &t in &order[start..end] {
        for p in &tris[t] {
            bounds.grow(p);
        }
        cbounds.grow(&centroid(&tris[t]));
    }
    let idx = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return idx;
    }
    let extent = cbounds.max - cbounds.min;
    let axis = extent.imax();
    let slice = &mut order[start..end];
    slice.sort_by(|a, b| {
        centroid(&tris[*a])[axis]
            .partial_cmp(&centroid(&tris[*b])[axis])
            .unwrap()
            .then(a.cmp(b))
    });
    let mid = start + (end - start) / 2;
    nodes.push(Node::Leaf { bounds, start, end });
    let left = build_node(tris, order, start, mid, nodes);
    let right = build_node(tris, order, mid, end, nodes);
    nodes[idx] = Node::Inner { bounds, left, right };
    idx
}

fn centroid(t: &[Vector3<f64>; 3]) -> Vector3<f64> {
    (t[0] + t[1] + t[2]) / 3.0
}

/// Moller-Trumbore. Returns the distance and barycentrics.
pub fn intersect_triangle(ray: &Ray, tri: &[Vector3<f64>; 3]) -> Option<(f64, [f64; 3])> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = ray.dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = ray.dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    Some((t, [1.0 - u - v, u, v]))
}
