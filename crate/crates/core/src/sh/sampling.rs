use std::f64::consts::PI;

use super::Direction;

fn golden_angle() -> f64 {
    PI * (3.0 - 5f64.sqrt())
}

/// `n` quasi-uniform directions on the sphere from the golden-angle spiral.
pub fn fibonacci_sphere(n: usize) -> Vec<Direction> {
    let ga = golden_angle();
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            Direction::new(z.clamp(-1.0, 1.0).acos(), i as f64 * ga)
        })
        .collect()
}

/// `n` quasi-uniform directions on the upper hemisphere `z > 0`.
pub fn fibonacci_hemisphere(n: usize) -> Vec<Direction> {
    let ga = golden_angle();
    (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            Direction::new(z.clamp(0.0, 1.0).acos(), i as f64 * ga)
        })
        .collect()
}
