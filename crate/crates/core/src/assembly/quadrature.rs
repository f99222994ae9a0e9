use serde::{Deserialize, Serialize};

/// Quadrature on the reference triangle in barycentric coordinates.
/// Weights sum to one; multiply by the element area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Edge-midpoint rule, exact for quadratics.
    pub fn edge_midpoint() -> Self {
        QuadratureRule {
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 3.0; 3],
            degree: 2,
        }
    }

    /// Six-point symmetric rule, exact for quartics.
    pub fn six_point() -> Self {
        let a1 = 0.445_948_490_915_964_886_32;
        let w1 = 0.223_381_589_678_011_465_70;
        let a2 = 0.091_576_213_509_770_743_460;
        let w2 = 0.109_951_743_655_321_867_64;
        let b1 = 1.0 - 2.0 * a1;
        let b2 = 1.0 - 2.0 * a2;
        QuadratureRule {
            points: vec![
                [a1, a1, b1],
                [a1, b1, a1],
                [b1, a1, a1],
                [a2, a2, b2],
                [a2, b2, a2],
                [b2, a2, a2],
            ],
            weights: vec![w1, w1, w1, w2, w2, w2],
            degree: 4,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// `∫_T λ₀^i λ₁^j λ₂^k / |T| = 2 i! j! k! / (i+j+k+2)!`
    fn exact_monomial(i: u32, j: u32, k: u32) -> f64 {
        2.0 * factorial(i) * factorial(j) * factorial(k) / factorial(i + j + k + 2)
    }

    fn check(rule: &QuadratureRule, tol: f64) {
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let d = rule.degree as u32;
        for i in 0..=d {
            for j in 0..=d - i {
                for k in 0..=d - i - j {
                    let q: f64 = rule
                        .iter()
                        .map(|(p, w)| w * p[0].powi(i as i32) * p[1].powi(j as i32) * p[2].powi(k as i32))
                        .sum();
                    let e = exact_monomial(i, j, k);
                    assert!((q - e).abs() < tol, "({i},{j},{k}): {q} vs {e}");
                }
            }
        }
    }

    #[test]
    fn edge_midpoint_exact_to_degree_two() {
        check(&QuadratureRule::edge_midpoint(), 1e-14);
    }

    #[test]
    fn six_point_exact_to_degree_four() {
        check(&QuadratureRule::six_point(), 1e-14);
    }

    #[test]
    fn edge_midpoint_not_exact_for_cubics() {
        let rule = QuadratureRule::edge_midpoint();
        let q: f64 = rule.iter().map(|(p, w)| w * p[0].powi(3)).sum();
        assert!((q - exact_monomial(3, 0, 0)).abs() > 1e-3);
    }
}
