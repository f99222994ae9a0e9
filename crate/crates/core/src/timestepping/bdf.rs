use crate::error::{EsfemError, Result};
use nalgebra::{Complex, DMatrix};
use serde::Serialize;

/// Largest step number for which the methods are offered.
pub const MAX_BDF_STEPS: usize = 5;

fn check_k(k: usize, max: usize) -> Result<()> {
    if k == 0 || k > max {
        return Err(EsfemError::InvalidArgument(format!(
            "BDF step number must be in 1..={max}, got {k}"
        )));
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients `δ₀..δ_k` of `δ(ζ) = Σ_{ℓ=1}^k (1/ℓ)(1−ζ)^ℓ`.
pub fn bdf_delta(k: usize) -> Result<Vec<f64>> {
    check_k(k, 6)?;
    let mut delta = vec![0.0; k + 1];
    for l in 1..=k {
        for (j, d) in delta.iter_mut().enumerate().take(l + 1) {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            *d += sign * binomial(l, j) / l as f64;
        }
    }
    Ok(delta)
}

/// Extrapolation weights `γ₁..γ_k` with `Σ_j γ_j p(t_{n−j}) = p(t_n)` for
/// polynomials of degree `< k`: `γ_j = (−1)^{j−1} C(k, j)`.
pub fn bdf_gamma(k: usize) -> Result<Vec<f64>> {
    check_k(k, 6)?;
    Ok((1..=k)
        .map(|j| {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            sign * binomial(k, j)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BdfCoefficients {
    pub k: usize,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl BdfCoefficients {
    pub fn new(k: usize) -> Result<Self> {
        check_k(k, MAX_BDF_STEPS)?;
        Ok(BdfCoefficients {
            k,
            delta: bdf_delta(k)?,
            gamma: bdf_gamma(k)?,
        })
    }
}

/// Root-condition report for `ρ(ζ) = Σ_j δ_j ζ^{k−j}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroStability {
    pub roots: Vec<(f64, f64)>,
    pub moduli: Vec<f64>,
    pub stable: bool,
}

/// Roots of the characteristic polynomial via the companion matrix.
pub fn zero_stability(k: usize) -> Result<ZeroStability> {
    let delta = bdf_delta(k)?;
    // monic: ζ^k + Σ_{j≥1} (δ_j/δ₀) ζ^{k−j}
    let mut companion = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        companion[(0, j)] = -delta[j + 1] / delta[0];
    }
    for i in 1..k {
        companion[(i, i - 1)] = 1.0;
    }
    let roots: Vec<Complex<f64>> = companion.complex_eigenvalues().iter().copied().collect();
    let moduli: Vec<f64> = roots.iter().map(|z| z.norm()).collect();
    let inside = moduli.iter().all(|&m| m <= 1.0 + 1e-10);
    let boundary_simple = roots.iter().enumerate().all(|(i, zi)| {
        moduli[i] < 1.0 - 1e-8
            || roots
                .iter()
                .enumerate()
                .all(|(j, zj)| i == j || (zi - zj).norm() > 1e-6)
    });
    Ok(ZeroStability {
        roots: roots.iter().map(|z| (z.re, z.im)).collect(),
        moduli,
        stable: inside && boundary_simple,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `δ_j · lcm(1..k)` by integer polynomial arithmetic.
    fn integer_delta(k: usize) -> (Vec<i64>, i64) {
        let lcm = [1i64, 1, 2, 6, 12, 60, 60][k];
        let mut coeffs = vec![0i64; k + 1];
        let mut power = vec![1i64]; // (1−ζ)^0
        for l in 1..=k {
            let mut next = vec![0i64; power.len() + 1];
            for (i, c) in power.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c;
            }
            power = next;
            for (j, c) in power.iter().enumerate() {
                coeffs[j] += c * lcm / l as i64;
            }
        }
        (coeffs, lcm)
    }

    #[test]
    fn delta_examples() {
        assert_eq!(bdf_delta(1).unwrap(), vec![1.0, -1.0]);
        let d2 = bdf_delta(2).unwrap();
        for (a, b) in d2.iter().zip([1.5, -2.0, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        let d3 = bdf_delta(3).unwrap();
        for (a, b) in d3.iter().zip([11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(bdf_delta(0).is_err());
        assert!(bdf_delta(7).is_err());
    }

    #[test]
    fn delta_matches_integer_expansion() {
        for k in 1..=5 {
            let (ints, lcm) = integer_delta(k);
            let d = bdf_delta(k).unwrap();
            assert!(d[0] > 0.0);
            assert!(d.iter().sum::<f64>().abs() < 1e-13);
            assert_eq!(ints.iter().sum::<i64>(), 0);
            for (x, n) in d.iter().zip(&ints) {
                assert!((x - *n as f64 / lcm as f64).abs() < 1e-13, "k={k}");
            }
        }
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(bdf_gamma(1).unwrap(), vec![1.0]);
        assert_eq!(bdf_gamma(2).unwrap(), vec![2.0, -1.0]);
        assert_eq!(bdf_gamma(3).unwrap(), vec![3.0, -3.0, 1.0]);
    }

    #[test]
    fn gamma_extrapolation_exact_in_integers() {
        // Σ_j γ_j (−j)^m = 0^m for m < k, checked in exact integer arithmetic.
        for k in 1..=5 {
            let g: Vec<i64> = bdf_gamma(k).unwrap().iter().map(|&x| x as i64).collect();
            for m in 0..k as u32 {
                let s: i64 = g
                    .iter()
                    .enumerate()
                    .map(|(i, gj)| gj * (-(i as i64 + 1)).pow(m))
                    .sum();
                assert_eq!(s, if m == 0 { 1 } else { 0 }, "k={k} m={m}");
            }
            // degree k is not reproduced
            let s: i64 = g
                .iter()
                .enumerate()
                .map(|(i, gj)| gj * (-(i as i64 + 1)).pow(k as u32))
                .sum();
            assert_ne!(s, 0);
        }
    }

    #[test]
    fn zero_stable_up_to_five() {
        for k in 1..=5 {
            let z = zero_stability(k).unwrap();
            assert!(z.stable, "k={k}: {:?}", z.moduli);
            assert!(z.moduli.iter().all(|&m| m <= 1.0 + 1e-10));
            // ζ = 1 is a root
            assert!(z.moduli.iter().any(|&m| (m - 1.0).abs() < 1e-10));
        }
        assert!(BdfCoefficients::new(6).is_err());
    }
}
