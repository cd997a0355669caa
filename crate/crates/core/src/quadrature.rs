//! Symmetric Gauss rules on the reference triangle.
//!
//! Orbit parameters were refined by Newton's method on the moment equations
//! to full double precision. Degrees 3 and 7 reuse the next rule up, which
//! has positive weights only.

use crate::error::{Error, Result};

/// Degree used for every bilinear and trilinear form.
pub const DEFAULT_DEGREE: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub degree: usize,
    /// Barycentric coordinates of the points.
    pub points: Vec<[f64; 3]>,
    /// Weights with respect to the reference triangle (they sum to 1/2).
    pub weights: Vec<f64>,
}

enum Orbit {
    Centroid(f64),
    S21(f64, f64),
    S111(f64, f64, f64),
}

const DEG1: &[Orbit] = &[Orbit::Centroid(1.0)];
const DEG2: &[Orbit] = &[Orbit::S21(1.0 / 6.0, 1.0 / 3.0)];
const DEG4: &[Orbit] = &[
    Orbit::S21(0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_7),
    Orbit::S21(0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64),
];
const DEG5: &[Orbit] = &[
    Orbit::Centroid(0.225),
    Orbit::S21(0.470_142_064_105_115_089_77, 0.132_394_152_788_506_180_74),
    Orbit::S21(0.101_286_507_323_456_338_8, 0.125_939_180_544_827_152_6),
];
const DEG6: &[Orbit] = &[
    Orbit::S21(0.249_286_745_170_910_421_29, 0.116_786_275_726_379_366_03),
    Orbit::S21(0.063_089_014_491_502_228_34, 0.050_844_906_370_206_816_921),
    Orbit::S111(
        0.053_145_049_844_816_947_353,
        0.310_352_451_033_784_405_42,
        0.082_851_075_618_373_575_194,
    ),
];
const DEG8: &[Orbit] = &[
    Orbit::Centroid(0.144_315_607_677_787_168_25),
    Orbit::S21(0.459_292_588_292_723_156_03, 0.095_091_634_267_284_624_794),
    Orbit::S21(0.170_569_307_751_760_206_62, 0.103_217_370_534_718_250_28),
    Orbit::S21(0.050_547_228_317_030_975_458, 0.032_458_497_623_198_080_311),
    Orbit::S111(
        0.008_394_777_409_957_605_337_2,
        0.263_112_829_634_638_113_42,
        0.027_230_314_174_434_994_265,
    ),
];

/// Returns a symmetric rule exact for all polynomials of total degree `degree`.
pub fn quadrature(degree: usize) -> Result<QuadratureRule> {
    let orbits = match degree {
        1 => DEG1,
        2 => DEG2,
        3 | 4 => DEG4,
        5 => DEG5,
        6 => DEG6,
        7 | 8 => DEG8,
        _ => return Err(Error::Input(format!("unsupported quadrature degree {degree} (1..=8)"))),
    };
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for orbit in orbits {
        match *orbit {
            Orbit::Centroid(w) => {
                points.push([1.0 / 3.0; 3]);
                weights.push(w);
            }
            Orbit::S21(a, w) => {
                let c = 1.0 - 2.0 * a;
                for p in [[a, a, c], [c, a, a], [a, c, a]] {
                    points.push(p);
                    weights.push(w);
                }
            }
            Orbit::S111(a, b, w) => {
                let c = 1.0 - a - b;
                for p in [[a, b, c], [c, a, b], [b, c, a], [b, a, c], [c, b, a], [a, c, b]] {
                    points.push(p);
                    weights.push(w);
                }
            }
        }
    }
    for w in &mut weights {
        *w *= 0.5;
    }
    Ok(QuadratureRule { degree, points, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Closed form on the reference triangle (area 1/2).
    fn monomial_integral(a: u32, b: u32, c: u32) -> f64 {
        fact(a) * fact(b) * fact(c) / fact(a + b + c + 2)
    }

    fn apply(rule: &QuadratureRule, f: impl Fn([f64; 3]) -> f64) -> f64 {
        rule.points.iter().zip(&rule.weights).map(|(p, w)| w * f(*p)).sum()
    }

    #[test]
    fn weights_sum_to_reference_area() {
        for d in 1..=8 {
            let r = quadrature(d).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
            assert!(r.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn closed_form_examples() {
        let r2 = quadrature(2).unwrap();
        assert!((apply(&r2, |l| l[0] * l[1]) - 1.0 / 24.0).abs() < 1e-16);
        let r6 = quadrature(6).unwrap();
        assert!((apply(&r6, |l| (l[0] * l[1]).powi(3)) - 1.0 / 1120.0).abs() < 1e-17);
    }

    #[test]
    fn all_monomials_exact() {
        for d in 1..=8u32 {
            let r = quadrature(d as usize).unwrap();
            for a in 0..=d {
                for b in 0..=(d - a) {
                    let c = d - a - b;
                    let q = apply(&r, |l| l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32));
                    let exact = monomial_integral(a, b, c);
                    assert!(((q - exact) / exact).abs() < 1e-13, "deg {d} ({a},{b},{c})");
                }
            }
        }
    }

    #[test]
    fn unsupported_degree() {
        assert!(quadrature(0).is_err());
        assert!(quadrature(9).is_err());
    }
}
