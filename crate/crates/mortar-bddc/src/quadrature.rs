//! Fixed quadrature rules: symmetric triangle rules exact to degree 2 and 4
//! (enough for P1/P2 stiffness and mass with element-wise constant
//! coefficients) and Gauss-Legendre rules on [0, 1] for the 1D interface
//! integrals.

/// Quadrature point in barycentric-style reference coordinates `(xi, eta)`
/// on the triangle {xi >= 0, eta >= 0, xi + eta <= 1}, with weights summing
/// to 1 (multiply by the element area).
pub type TrianglePoint = (f64, f64, f64);

/// Midpoint rule, exact for polynomials of total degree <= 2.
pub const TRI_DEGREE_2: [TrianglePoint; 3] = [
    (0.5, 0.0, 1.0 / 3.0),
    (0.5, 0.5, 1.0 / 3.0),
    (0.0, 0.5, 1.0 / 3.0),
];

/// Six-point symmetric rule, exact for polynomials of total degree <= 4.
pub const TRI_DEGREE_4: [TrianglePoint; 6] = [
    (
        0.445948490915965,
        0.445948490915965,
        0.223381589678011,
    ),
    (
        0.108103018168070,
        0.445948490915965,
        0.223381589678011,
    ),
    (
        0.445948490915965,
        0.108103018168070,
        0.223381589678011,
    ),
    (
        0.091576213509771,
        0.091576213509771,
        0.109951743655322,
    ),
    (
        0.816847572980459,
        0.091576213509771,
        0.109951743655322,
    ),
    (
        0.091576213509771,
        0.816847572980459,
        0.109951743655322,
    ),
];

/// Rule exact for at least the given total degree.
pub fn triangle_rule(degree: usize) -> &'static [TrianglePoint] {
    if degree <= 2 {
        &TRI_DEGREE_2
    } else if degree <= 4 {
        &TRI_DEGREE_4
    } else {
        panic!("no triangle rule of degree {degree}");
    }
}

/// Gauss-Legendre points and weights on [0, 1]; `n` points are exact for
/// degree 2n - 1. Weights sum to 1.
pub fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    let on_01 = |x: f64, w: f64| (0.5 * (x + 1.0), 0.5 * w);
    match n {
        1 => vec![on_01(0.0, 2.0)],
        2 => {
            let a = 1.0 / 3f64.sqrt();
            vec![on_01(-a, 1.0), on_01(a, 1.0)]
        }
        3 => {
            let a = (3.0 / 5.0f64).sqrt();
            vec![
                on_01(-a, 5.0 / 9.0),
                on_01(0.0, 8.0 / 9.0),
                on_01(a, 5.0 / 9.0),
            ]
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0 / 5.0f64).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0 / 5.0f64).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            vec![on_01(-b, wb), on_01(-a, wa), on_01(a, wa), on_01(b, wb)]
        }
        _ => panic!("no 1D rule with {n} points"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tri_integrate(rule: &[TrianglePoint], f: impl Fn(f64, f64) -> f64) -> f64 {
        // Reference triangle has area 1/2.
        rule.iter().map(|&(x, y, w)| w * f(x, y)).sum::<f64>() * 0.5
    }

    #[test]
    fn triangle_rules_exact_on_monomials() {
        // Exact values of x^p y^q over the reference triangle: p! q! / (p+q+2)!
        let exact = |p: u32, q: u32| {
            let fact = |k: u32| (1..=k).product::<u32>().max(1) as f64;
            fact(p) * fact(q) / fact(p + q + 2)
        };
        for (p, q) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
            let got = tri_integrate(&TRI_DEGREE_2, |x, y| x.powi(p as i32) * y.powi(q as i32));
            assert_abs_diff_eq!(got, exact(p, q), epsilon = 1e-14);
        }
        for p in 0..=4u32 {
            for q in 0..=(4 - p) {
                let got =
                    tri_integrate(&TRI_DEGREE_4, |x, y| x.powi(p as i32) * y.powi(q as i32));
                assert_abs_diff_eq!(got, exact(p, q), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn gauss_rules_exact_on_monomials() {
        for n in 1..=4usize {
            let rule = gauss_legendre_01(n);
            for p in 0..=(2 * n - 1) {
                let got: f64 = rule.iter().map(|&(x, w)| w * x.powi(p as i32)).sum();
                let exact = 1.0 / (p as f64 + 1.0);
                assert_abs_diff_eq!(got, exact, epsilon = 1e-14);
            }
        }
    }
}
