//! Gauss-Legendre rules on [0, 1] and the 1D shape functions of the
//! biquadratic/bilinear pair.

/// (node, weight) pairs of the n-point Gauss rule on [0, 1], n in 1..=5.
pub fn gauss(n: usize) -> Vec<(f64, f64)> {
    // Shifted from the standard rules on [-1, 1].
    let (t, w): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let c = 2.0 / 7.0 * (6f64 / 5.0).sqrt();
            let a = (3.0 / 7.0 - c).sqrt();
            let b = (3.0 / 7.0 + c).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let c = 2.0 * (10f64 / 7.0).sqrt();
            let a = ((5.0 - c) / 9.0).sqrt();
            let b = ((5.0 + c) / 9.0).sqrt();
            let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
            (
                vec![-b, -a, 0.0, a, b],
                vec![wb, wa, 128.0 / 225.0, wa, wb],
            )
        }
        _ => panic!("gauss rule with {n} points not tabulated"),
    };
    t.iter()
        .zip(&w)
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Quadratic Lagrange shapes on [0, 1] at nodes 0, 1/2, 1.
#[inline]
pub fn q2_shapes(xi: f64) -> [f64; 3] {
    [
        (2.0 * xi - 1.0) * (xi - 1.0),
        4.0 * xi * (1.0 - xi),
        xi * (2.0 * xi - 1.0),
    ]
}

/// Derivatives of [`q2_shapes`] with respect to xi.
#[inline]
pub fn q2_dshapes(xi: f64) -> [f64; 3] {
    [4.0 * xi - 3.0, 4.0 - 8.0 * xi, 4.0 * xi - 1.0]
}

/// Linear shapes on [0, 1].
#[inline]
pub fn q1_shapes(xi: f64) -> [f64; 2] {
    [1.0 - xi, xi]
}

#[inline]
pub fn q1_dshapes(_xi: f64) -> [f64; 2] {
    [-1.0, 1.0]
}
