//! Triangle quadrature and Lagrange shape functions.
//!
//! One fixed rule everywhere: the 6-point, degree-4 rule on the reference
//! triangle {(x,y): x,y >= 0, x+y <= 1}. Stored weights sum to 1; physical
//! integrals use |det J| * sum(w_i f(x_i)) / 2 folded into per-element
//! combined weights.

/// Quadrature points per triangle.
pub const N_QP: usize = 6;

const A1: f64 = 0.445948490915965;
const W1: f64 = 0.223381589678011;
const A2: f64 = 0.091576213509771;
const W2: f64 = 0.109951743655322;

/// Reference coordinates (x, y) of the 6-point rule.
pub const QP_XY: [[f64; 2]; N_QP] = [
    [A1, A1],
    [1.0 - 2.0 * A1, A1],
    [A1, 1.0 - 2.0 * A1],
    [A2, A2],
    [1.0 - 2.0 * A2, A2],
    [A2, 1.0 - 2.0 * A2],
];

/// Rule weights, summing to 1.
pub const QP_W: [f64; N_QP] = [W1, W1, W1, W2, W2, W2];

/// P2 local node order: three vertices, then midpoints of edges
/// (v0,v1), (v1,v2), (v2,v0).
pub const P2_NODES: usize = 6;
pub const P1_NODES: usize = 3;

/// Values of the six P2 shape functions at reference point (x, y).
pub fn p2_values(x: f64, y: f64) -> [f64; P2_NODES] {
    let l0 = 1.0 - x - y;
    let l1 = x;
    let l2 = y;
    [
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l0 * l1,
        4.0 * l1 * l2,
        4.0 * l2 * l0,
    ]
}

/// Reference gradients of the six P2 shape functions at (x, y).
pub fn p2_gradients(x: f64, y: f64) -> [[f64; 2]; P2_NODES] {
    let l0 = 1.0 - x - y;
    let l1 = x;
    let l2 = y;
    // d l0 = (-1,-1), d l1 = (1,0), d l2 = (0,1)
    [
        [-(4.0 * l0 - 1.0), -(4.0 * l0 - 1.0)],
        [4.0 * l1 - 1.0, 0.0],
        [0.0, 4.0 * l2 - 1.0],
        [4.0 * (l0 - l1), -4.0 * l1],
        [4.0 * l2, 4.0 * l1],
        [-4.0 * l2, 4.0 * (l0 - l2)],
    ]
}

/// Values of the three P1 shape functions at (x, y).
pub fn p1_values(x: f64, y: f64) -> [f64; P1_NODES] {
    [1.0 - x - y, x, y]
}

/// Reference gradients of the three P1 shape functions (constant).
pub fn p1_gradients() -> [[f64; 2]; P1_NODES] {
    [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(f: impl Fn(f64, f64) -> f64) -> f64 {
        // reference triangle has area 1/2
        QP_XY
            .iter()
            .zip(QP_W.iter())
            .map(|(p, w)| 0.5 * w * f(p[0], p[1]))
            .sum()
    }

    #[test]
    fn rule_is_degree_four() {
        // exact integrals of monomials x^a y^b over the reference triangle:
        // a! b! / (a+b+2)!
        let exact = |a: u32, b: u32| {
            let fact = |n: u32| (1..=n.max(1)).product::<u32>() as f64;
            fact(a) * fact(b) / fact(a + b + 2)
        };
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let q = integrate(|x, y| x.powi(a as i32) * y.powi(b as i32));
                assert!(
                    (q - exact(a, b)).abs() < 1e-15,
                    "monomial x^{a} y^{b}: {q} vs {}",
                    exact(a, b)
                );
            }
        }
    }

    #[test]
    fn shape_functions_are_nodal() {
        let nodes = [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.5, 0.0],
            [0.5, 0.5],
            [0.0, 0.5],
        ];
        for (i, n) in nodes.iter().enumerate() {
            let v = p2_values(n[0], n[1]);
            for (j, &vj) in v.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vj - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn p2_partition_of_unity_and_gradient_consistency() {
        let (x, y) = (0.3, 0.17);
        let v: f64 = p2_values(x, y).iter().sum();
        assert!((v - 1.0).abs() < 1e-14);
        let g = p2_gradients(x, y);
        let (mut sx, mut sy) = (0.0, 0.0);
        for gi in g {
            sx += gi[0];
            sy += gi[1];
        }
        assert!(sx.abs() < 1e-14 && sy.abs() < 1e-14);
        // finite-difference check of one gradient
        let h = 1e-6;
        let d = (p2_values(x + h, y)[4] - p2_values(x - h, y)[4]) / (2.0 * h);
        assert!((d - g[4][0]).abs() < 1e-8);
    }
}
