//! The stream-function flow `y = curl ψ`, `ψ = x²(1−x)²y²(1−y)²`, with
//! pressure `p = x − 1/2` on the unit square.

use crate::mesh::Point;

fn f0(s: f64) -> f64 {
    s * s * (1.0 - s) * (1.0 - s)
}

fn f1(s: f64) -> f64 {
    2.0 * s - 6.0 * s * s + 4.0 * s * s * s
}

fn f2(s: f64) -> f64 {
    2.0 - 12.0 * s + 12.0 * s * s
}

fn f3(s: f64) -> f64 {
    -12.0 + 24.0 * s
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedFlow {
    pub nu: f64,
}

impl ManufacturedFlow {
    pub fn velocity(&self, p: Point) -> [f64; 2] {
        let [x, y] = p;
        [f0(x) * f1(y), -f1(x) * f0(y)]
    }

    /// `grad[i][j] = ∂_j y_i`.
    pub fn gradient(&self, p: Point) -> [[f64; 2]; 2] {
        let [x, y] = p;
        [[f1(x) * f1(y), f0(x) * f2(y)], [-f2(x) * f0(y), -f1(x) * f1(y)]]
    }

    pub fn laplacian(&self, p: Point) -> [f64; 2] {
        let [x, y] = p;
        [f2(x) * f1(y) + f0(x) * f3(y), -f3(x) * f0(y) - f1(x) * f2(y)]
    }

    pub fn pressure(&self, p: Point) -> f64 {
        p[0] - 0.5
    }

    /// `−νΔy + (y·∇)y + ∇p`.
    pub fn load(&self, p: Point) -> [f64; 2] {
        let v = self.velocity(p);
        let g = self.gradient(p);
        let l = self.laplacian(p);
        [
            -self.nu * l[0] + v[0] * g[0][0] + v[1] * g[0][1] + 1.0,
            -self.nu * l[1] + v[0] * g[1][0] + v[1] * g[1][1],
        ]
    }
}
