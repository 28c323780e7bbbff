//! Fixed quadrature rules on triangles and segments.

/// Degree-5 seven-point rule: barycentric coordinates and weights summing to 1.
pub const TRIANGLE7: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_770;
    const B1: f64 = 0.470_142_064_105_115;
    const A2: f64 = 0.797_426_985_353_087;
    const B2: f64 = 0.101_286_507_323_456;
    const W0: f64 = 0.225;
    const W1: f64 = 0.132_394_152_788_506;
    const W2: f64 = 0.125_939_180_544_827;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], W0),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// Three-point Gauss rule on `[0, 1]`: parameters and weights summing to 1.
pub const GAUSS3: [(f64, f64); 3] = {
    const S: f64 = 0.387_298_334_620_741_7; // sqrt(3/5) / 2
    [(0.5 - S, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + S, 5.0 / 18.0)]
};

/// `sum w f(x)` over the triangle, times its area.
pub fn integrate_triangle(p: [[f64; 2]; 3], area: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    TRIANGLE7
        .iter()
        .map(|(b, w)| {
            let x = b[0] * p[0][0] + b[1] * p[1][0] + b[2] * p[2][0];
            let y = b[0] * p[0][1] + b[1] * p[1][1] + b[2] * p[2][1];
            w * f(x, y)
        })
        .sum::<f64>()
        * area
}

pub fn integrate_segment(a: [f64; 2], b: [f64; 2], f: impl Fn(f64, f64) -> f64) -> f64 {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    GAUSS3
        .iter()
        .map(|&(t, w)| w * f(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
        .sum::<f64>()
        * len
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_rule_integrates_quintics() {
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        // int_T x^2 y^3 = 2! 3! / 7! = 1/420
        let v = integrate_triangle(p, 0.5, |x, y| x * x * y * y * y);
        assert!((v - 1.0 / 420.0).abs() < 1e-14);
        let one = integrate_triangle(p, 0.5, |_, _| 1.0);
        assert!((one - 0.5).abs() < 1e-14);
    }

    #[test]
    fn segment_rule_integrates_quintics() {
        let v = integrate_segment([0.0, 0.0], [2.0, 0.0], |x, _| x.powi(5));
        assert!((v - 64.0 / 6.0).abs() < 1e-12);
    }
}
