//! Associated Legendre functions normalised on `[−1, 1]`.

/// `Θ_ℓ^m(x)` for `ℓ = m..=l_max`, with `∫_{−1}^{1} Θ_ℓ^m Θ_{ℓ'}^m dx = δ_{ℓℓ'}`
/// and no Condon–Shortley phase.
pub fn theta_column(m: usize, l_max: usize, x: f64) -> Vec<f64> {
    if l_max < m {
        return Vec::new();
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 0.5f64.sqrt();
    for k in 1..=m {
        let k = k as f64;
        pmm *= ((2.0 * k + 1.0) / (2.0 * k)).sqrt() * s;
    }
    let mut out = Vec::with_capacity(l_max - m + 1);
    out.push(pmm);
    if l_max == m {
        return out;
    }
    let mf = m as f64;
    out.push((2.0 * mf + 3.0).sqrt() * x * pmm);
    for l in (m + 2)..=l_max {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let lp = lf - 1.0;
        let a_prev = ((4.0 * lp * lp - 1.0) / (lp * lp - mf * mf)).sqrt();
        let k = out.len();
        out.push(a * (x * out[k - 1] - out[k - 2] / a_prev));
    }
    out
}

/// `dΘ_ℓ^m/dθ` at `x = cos θ` (interior points only), from the column
/// returned by [`theta_column`].
pub fn theta_derivative(m: usize, column: &[f64], x: f64) -> Vec<f64> {
    let s = (1.0 - x * x).sqrt();
    let mf = m as f64;
    column
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let l = (m + k) as f64;
            // (1 − x²) dΘ_ℓ/dx = c_ℓ Θ_{ℓ−1} − ℓxΘ_ℓ
            let prev = if k == 0 {
                0.0
            } else {
                ((2.0 * l + 1.0) / (2.0 * l - 1.0) * (l - mf) * (l + mf)).sqrt() * column[k - 1]
            };
            (l * x * t - prev) / s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussLegendre;

    #[test]
    fn orthonormal() {
        let gl = GaussLegendre::new(64);
        for m in [0usize, 1, 3, 7] {
            let l_max = m + 12;
            let cols: Vec<Vec<f64>> = gl.nodes.iter().map(|&x| theta_column(m, l_max, x)).collect();
            for a in 0..=(l_max - m) {
                for b in 0..=(l_max - m) {
                    let ip: f64 = cols.iter().zip(&gl.weights).map(|(c, &w)| w * c[a] * c[b]).sum();
                    let t = if a == b { 1.0 } else { 0.0 };
                    assert!((ip - t).abs() < 1e-12, "m={m} {a} {b} {ip}");
                }
            }
        }
    }

    #[test]
    fn low_orders() {
        let x: f64 = 0.37;
        let c = theta_column(0, 2, x);
        assert!((c[1] - (1.5f64).sqrt() * x).abs() < 1e-15);
        assert!((c[2] - (2.5f64).sqrt() * 0.5 * (3.0 * x * x - 1.0)).abs() < 1e-15);
        let c = theta_column(1, 1, x);
        assert!((c[0] - (0.75f64).sqrt() * (1.0 - x * x).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_differences() {
        let th: f64 = 1.1;
        let h = 1e-6;
        for m in [0usize, 2, 5] {
            let d = theta_derivative(m, &theta_column(m, m + 6, th.cos()), th.cos());
            let p = theta_column(m, m + 6, (th + h).cos());
            let q = theta_column(m, m + 6, (th - h).cos());
            for k in 0..d.len() {
                assert!((d[k] - (p[k] - q[k]) / (2.0 * h)).abs() < 1e-7, "m={m} k={k}");
            }
        }
    }
}
