//! Truncated Taylor arithmetic in one variable, up to third order.
//!
//! A `Jet3` holds `f(t₀), f'(t₀), f''(t₀)/2, f'''(t₀)/6`.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet3(pub [f64; 4]);

impl Jet3 {
    pub fn constant(c: f64) -> Self {
        Jet3([c, 0.0, 0.0, 0.0])
    }

    /// The variable itself, `t₀ + t`.
    pub fn variable(t0: f64) -> Self {
        Jet3([t0, 1.0, 0.0, 0.0])
    }

    /// `n`-th derivative at `t₀`.
    pub fn derivative(&self, n: usize) -> f64 {
        const FACT: [f64; 4] = [1.0, 1.0, 2.0, 6.0];
        self.0[n] * FACT[n]
    }

    fn compose(&self, d: [f64; 4]) -> Self {
        // Faà di Bruno on Taylor coefficients, with d = f^{(k)}(a)/k!
        let [_, a1, a2, a3] = self.0;
        Jet3([
            d[0],
            d[1] * a1,
            d[1] * a2 + d[2] * a1 * a1,
            d[1] * a3 + 2.0 * d[2] * a1 * a2 + d[3] * a1 * a1 * a1,
        ])
    }

    pub fn exp(&self) -> Self {
        let e = self.0[0].exp();
        self.compose([e, e, e / 2.0, e / 6.0])
    }

    pub fn recip(&self) -> Self {
        let a = self.0[0];
        self.compose([1.0 / a, -1.0 / (a * a), 1.0 / a.powi(3), -1.0 / a.powi(4)])
    }

    pub fn sqrt(&self) -> Self {
        let a = self.0[0];
        let s = a.sqrt();
        self.compose([s, 0.5 / s, -0.125 / (s * a), 0.0625 / (s * a * a)])
    }

    pub fn scale(&self, c: f64) -> Self {
        Jet3(self.0.map(|x| x * c))
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, o: Jet3) -> Jet3 {
        Jet3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2], self.0[3] + o.0[3]])
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, o: Jet3) -> Jet3 {
        self + (-o)
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.scale(-1.0)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, o: Jet3) -> Jet3 {
        let (a, b) = (self.0, o.0);
        Jet3([
            a[0] * b[0],
            a[0] * b[1] + a[1] * b[0],
            a[0] * b[2] + a[1] * b[1] + a[2] * b[0],
            a[0] * b[3] + a[1] * b[2] + a[2] * b[1] + a[3] * b[0],
        ])
    }
}
