//! Pauli operator `φ([σ·(−ih∇ + A)]² − V)φ` for azimuthal `A`, split into
//! blocks of conserved `j_z = m + ½`.
//!
//! With `A = ρg e_φ` one has `(−ih∇ + A)² = −h²Δ + 2hg L_z + ρ²g²` and
//! `[σ·(−ih∇ + A)]² = (−ih∇ + A)² + hσ·B`. Block `m` pairs the spin-up
//! component `e^{imφ}` with the spin-down component `e^{i(m+1)φ}`:
//!
//! ```text
//! ↑↑: φ(H_ℓ + 2hm g + hB_z + ρ²g²)φ
//! ↓↓: φ(H_ℓ + 2h(m+1) g − hB_z + ρ²g²)φ
//! ↑↓: φ h B_ρ φ
//! ```
//!
//! Each block is compressed onto products of radial Ritz vectors of the
//! cutoff channel operators `φH_ℓφ` and normalised associated Legendre
//! functions. At `A = 0` the blocks are diagonal and reproduce the radial
//! channel eigenvalues exactly.

use nalgebra::{Complex, DMatrix};

use super::field::FieldFamily;
use super::legendre::{theta_column, theta_derivative};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::RadialFn;
use crate::quad::GaussLegendre;
use crate::radial::{ChannelOperator, RadialGrid, RadialSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliSpec {
    pub radial: RadialSpec,
    /// Radial Ritz vectors come from channel states below this energy.
    pub e_cut: f64,
    /// Positive channel states kept per partial wave.
    pub max_positive: usize,
    /// Partial waves kept beyond the first one with no negative state.
    pub extra_channels: usize,
    /// Log spacing of the radial nodes used for field matrix elements.
    pub quad_dx: f64,
    /// Minimum number of polar Gauss nodes.
    pub polar: usize,
    /// Positive states with less weight than this on `B(2·supp A)` are dropped.
    pub min_weight: f64,
}

impl Default for PauliSpec {
    fn default() -> Self {
        Self {
            radial: RadialSpec::default(),
            e_cut: 8.0,
            max_positive: 64,
            extra_channels: 2,
            quad_dx: 0.04,
            polar: 32,
            min_weight: 1e-3,
        }
    }
}

/// Result of a Pauli trace evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTrace {
    /// Sum of the negative eigenvalues over all blocks.
    pub value: f64,
    /// Number of `j_z` blocks with a negative eigenvalue.
    pub blocks: usize,
    pub warnings: Vec<String>,
}

struct Channel {
    energies: Vec<f64>,
    /// `φu/r` on the fine radial grid, one row per state.
    fine: Vec<Vec<f64>>,
    /// `φu·√w` on the coarse quadrature nodes, `[node][state]` row-major.
    coarse: Vec<f64>,
}

impl Channel {
    fn len(&self) -> usize {
        self.energies.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Spin {
    Up,
    Down,
}

/// One run of block indices belonging to a single partial wave.
struct Segment {
    spin: Spin,
    l: usize,
    offset: usize,
}

struct Block {
    m: i64,
    segments: Vec<Segment>,
    dim: usize,
    diag: Vec<f64>,
    linear: Vec<DMatrix<f64>>,
    /// `ρ² gᵢ gⱼ` for `i ≤ j` (doubled off the diagonal), row-major in `(i, j)`.
    quadratic: Vec<DMatrix<f64>>,
}

/// Precomputed block compressions for a fixed potential, cutoff and field
/// family; evaluates the trace for any `θ`.
pub struct PauliGrid {
    h: f64,
    family: FieldFamily,
    l_max: usize,
    channels: Vec<Channel>,
    fine_r: Vec<f64>,
    fine_dx: f64,
    polar: GaussLegendre,
    blocks: Vec<Block>,
    pub warnings: Vec<String>,
}

fn azimuthal(spin: Spin, m: i64) -> usize {
    match spin {
        Spin::Up => m.unsigned_abs() as usize,
        Spin::Down => (m + 1).unsigned_abs() as usize,
    }
}

impl PauliGrid {
    /// `v` is the full potential (any chemical-potential shift included),
    /// `phi` a radial cutoff vanishing beyond `support`.
    pub fn new(
        family: &FieldFamily,
        v: &dyn RadialFn,
        h: f64,
        phi: &dyn RadialFn,
        support: f64,
        spec: &PauliSpec,
        exec: Execution,
    ) -> Result<Self> {
        if !(h > 0.0) || !(support > 0.0) {
            return Err(Error::InvalidInput("need h > 0 and a positive cutoff support".into()));
        }
        let r_min = spec.radial.r_min_factor * h * h;
        let grid = RadialGrid::log(r_min, support.max(2.0 * r_min), spec.radial.dx)?;
        let op = |l: usize, g: &RadialGrid| ChannelOperator::new(l, h, g, v, Some(phi));

        let mut first_empty = None;
        for l in 0..=spec.radial.l_cap {
            if op(l, &grid).count_below(0.0) == 0 {
                first_empty = Some(l);
                break;
            }
        }
        let first_empty = first_empty.ok_or(Error::ChannelCap { cap: spec.radial.l_cap })?;
        let l_max = first_empty + spec.extra_channels;

        let mut warnings = Vec::new();
        if spec.radial.check_refinement {
            let fine = grid.refined();
            let probe = if first_empty > 0 { vec![0, first_empty - 1] } else { vec![0] };
            for l in probe {
                let (a, b) = (op(l, &grid).count_below(0.0), op(l, &fine).count_below(0.0));
                if a != b {
                    let msg = format!("grid too coarse: channel {l} has {a} levels, {b} after refinement");
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
            }
        }

        let field_support = family.support().min(support);
        let first = op(0, &grid);
        let fine_r = first.radii().to_vec();
        let dx = first.dx();
        let stride = ((spec.quad_dx / dx).round() as usize).max(1);
        let nodes: Vec<usize> = (0..fine_r.len())
            .filter(|&i| fine_r[i] >= 1e-4 * h * h && fine_r[i] <= field_support)
            .step_by(stride)
            .collect();
        let phi_fine: Vec<f64> = fine_r.iter().map(|&r| phi.eval(r)).collect();

        let ls: Vec<usize> = (0..=l_max).collect();
        let channels = exec.map(&ls, |&l| {
            build_channel(&op(l, &grid), spec, 2.0 * field_support, &phi_fine, &nodes, stride as f64 * dx)
        });

        let polar = GaussLegendre::new(spec.polar.max(2 * l_max + 8));
        let coarse_r: Vec<f64> = nodes.iter().map(|&i| fine_r[i]).collect();
        let modes = ModeTable::new(family, &coarse_r, &polar.nodes);

        let mut ms = Vec::new();
        for k in 0..=l_max as i64 {
            ms.push(k);
            ms.push(-k - 1);
        }
        let blocks = exec.map(&ms, |&m| build_block(m, h, l_max, &channels, &modes, &polar));

        Ok(Self {
            h,
            family: family.clone(),
            l_max,
            channels,
            fine_r,
            fine_dx: dx,
            polar,
            blocks,
            warnings,
        })
    }

    pub fn family(&self) -> &FieldFamily {
        &self.family
    }

    /// Highest partial wave in the basis.
    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Total number of block basis functions.
    pub fn basis_size(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.family.dim() || theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "θ must hold {} finite entries",
                self.family.dim()
            )));
        }
        Ok(())
    }

    fn assemble(&self, b: &Block, theta: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&b.diag));
        let p = theta.len();
        for i in 0..p {
            if theta[i] != 0.0 {
                m += &b.linear[i] * theta[i];
            }
        }
        let mut q = 0;
        for i in 0..p {
            for j in i..p {
                let c = theta[i] * theta[j];
                if c != 0.0 {
                    m += &b.quadratic[q] * c;
                }
                q += 1;
            }
        }
        m
    }

    fn collect(&self, sums: Vec<(f64, bool)>) -> Result<PauliTrace> {
        let mut value = 0.0;
        let mut blocks = 0;
        for k in 0..=self.l_max {
            let (a, b) = (sums[2 * k], sums[2 * k + 1]);
            if !a.1 && !b.1 {
                return Ok(PauliTrace {
                    value,
                    blocks,
                    warnings: self.warnings.clone(),
                });
            }
            value += a.0 + b.0;
            blocks += a.1 as usize + b.1 as usize;
        }
        Err(Error::BlockCap { cap: self.l_max })
    }

    /// `Tr[φ(T_h(A) − V)φ]_-` for `A = Σ θᵢ Aᵢ`.
    pub fn trace(&self, theta: &[f64], exec: Execution) -> Result<PauliTrace> {
        self.check_theta(theta)?;
        let sums = exec.map(&self.blocks, |b| {
            if b.dim == 0 {
                return (0.0, false);
            }
            let e = self.assemble(b, theta).symmetric_eigenvalues();
            negative_sum(e.iter().copied())
        });
        self.collect(sums)
    }

    /// The trace for the potential `A + c ẑ`, a pure gauge shift of `A`.
    pub fn trace_with_shift(&self, theta: &[f64], c: f64, exec: Execution) -> Result<PauliTrace> {
        self.check_theta(theta)?;
        let sums = exec.map(&self.blocks, |b| {
            if b.dim == 0 {
                return (0.0, false);
            }
            let real = self.assemble(b, theta);
            let (overlap, dz) = self.shift_matrices(b);
            let n = b.dim;
            let hm = DMatrix::from_fn(n, n, |i, j| {
                // 2c·(−ih∂_z) + c², compressed with the cutoff
                Complex::new(real[(i, j)] + c * c * overlap[(i, j)], -2.0 * c * self.h * dz[(i, j)])
            });
            let e = hm.symmetric_eigenvalues();
            negative_sum(e.iter().copied())
        });
        self.collect(sums)
    }

    /// `⟨φψ_a, φψ_b⟩` and the antisymmetrised `⟨φψ_a, ∂_z(φψ_b)⟩`.
    fn shift_matrices(&self, b: &Block) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = b.dim;
        let mut overlap = DMatrix::zeros(n, n);
        let mut dz = DMatrix::zeros(n, n);
        let r = &self.fine_r;
        let dx = self.fine_dx;
        let deriv = |f: &[f64]| -> Vec<f64> {
            let k = f.len();
            (0..k)
                .map(|i| {
                    let a = if i > 0 { f[i - 1] } else { 0.0 };
                    let c = if i + 1 < k { f[i + 1] } else { 0.0 };
                    (c - a) / (2.0 * dx)
                })
                .collect()
        };
        let angular = |s1: &Segment, s2: &Segment| -> (f64, f64) {
            let mu = azimuthal(s1.spin, b.m);
            let (mut c1, mut c2) = (0.0, 0.0);
            for (&x, &w) in self.polar.nodes.iter().zip(&self.polar.weights) {
                let col = theta_column(mu, self.l_max, x);
                let der = theta_derivative(mu, &col, x);
                let s = (1.0 - x * x).sqrt();
                let (ta, tb, db) = (col[s1.l - mu], col[s2.l - mu], der[s2.l - mu]);
                c1 += w * ta * tb * x;
                c2 += w * ta * s * db;
            }
            (c1, c2)
        };
        for s1 in &b.segments {
            let ch1 = &self.channels[s1.l];
            for s2 in &b.segments {
                if s1.spin != s2.spin {
                    continue;
                }
                let ch2 = &self.channels[s2.l];
                if s1.l == s2.l {
                    for a in 0..ch1.len() {
                        for c in 0..ch2.len() {
                            let v: f64 = (0..r.len()).map(|i| ch1.fine[a][i] * ch2.fine[c][i] * r[i].powi(3)).sum();
                            overlap[(s1.offset + a, s2.offset + c)] = v * dx;
                        }
                    }
                } else if s1.l.abs_diff(s2.l) == 1 {
                    let (c1, c2) = angular(s1, s2);
                    for c in 0..ch2.len() {
                        let df = deriv(&ch2.fine[c]);
                        for a in 0..ch1.len() {
                            let fa = &ch1.fine[a];
                            let (mut r1, mut r2) = (0.0, 0.0);
                            for i in 0..r.len() {
                                let r2w = r[i] * r[i];
                                r1 += fa[i] * df[i] * r2w;
                                r2 += fa[i] * ch2.fine[c][i] * r2w;
                            }
                            dz[(s1.offset + a, s2.offset + c)] = (r1 * c1 - r2 * c2) * dx;
                        }
                    }
                }
            }
        }
        let anti = (&dz - dz.transpose()) * 0.5;
        (overlap, anti)
    }
}

fn negative_sum(e: impl Iterator<Item = f64>) -> (f64, bool) {
    let mut s = 0.0;
    let mut any = false;
    for x in e {
        if x < 0.0 {
            s += x;
            any = true;
        }
    }
    (s, any)
}

fn build_channel(op: &ChannelOperator, spec: &PauliSpec, inner: f64, phi: &[f64], nodes: &[usize], node_dx: f64) -> Channel {
    let r = op.radii();
    let n = r.len();
    let inside = r.iter().take_while(|&&x| x <= inner).count();
    let eig = op.eigenvalues_below(spec.e_cut);
    let nneg = op.count_below(0.0);
    let mut kept: Vec<Vec<f64>> = Vec::new();
    let mut positive = 0;
    for (j, w) in op.pencil_vectors(&eig).into_iter().enumerate() {
        if j >= nneg {
            // states squeezed into the region where φ vanishes carry no
            // weight where the field acts
            if positive == spec.max_positive || op.m_dot(&w[..inside], &w[..inside]) < spec.min_weight {
                continue;
            }
            positive += 1;
        }
        let mut w = w;
        for _ in 0..2 {
            for p in &kept {
                let c = op.m_dot(&w, p);
                for i in 0..n {
                    w[i] -= c * p[i];
                }
            }
        }
        let norm = op.m_dot(&w, &w).sqrt();
        if norm < 1e-6 {
            continue;
        }
        w.iter_mut().for_each(|x| *x /= norm);
        kept.push(w);
    }

    // the negative states are exact; Rayleigh–Ritz on their complement,
    // whose compression is nonnegative up to roundoff
    let negative = eig[..nneg].to_vec();
    let rest = &kept[nneg..];
    let k = rest.len();
    let form = DMatrix::from_fn(k, k, |a, b| op.form(&rest[a], &rest[b]));
    let form = (&form + form.transpose()) * 0.5;
    let mut energies = negative;
    let mut vectors: Vec<Vec<f64>> = kept[..nneg].to_vec();
    if k > 0 {
        let eigen = form.symmetric_eigen();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
        for &j in &order {
            energies.push(eigen.eigenvalues[j].max(0.0));
            let mut w = vec![0.0; n];
            for (a, v) in rest.iter().enumerate() {
                let c = eigen.eigenvectors[(a, j)];
                for i in 0..n {
                    w[i] += c * v[i];
                }
            }
            vectors.push(w);
        }
    }
    let k = vectors.len();
    // u = r^{1/2} w, stored as φu/r
    let fine: Vec<Vec<f64>> = vectors
        .iter()
        .map(|w| (0..n).map(|i| phi[i] * w[i] / r[i].sqrt()).collect())
        .collect();
    let mut coarse = Vec::with_capacity(nodes.len() * k);
    for &i in nodes {
        // φu·√(r dx) = (φu/r)·r·√(r dx)
        let s = r[i] * (r[i] * node_dx).sqrt();
        for f in &fine {
            coarse.push(f[i] * s);
        }
    }
    Channel { energies, fine, coarse }
}

/// Mode values `(g, ∂_ρ g, ∂_z g)` and `ρ` on a radial × polar node table.
struct ModeTable {
    nr: usize,
    np: usize,
    rho: Vec<f64>,
    vals: Vec<Vec<[f64; 3]>>,
}

impl ModeTable {
    fn new(family: &FieldFamily, r: &[f64], x: &[f64]) -> Self {
        let (nr, np) = (r.len(), x.len());
        let mut rho = Vec::with_capacity(nr * np);
        let mut z = Vec::with_capacity(nr * np);
        for &rk in r {
            for &xj in x {
                rho.push(rk * (1.0 - xj * xj).sqrt());
                z.push(rk * xj);
            }
        }
        let vals = family
            .modes
            .iter()
            .map(|m| rho.iter().zip(&z).map(|(&p, &q)| m.eval(p, q)).collect())
            .collect();
        Self { nr, np, rho, vals }
    }
}

fn build_block(m: i64, h: f64, l_max: usize, channels: &[Channel], modes: &ModeTable, polar: &GaussLegendre) -> Block {
    let mut segments = Vec::new();
    let mut diag = Vec::new();
    for spin in [Spin::Up, Spin::Down] {
        for l in azimuthal(spin, m)..=l_max {
            segments.push(Segment {
                spin,
                l,
                offset: diag.len(),
            });
            diag.extend_from_slice(&channels[l].energies);
        }
    }
    let dim = diag.len();
    let (nr, np) = (modes.nr, modes.np);

    // Θ columns per spin at every polar node, times √w
    let col = |spin: Spin| -> Vec<Vec<f64>> {
        let mu = azimuthal(spin, m);
        polar
            .nodes
            .iter()
            .zip(&polar.weights)
            .map(|(&x, &w)| {
                let mut c = theta_column(mu, l_max, x);
                c.iter_mut().for_each(|t| *t *= w.sqrt());
                c
            })
            .collect()
    };
    let up_cols = col(Spin::Up);
    let dn_cols = col(Spin::Down);
    let theta_at = |s: &Segment, j: usize| -> f64 {
        let mu = azimuthal(s.spin, m);
        match s.spin {
            Spin::Up => up_cols[j][s.l - mu],
            Spin::Down => dn_cols[j][s.l - mu],
        }
    };

    // project a node function F(k, j) for each spin pair into the block
    let project = |f: &dyn Fn(Spin, Spin, usize) -> f64| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(dim, dim);
        let mut radial = vec![0.0; nr];
        for (i1, s1) in segments.iter().enumerate() {
            for s2 in &segments[i1..] {
                let mut nonzero = false;
                for (k, slot) in radial.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..np {
                        let v = f(s1.spin, s2.spin, k * np + j);
                        if v != 0.0 {
                            acc += theta_at(s1, j) * theta_at(s2, j) * v;
                        }
                    }
                    *slot = acc;
                    nonzero |= acc != 0.0;
                }
                if !nonzero {
                    continue;
                }
                let (c1, c2) = (&channels[s1.l], &channels[s2.l]);
                let (n1, n2) = (c1.len(), c2.len());
                for (k, &p) in radial.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let row1 = &c1.coarse[k * n1..(k + 1) * n1];
                    let row2 = &c2.coarse[k * n2..(k + 1) * n2];
                    for a in 0..n1 {
                        let t = row1[a] * p;
                        for b in 0..n2 {
                            out[(s1.offset + a, s2.offset + b)] += t * row2[b];
                        }
                    }
                }
            }
        }
        // mirror the upper segment pairs
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (out[(i, j)], out[(j, i)]);
                let v = if a != 0.0 { a } else { b };
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    };

    let mf = m as f64;
    let p = modes.vals.len();
    let linear = (0..p)
        .map(|i| {
            let vals = &modes.vals[i];
            project(&|s1, s2, n| {
                let [g, gr, gz] = vals[n];
                let rho = modes.rho[n];
                let bz = 2.0 * g + rho * gr;
                match (s1, s2) {
                    (Spin::Up, Spin::Up) => h * (2.0 * mf * g + bz),
                    (Spin::Down, Spin::Down) => h * (2.0 * (mf + 1.0) * g - bz),
                    _ => -h * rho * gz,
                }
            })
        })
        .collect();
    let mut quadratic = Vec::new();
    for i in 0..p {
        for j in i..p {
            let (vi, vj) = (&modes.vals[i], &modes.vals[j]);
            let w = if i == j { 1.0 } else { 2.0 };
            quadratic.push(project(&|s1, s2, n| {
                if s1 != s2 {
                    return 0.0;
                }
                let rho = modes.rho[n];
                w * rho * rho * vi[n][0] * vj[n][0]
            }));
        }
    }
    Block {
        m,
        segments,
        dim,
        diag,
        linear,
        quadratic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Coulomb;
    use crate::pauli::field::FieldFamily;
    use crate::radial::{localized_trace_neg, SmoothCutoff};

    fn grid(r: f64) -> PauliGrid {
        let phi = SmoothCutoff::new(r);
        PauliGrid::new(
            &FieldFamily::scott(r),
            &Coulomb::new(1.0),
            1.0,
            &phi,
            r,
            &PauliSpec::default(),
            Execution::Parallel,
        )
        .unwrap()
    }

    #[test]
    fn zero_field_matches_scalar_trace() {
        let r = 20.0;
        let g = grid(r);
        let p = g.trace(&[0.0; 4], Execution::Parallel).unwrap();
        let phi = SmoothCutoff::new(r);
        let s = localized_trace_neg(&Coulomb::new(1.0), &phi, r, 1.0, 0.0, &RadialSpec::default(), Execution::Parallel)
            .unwrap();
        assert!(((p.value - s.trace) / s.trace).abs() < 1e-8, "{} {}", p.value, s.trace);
    }

    #[test]
    fn repulsive_potential_has_no_negative_part() {
        let phi = SmoothCutoff::new(10.0);
        let g = PauliGrid::new(
            &FieldFamily::scott(10.0),
            &|r: f64| -1.0 / r,
            1.0,
            &phi,
            10.0,
            &PauliSpec::default(),
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(g.trace(&[0.0; 4], Execution::Parallel).unwrap().value, 0.0);
    }

    #[test]
    fn weak_field_is_quadratic() {
        let g = grid(20.0);
        let zero = g.trace(&[0.0; 4], Execution::Parallel).unwrap().value;
        let dir = [0.4, -0.3, 0.6, 0.2];
        let d = |eps: f64| {
            let t: Vec<f64> = dir.iter().map(|x| x * eps).collect();
            g.trace(&t, Execution::Parallel).unwrap().value - zero
        };
        let (a, b) = (d(0.02), d(0.01));
        assert!(a.abs() > 0.0);
        assert!((a / b - 4.0).abs() < 0.1, "{a} {b}");
        assert!(d(1e-4).abs() < 1e-6);
    }

    #[test]
    fn constant_shift_is_a_gauge() {
        let g = grid(20.0);
        let theta = [0.1, -0.05, 0.08, 0.03];
        let base = g.trace(&theta, Execution::Parallel).unwrap().value;
        let shifted = g.trace_with_shift(&theta, 0.05, Execution::Parallel).unwrap().value;
        assert!(((shifted - base) / base).abs() < 1e-3, "{base} {shifted}");
    }

    #[test]
    fn block_matrices_are_symmetric() {
        let g = grid(10.0);
        for b in &g.blocks {
            let m = g.assemble(b, &[0.2, 0.1, -0.3, 0.5]);
            assert!((&m - m.transpose()).amax() < 1e-14);
        }
    }

    #[test]
    fn strategies_agree() {
        let g = grid(10.0);
        let t = [0.2, 0.1, -0.3, 0.5];
        let a = g.trace(&t, Execution::Sequential).unwrap();
        let b = g.trace(&t, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
