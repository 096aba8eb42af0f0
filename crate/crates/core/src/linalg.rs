//! Banded symmetric eigenproblems: storage, reduction to tridiagonal form,
//! Sturm bisection, band LU and inverse iteration. Also a small assignment
//! solver used for overlap-based level labeling.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Real symmetric band matrix, lower triangle stored by column:
/// `A[j+d][j]` lives at `data[j*(bw+1) + d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBand { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        (i < self.n && i - j <= self.bw).then(|| j * (self.bw + 1) + (i - j))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Set `A[i][j] = A[j][i] = value`. Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.slot(i, j).unwrap_or_else(|| panic!("({i},{j}) outside bandwidth {}", self.bw));
        self.data[k] = value;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// True when every off-diagonal entry is zero.
    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|j| (1..=self.bw).all(|d| j + d >= self.n || self.data[j * (self.bw + 1) + d] == 0.0))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            y[j] += self.data[j * (self.bw + 1)] * x[j];
            for d in 1..=self.bw.min(self.n - 1 - j) {
                let a = self.data[j * (self.bw + 1) + d];
                y[j + d] += a * x[j];
                y[j] += a * x[j + d];
            }
        }
        y
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0; self.n];
        for j in 0..self.n {
            rows[j] += self.data[j * (self.bw + 1)].abs();
            for d in 1..=self.bw.min(self.n - 1 - j) {
                let a = self.data[j * (self.bw + 1) + d].abs();
                rows[j + d] += a;
                rows[j] += a;
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Reduce to tridiagonal form by Givens rotations with bulge chasing.
    /// The transformation is orthogonal, so eigenvalues are preserved.
    pub fn tridiagonalize(&self) -> Tridiagonal {
        let n = self.n;
        let bw = self.bw;
        if bw <= 1 || n < 3 {
            let d = self.diagonal();
            let e = (0..n.saturating_sub(1)).map(|i| if bw == 0 { 0.0 } else { self.get(i + 1, i) }).collect();
            return Tridiagonal { d, e };
        }
        let mut w = Workspace::from_band(self);
        for j in 0..n - 2 {
            for k in (2..=bw).rev() {
                if j + k >= n {
                    continue;
                }
                let (mut p, mut col) = (j + k - 1, j);
                loop {
                    let q = p + 1;
                    let b = w.get(q, col);
                    if b == 0.0 {
                        break;
                    }
                    let a = w.get(p, col);
                    let r = a.hypot(b);
                    w.rotate(p, a / r, b / r);
                    w.set(q, col, 0.0);
                    // the rotation leaves a bulge at (q + bw, p)
                    if q + bw >= n {
                        break;
                    }
                    col = p;
                    p = q + bw - 1;
                }
            }
        }
        let d = (0..n).map(|i| w.get(i, i)).collect();
        let e = (0..n - 1).map(|i| w.get(i + 1, i)).collect();
        Tridiagonal { d, e }
    }
}

/// Symmetric band storage with one extra sub-diagonal for the bulge.
struct Workspace {
    n: usize,
    w: usize,
    data: Vec<f64>,
}

impl Workspace {
    fn from_band(a: &SymBand) -> Self {
        let w = a.bw + 1;
        let mut data = vec![0.0; a.n * (w + 1)];
        for j in 0..a.n {
            for d in 0..=a.bw.min(a.n - 1 - j) {
                data[j * (w + 1) + d] = a.data[j * (a.bw + 1) + d];
            }
        }
        Workspace { n: a.n, w, data }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.w {
            0.0
        } else {
            self.data[j * (self.w + 1) + i - j]
        }
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.w);
        self.data[j * (self.w + 1) + i - j] = v;
    }

    /// `A ← G·A·Gᵀ` with `G` rotating rows/columns `p, p+1`:
    /// new row p = c·row_p + s·row_q, new row q = −s·row_p + c·row_q.
    fn rotate(&mut self, p: usize, c: f64, s: f64) {
        let q = p + 1;
        let lo = p.saturating_sub(self.w);
        let hi = (q + self.w).min(self.n - 1);
        for k in lo..=hi {
            if k == p || k == q {
                continue;
            }
            // skip entries that cannot be stored for both rows
            let x = self.get(p, k);
            let y = self.get(q, k);
            if x == 0.0 && y == 0.0 {
                continue;
            }
            let nx = c * x + s * y;
            let ny = -s * x + c * y;
            if k.abs_diff(p) <= self.w {
                self.set(p, k, nx);
            }
            if k.abs_diff(q) <= self.w {
                self.set(q, k, ny);
            }
        }
        let app = self.get(p, p);
        let aqq = self.get(q, q);
        let apq = self.get(p, q);
        let cs = c * s;
        self.set(p, p, c * c * app + 2.0 * cs * apq + s * s * aqq);
        self.set(q, q, s * s * app - 2.0 * cs * apq + c * c * aqq);
        self.set(p, q, (c * c - s * s) * apq + cs * (aqq - app));
    }
}

/// Symmetric tridiagonal matrix: diagonal `d`, sub-diagonal `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Gershgorin interval containing the spectrum.
    pub fn bounds(&self) -> (f64, f64) {
        let n = self.d.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    fn pivmin(&self) -> f64 {
        let emax = self.e.iter().fold(1.0f64, |m, x| m.max(x * x));
        f64::MIN_POSITIVE * emax * 4.0
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut q = self.d[0] - x;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.d.len() {
            q = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (lo, hi) = self.bounds();
        self.bisect(k, lo, hi)
    }

    fn bisect(&self, k: usize, mut lo: f64, mut hi: f64) -> f64 {
        let scale = lo.abs().max(hi.abs());
        let atol = 4.0 * f64::EPSILON * scale + self.pivmin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= atol + 2.0 * f64::EPSILON * mid.abs() || mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues in `[lo, hi)`, ascending.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let (glo, ghi) = self.bounds();
        let lo = lo.max(glo - 1.0);
        let hi = hi.min(ghi + 1.0);
        if hi <= lo {
            return Vec::new();
        }
        let a = self.count_below(lo);
        let b = self.count_below(hi);
        (a..b).map(|k| self.bisect(k, lo, hi)).collect()
    }

    /// Indices (0-based, ascending) of the `k` eigenvalues nearest `target`.
    pub fn nearest(&self, target: f64, k: usize) -> Vec<(usize, f64)> {
        let n = self.dim();
        let k = k.min(n);
        if k == 0 {
            return Vec::new();
        }
        let c = self.count_below(target);
        // the k nearest lie among indices c-k .. c+k
        let lo = c.saturating_sub(k);
        let hi = (c + k).min(n);
        let (glo, ghi) = self.bounds();
        let mut cand: Vec<(usize, f64)> = (lo..hi).map(|i| (i, self.bisect(i, glo, ghi))).collect();
        cand.sort_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()).then(a.0.cmp(&b.0)));
        cand.truncate(k);
        cand.sort_by_key(|c| c.0);
        cand
    }

    /// All eigenvalues by implicit QL, ascending.
    pub fn eigenvalues_all(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut d = self.d.clone();
        let mut e: Vec<f64> = self.e.clone();
        e.push(0.0);
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > 60 {
                    return Err(Error::Eigensolver("implicit QL exceeded 60 sweeps".into()));
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut deflated = false;
                let mut i = m;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        d.sort_by(f64::total_cmp);
        Ok(d)
    }
}

/// LU factorization with partial pivoting of `A − shift·I` for a symmetric
/// band `A` (treated as a general band matrix).
pub struct BandLu {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Zero pivots are replaced by `tiny` so that inverse iteration can solve
    /// with an exactly singular shift.
    pub fn factor(a: &SymBand, shift: f64, tiny: f64) -> Self {
        let n = a.n;
        let kl = a.bw;
        let ku = a.bw;
        let kv = kl + ku;
        let ldab = kv + kl + 1;
        let mut ab = vec![0.0; n * ldab];
        for j in 0..n {
            for i in j.saturating_sub(ku)..=(j + kl).min(n - 1) {
                let v = a.get(i, j) - if i == j { shift } else { 0.0 };
                ab[j * ldab + kv + i - j] = v;
            }
        }
        let mut ipiv = vec![0; n];
        let mut ju = 0;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = ab[j * ldab + kv].abs();
            for r in 1..=km {
                let v = ab[j * ldab + kv + r].abs();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            ipiv[j] = j + jp;
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    ab.swap(c * ldab + kv + j - c, c * ldab + kv + j + jp - c);
                }
            }
            let mut piv = ab[j * ldab + kv];
            if piv == 0.0 {
                piv = tiny;
                ab[j * ldab + kv] = piv;
            }
            for r in 1..=km {
                ab[j * ldab + kv + r] /= piv;
            }
            for c in j + 1..=ju {
                let ujc = ab[c * ldab + kv + j - c];
                if ujc != 0.0 {
                    for r in 1..=km {
                        ab[c * ldab + kv + j + r - c] -= ab[j * ldab + kv + r] * ujc;
                    }
                }
            }
        }
        BandLu { n, kl, kv, ldab, ab, ipiv }
    }

    pub fn solve(&self, b: &mut [f64]) {
        let (n, ldab, kv) = (self.n, self.ldab, self.kv);
        for j in 0..n {
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            for r in 1..=self.kl.min(n - 1 - j) {
                b[j + r] -= self.ab[j * ldab + kv + r] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[j * ldab + kv];
            let bj = b[j];
            for i in j.saturating_sub(kv)..j {
                b[i] -= self.ab[j * ldab + kv + i - j] * bj;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = dot(x, x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

/// Residual `‖A·x − λ·x‖₂`.
pub fn residual(a: &SymBand, lambda: f64, x: &[f64]) -> f64 {
    let ax = a.matvec(x);
    ax.iter().zip(x).map(|(p, q)| (p - lambda * q).powi(2)).sum::<f64>().sqrt()
}

/// Eigenvectors for the given (ascending) eigenvalues by inverse iteration.
/// Vectors whose eigenvalues are within `1e-3·‖A‖` of each other are
/// re-orthogonalized against each other.
pub fn inverse_iteration(a: &SymBand, lambdas: &[f64]) -> Vec<Vec<f64>> {
    let n = a.n;
    let norm = a.norm_inf().max(f64::MIN_POSITIVE);
    let cluster_tol = 1e-3 * norm;
    let tiny = f64::EPSILON * norm;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(lambdas.len());
    let mut cluster_start = 0;
    for (slot, &lambda) in lambdas.iter().enumerate() {
        if slot > 0 && (lambda - lambdas[slot - 1]).abs() > cluster_tol {
            cluster_start = slot;
        }
        let lu = BandLu::factor(a, lambda, tiny);
        let mut x: Vec<f64> = (0..n)
            .map(|i| {
                let h = (i as u64 + 1).wrapping_mul(2654435761).wrapping_add(slot as u64 * 40503) % 65521;
                0.5 + h as f64 / 65521.0
            })
            .collect();
        normalize(&mut x);
        for _ in 0..6 {
            lu.solve(&mut x);
            for prev in &out[cluster_start..slot] {
                let c = dot(&x, prev);
                x.iter_mut().zip(prev).for_each(|(v, p)| *v -= c * p);
            }
            normalize(&mut x);
            if residual(a, lambda, &x) <= 1e-12 * norm {
                break;
            }
        }
        out.push(x);
    }
    out
}

/// Rows-to-columns assignment maximizing total weight (`rows ≤ cols`).
/// Returns, for each row, the assigned column.
pub fn assign_max(weights: &[Vec<f64>]) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let m = weights[0].len();
    assert!(n <= m, "assignment needs rows ≤ columns");
    let wmax = weights.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    // Kuhn–Munkres with potentials on cost = wmax − w, 1-based.
    let cost = |i: usize, j: usize| wmax - weights[i - 1][j - 1];
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            rows[p[j] - 1] = j - 1;
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, bw: usize, seed: u64) -> SymBand {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = SymBand::zeros(n, bw);
        for j in 0..n {
            for d in 0..=bw.min(n - 1 - j) {
                a.set(j + d, j, rng.gen_range(-1.0..1.0) + if d == 0 { j as f64 * 0.1 } else { 0.0 });
            }
        }
        a
    }

    fn dense_eigs(a: &SymBand) -> Vec<f64> {
        let mut e: Vec<f64> = a.to_dense().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn band_reduction_preserves_spectrum() {
        for (n, bw, seed) in [(40, 2, 1), (57, 4, 2), (9, 3, 3), (120, 2, 4)] {
            let a = random_band(n, bw, seed);
            let t = a.tridiagonalize();
            let got = t.eigenvalues_all().unwrap();
            let want = dense_eigs(&a);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-11, "n={n} bw={bw}: {g} vs {w}");
            }
            for k in [0, n / 2, n - 1] {
                assert!((t.eigenvalue(k) - want[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sturm_window_and_nearest() {
        let a = random_band(80, 2, 9);
        let want = dense_eigs(&a);
        let t = a.tridiagonalize();
        let got = t.eigenvalues_in(2.0, 4.0);
        let exp: Vec<f64> = want.iter().copied().filter(|x| (2.0..4.0).contains(x)).collect();
        assert_eq!(got.len(), exp.len());
        for (g, w) in got.iter().zip(&exp) {
            assert!((g - w).abs() < 1e-12);
        }
        let near = t.nearest(3.3, 3);
        let mut by_dist = want.clone();
        by_dist.sort_by(|a, b| (a - 3.3).abs().total_cmp(&(b - 3.3).abs()));
        let mut exp3 = by_dist[..3].to_vec();
        exp3.sort_by(f64::total_cmp);
        for ((_, g), w) in near.iter().zip(&exp3) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn band_lu_solves() {
        let a = random_band(60, 3, 5);
        let dense = a.to_dense() - DMatrix::identity(60, 60) * 0.37;
        let lu = BandLu::factor(&a, 0.37, 1e-300);
        let b: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        lu.solve(&mut x);
        let r = &dense * nalgebra::DVector::from_vec(x) - nalgebra::DVector::from_vec(b);
        assert!(r.norm() < 1e-10);
    }

    #[test]
    fn inverse_iteration_gives_orthonormal_eigenvectors() {
        let a = random_band(90, 2, 11);
        let t = a.tridiagonalize();
        let lams: Vec<f64> = t.nearest(4.0, 5).into_iter().map(|x| x.1).collect();
        let vs = inverse_iteration(&a, &lams);
        let norm = a.norm_inf();
        for (i, v) in vs.iter().enumerate() {
            assert!(residual(&a, lams[i], v) < 1e-10 * norm);
            for (j, w) in vs.iter().enumerate() {
                let d = dot(v, w);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn inverse_iteration_on_degenerate_diagonal() {
        let mut a = SymBand::zeros(6, 2);
        for (i, d) in [1.0, 2.0, 2.0, 2.0, 5.0, 6.0].into_iter().enumerate() {
            a.set(i, i, d);
        }
        let vs = inverse_iteration(&a, &[2.0, 2.0, 2.0]);
        for (i, v) in vs.iter().enumerate() {
            assert!(residual(&a, 2.0, v) < 1e-14);
            for w in &vs[..i] {
                assert!(dot(v, w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn assignment_maximizes_total() {
        let w = vec![vec![0.9, 0.1, 0.3], vec![0.8, 0.7, 0.0]];
        assert_eq!(assign_max(&w), vec![0, 1]);
        let w = vec![vec![0.5, 0.9], vec![0.1, 0.95]];
        // 0.5 + 0.95 beats 0.9 + 0.1
        assert_eq!(assign_max(&w), vec![0, 1]);
        let w = vec![vec![0.2, 0.1, 0.9]];
        assert_eq!(assign_max(&w), vec![2]);
    }
}
