//! Real symmetric tridiagonal matrices and their lowest eigenpairs.
//!
//! Eigenvalues come from Sturm-sequence bisection, eigenvectors from inverse
//! iteration with a pivoted LU factorization. Mirror-symmetric matrices are
//! split into even and odd blocks first, which keeps exponentially close
//! doublets (deep double wells at small hbar) from mixing.

use crate::error::{ensure, Error, Result};

const MAX_INVERSE_ITERATIONS: usize = 12;
const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit Euclidean norm.
    pub vector: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        ensure(!diag.is_empty(), || "matrix must have at least one row".into())?;
        ensure(off.len() + 1 == diag.len(), || {
            format!("off-diagonal has {} entries for {} rows", off.len(), diag.len())
        })?;
        ensure(diag.iter().chain(off.iter()).all(|v| v.is_finite()), || "matrix entries must be finite".into())?;
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Upper bound on the spectral norm.
    pub fn norm(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    }

    fn pivmin(&self) -> f64 {
        let e2 = self.off.iter().fold(1.0f64, |m, e| m.max(e * e));
        f64::MIN_POSITIVE * e2
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            let e = self.off[i - 1];
            q = self.diag[i] - x - e * e / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `j`-th smallest eigenvalue (zero based), bracketed from below by `floor`.
    fn bisect_eigenvalue(&self, j: usize, floor: f64) -> f64 {
        let (gl, gu) = self.gershgorin();
        let pad = 2.0 * f64::EPSILON * self.norm() + self.pivmin();
        let mut lo = (gl - pad).max(floor - pad).min(gu);
        let mut hi = gu + pad;
        if self.sturm_count(lo) > j {
            lo = gl - pad;
        }
        for _ in 0..256 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let width = hi - lo;
            if width <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + self.pivmin() {
                break;
            }
            if self.sturm_count(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvalues `0..k` in ascending order.
    pub fn lowest_eigenvalues(&self, k: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(k);
        let mut floor = f64::NEG_INFINITY;
        for j in 0..k.min(self.len()) {
            let v = self.bisect_eigenvalue(j, floor);
            floor = v;
            out.push(v);
        }
        out
    }

    /// True when the matrix commutes with the index reversal.
    pub fn is_persymmetric(&self) -> bool {
        let n = self.len();
        (0..n / 2).all(|i| self.diag[i] == self.diag[n - 1 - i])
            && (0..self.off.len() / 2).all(|i| self.off[i] == self.off[n - 2 - i])
    }

    /// The `k` smallest eigenpairs in ascending order.
    pub fn lowest_eigenpairs(&self, k: usize) -> Result<Vec<Eigenpair>> {
        ensure(k <= self.len(), || format!("requested {k} eigenpairs of a {}x{} matrix", self.len(), self.len()))?;
        if k == 0 {
            return Ok(Vec::new());
        }
        if self.len() >= 4 && self.is_persymmetric() {
            self.lowest_by_parity(k)
        } else {
            self.lowest_direct(k)
        }
    }

    fn lowest_direct(&self, k: usize) -> Result<Vec<Eigenpair>> {
        let values = self.lowest_eigenvalues(k);
        let norm = self.norm();
        let mut pairs: Vec<Eigenpair> = Vec::with_capacity(k);
        for (j, &lambda) in values.iter().enumerate() {
            let cluster: Vec<&[f64]> = pairs
                .iter()
                .filter(|p| (p.value - lambda).abs() <= 1e-3 * norm)
                .map(|p| p.vector.as_slice())
                .collect();
            let vector = self.inverse_iteration(lambda, j, &cluster)?;
            pairs.push(Eigenpair { value: lambda, vector });
        }
        Ok(pairs)
    }

    fn inverse_iteration(&self, lambda: f64, index: usize, previous: &[&[f64]]) -> Result<Vec<f64>> {
        let n = self.len();
        let norm = self.norm();
        let lu = ShiftedLu::factor(self, lambda, f64::EPSILON * norm);
        let mut x = start_vector(n, index);
        let mut hx = vec![0.0; n];
        for it in 0..MAX_INVERSE_ITERATIONS {
            lu.solve(&mut x);
            for _ in 0..2 {
                for p in previous {
                    let c = dot(p, &x);
                    for (xi, pi) in x.iter_mut().zip(p.iter()) {
                        *xi -= c * pi;
                    }
                }
            }
            let nx = dot(&x, &x).sqrt();
            if !(nx.is_finite() && nx > 0.0) {
                return Err(Error::ConvergenceFailure { index });
            }
            x.iter_mut().for_each(|v| *v /= nx);
            if it >= 1 {
                self.matvec(&x, &mut hx);
                let r = hx.iter().zip(&x).map(|(h, v)| (h - lambda * v).powi(2)).sum::<f64>().sqrt();
                if r <= RESIDUAL_TOL * norm {
                    return Ok(x);
                }
            }
        }
        Err(Error::ConvergenceFailure { index })
    }

    fn lowest_by_parity(&self, k: usize) -> Result<Vec<Eigenpair>> {
        let n = self.len();
        let m = n / 2;
        let s2 = std::f64::consts::SQRT_2;
        let (even, odd) = if n % 2 == 0 {
            let mut de = self.diag[m..].to_vec();
            let mut dodd = de.clone();
            de[0] += self.off[m - 1];
            dodd[0] -= self.off[m - 1];
            let e = self.off[m..].to_vec();
            (SymTridiagonal { diag: de, off: e.clone() }, SymTridiagonal { diag: dodd, off: e })
        } else {
            let de = self.diag[m..].to_vec();
            let mut ee = self.off[m..].to_vec();
            ee[0] *= s2;
            let dodd = self.diag[m + 1..].to_vec();
            let eo = self.off[m + 1..].to_vec();
            (SymTridiagonal { diag: de, off: ee }, SymTridiagonal { diag: dodd, off: eo })
        };
        let interleave = self.off.iter().all(|&e| e < 0.0);
        let (ke, ko) = if interleave { (k.div_ceil(2), k / 2) } else { (k, k) };
        let ke = ke.min(even.len());
        let ko = ko.min(odd.len());
        let ev = even.lowest_direct(ke).map_err(|e| reindex(e, |j| 2 * j))?;
        let ov = odd.lowest_direct(ko).map_err(|e| reindex(e, |j| 2 * j + 1))?;

        let expand = |u: &[f64], sign: f64| -> Vec<f64> {
            let mut v = vec![0.0; n];
            if n % 2 == 0 {
                for (j, &uj) in u.iter().enumerate() {
                    v[m + j] = uj / s2;
                    v[m - 1 - j] = sign * uj / s2;
                }
            } else if sign > 0.0 {
                v[m] = u[0];
                for (j, &uj) in u.iter().enumerate().skip(1) {
                    v[m + j] = uj / s2;
                    v[m - j] = uj / s2;
                }
            } else {
                for (j, &uj) in u.iter().enumerate() {
                    v[m + 1 + j] = uj / s2;
                    v[m - 1 - j] = -uj / s2;
                }
            }
            v
        };

        let mut pairs: Vec<Eigenpair> = Vec::with_capacity(k);
        if interleave {
            // Oscillation theorem: with negative couplings the j-th state has j
            // nodes, so parities alternate starting from even.
            let mut ei = ev.iter();
            let mut oi = ov.iter();
            for j in 0..k {
                let (p, sign) = if j % 2 == 0 { (ei.next(), 1.0) } else { (oi.next(), -1.0) };
                let Some(p) = p else { break };
                let mut value = p.value;
                if let Some(last) = pairs.last() {
                    // Only roundoff can invert a doublet; keep the order.
                    value = value.max(last.value);
                }
                pairs.push(Eigenpair { value, vector: expand(&p.vector, sign) });
            }
        } else {
            let mut all: Vec<Eigenpair> = ev
                .iter()
                .map(|p| Eigenpair { value: p.value, vector: expand(&p.vector, 1.0) })
                .chain(ov.iter().map(|p| Eigenpair { value: p.value, vector: expand(&p.vector, -1.0) }))
                .collect();
            all.sort_by(|a, b| a.value.total_cmp(&b.value));
            all.truncate(k);
            pairs = all;
        }
        if pairs.len() < k {
            return Err(Error::ConvergenceFailure { index: pairs.len() });
        }
        Ok(pairs)
    }
}

fn reindex(e: Error, f: impl Fn(usize) -> usize) -> Error {
    match e {
        Error::ConvergenceFailure { index } => Error::ConvergenceFailure { index: f(index) },
        other => other,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Deterministic pseudo-random start vector with entries in (-1, 1).
fn start_vector(n: usize, seed: usize) -> Vec<f64> {
    let mut s = 0x9E37_79B9_7F4A_7C15u64 ^ (seed as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect();
    let nv = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// LU factors of `T - sigma I` with partial pivoting.
struct ShiftedLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(t: &SymTridiagonal, sigma: f64, tiny: f64) -> Self {
        let n = t.len();
        let mut d: Vec<f64> = t.diag.iter().map(|v| v - sigma).collect();
        let mut dl = t.off.clone();
        let mut du = t.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                } else {
                    dl[i] = 0.0;
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        let tiny = tiny.max(f64::MIN_POSITIVE);
        for v in d.iter_mut() {
            if v.abs() < tiny {
                *v = if *v < 0.0 { -tiny } else { tiny };
            }
        }
        Self { dl, d, du, du2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.dl[i] * b[i];
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap()
    }

    fn exact(n: usize, k: usize) -> f64 {
        2.0 * (1.0 - (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
    }

    #[test]
    fn sturm_count_free_laplacian() {
        let t = laplacian(10);
        assert_eq!(t.sturm_count(-1.0), 0);
        assert_eq!(t.sturm_count(5.0), 10);
        assert_eq!(t.sturm_count(0.5 * (exact(10, 3) + exact(10, 4))), 3);
    }

    #[test]
    fn free_laplacian_spectrum_both_paths() {
        for n in [7usize, 8, 50, 51] {
            let t = laplacian(n);
            let pairs = t.lowest_eigenpairs(5).unwrap();
            let direct = t.lowest_direct(5).unwrap();
            for (j, (p, q)) in pairs.iter().zip(&direct).enumerate() {
                assert!((p.value - exact(n, j + 1)).abs() < 1e-12, "n={n} j={j}");
                assert!((q.value - exact(n, j + 1)).abs() < 1e-12);
                let ov = dot(&p.vector, &q.vector).abs();
                assert!((ov - 1.0).abs() < 1e-10, "n={n} j={j} overlap {ov}");
            }
        }
    }

    #[test]
    fn asymmetric_matrix_residuals() {
        let n = 200;
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + ((i * 37) % 11) as f64 * 0.1).collect();
        let t = SymTridiagonal::new(diag, vec![-1.0; n - 1]).unwrap();
        assert!(!t.is_persymmetric());
        let pairs = t.lowest_eigenpairs(6).unwrap();
        let mut y = vec![0.0; n];
        for (i, p) in pairs.iter().enumerate() {
            t.matvec(&p.vector, &mut y);
            let r: f64 = y.iter().zip(&p.vector).map(|(a, b)| (a - p.value * b).powi(2)).sum::<f64>().sqrt();
            assert!(r <= 1e-9 * t.norm());
            for q in &pairs[..i] {
                assert!(dot(&p.vector, &q.vector).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn positive_couplings_fall_back_to_sorting() {
        let n = 12;
        let t = SymTridiagonal::new(vec![0.0; n], vec![1.0; n - 1]).unwrap();
        let pairs = t.lowest_eigenpairs(4).unwrap();
        for w in pairs.windows(2) {
            assert!(w[0].value <= w[1].value);
        }
        assert!((pairs[0].value - (-2.0 * (std::f64::consts::PI / 13.0).cos())).abs() < 1e-12);
    }

    #[test]
    fn rejects_too_many_pairs() {
        assert!(laplacian(3).lowest_eigenpairs(4).is_err());
    }
}
