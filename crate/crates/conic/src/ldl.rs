//! Dense LDL' factorization of quasi-definite matrices without pivoting.
//!
//! The reduced KKT matrix has a positive definite leading block and a
//! negative (semi)definite trailing block. Each pivot is expected to carry
//! the sign of its block; a pivot with the wrong sign or tiny magnitude is
//! replaced by `sign * dyn_reg`.

const BLOCK: usize = 64;
const ROW_CHUNK: usize = 256;

pub struct Ldl {
    n: usize,
    /// Row-major; strictly lower part holds L (unit diagonal implied).
    l: Vec<f64>,
    d: Vec<f64>,
    pub bumped: usize,
}

impl Ldl {
    /// Factor the row-major symmetric matrix `a` (only the lower triangle is
    /// read). `signs[i]` is `+1.0` or `-1.0`.
    pub fn factor(mut a: Vec<f64>, n: usize, signs: &[f64], dyn_eps: f64, dyn_reg: f64) -> Ldl {
        assert_eq!(a.len(), n * n);
        let mut d = vec![0.0; n];
        let mut bumped = 0;
        let mut w = vec![0.0; ROW_CHUNK * BLOCK];
        let mut kb = 0;
        while kb < n {
            let kend = (kb + BLOCK).min(n);
            // Unblocked factorization of the panel a[kb.., kb..kend].
            for k in kb..kend {
                let mut dk = a[k * n + k];
                if dk * signs[k] <= dyn_eps {
                    dk = signs[k] * dyn_reg;
                    bumped += 1;
                    log::trace!("bump pivot {k} of {n}: {:.3e}", a[k * n + k]);
                }
                d[k] = dk;
                let inv = 1.0 / dk;
                for i in k + 1..n {
                    a[i * n + k] *= inv;
                }
                // Update the remaining panel columns k+1..kend.
                for i in k + 1..n {
                    let lik = a[i * n + k] * dk;
                    if lik == 0.0 {
                        continue;
                    }
                    let jmax = i.min(kend - 1);
                    for j in k + 1..=jmax {
                        a[i * n + j] -= lik * a[j * n + k];
                    }
                }
            }
            // Trailing update A22 -= L21 D L21' (lower triangle only).
            let nb = kend - kb;
            let mut i0 = kend;
            while i0 < n {
                let i1 = (i0 + ROW_CHUNK).min(n);
                let rows = i1 - i0;
                // w = L21[i0..i1] * D, contiguous rows x nb
                for (r, i) in (i0..i1).enumerate() {
                    for p in 0..nb {
                        w[r * nb + p] = a[i * n + kb + p] * d[kb + p];
                    }
                }
                let cols = i1 - kend;
                // SAFETY: the output region (columns kend..i1 of rows i0..i1)
                // is disjoint from the panel columns kb..kend that are read
                // through `b`; `w` is a separate buffer.
                unsafe {
                    let base = a.as_mut_ptr();
                    matrixmultiply::dgemm(
                        rows,
                        nb,
                        cols,
                        -1.0,
                        w.as_ptr(),
                        nb as isize,
                        1,
                        base.add(kend * n + kb),
                        1,
                        n as isize,
                        1.0,
                        base.add(i0 * n + kend),
                        n as isize,
                        1,
                    );
                }
                i0 = i1;
            }
            kb = kend;
        }
        Ldl { n, l: a, d, bumped }
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for (v, d) in x.iter_mut().zip(&self.d) {
            *v /= d;
        }
        for j in (0..n).rev() {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let row = &self.l[j * n..j * n + j];
            for (xi, l) in x[..j].iter_mut().zip(row) {
                *xi -= l * xj;
            }
        }
    }

    #[cfg(test)]
    pub fn diagonal(&self) -> &[f64] {
        &self.d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quasi_definite(n1: usize, n2: usize, seed: u64) -> Vec<f64> {
        let n = n1 + n2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = vec![0.0; n1 * n1];
        for v in b.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let mut a = vec![0.0; n * n];
        for i in 0..n1 {
            for j in 0..n1 {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..n1 {
                    s += b[i * n1 + k] * b[j * n1 + k];
                }
                a[i * n + j] = s;
            }
        }
        for i in n1..n {
            for j in 0..n1 {
                let v = rng.random_range(-1.0..1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
            a[i * n + i] = -1e-2;
        }
        a
    }

    fn check(n1: usize, n2: usize) {
        let n = n1 + n2;
        let a = quasi_definite(n1, n2, 7 + n as u64);
        let signs: Vec<f64> = (0..n).map(|i| if i < n1 { 1.0 } else { -1.0 }).collect();
        let f = Ldl::factor(a.clone(), n, &signs, 0.0, 1e-12);
        assert_eq!(f.bumped, 0);
        let xtrue: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                rhs[i] += a[i * n + j] * xtrue[j];
            }
        }
        f.solve_in_place(&mut rhs);
        let err = rhs.iter().zip(&xtrue).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-8, "n = {n}: err {err}");
    }

    #[test]
    fn small_unblocked() {
        check(5, 3);
    }

    #[test]
    fn spans_several_blocks() {
        check(150, 90);
        check(300, 0);
    }

    #[test]
    fn wrong_sign_pivot_is_bumped() {
        let a = vec![1.0, 0.0, 0.0, 0.0];
        let f = Ldl::factor(a, 2, &[1.0, -1.0], 1e-14, 1e-7);
        assert_eq!(f.bumped, 1);
        assert_eq!(f.diagonal()[1], -1e-7);
    }
}
