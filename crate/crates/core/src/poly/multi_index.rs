use std::cmp::Ordering;
use std::fmt;

/// Exponent vector `alpha` of a monomial `x^alpha`.
///
/// Ordering is graded lexicographic: lower total degree first, and within a
/// degree the lexicographically larger exponent first, so `x1^2` precedes
/// `x1*x2`, which precedes `x2^2`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exps: Box<[u32]>,
    degree: u32,
}

impl MultiIndex {
    pub fn new(exps: Vec<u32>) -> Self {
        let degree = exps.iter().sum();
        Self {
            exps: exps.into_boxed_slice(),
            degree,
        }
    }

    pub fn zero(num_vars: usize) -> Self {
        Self::new(vec![0; num_vars])
    }

    /// The exponent of the single variable `i`.
    pub fn unit(num_vars: usize, i: usize) -> Self {
        let mut e = vec![0; num_vars];
        e[i] = 1;
        Self::new(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn num_vars(&self) -> usize {
        self.exps.len()
    }

    pub fn degree(&self) -> usize {
        self.degree as usize
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.exps.len(), other.exps.len());
        MultiIndex::new(self.exps.iter().zip(other.exps.iter()).map(|(a, b)| a + b).collect())
    }

    /// `(extra, alpha)`: prepend an exponent for a new leading variable.
    pub fn prepend(&self, extra: u32) -> MultiIndex {
        let mut e = Vec::with_capacity(self.exps.len() + 1);
        e.push(extra);
        e.extend_from_slice(&self.exps);
        MultiIndex::new(e)
    }

    /// Drop the leading variable.
    pub fn tail(&self) -> MultiIndex {
        MultiIndex::new(self.exps[1..].to_vec())
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        let mut v = 1.0;
        for (&e, &x) in self.exps.iter().zip(point) {
            if e > 0 {
                v *= x.powi(e as i32);
            }
        }
        v
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree.cmp(&other.degree).then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.exps)
    }
}

/// All exponents in `num_vars` variables of total degree exactly `deg`, in
/// graded-lex order.
pub fn monomials_of_degree(num_vars: usize, deg: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; num_vars];
    fill(&mut cur, 0, deg as u32, &mut out);
    out
}

fn fill(cur: &mut Vec<u32>, pos: usize, left: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(MultiIndex::new(cur.clone()));
        return;
    }
    if cur.is_empty() {
        if left == 0 {
            out.push(MultiIndex::new(Vec::new()));
        }
        return;
    }
    for e in (0..=left).rev() {
        cur[pos] = e;
        fill(cur, pos + 1, left - e, out);
    }
    cur[pos] = 0;
}

/// All exponents with total degree at most `deg`, in graded-lex order.
pub fn monomials_up_to(num_vars: usize, deg: usize) -> Vec<MultiIndex> {
    (0..=deg).flat_map(|d| monomials_of_degree(num_vars, d)).collect()
}

/// `C(num_vars + deg, deg)`, the number of monomials of degree `<= deg`.
pub fn count_up_to(num_vars: usize, deg: usize) -> usize {
    let mut c: u128 = 1;
    for i in 1..=deg as u128 {
        c = c * (num_vars as u128 + i) / i;
    }
    c as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_within_degree() {
        let m = monomials_of_degree(2, 2);
        let e: Vec<&[u32]> = m.iter().map(|a| a.exponents()).collect();
        assert_eq!(e, vec![&[2, 0][..], &[1, 1], &[0, 2]]);
        let mut sorted = m.clone();
        sorted.sort();
        assert_eq!(sorted, m);
    }

    #[test]
    fn counts() {
        for n in 1..5 {
            for d in 0..6 {
                assert_eq!(monomials_up_to(n, d).len(), count_up_to(n, d));
            }
        }
        assert_eq!(count_up_to(6, 8), 3003);
    }

    #[test]
    fn graded_before_lex() {
        let a = MultiIndex::new(vec![0, 0, 1]);
        let b = MultiIndex::new(vec![2, 0, 0]);
        assert!(a < b);
        assert!(MultiIndex::new(vec![1, 0]) < MultiIndex::new(vec![0, 1]));
    }
}
