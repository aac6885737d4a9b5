//! Partition combinatorics and the closed-form building blocks indexed by
//! partitions: box contents, Nekrasov factors, Macdonald norms, the
//! regularized content power sums.

use std::fmt;

use serde::Serialize;

use crate::ring::{Mutation, Params, Rf, Scalar};
use crate::{Error, Result};

/// Integer partition with weakly decreasing positive parts.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash, Serialize)]
pub struct Partition(Vec<u32>);

impl Partition {
    pub fn new(mut parts: Vec<u32>) -> Partition {
        parts.retain(|&p| p > 0);
        assert!(parts.windows(2).all(|w| w[0] >= w[1]), "parts must be weakly decreasing");
        Partition(parts)
    }

    pub fn empty() -> Partition {
        Partition(Vec::new())
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn size(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn part(&self, i: usize) -> u32 {
        self.0.get(i).copied().unwrap_or(0)
    }

    pub fn transpose(&self) -> Partition {
        if self.is_empty() {
            return Partition::empty();
        }
        let cols = self.0[0] as usize;
        let mut t = vec![0u32; cols];
        for &p in &self.0 {
            for c in t.iter_mut().take(p as usize) {
                *c += 1;
            }
        }
        Partition(t)
    }

    /// Boxes (i,j) in matrix coordinates, 1-based, row-major.
    pub fn boxes(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(i, &p)| (1..=p).map(move |j| (i as u32 + 1, j)))
    }

    /// Boxes that can be added keeping a valid Young diagram.
    pub fn addable(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for i in 0..=self.0.len() {
            let row = if i < self.0.len() { self.0[i] } else { 0 };
            let above = if i == 0 { u32::MAX } else { self.0[i - 1] };
            if row < above {
                out.push((i as u32 + 1, row + 1));
            }
        }
        out
    }

    /// Boxes that can be removed keeping a valid Young diagram.
    pub fn removable(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for i in 0..self.0.len() {
            let below = if i + 1 < self.0.len() { self.0[i + 1] } else { 0 };
            if self.0[i] > below {
                out.push((i as u32 + 1, self.0[i]));
            }
        }
        out
    }

    pub fn add_box(&self, b: (u32, u32)) -> Partition {
        let mut p = self.0.clone();
        let i = (b.0 - 1) as usize;
        if i == p.len() {
            p.push(1);
        } else {
            p[i] += 1;
        }
        Partition::new(p)
    }

    pub fn remove_box(&self, b: (u32, u32)) -> Partition {
        let mut p = self.0.clone();
        p[(b.0 - 1) as usize] -= 1;
        Partition::new(p)
    }

    /// Multiplicity of parts equal to k.
    pub fn multiplicity(&self, k: u32) -> u32 {
        self.0.iter().filter(|&&p| p == k).count() as u32
    }

    /// z_lambda = prod_k k^{m_k} m_k!.
    pub fn z_factor(&self, pa: &Params) -> Rf {
        let mut acc = pa.one();
        for k in 1..=self.part(0) {
            let m = self.multiplicity(k) as i64;
            if m > 0 {
                acc = acc.mul(&pa.rf_int(factorial(m)));
                acc = acc.mul(&pa.rf_int(k as i64).pow(m).unwrap());
            }
        }
        acc
    }

    /// z~_lambda = prod_k m_k!.
    pub fn zt_factor(&self, pa: &Params) -> Rf {
        let mut acc = pa.one();
        for k in 1..=self.part(0) {
            acc = acc.mul(&pa.rf_int(factorial(self.multiplicity(k) as i64)));
        }
        acc
    }

    /// Union of column multisets: parts of both, re-sorted.
    pub fn union(&self, o: &Partition) -> Partition {
        let mut p: Vec<u32> = self.0.iter().chain(o.0.iter()).copied().collect();
        p.sort_unstable_by(|a, b| b.cmp(a));
        Partition(p)
    }

    /// self >= o in dominance order (comparable sizes assumed).
    pub fn dominates(&self, o: &Partition) -> bool {
        let mut sa = 0i64;
        let mut sb = 0i64;
        for i in 0..self.0.len().max(o.0.len()) {
            sa += self.part(i) as i64;
            sb += o.part(i) as i64;
            if sa < sb {
                return false;
            }
        }
        true
    }
}

pub fn factorial(m: i64) -> i64 {
    (1..=m).product::<i64>().max(1)
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", p)?;
        }
        write!(f, "]")
    }
}

/// All partitions of exactly n, descending lexicographic.
pub fn partitions_of(n: u32) -> Vec<Partition> {
    fn rec(n: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if n == 0 {
            out.push(Partition(cur.clone()));
            return;
        }
        let top = max.min(n);
        for p in (1..=top).rev() {
            cur.push(p);
            rec(n - p, p, cur, out);
            cur.pop();
        }
    }
    if n == 0 {
        return vec![Partition::empty()];
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// All partitions with size at most n.
pub fn partitions_up_to(n: u32) -> Vec<Partition> {
    (0..=n).flat_map(partitions_of).collect()
}

/// All ordered pairs (lambda, nu) with lambda U nu = mu as column multisets.
pub fn pair_decompositions(mu: &Partition) -> Vec<(Partition, Partition)> {
    let mut groups: Vec<(u32, u32)> = Vec::new();
    for k in 1..=mu.part(0) {
        let m = mu.multiplicity(k);
        if m > 0 {
            groups.push((k, m));
        }
    }
    let mut out: Vec<(Vec<u32>, Vec<u32>)> = vec![(Vec::new(), Vec::new())];
    for (k, m) in groups {
        let mut next = Vec::new();
        for (a, b) in &out {
            for take in 0..=m {
                let mut a2 = a.clone();
                let mut b2 = b.clone();
                for _ in 0..take {
                    a2.push(k);
                }
                for _ in take..m {
                    b2.push(k);
                }
                next.push((a2, b2));
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|(mut a, mut b)| {
            a.sort_unstable_by(|x, y| y.cmp(x));
            b.sort_unstable_by(|x, y| y.cmp(x));
            (Partition(a), Partition(b))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// closed forms
// ---------------------------------------------------------------------------

/// Box content chi = q1^{i-1} q2^{j-1}.
pub fn box_content(pa: &Params, b: (u32, u32)) -> Rf {
    content_pow(pa, b, 1)
}

/// chi^k for a box.
pub fn content_pow(pa: &Params, b: (u32, u32), k: i64) -> Rf {
    pa.q1_pow((b.0 as i64 - 1) * k).mul(&pa.q2_pow((b.1 as i64 - 1) * k))
}

/// Nekrasov factor N_{lambda,mu}(a) at a parameter monomial a = q^aq t^at.
///
/// Vanishing factors shared between numerator and denominator are cancelled
/// symbolically before evaluation, so the argument a = 1 is admissible.
pub fn nekrasov(pa: &Params, la: &Partition, mu: &Partition, arg: (i64, i64)) -> Result<Scalar> {
    // net exponents of factors (1 - a q1^x q2^y), keyed by (x, y)
    let mut exps: std::collections::BTreeMap<(i64, i64), i64> = std::collections::BTreeMap::new();
    let mut bump = |x: i64, y: i64, e: i64| {
        let v = exps.entry((x, y)).or_insert(0);
        *v += e;
        if *v == 0 {
            exps.remove(&(x, y));
        }
    };
    let shift = match pa.mutation {
        Mutation::NekrasovShift => 0,
        _ => 1,
    };
    for (i, j) in la.boxes() {
        for (ip, jp) in mu.boxes() {
            let (di, dj) = (i as i64 - ip as i64, j as i64 - jp as i64);
            bump(di + shift, dj, 1);
            bump(di, dj + 1, 1);
            bump(di, dj, -1);
            bump(di + 1, dj + 1, -1);
        }
    }
    for (i, j) in la.boxes() {
        bump(i as i64, j as i64, 1);
    }
    for (ip, jp) in mu.boxes() {
        bump(1 - ip as i64, 1 - jp as i64, 1);
    }
    let one = pa.one();
    let mut num = pa.one();
    let mut den = pa.one();
    for ((x, y), e) in exps {
        let factor = one.sub(&pa.q_pow(arg.0).mul(&pa.t_pow(arg.1)).mul(&pa.q1_pow(x)).mul(&pa.q2_pow(y)));
        if factor.is_zero() {
            if e > 0 {
                return Ok(Scalar::zero());
            }
            return Err(Error::DegenerateNorm(format!(
                "Nekrasov factor has an uncancelled pole at q1^{} q2^{}",
                x, y
            )));
        }
        if e > 0 {
            num = num.mul(&factor.pow(e).unwrap());
        } else {
            den = den.mul(&factor.pow(-e).unwrap());
        }
    }
    Ok(Scalar::from_rf(num.div(&den)?))
}

/// Literal triple-product oracle for the Nekrasov factor; used by tests as an
/// independent route (requires a generic argument so no factor vanishes).
pub fn nekrasov_oracle(pa: &Params, la: &Partition, mu: &Partition, arg: (i64, i64)) -> Scalar {
    let one = pa.one();
    let a = pa.q_pow(arg.0).mul(&pa.t_pow(arg.1));
    let mut acc = pa.one();
    for (i, j) in la.boxes() {
        for (ip, jp) in mu.boxes() {
            let (di, dj) = (i as i64 - ip as i64, j as i64 - jp as i64);
            let n1 = one.sub(&a.mul(&pa.q1_pow(di + 1)).mul(&pa.q2_pow(dj)));
            let n2 = one.sub(&a.mul(&pa.q1_pow(di)).mul(&pa.q2_pow(dj + 1)));
            let d1 = one.sub(&a.mul(&pa.q1_pow(di)).mul(&pa.q2_pow(dj)));
            let d2 = one.sub(&a.mul(&pa.q1_pow(di + 1)).mul(&pa.q2_pow(dj + 1)));
            acc = acc.mul(&n1).mul(&n2).div(&d1.mul(&d2)).expect("generic argument");
        }
    }
    for (i, j) in la.boxes() {
        acc = acc.mul(&one.sub(&a.mul(&pa.q1_pow(i as i64)).mul(&pa.q2_pow(j as i64))));
    }
    for (ip, jp) in mu.boxes() {
        acc = acc.mul(&one.sub(&a.mul(&pa.q1_pow(1 - ip as i64)).mul(&pa.q2_pow(1 - jp as i64))));
    }
    Scalar::from_rf(acc)
}

/// Macdonald norm <P_l,P_l> = prod (1-q^{arm+1} t^{leg})/(1-q^{arm} t^{leg+1}).
pub fn macdonald_norm(pa: &Params, la: &Partition) -> Scalar {
    let tr = la.transpose();
    let one = pa.one();
    let mut acc = pa.one();
    for (i, j) in la.boxes() {
        let arm = la.part((i - 1) as usize) as i64 - j as i64;
        let leg = tr.part((j - 1) as usize) as i64 - i as i64;
        let n = one.sub(&pa.q_pow(arm + 1).mul(&pa.t_pow(leg)));
        let d = one.sub(&pa.q_pow(arm).mul(&pa.t_pow(leg + 1)));
        acc = acc.mul(&n.div(&d).expect("generic point"));
    }
    Scalar::from_rf(acc)
}

/// Vertical norm factor n_lambda = (-gamma)^{-|l|} N_{l,l}(1)^{-1} prod chi.
pub fn n_lambda(pa: &Params, la: &Partition) -> Result<Scalar> {
    let nek = nekrasov(pa, la, la, (0, 0))?;
    let rf = nek
        .as_rf()
        .ok_or_else(|| Error::DegenerateNorm(format!("N_{{l,l}}(1) at {}", la)))?;
    if rf.is_zero() {
        return Err(Error::DegenerateNorm(format!("N_{{l,l}}(1) = 0 at {}", la)));
    }
    let size = la.size() as i64;
    let mut acc = pa.gamma_pow(-size);
    if size % 2 != 0 {
        acc = acc.neg();
    }
    acc = acc.div(&rf)?;
    for b in la.boxes() {
        acc = acc.mul(&box_content(pa, b));
    }
    Ok(Scalar::from_rf(acc))
}

/// Content power sum S_lambda^{(k)} = sum_boxes chi^k via the finite row
/// closed form; exact for k of either sign (geometric resummation).
pub fn s_lambda_k(pa: &Params, la: &Partition, k: i64) -> Scalar {
    assert!(k != 0);
    let one = pa.one();
    let mut acc = pa.rf_int(0);
    for (i, &p) in la.parts().iter().enumerate() {
        acc = acc.add(&pa.q1_pow(i as i64 * k).mul(&one.sub(&pa.q2_pow(p as i64 * k))));
    }
    Scalar::from_rf(acc.div(&one.sub(&pa.q2_pow(k))).expect("generic point"))
}

/// Column closed form of the same sum; tests pin row = column = direct.
pub fn s_lambda_k_cols(pa: &Params, la: &Partition, k: i64) -> Scalar {
    assert!(k != 0);
    let tr = la.transpose();
    let one = pa.one();
    let mut acc = pa.rf_int(0);
    for (j, &p) in tr.parts().iter().enumerate() {
        acc = acc.add(&pa.q2_pow(j as i64 * k).mul(&one.sub(&pa.q1_pow(p as i64 * k))));
    }
    Scalar::from_rf(acc.div(&one.sub(&pa.q1_pow(k))).expect("generic point"))
}

/// chi^k summed literally over boxes; test oracle.
pub fn s_lambda_k_direct(pa: &Params, la: &Partition, k: i64) -> Scalar {
    let mut acc = pa.rf_int(0);
    for b in la.boxes() {
        acc = acc.add(&content_pow(pa, b, k));
    }
    Scalar::from_rf(acc)
}

/// Eigenvalue of b_k on the Macdonald state of lambda at the given weight:
/// (-gamma)^{-k} w^k c_k (sum_boxes chi^k - 1/((1-q1^k)(1-q2^k))).
pub fn b_k_eigenvalue(pa: &Params, la: &Partition, k: i64, weight: &Scalar) -> Scalar {
    let one = pa.one();
    let mut s = pa.rf_int(0);
    for b in la.boxes() {
        s = s.add(&content_pow(pa, b, k));
    }
    let reg = one
        .div(&one.sub(&pa.q1_pow(k)).mul(&one.sub(&pa.q2_pow(k))))
        .expect("generic point");
    let mut c = pa.gamma_pow(-k).mul(&pa.c_k(k)).mul(&s.sub(&reg));
    if k % 2 != 0 {
        c = c.neg();
    }
    weight.pow(k).expect("invertible weight").mul_rf(&c)
}

/// Framing eigenvalue prod_boxes q1^{i-1} q2^{j-1}.
pub fn framing_eigenvalue(pa: &Params, la: &Partition) -> Scalar {
    let mut acc = pa.one();
    for b in la.boxes() {
        acc = acc.mul(&box_content(pa, b));
    }
    Scalar::from_rf(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_involution_and_sizes() {
        for la in partitions_up_to(7) {
            assert_eq!(la.transpose().transpose(), la);
            assert_eq!(la.size(), la.transpose().size());
            assert_eq!(la.addable().len(), la.removable().len() + 1);
        }
    }

    #[test]
    fn enumeration_counts() {
        let counts = [1, 1, 2, 3, 5, 7, 11, 15, 22];
        for (n, &c) in counts.iter().enumerate() {
            assert_eq!(partitions_of(n as u32).len(), c);
        }
        assert_eq!(partitions_up_to(2).len(), 4);
    }

    #[test]
    fn pair_decomposition_exhaustive() {
        let mu = Partition::new(vec![1, 1]);
        let got = pair_decompositions(&mu);
        assert_eq!(got.len(), 3);
        assert!(got.contains(&(Partition::empty(), mu.clone())));
        assert!(got.contains(&(Partition::new(vec![1]), Partition::new(vec![1]))));
        assert!(got.contains(&(mu.clone(), Partition::empty())));
        let pa = Params::default_eval();
        assert_eq!(mu.zt_factor(&pa), pa.rf_int(2));
        for n in 0..=4 {
            for mu in partitions_of(n) {
                for (a, b) in pair_decompositions(&mu) {
                    assert_eq!(a.union(&b), mu);
                }
            }
        }
    }

    #[test]
    fn box_content_examples() {
        let pa = Params::symbolic();
        assert!(box_content(&pa, (1, 1)).is_one());
        assert_eq!(box_content(&pa, (2, 3)), pa.q1_pow(1).mul(&pa.q2_pow(2)));
        let sd = Params::self_dual_eval();
        assert_eq!(box_content(&sd, (1, 2)), sd.q_pow(1));
    }

    #[test]
    fn nekrasov_small_cases() {
        let pa = Params::symbolic();
        let e = Partition::empty();
        let b1 = Partition::new(vec![1]);
        let one = pa.one();
        assert_eq!(nekrasov(&pa, &e, &e, (0, 0)).unwrap(), pa.s_one());
        // generic argument a = q t^2
        let a = pa.q_pow(1).mul(&pa.t_pow(2));
        let got = nekrasov(&pa, &b1, &e, (1, 2)).unwrap();
        assert_eq!(got, Scalar::from_rf(one.sub(&a.mul(&pa.q1_pow(1)).mul(&pa.q2_pow(1)))));
        let got = nekrasov(&pa, &e, &b1, (1, 2)).unwrap();
        assert_eq!(got, Scalar::from_rf(one.sub(&a)));
        // argument exactly 1
        let got = nekrasov(&pa, &b1, &e, (0, 0)).unwrap();
        assert_eq!(got, Scalar::from_rf(one.sub(&pa.q1_pow(1).mul(&pa.q2_pow(1)))));
        let got = nekrasov(&pa, &b1, &b1, (0, 0)).unwrap();
        assert_eq!(
            got,
            Scalar::from_rf(one.sub(&pa.q1_pow(1)).mul(&one.sub(&pa.q2_pow(1))))
        );
    }

    #[test]
    fn nekrasov_matches_literal_oracle() {
        let pa = Params::default_eval();
        for la in partitions_up_to(3) {
            for mu in partitions_up_to(3) {
                let got = nekrasov(&pa, &la, &mu, (5, 7)).unwrap();
                let want = nekrasov_oracle(&pa, &la, &mu, (5, 7));
                assert_eq!(got, want, "la={} mu={}", la, mu);
            }
        }
    }

    #[test]
    fn macdonald_norm_examples() {
        let pa = Params::symbolic();
        let one = pa.one();
        assert_eq!(macdonald_norm(&pa, &Partition::empty()), pa.s_one());
        let got = macdonald_norm(&pa, &Partition::new(vec![1]));
        assert_eq!(
            got,
            Scalar::from_rf(one.sub(&pa.q_pow(1)).div(&one.sub(&pa.t_pow(1))).unwrap())
        );
        let got = macdonald_norm(&pa, &Partition::new(vec![2]));
        let expect = one
            .sub(&pa.q_pow(1))
            .mul(&one.sub(&pa.q_pow(2)))
            .div(&one.sub(&pa.t_pow(1)).mul(&one.sub(&pa.q_pow(1).mul(&pa.t_pow(1)))))
            .unwrap();
        assert_eq!(got, Scalar::from_rf(expect));
    }

    #[test]
    fn macdonald_norm_self_dual_is_one() {
        let pa = Params::self_dual_eval();
        for la in [
            Partition::empty(),
            Partition::new(vec![1]),
            Partition::new(vec![2]),
            Partition::new(vec![1, 1]),
        ] {
            assert_eq!(macdonald_norm(&pa, &la), pa.s_one());
        }
    }

    #[test]
    fn n_lambda_values() {
        let pa = Params::symbolic();
        assert_eq!(n_lambda(&pa, &Partition::empty()).unwrap(), pa.s_one());
        let one = pa.one();
        let got = n_lambda(&pa, &Partition::new(vec![1])).unwrap();
        let expect = pa
            .gamma_pow(-1)
            .neg()
            .div(&one.sub(&pa.q1_pow(1)).mul(&one.sub(&pa.q2_pow(1))))
            .unwrap();
        assert_eq!(got, Scalar::from_rf(expect));
        let ev = Params::default_eval();
        for la in partitions_up_to(4) {
            assert!(n_lambda(&ev, &la).is_ok(), "n_lambda degenerate at {}", la);
        }
    }

    #[test]
    fn content_sums_row_column_direct() {
        let pa = Params::default_eval();
        assert!(s_lambda_k(&pa, &Partition::empty(), 1).is_zero());
        assert_eq!(s_lambda_k(&pa, &Partition::new(vec![1]), 1), pa.s_one());
        let la21 = Partition::new(vec![2, 1]);
        let expect = pa
            .s_one()
            .add(&Scalar::from_rf(pa.q2_pow(1)))
            .add(&Scalar::from_rf(pa.q1_pow(1)));
        assert_eq!(s_lambda_k(&pa, &la21, 1), expect);
        for la in partitions_up_to(6) {
            for k in [-4i64, -3, -2, -1, 1, 2, 3, 4] {
                let row = s_lambda_k(&pa, &la, k);
                let col = s_lambda_k_cols(&pa, &la, k);
                let dir = s_lambda_k_direct(&pa, &la, k);
                assert_eq!(row, col, "la={} k={}", la, k);
                assert_eq!(row, dir, "la={} k={}", la, k);
            }
        }
    }
}
