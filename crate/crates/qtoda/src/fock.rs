//! Degree-truncated charged bosonic Fock spaces.
//!
//! States are finite linear combinations of the PBW basis J_{-l1} J_{-l2}...
//! acting on a weighted vacuum, with coefficients in either [`Scalar`] or
//! [`PSeries`]. The Gram pairing is <J_{-l}, J_{-m}> = delta z_l with
//! z_l = prod_k k^{m_k} m_k!.

use std::collections::BTreeMap;
use std::fmt;

use crate::partition::Partition;
use crate::ring::{Mono, Params, Scalar};
use crate::series::{PSeries, Trunc};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// weights
// ---------------------------------------------------------------------------

/// Weight label: +- (monomial in u,v,...) * Q^qp * T^tp, always invertible.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Weight {
    pub neg: bool,
    pub mono: Mono,
    pub qp: i64,
    pub tp: i64,
}

impl Weight {
    pub fn one() -> Weight {
        Weight { neg: false, mono: Mono::one(), qp: 0, tp: 0 }
    }

    /// The generic horizontal weight u.
    pub fn u() -> Weight {
        Weight { neg: false, mono: Mono::u_pow(1), qp: 0, tp: 0 }
    }

    /// The generic vertical weight v.
    pub fn v() -> Weight {
        Weight { neg: false, mono: Mono::v_pow(1), qp: 0, tp: 0 }
    }

    pub fn qt(qp: i64, tp: i64) -> Weight {
        Weight { neg: false, mono: Mono::one(), qp, tp }
    }

    pub fn negated(&self) -> Weight {
        Weight { neg: !self.neg, ..*self }
    }

    pub fn mul(&self, o: &Weight) -> Weight {
        Weight {
            neg: self.neg ^ o.neg,
            mono: self.mono.mul(&o.mono),
            qp: self.qp + o.qp,
            tp: self.tp + o.tp,
        }
    }

    pub fn inv(&self) -> Weight {
        Weight { neg: self.neg, mono: self.mono.inv(), qp: -self.qp, tp: -self.tp }
    }

    pub fn ratio(&self, o: &Weight) -> Weight {
        self.mul(&o.inv())
    }

    /// Multiply by q^a t^b.
    pub fn shift_qt(&self, a: i64, b: i64) -> Weight {
        self.mul(&Weight::qt(4 * a, 4 * b))
    }

    /// Multiply by gamma^{n/2}.
    pub fn shift_gamma_half(&self, n: i64) -> Weight {
        self.mul(&Weight::qt(-n, n))
    }

    pub fn as_scalar(&self, pa: &Params) -> Scalar {
        let rf = pa.qt(self.qp, self.tp);
        let rf = if self.neg { rf.neg() } else { rf };
        Scalar::term(rf, self.mono)
    }

    pub fn pow(&self, e: i64) -> Weight {
        Weight {
            neg: self.neg && e % 2 != 0,
            mono: self.mono.pow(e),
            qp: self.qp * e,
            tp: self.tp * e,
        }
    }

    /// Canonical form under the current parameters: in self-dual mode T = Q
    /// exactly, so the T-exponent folds into the Q-exponent.
    pub fn canon(self, pa: &Params) -> Weight {
        if pa.is_self_dual() {
            Weight { neg: self.neg, mono: self.mono, qp: self.qp + self.tp, tp: 0 }
        } else {
            self
        }
    }

    /// Parse a pure parameter monomial q^a t^b (no symbols, positive sign).
    pub fn as_qt_ratio(&self) -> Option<(i64, i64)> {
        if self.neg || !self.mono.is_one() {
            return None;
        }
        if self.qp % 4 != 0 || self.tp % 4 != 0 {
            return None;
        }
        Some((self.qp / 4, self.tp / 4))
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.neg {
            write!(f, "-")?;
        }
        write!(f, "{}", self.mono)?;
        if self.qp != 0 {
            write!(f, "*Q^{}", self.qp)?;
        }
        if self.tp != 0 {
            write!(f, "*T^{}", self.tp)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// coefficient abstraction
// ---------------------------------------------------------------------------

/// Coefficient ring of a Fock state: exact scalars or truncated time series.
pub trait Coeff: Clone + PartialEq {
    fn c_zero(like: &Self) -> Self;
    fn c_is_zero(&self) -> bool;
    fn c_add(&self, o: &Self) -> Self;
    fn c_neg(&self) -> Self;
    fn c_mul(&self, o: &Self) -> Self;
    fn c_mul_scalar(&self, s: &Scalar) -> Self;
}

impl Coeff for Scalar {
    fn c_zero(_like: &Self) -> Self {
        Scalar::zero()
    }
    fn c_is_zero(&self) -> bool {
        self.is_zero()
    }
    fn c_add(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn c_neg(&self) -> Self {
        self.neg()
    }
    fn c_mul(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn c_mul_scalar(&self, s: &Scalar) -> Self {
        self.mul(s)
    }
}

impl Coeff for PSeries {
    fn c_zero(like: &Self) -> Self {
        PSeries::zero(like.trunc)
    }
    fn c_is_zero(&self) -> bool {
        self.is_zero()
    }
    fn c_add(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn c_neg(&self) -> Self {
        self.neg()
    }
    fn c_mul(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn c_mul_scalar(&self, s: &Scalar) -> Self {
        self.mul_scalar(s)
    }
}

// ---------------------------------------------------------------------------
// states on several tensor legs
// ---------------------------------------------------------------------------

/// State on one or more tensor legs: weights per leg, coefficients per basis
/// tuple. Single-leg Fock states are the one-leg case.
#[derive(Clone, PartialEq, Debug)]
pub struct State<C: Coeff> {
    pub weights: Vec<Weight>,
    /// degree cap (total boxes over all legs)
    pub trunc_deg: u32,
    terms: BTreeMap<Vec<Partition>, C>,
}

impl<C: Coeff> State<C> {
    pub fn vacuum(weights: Vec<Weight>, trunc_deg: u32, one: C) -> State<C> {
        let legs = weights.len();
        let mut terms = BTreeMap::new();
        terms.insert(vec![Partition::empty(); legs], one);
        State { weights, trunc_deg, terms }
    }

    pub fn zero(weights: Vec<Weight>, trunc_deg: u32) -> State<C> {
        State { weights, trunc_deg, terms: BTreeMap::new() }
    }

    pub fn basis(weights: Vec<Weight>, trunc_deg: u32, parts: Vec<Partition>, one: C) -> State<C> {
        let mut s = State::zero(weights, trunc_deg);
        s.insert_add(parts, one);
        s
    }

    pub fn legs(&self) -> usize {
        self.weights.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<Partition>, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, key: &Vec<Partition>) -> Option<&C> {
        self.terms.get(key)
    }

    pub fn insert_add(&mut self, key: Vec<Partition>, c: C) {
        if c.c_is_zero() {
            return;
        }
        let deg: u32 = key.iter().map(|p| p.size()).sum();
        if deg > self.trunc_deg {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(e) => {
                let s = e.c_add(&c);
                if s.c_is_zero() {
                    self.terms.remove(&key);
                } else {
                    *e = s;
                }
            }
            None => {
                self.terms.insert(key, c);
            }
        }
    }

    pub fn add(&self, o: &State<C>) -> Result<State<C>> {
        if self.weights != o.weights {
            return Err(Error::WeightMismatch(format!(
                "{} vs {}",
                weights_str(&self.weights),
                weights_str(&o.weights)
            )));
        }
        let mut r = self.clone();
        r.trunc_deg = r.trunc_deg.min(o.trunc_deg);
        for (k, c) in &o.terms {
            r.insert_add(k.clone(), c.clone());
        }
        Ok(r)
    }

    pub fn neg(&self) -> State<C> {
        State {
            weights: self.weights.clone(),
            trunc_deg: self.trunc_deg,
            terms: self.terms.iter().map(|(k, c)| (k.clone(), c.c_neg())).collect(),
        }
    }

    pub fn sub(&self, o: &State<C>) -> Result<State<C>> {
        self.add(&o.neg())
    }

    pub fn scale(&self, s: &Scalar) -> State<C> {
        let mut r = State::zero(self.weights.clone(), self.trunc_deg);
        for (k, c) in &self.terms {
            r.insert_add(k.clone(), c.c_mul_scalar(s));
        }
        r
    }

    pub fn map_coeff<D: Coeff>(&self, f: impl Fn(&C) -> D) -> State<D> {
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            let d = f(c);
            if !d.c_is_zero() {
                terms.insert(k.clone(), d);
            }
        }
        State { weights: self.weights.clone(), trunc_deg: self.trunc_deg, terms }
    }

    /// Heisenberg mode J_k on one leg, truncating silently above the cap.
    pub fn apply_j_trunc(&self, pa: &Params, leg: usize, k: i64) -> State<C> {
        assert!(k != 0);
        let mut r = State::zero(self.weights.clone(), self.trunc_deg);
        for (key, c) in &self.terms {
            let la = &key[leg];
            if k < 0 {
                let mut parts: Vec<u32> = la.parts().to_vec();
                parts.push((-k) as u32);
                parts.sort_unstable_by(|a, b| b.cmp(a));
                let mut nk = key.clone();
                nk[leg] = Partition::new(parts);
                r.insert_add(nk, c.clone());
            } else {
                // [J_k, J_{-k}^m] = k m J_{-k}^{m-1}
                let m = la.multiplicity(k as u32) as i64;
                if m == 0 {
                    continue;
                }
                let mut parts: Vec<u32> = la.parts().to_vec();
                let pos = parts.iter().position(|&p| p == k as u32).unwrap();
                parts.remove(pos);
                let mut nk = key.clone();
                nk[leg] = Partition::new(parts);
                r.insert_add(nk, c.c_mul_scalar(&pa.s_int(k * m)));
            }
        }
        r
    }

    /// Spec-level J_k action on a single-leg state; raising above the
    /// truncation degree is an error.
    pub fn apply_j(&self, pa: &Params, k: i64) -> Result<State<C>> {
        assert_eq!(self.legs(), 1);
        if k < 0 {
            let max_deg = self.terms.keys().map(|p| p[0].size()).max().unwrap_or(0);
            if max_deg + (-k) as u32 > self.trunc_deg {
                return Err(Error::TruncationExceeded(format!(
                    "J_{} on degree {} exceeds cap {}",
                    k, max_deg, self.trunc_deg
                )));
            }
        }
        Ok(self.apply_j_trunc(pa, 0, k))
    }

    /// Total degree of the highest stored basis vector.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|p| p.iter().map(|q| q.size()).sum()).max().unwrap_or(0)
    }

    /// Restriction to basis vectors of total degree at most d.
    pub fn truncate_degree(&self, d: u32) -> State<C> {
        let mut r = State::zero(self.weights.clone(), d);
        for (k, c) in &self.terms {
            r.insert_add(k.clone(), c.clone());
        }
        r
    }

    /// Gram pairing against another state with matching weights.
    pub fn inner(&self, pa: &Params, o: &State<C>) -> Result<C> {
        if self.weights != o.weights {
            return Err(Error::WeightMismatch(format!(
                "{} vs {}",
                weights_str(&self.weights),
                weights_str(&o.weights)
            )));
        }
        let mut acc: Option<C> = None;
        for (k, a) in &self.terms {
            if let Some(b) = o.terms.get(k) {
                let mut z = pa.one();
                for la in k {
                    z = z.mul(&la.z_factor(pa));
                }
                let piece = a.c_mul(b).c_mul_scalar(&Scalar::from_rf(z));
                acc = Some(match acc {
                    None => piece,
                    Some(x) => x.c_add(&piece),
                });
            }
        }
        Ok(match acc {
            Some(x) => x,
            None => {
                let any = self.terms.values().next().or_else(|| o.terms.values().next());
                match any {
                    Some(c) => C::c_zero(c),
                    None => return Err(Error::Domain("inner of two empty states".into())),
                }
            }
        })
    }

    /// alpha^{L0} on one leg: scales a degree-d basis vector by alpha^d.
    pub fn l0_scale(&self, leg: usize, alpha: &Scalar) -> State<C> {
        let mut r = State::zero(self.weights.clone(), self.trunc_deg);
        for (k, c) in &self.terms {
            let d = k[leg].size() as i64;
            let f = alpha.pow(d).expect("invertible grading parameter");
            r.insert_add(k.clone(), c.c_mul_scalar(&f));
        }
        r
    }

    /// u-hat^power on one leg: multiply the coefficient by the leg weight.
    pub fn u_hat(&self, pa: &Params, leg: usize, power: i64) -> State<C> {
        let w = self.weights[leg].pow(power).as_scalar(pa);
        self.scale(&w)
    }

    /// alpha^{d-hat} on one leg: relabel the weight u -> u / alpha.
    pub fn d_hat_relabel(&self, leg: usize, alpha: &Weight) -> State<C> {
        let mut r = self.clone();
        r.weights[leg] = r.weights[leg].mul(&alpha.inv());
        r
    }

    /// Relabel a leg weight by an explicit multiplier.
    pub fn relabel(&self, leg: usize, multiplier: &Weight) -> State<C> {
        let mut r = self.clone();
        r.weights[leg] = r.weights[leg].mul(multiplier);
        r
    }

    /// Canonicalize all leg weights under the current parameters.
    pub fn canon_weights(&self, pa: &Params) -> State<C> {
        let mut r = self.clone();
        for w in r.weights.iter_mut() {
            *w = w.canon(pa);
        }
        r
    }
}

fn weights_str(w: &[Weight]) -> String {
    w.iter().map(|x| format!("{}", x)).collect::<Vec<_>>().join(" ; ")
}

// ---------------------------------------------------------------------------
// coherent dressings
// ---------------------------------------------------------------------------

/// e^{sum_{k>0} t_{-k} J_{-k}} applied on one leg, promoting coefficients to
/// time series: the ket-side dressing. Negative-index times act through the
/// chosen alphabet offset (0 for t, handled by the caller via substitution).
pub fn ket_dress(pa: &Params, st: &State<Scalar>, leg: usize, trunc: Trunc) -> State<PSeries> {
    use crate::series::{TKey, TimeVar};
    let mut out: State<PSeries> = State::zero(st.weights.clone(), st.trunc_deg);
    for (key, c) in st.terms() {
        let base_deg: u32 = key.iter().map(|p| p.size()).sum();
        let room = st.trunc_deg.saturating_sub(base_deg).min(trunc.t_deg);
        for la in crate::partition::partitions_up_to(room) {
            if la.part(0) as usize > trunc.k_max {
                continue;
            }
            let mut tkey = TKey::one();
            for &p in la.parts() {
                tkey = tkey.mul(&TKey::var(TimeVar::T(-(p as i64))));
            }
            let coeff = pa.one().div(&la.zt_factor(pa)).unwrap();
            let ps = PSeries::term(trunc, tkey, c.mul(&Scalar::from_rf(coeff)));
            if ps.is_zero() {
                continue;
            }
            let mut parts: Vec<u32> = key[leg].parts().to_vec();
            parts.extend_from_slice(la.parts());
            parts.sort_unstable_by(|a, b| b.cmp(a));
            let mut nk = key.clone();
            nk[leg] = Partition::new(parts);
            out.insert_add(nk, ps);
        }
    }
    out
}

/// Contract a dressed state against <w| e^{sum_k t_k J_k} on every leg:
/// sum over basis tuples of prod_legs (t_lambda z_lambda / z~_lambda) times
/// the coefficient. Equivalent to pairing with the coherent bra.
pub fn contract_with_bra(
    pa: &Params,
    st: &State<PSeries>,
    bra_weights: &[Weight],
) -> Result<PSeries> {
    use crate::series::{TKey, TimeVar};
    if st.weights != bra_weights {
        return Err(Error::WeightMismatch(format!(
            "bra {} vs ket {}",
            weights_str(bra_weights),
            weights_str(&st.weights)
        )));
    }
    let trunc = match st.terms().next() {
        Some((_, c)) => c.trunc,
        None => return Ok(PSeries::zero(Trunc::times_only(0, 1))),
    };
    let mut acc = PSeries::zero(trunc);
    for (key, c) in st.terms() {
        let mut tkey = TKey::one();
        let mut factor = pa.one();
        let mut ok = true;
        for la in key {
            if la.part(0) as usize > trunc.k_max {
                ok = false;
                break;
            }
            for &p in la.parts() {
                tkey = tkey.mul(&TKey::var(TimeVar::T(p as i64)));
            }
            factor = factor.mul(&la.z_factor(pa)).div(&la.zt_factor(pa)).unwrap();
        }
        if !ok {
            continue;
        }
        acc.add_assign(&c.mul(&PSeries::term(trunc, tkey, Scalar::from_rf(factor))));
    }
    Ok(acc)
}

/// Gram pairing oracle computed purely by commutator moves:
/// <0| J_{l1} J_{l2} ... J_{-m1} J_{-m2} ... |0> evaluated recursively.
pub fn gram_oracle(pa: &Params, la: &Partition, mu: &Partition) -> Scalar {
    fn rec(pa: &Params, pos: &[u32], neg: &[u32]) -> Scalar {
        if pos.is_empty() {
            return if neg.is_empty() { pa.s_one() } else { Scalar::zero() };
        }
        let k = *pos.last().unwrap();
        let rest = &pos[..pos.len() - 1];
        let mut acc = Scalar::zero();
        for (i, &m) in neg.iter().enumerate() {
            if m == k {
                let mut nn = neg.to_vec();
                nn.remove(i);
                acc.add_assign(&rec(pa, rest, &nn).mul(&pa.s_int(k as i64)));
            }
        }
        acc
    }
    rec(pa, la.parts(), mu.parts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::partitions_up_to;
    use crate::series::{TKey, TimeVar};

    fn pa() -> Params {
        Params::default_eval()
    }

    fn vac(d: u32) -> State<Scalar> {
        State::vacuum(vec![Weight::u()], d, Params::default_eval().s_one())
    }

    #[test]
    fn heisenberg_commutators() {
        let pa = pa();
        let v = vac(6);
        let s = v.apply_j(&pa, -1).unwrap().apply_j(&pa, 1).unwrap();
        assert_eq!(s, v);
        let s = v.apply_j(&pa, -1).unwrap().apply_j(&pa, -1).unwrap().apply_j(&pa, 2).unwrap();
        assert!(s.is_zero());
        let s = v.apply_j(&pa, -2).unwrap().apply_j(&pa, 1).unwrap();
        assert!(s.is_zero());
        for la in partitions_up_to(4) {
            for k in 1..=2i64 {
                if la.size() + (k as u32) > 6 {
                    continue;
                }
                let b = State::basis(vec![Weight::u()], 6, vec![la.clone()], pa.s_one());
                let ab = b.apply_j(&pa, -k).unwrap().apply_j(&pa, k).unwrap();
                let ba = b.apply_j(&pa, k).unwrap().apply_j(&pa, -k).unwrap();
                let diff = ab.sub(&ba).unwrap();
                let expect = b.scale(&pa.s_int(k));
                assert_eq!(diff, expect, "la={} k={}", la, k);
            }
        }
        assert!(vac(1).apply_j(&pa, -2).is_err());
    }

    #[test]
    fn gram_matrix_matches_commutator_oracle() {
        let pa = pa();
        for la in partitions_up_to(4) {
            for mu in partitions_up_to(4) {
                let a = State::basis(vec![Weight::u()], 6, vec![la.clone()], pa.s_one());
                let b = State::basis(vec![Weight::u()], 6, vec![mu.clone()], pa.s_one());
                let g = a.inner(&pa, &b).unwrap();
                let oracle = gram_oracle(&pa, &la, &mu);
                assert_eq!(g, oracle, "la={} mu={}", la, mu);
                if la == mu {
                    assert_eq!(g, Scalar::from_rf(la.z_factor(&pa)));
                }
            }
        }
        let v = vac(6);
        assert_eq!(v.inner(&pa, &v).unwrap(), pa.s_one());
        let j1 = v.apply_j(&pa, -1).unwrap();
        assert_eq!(j1.inner(&pa, &j1).unwrap(), pa.s_one());
        let j2 = v.apply_j(&pa, -2).unwrap();
        assert_eq!(j2.inner(&pa, &j2).unwrap(), pa.s_int(2));
    }

    #[test]
    fn weight_mismatch_is_an_error() {
        let pa = pa();
        let a = vac(4);
        let b = State::vacuum(vec![Weight::u().shift_qt(1, 0)], 4, pa.s_one());
        assert!(matches!(a.inner(&pa, &b), Err(Error::WeightMismatch(_))));
    }

    #[test]
    fn coherent_pairing_reproduces_trivial_tau() {
        // <u| e^{sum t_k J_k} e^{sum t_{-k} J_{-k}} |u> = exp(sum k t_k t_{-k})
        let pa = pa();
        let trunc = Trunc::times_only(6, 4);
        let v = vac(6);
        let ket = ket_dress(&pa, &v, 0, trunc);
        let got = contract_with_bra(&pa, &ket, &[Weight::u()]).unwrap();
        let mut expo = PSeries::zero(trunc);
        for k in 1..=4i64 {
            let tk = PSeries::var(trunc, TimeVar::T(k), &pa);
            let tmk = PSeries::var(trunc, TimeVar::T(-k), &pa);
            expo.add_assign(&tk.mul(&tmk).mul_rf(&pa.rf_int(k)));
        }
        let expect = expo.exp(&pa).unwrap();
        assert_eq!(got, expect);
        // ket side has no positive-time dependence
        let t1 = TKey::var(TimeVar::T(1));
        for (_, c) in ket.terms() {
            assert!(c.coeff(&t1).is_zero());
        }
        // coefficient of t_{-1} on the ket side is J_{-1}|u>
        let tm1 = TKey::var(TimeVar::T(-1));
        let mut j1_coeff: State<Scalar> = State::zero(vec![Weight::u()], 6);
        for (key, c) in ket.terms() {
            let s = c.coeff(&tm1);
            if !s.is_zero() {
                j1_coeff.insert_add(key.clone(), s);
            }
        }
        let expect = v.apply_j(&pa, -1).unwrap();
        assert_eq!(j1_coeff, expect);
    }

    #[test]
    fn grading_operators() {
        let pa = pa();
        let v = vac(6);
        let al = Scalar::term(pa.one(), Mono::alpha_pow(1));
        let s = v.apply_j(&pa, -2).unwrap();
        let scaled = s.l0_scale(0, &al);
        assert_eq!(scaled, s.scale(&al.mul(&al)));
        let s1 = s.u_hat(&pa, 0, 1);
        assert_eq!(s1, s.scale(&Scalar::term(pa.one(), Mono::u_pow(1))));
        let aw = Weight::qt(4, 0); // alpha = q
        let rel = v.d_hat_relabel(0, &aw);
        assert_eq!(rel.weights[0], Weight::u().shift_qt(-1, 0));
        for la in partitions_up_to(3) {
            let b = State::basis(vec![Weight::u()], 6, vec![la.clone()], pa.s_one());
            let scaled = b.l0_scale(0, &al);
            let expect = b.scale(&al.pow(la.size() as i64).unwrap());
            assert_eq!(scaled, expect);
        }
    }
}
