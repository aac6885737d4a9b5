//! Truncated time-series and windowed Laurent-series arithmetic.
//!
//! A [`PSeries`] is a polynomial in two alphabets of time variables
//! t_{+-1..+-K} and e_{+-1..+-K} with [`Scalar`] coefficients. The first
//! alphabet is truncated by weighted degree (t_k has weight |k|), the second
//! by the number of factors. The second alphabet plays the role of either the
//! primed times t'_k or the time differences eps_k = gamma^{|k|} t_k - t'_k,
//! depending on the substitution applied.
//!
//! A [`ZSeries`] is a Laurent series in one formal variable with payloads in
//! any coefficient-like type, together with the window on which coefficients
//! are guaranteed exact. Contour integrals are coefficient extractions:
//! the 0-contour picks the z^{-1} coefficient of the 0-expansion, and the
//! infinity-contour picks minus the z^{-1} coefficient of the
//! infinity-expansion.

use std::collections::BTreeMap;

use crate::ring::{Mutation, Params, Rf, Scalar};
use crate::{Error, Result};

/// Maximum number of time indices per alphabet and sign.
pub const MAX_K: usize = 8;

/// Time variable: first alphabet T(k) or second alphabet E(k), k != 0.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TimeVar {
    T(i64),
    E(i64),
}

impl TimeVar {
    fn slot(self) -> usize {
        let (base, k) = match self {
            TimeVar::T(k) => (0usize, k),
            TimeVar::E(k) => (16usize, k),
        };
        assert!(k != 0 && k.unsigned_abs() as usize <= MAX_K, "time index out of range");
        if k > 0 {
            base + (k - 1) as usize
        } else {
            base + 8 + (-k - 1) as usize
        }
    }

    pub fn index(self) -> i64 {
        match self {
            TimeVar::T(k) | TimeVar::E(k) => k,
        }
    }
}

/// Exponent vector over the 32 time-variable slots.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct TKey(pub [u8; 32]);

impl TKey {
    pub fn one() -> TKey {
        TKey([0; 32])
    }

    pub fn get(&self, slot: usize) -> u32 {
        self.0[slot] as u32
    }

    fn with(&self, slot: usize, val: u32) -> TKey {
        assert!(val < 256, "exponent too large");
        let mut r = *self;
        r.0[slot] = val as u8;
        r
    }

    pub fn mul(&self, o: &TKey) -> TKey {
        let mut r = *self;
        for slot in 0..32 {
            r.0[slot] += o.0[slot];
        }
        r
    }

    pub fn var(v: TimeVar) -> TKey {
        TKey::one().with(v.slot(), 1)
    }

    /// Weighted degree of the first alphabet (t_k counts |k|).
    pub fn t_degree(&self) -> u32 {
        let mut d = 0;
        for k in 1..=8usize {
            d += self.get(k - 1) * k as u32;
            d += self.get(8 + k - 1) * k as u32;
        }
        d
    }

    /// Number of factors from the second alphabet.
    pub fn e_order(&self) -> u32 {
        let mut d = 0;
        for slot in 16..32 {
            d += self.get(slot);
        }
        d
    }

    pub fn exponents(&self) -> Vec<(TimeVar, u32)> {
        let mut out = Vec::new();
        for k in 1..=8i64 {
            for v in [TimeVar::T(k), TimeVar::T(-k), TimeVar::E(k), TimeVar::E(-k)] {
                let e = self.get(v.slot());
                if e > 0 {
                    out.push((v, e));
                }
            }
        }
        out
    }

    pub fn name(&self, second_alphabet: &str) -> String {
        if *self == TKey::one() {
            return "1".into();
        }
        let mut parts = Vec::new();
        for (v, e) in self.exponents() {
            let base = match v {
                TimeVar::T(k) => format!("t{}", k),
                TimeVar::E(k) => format!("{}{}", second_alphabet, k),
            };
            if e == 1 {
                parts.push(base);
            } else {
                parts.push(format!("{}^{}", base, e));
            }
        }
        parts.join(" ")
    }
}

/// Truncation policy: weighted degree cap for the t-alphabet, factor-count
/// cap for the e-alphabet.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Trunc {
    pub t_deg: u32,
    pub e_ord: u32,
    pub k_max: usize,
}

impl Trunc {
    pub fn new(t_deg: u32, e_ord: u32, k_max: usize) -> Trunc {
        assert!(t_deg < 64 && e_ord < 64 && k_max <= MAX_K);
        Trunc { t_deg, e_ord, k_max }
    }

    pub fn times_only(t_deg: u32, k_max: usize) -> Trunc {
        Trunc::new(t_deg, 0, k_max)
    }

    fn admits(&self, key: &TKey) -> bool {
        key.t_degree() <= self.t_deg && key.e_order() <= self.e_ord
    }

    fn min(&self, o: &Trunc) -> Trunc {
        Trunc {
            t_deg: self.t_deg.min(o.t_deg),
            e_ord: self.e_ord.min(o.e_ord),
            k_max: self.k_max.min(o.k_max),
        }
    }
}

/// Truncated polynomial in the time variables over [`Scalar`].
#[derive(Clone, PartialEq, Debug)]
pub struct PSeries {
    pub trunc: Trunc,
    terms: BTreeMap<TKey, Scalar>,
}

impl PSeries {
    pub fn zero(trunc: Trunc) -> PSeries {
        PSeries { trunc, terms: BTreeMap::new() }
    }

    pub fn from_scalar(trunc: Trunc, s: Scalar) -> PSeries {
        let mut r = PSeries::zero(trunc);
        if !s.is_zero() {
            r.terms.insert(TKey::one(), s);
        }
        r
    }

    pub fn one(trunc: Trunc, pa: &Params) -> PSeries {
        PSeries::from_scalar(trunc, pa.s_one())
    }

    pub fn var(trunc: Trunc, v: TimeVar, pa: &Params) -> PSeries {
        PSeries::term(trunc, TKey::var(v), pa.s_one())
    }

    pub fn term(trunc: Trunc, key: TKey, s: Scalar) -> PSeries {
        let mut r = PSeries::zero(trunc);
        if !s.is_zero() && trunc.admits(&key) {
            r.terms.insert(key, s);
        }
        r
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TKey, &Scalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, key: &TKey) -> Scalar {
        self.terms.get(key).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn constant_term(&self) -> Scalar {
        self.coeff(&TKey::one())
    }

    pub fn insert_add(&mut self, key: TKey, s: &Scalar) {
        if s.is_zero() || !self.trunc.admits(&key) {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(e) => {
                e.add_assign(s);
                if e.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, s.clone());
            }
        }
    }

    pub fn add_assign(&mut self, o: &PSeries) {
        self.trunc = self.trunc.min(&o.trunc);
        for (k, s) in &o.terms {
            self.insert_add(*k, s);
        }
    }

    pub fn add(&self, o: &PSeries) -> PSeries {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn sub(&self, o: &PSeries) -> PSeries {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> PSeries {
        PSeries {
            trunc: self.trunc,
            terms: self.terms.iter().map(|(k, s)| (*k, s.neg())).collect(),
        }
    }

    pub fn mul(&self, o: &PSeries) -> PSeries {
        let trunc = self.trunc.min(&o.trunc);
        let mut r = PSeries::zero(trunc);
        for (ka, sa) in &self.terms {
            if !trunc.admits(ka) {
                continue;
            }
            for (kb, sb) in &o.terms {
                if ka.t_degree() + kb.t_degree() > trunc.t_deg
                    || ka.e_order() + kb.e_order() > trunc.e_ord
                {
                    continue;
                }
                r.insert_add(ka.mul(kb), &sa.mul(sb));
            }
        }
        r
    }

    pub fn mul_scalar(&self, s: &Scalar) -> PSeries {
        if s.is_zero() {
            return PSeries::zero(self.trunc);
        }
        let mut r = PSeries::zero(self.trunc);
        for (k, c) in &self.terms {
            r.insert_add(*k, &c.mul(s));
        }
        r
    }

    pub fn mul_rf(&self, rf: &Rf) -> PSeries {
        self.mul_scalar(&Scalar::from_rf(rf.clone()))
    }

    /// Formal derivative with respect to a time variable.
    pub fn deriv(&self, v: TimeVar, pa: &Params) -> PSeries {
        let slot = v.slot();
        let mut r = PSeries::zero(self.trunc);
        for (k, s) in &self.terms {
            let e = k.get(slot);
            if e == 0 {
                continue;
            }
            let nk = k.with(slot, e - 1);
            r.insert_add(nk, &s.mul_rf(&pa.rf_int(e as i64)));
        }
        r
    }

    /// Truncated exponential; the constant term must vanish.
    pub fn exp(&self, pa: &Params) -> Result<PSeries> {
        if !self.constant_term().is_zero() {
            return Err(Error::NonzeroConstantTerm);
        }
        let mut acc = PSeries::one(self.trunc, pa);
        let mut pow = PSeries::one(self.trunc, pa);
        let nmax = (self.trunc.t_deg + self.trunc.e_ord) as i64;
        for n in 1..=nmax {
            pow = pow.mul(self);
            if pow.is_zero() {
                break;
            }
            acc.add_assign(&pow.mul_rf(&pa.rf_ratio(1, crate::partition::factorial(n))));
        }
        Ok(acc)
    }

    /// Substitute every variable by a Laurent-graded series.
    pub fn subst(&self, _pa: &Params, f: impl Fn(TimeVar) -> ZPSeries) -> ZPSeries {
        let mut cache: BTreeMap<(usize, u32), ZPSeries> = BTreeMap::new();
        let mut out: ZPSeries = ZSeries::complete();
        for (key, s) in &self.terms {
            let mut term = ZPSeries::from_pseries(PSeries::from_scalar(self.trunc, s.clone()));
            for (v, e) in key.exponents() {
                let slot = v.slot();
                let p = cache.entry((slot, e)).or_insert_with(|| {
                    let base = f(v);
                    let mut acc = base.clone();
                    for _ in 1..e {
                        acc = acc.mul(&base);
                    }
                    acc
                });
                term = term.mul(p);
            }
            out = out.add(&term);
        }
        out
    }

    /// Restriction to weighted t-degree at most `t_deg`.
    pub fn truncated(&self, t_deg: u32) -> PSeries {
        let mut trunc = self.trunc;
        trunc.t_deg = trunc.t_deg.min(t_deg);
        let mut r = PSeries::zero(trunc);
        for (k, s) in &self.terms {
            r.insert_add(*k, s);
        }
        r
    }

    /// Grade the series by the number of second-alphabet factors.
    pub fn split_by_e_order(&self) -> BTreeMap<u32, PSeries> {
        let mut out: BTreeMap<u32, PSeries> = BTreeMap::new();
        for (k, s) in &self.terms {
            out.entry(k.e_order()).or_insert_with(|| PSeries::zero(self.trunc)).insert_add(*k, s);
        }
        out
    }

    /// Rescale t_k -> c(k)^{e} per exponent (gamma-type rescale of times).
    pub fn rescale_t(&self, pa: &Params, c: impl Fn(i64) -> Rf) -> PSeries {
        let mut r = PSeries::zero(self.trunc);
        for (key, s) in &self.terms {
            let mut factor = pa.one();
            for (v, e) in key.exponents() {
                if let TimeVar::T(k) = v {
                    factor = factor.mul(&c(k).pow(e as i64).expect("invertible rescale"));
                }
            }
            r.insert_add(*key, &s.mul_rf(&factor));
        }
        r
    }
}

// ---------------------------------------------------------------------------
// Laurent windows
// ---------------------------------------------------------------------------

/// Window bound: `Complete` means structurally no terms beyond those stored.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Bound {
    Complete,
    Win(i64),
}

/// Payload of a Laurent window.
pub trait ZPayload: Clone {
    fn z_zero(like: &Self) -> Self;
    fn z_is_zero(&self) -> bool;
    fn z_add(&self, o: &Self) -> Self;
    fn z_neg(&self) -> Self;
}

impl ZPayload for PSeries {
    fn z_zero(like: &Self) -> Self {
        PSeries::zero(like.trunc)
    }
    fn z_is_zero(&self) -> bool {
        self.is_zero()
    }
    fn z_add(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn z_neg(&self) -> Self {
        self.neg()
    }
}

impl ZPayload for Scalar {
    fn z_zero(_like: &Self) -> Self {
        Scalar::zero()
    }
    fn z_is_zero(&self) -> bool {
        self.is_zero()
    }
    fn z_add(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn z_neg(&self) -> Self {
        self.neg()
    }
}

/// Laurent series in one formal variable with an exactness window.
#[derive(Clone, PartialEq, Debug)]
pub struct ZSeries<P: ZPayload> {
    terms: BTreeMap<i64, P>,
    pub lo: Bound,
    pub hi: Bound,
}

impl<P: ZPayload> ZSeries<P> {
    pub fn complete() -> ZSeries<P> {
        ZSeries { terms: BTreeMap::new(), lo: Bound::Complete, hi: Bound::Complete }
    }

    pub fn windowed(lo: Bound, hi: Bound) -> ZSeries<P> {
        ZSeries { terms: BTreeMap::new(), lo, hi }
    }

    pub fn single(n: i64, p: P) -> ZSeries<P> {
        let mut z = ZSeries::complete();
        if !p.z_is_zero() {
            z.terms.insert(n, p);
        }
        z
    }

    pub fn insert_add(&mut self, n: i64, p: P) {
        if p.z_is_zero() {
            return;
        }
        match self.terms.get_mut(&n) {
            Some(e) => {
                let s = e.z_add(&p);
                if s.z_is_zero() {
                    self.terms.remove(&n);
                } else {
                    *e = s;
                }
            }
            None => {
                self.terms.insert(n, p);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&i64, &P)> {
        self.terms.iter()
    }

    pub fn span(&self) -> Option<(i64, i64)> {
        let lo = self.terms.keys().next()?;
        let hi = self.terms.keys().next_back()?;
        Some((*lo, *hi))
    }

    fn supp_lo(&self) -> Option<i64> {
        match self.lo {
            Bound::Complete => Some(self.terms.keys().next().copied().unwrap_or(i64::MAX)),
            Bound::Win(_) => None,
        }
    }

    fn supp_hi(&self) -> Option<i64> {
        match self.hi {
            Bound::Complete => Some(self.terms.keys().next_back().copied().unwrap_or(i64::MIN)),
            Bound::Win(_) => None,
        }
    }

    pub fn in_window(&self, n: i64) -> bool {
        let lo_ok = match self.lo {
            Bound::Complete => true,
            Bound::Win(l) => n >= l,
        };
        let hi_ok = match self.hi {
            Bound::Complete => true,
            Bound::Win(h) => n <= h,
        };
        lo_ok && hi_ok
    }

    /// Coefficient of z^n; reading outside the exactness window is an error.
    pub fn coeff(&self, n: i64, zero_like: &P) -> Result<P> {
        if !self.in_window(n) {
            return Err(Error::WindowOverflow(format!("z^{}", n)));
        }
        Ok(self.terms.get(&n).cloned().unwrap_or_else(|| P::z_zero(zero_like)))
    }

    pub fn coeff_or_zero(&self, n: i64, zero_like: &P) -> P {
        self.terms.get(&n).cloned().unwrap_or_else(|| P::z_zero(zero_like))
    }

    pub fn add(&self, o: &ZSeries<P>) -> ZSeries<P> {
        let lo = match (self.lo, o.lo) {
            (Bound::Complete, Bound::Complete) => Bound::Complete,
            (Bound::Win(a), Bound::Complete) | (Bound::Complete, Bound::Win(a)) => Bound::Win(a),
            (Bound::Win(a), Bound::Win(b)) => Bound::Win(a.max(b)),
        };
        let hi = match (self.hi, o.hi) {
            (Bound::Complete, Bound::Complete) => Bound::Complete,
            (Bound::Win(a), Bound::Complete) | (Bound::Complete, Bound::Win(a)) => Bound::Win(a),
            (Bound::Win(a), Bound::Win(b)) => Bound::Win(a.min(b)),
        };
        let mut r = ZSeries { terms: self.terms.clone(), lo, hi };
        for (n, p) in &o.terms {
            r.insert_add(*n, p.clone());
        }
        r
    }

    pub fn neg(&self) -> ZSeries<P> {
        ZSeries {
            terms: self.terms.iter().map(|(n, p)| (*n, p.z_neg())).collect(),
            lo: self.lo,
            hi: self.hi,
        }
    }

    pub fn shift_z(&self, d: i64) -> ZSeries<P> {
        ZSeries {
            terms: self.terms.iter().map(|(n, p)| (n + d, p.clone())).collect(),
            lo: match self.lo {
                Bound::Complete => Bound::Complete,
                Bound::Win(l) => Bound::Win(l + d),
            },
            hi: match self.hi {
                Bound::Complete => Bound::Complete,
                Bound::Win(h) => Bound::Win(h + d),
            },
        }
    }

    pub fn map<Q: ZPayload>(&self, f: impl Fn(&P) -> Q) -> ZSeries<Q> {
        let mut terms = BTreeMap::new();
        for (n, p) in &self.terms {
            let q = f(p);
            if !q.z_is_zero() {
                terms.insert(*n, q);
            }
        }
        ZSeries { terms, lo: self.lo, hi: self.hi }
    }

    pub fn retain_window(&mut self, lo: i64, hi: i64) {
        self.terms.retain(|k, _| *k >= lo && *k <= hi);
    }
}

/// Convolution of two windows with mixed payload types. The exactness window
/// of the product follows the conservative rule: a coefficient is exact only
/// when every contributing split lies inside both operands' windows.
pub fn convolve<A: ZPayload, B: ZPayload, C: ZPayload>(
    f: &ZSeries<A>,
    g: &ZSeries<B>,
    mul: impl Fn(&A, &B) -> C,
) -> ZSeries<C> {
    let hi = {
        let a = match f.hi {
            Bound::Complete => None,
            Bound::Win(h) => Some(match g.supp_lo() {
                Some(l) if l != i64::MAX => h.saturating_add(l),
                Some(_) => i64::MAX,
                None => i64::MIN,
            }),
        };
        let b = match g.hi {
            Bound::Complete => None,
            Bound::Win(h) => Some(match f.supp_lo() {
                Some(l) if l != i64::MAX => h.saturating_add(l),
                Some(_) => i64::MAX,
                None => i64::MIN,
            }),
        };
        match (a, b) {
            (None, None) => Bound::Complete,
            (Some(x), None) | (None, Some(x)) => Bound::Win(x),
            (Some(x), Some(y)) => Bound::Win(x.min(y)),
        }
    };
    let lo = {
        let a = match f.lo {
            Bound::Complete => None,
            Bound::Win(l) => Some(match g.supp_hi() {
                Some(h) if h != i64::MIN => l.saturating_add(h),
                Some(_) => i64::MIN,
                None => i64::MAX,
            }),
        };
        let b = match g.lo {
            Bound::Complete => None,
            Bound::Win(l) => Some(match f.supp_hi() {
                Some(h) if h != i64::MIN => l.saturating_add(h),
                Some(_) => i64::MIN,
                None => i64::MAX,
            }),
        };
        match (a, b) {
            (None, None) => Bound::Complete,
            (Some(x), None) | (None, Some(x)) => Bound::Win(x),
            (Some(x), Some(y)) => Bound::Win(x.max(y)),
        }
    };
    let mut out: ZSeries<C> = ZSeries::windowed(lo, hi);
    for (i, a) in f.iter() {
        for (j, b) in g.iter() {
            let n = i + j;
            if !out.in_window(n) {
                continue;
            }
            out.insert_add(n, mul(a, b));
        }
    }
    out
}

pub type ZPSeries = ZSeries<PSeries>;

impl ZPSeries {
    pub fn from_pseries(p: PSeries) -> ZPSeries {
        ZSeries::single(0, p)
    }

    pub fn mul(&self, o: &ZPSeries) -> ZPSeries {
        convolve(self, o, |a, b| a.mul(b))
    }

    pub fn mul_pseries(&self, p: &PSeries) -> ZPSeries {
        self.map(|a| a.mul(p))
    }

    pub fn mul_scalar(&self, s: &Scalar) -> ZPSeries {
        self.map(|a| a.mul_scalar(s))
    }

    /// exp of a z-graded series whose z^0 part has no constant term; the
    /// z window keeps only the exponents that can matter downstream.
    pub fn exp(&self, pa: &Params, trunc: Trunc, zwin: (i64, i64)) -> Result<ZPSeries> {
        if let Some(c) = self.terms.get(&0) {
            if !c.constant_term().is_zero() {
                return Err(Error::NonzeroConstantTerm);
            }
        }
        // every term carries positive time degree or epsilon order, so the
        // power series terminates under the truncation caps
        let mut acc = ZPSeries::from_pseries(PSeries::one(trunc, pa));
        let mut pow = acc.clone();
        let nmax = (trunc.t_deg + trunc.e_ord).max(1) as i64;
        for n in 1..=nmax {
            pow = pow.mul(self);
            pow.retain_window(zwin.0, zwin.1);
            if pow.is_zero() {
                break;
            }
            let piece = pow.map(|p| p.mul_rf(&pa.rf_ratio(1, crate::partition::factorial(n))));
            acc = acc.add(&piece);
        }
        Ok(acc)
    }
}

// ---------------------------------------------------------------------------
// time shifts and the epsilon view
// ---------------------------------------------------------------------------

/// Which deformation of the time shift to apply.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ShiftVariant {
    Plain,
    QT,
    TQ,
}

/// Per-index shift coefficient c_k: 1/k, (1/k)(1-t^k)/(1-q^k), or its inverse.
pub fn shift_coeff(pa: &Params, variant: ShiftVariant, k: i64) -> Rf {
    let base = pa.rf_ratio(1, k);
    match variant {
        ShiftVariant::Plain => base,
        ShiftVariant::QT => match pa.mutation {
            Mutation::ShiftQtInverted => base.div(&pa.r_k(k)).unwrap(),
            _ => base.mul(&pa.r_k(k)),
        },
        ShiftVariant::TQ => base.div(&pa.r_k(k)).unwrap(),
    }
}

/// Substitute one alphabet of a series: the spec-level shift operation.
/// Applies t_{+-k} -> t_{+-k} + sign * c_k * arg^k * z^{dir*k} (k > 0) on the
/// chosen alphabet; `neg_idx` selects the negative-index times t-bar.
pub fn shift_times(
    pa: &Params,
    s: &PSeries,
    alphabet_t: bool,
    neg_idx: bool,
    sign: i64,
    variant: ShiftVariant,
    arg: &Scalar,
    dir: i64,
) -> ZPSeries {
    s.subst(pa, |v| {
        let matches = matches!(v, TimeVar::T(_)) == alphabet_t;
        let k = v.index();
        let base = ZPSeries::from_pseries(PSeries::var(s.trunc, v, pa));
        if !matches || (k > 0) == neg_idx {
            return base;
        }
        let ka = k.abs();
        let c = shift_coeff(pa, variant, ka);
        let argk = arg.pow(ka).expect("invertible shift argument");
        let term = argk.mul_rf(&c.mul(&pa.rf_int(sign)));
        base.add(&ZSeries::single(dir * ka, PSeries::from_scalar(s.trunc, term)))
    })
}

/// Interpret the second alphabet as primed times and substitute
/// t'_k = gamma^{|k|} t_k - e_k, turning it into the epsilon view.
/// The same map applied twice is the identity.
pub fn epsilon_view(pa: &Params, s: &PSeries) -> PSeries {
    let z = s.subst(pa, |v| match v {
        TimeVar::T(_) => ZPSeries::from_pseries(PSeries::var(s.trunc, v, pa)),
        TimeVar::E(k) => {
            let g = PSeries::var(s.trunc, TimeVar::T(k), pa).mul_rf(&pa.gamma_pow(k.abs()));
            ZPSeries::from_pseries(g.sub(&PSeries::var(s.trunc, TimeVar::E(k), pa)))
        }
    });
    z.coeff_or_zero(0, &PSeries::zero(s.trunc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Mono;

    fn pa() -> Params {
        Params::default_eval()
    }

    fn tr() -> Trunc {
        Trunc::new(6, 2, 4)
    }

    #[test]
    fn truncation_is_a_homomorphism() {
        // truncate(a*b, D) == truncate(truncate(a,D)*truncate(b,D), D)
        let pa = pa();
        let big = Trunc::new(9, 2, 4);
        let small = Trunc::new(4, 1, 4);
        let mk = |trunc: Trunc| {
            let t1 = PSeries::var(trunc, TimeVar::T(1), &pa);
            let t2 = PSeries::var(trunc, TimeVar::T(2), &pa);
            let e1 = PSeries::var(trunc, TimeVar::E(1), &pa);
            PSeries::one(trunc, &pa)
                .add(&t1)
                .add(&t2.mul_rf(&pa.qt(1, 1)))
                .add(&e1)
                .add(&t1.mul(&t1).mul_rf(&pa.rf_ratio(1, 2)))
        };
        let exact = mk(big).mul(&mk(big));
        let trunc_exact: Vec<_> = exact
            .terms()
            .filter(|(k, _)| small.admits(k))
            .map(|(k, s)| (*k, s.clone()))
            .collect();
        let truncated = mk(small).mul(&mk(small));
        let got: Vec<_> = truncated.terms().map(|(k, s)| (*k, s.clone())).collect();
        assert_eq!(trunc_exact, got);
    }

    #[test]
    fn exp_basics() {
        let pa = pa();
        let t1 = PSeries::var(tr(), TimeVar::T(1), &pa);
        let e = t1.exp(&pa).unwrap();
        let k2 = TKey::var(TimeVar::T(1)).mul(&TKey::var(TimeVar::T(1)));
        assert_eq!(e.coeff(&k2), pa.s_ratio(1, 2));
        let k6 = (0..6).fold(TKey::one(), |k, _| k.mul(&TKey::var(TimeVar::T(1))));
        assert_eq!(e.coeff(&k6), pa.s_ratio(1, 720));
        let prod = e.mul(&t1.neg().exp(&pa).unwrap());
        assert_eq!(prod, PSeries::one(tr(), &pa));
        assert!(PSeries::one(tr(), &pa).exp(&pa).is_err());
    }

    #[test]
    fn exp_matches_partition_weights() {
        // exp(sum_k z^k p_k): coefficient of z^2 is p_2 + p_1^2/2
        let pa = pa();
        let mut zs: ZPSeries = ZSeries::complete();
        for k in 1..=4i64 {
            zs = zs.add(&ZSeries::single(k, PSeries::var(tr(), TimeVar::T(k), &pa)));
        }
        let e = zs.exp(&pa, tr(), (0, 6)).unwrap();
        let at2 = e.coeff_or_zero(2, &PSeries::zero(tr()));
        let p2 = TKey::var(TimeVar::T(2));
        let p11 = TKey::var(TimeVar::T(1)).mul(&TKey::var(TimeVar::T(1)));
        assert_eq!(at2.coeff(&p2), pa.s_one());
        assert_eq!(at2.coeff(&p11), pa.s_ratio(1, 2));
    }

    #[test]
    fn shift_examples() {
        let pa = pa();
        let t1 = PSeries::var(tr(), TimeVar::T(1), &pa);
        // plain shift: t1 -> t1 + z
        let sh = shift_times(&pa, &t1, true, false, 1, ShiftVariant::Plain, &pa.s_one(), 1);
        assert_eq!(sh.coeff_or_zero(0, &PSeries::zero(tr())), t1);
        assert_eq!(sh.coeff_or_zero(1, &PSeries::zero(tr())), PSeries::one(tr(), &pa));
        // qt shift: t1 -> t1 + r_1 z
        let sh = shift_times(&pa, &t1, true, false, 1, ShiftVariant::QT, &pa.s_one(), 1);
        assert_eq!(
            sh.coeff_or_zero(1, &PSeries::zero(tr())),
            PSeries::from_scalar(tr(), Scalar::from_rf(pa.r_k(1)))
        );
        // self-dual: qt and tq collapse to plain
        let sd = Params::self_dual_eval();
        for v in [ShiftVariant::Plain, ShiftVariant::QT, ShiftVariant::TQ] {
            assert!(shift_coeff(&sd, v, 2).sub(&sd.rf_ratio(1, 2)).is_zero());
        }
    }

    #[test]
    fn epsilon_view_roundtrip() {
        let pa = pa();
        let tp1 = PSeries::var(tr(), TimeVar::E(1), &pa);
        let viewed = epsilon_view(&pa, &tp1);
        let expect = PSeries::var(tr(), TimeVar::T(1), &pa)
            .mul_rf(&pa.gamma_pow(1))
            .sub(&PSeries::var(tr(), TimeVar::E(1), &pa));
        assert_eq!(viewed, expect);
        // involution
        let mixed = tp1
            .mul(&PSeries::var(tr(), TimeVar::T(2), &pa))
            .add(&PSeries::var(tr(), TimeVar::E(-1), &pa));
        assert_eq!(epsilon_view(&pa, &epsilon_view(&pa, &mixed)), mixed);
        // t_1 - t'_1 at eps = 0 is (1-gamma) t_1
        let diff = PSeries::var(tr(), TimeVar::T(1), &pa).sub(&tp1);
        let viewed = epsilon_view(&pa, &diff);
        let at_eps0 = viewed.split_by_e_order().remove(&0).unwrap_or_else(|| PSeries::zero(tr()));
        let expect = PSeries::var(tr(), TimeVar::T(1), &pa)
            .mul_scalar(&pa.s_one().sub(&Scalar::from_rf(pa.gamma_pow(1))));
        assert_eq!(at_eps0, expect);
    }

    #[test]
    fn residue_and_window_errors() {
        let pa = pa();
        let l: ZSeries<Scalar> =
            ZSeries::single(-1, pa.s_one()).add(&ZSeries::single(0, pa.s_int(2)));
        assert_eq!(l.coeff(-1, &Scalar::zero()).unwrap(), pa.s_one());
        // exp-series of a*z: coefficient of z^2 is a^2/2
        let a = Scalar::term(pa.one(), Mono::alpha_pow(1));
        let az = ZSeries::single(1, PSeries::from_scalar(tr(), a.clone()));
        let e = az.exp(&pa, tr(), (0, 8)).unwrap();
        let c2 = e.coeff_or_zero(2, &PSeries::zero(tr()));
        assert_eq!(c2.constant_term(), a.mul(&a).mul(&pa.s_ratio(1, 2)));
        // windowed series errors outside the window
        let mut w: ZSeries<Scalar> = ZSeries::windowed(Bound::Win(-2), Bound::Win(2));
        w.insert_add(0, pa.s_one());
        assert!(w.coeff(3, &Scalar::zero()).is_err());
        assert!(w.coeff(2, &Scalar::zero()).is_ok());
    }

    #[test]
    fn contour_footnote_oracle() {
        // (oint_0 + oint_inf) z^{-n-1} e^{a z} e^{b z^{-1}} = 0 at every order,
        // with oint_inf picking minus the z^{-1} coefficient.
        let pa = pa();
        let trunc = Trunc::new(6, 0, 4);
        let a = PSeries::var(trunc, TimeVar::T(1), &pa);
        let b = PSeries::var(trunc, TimeVar::T(-1), &pa);
        let ea = ZSeries::single(1, a).exp(&pa, trunc, (-9, 9)).unwrap();
        let eb = ZSeries::single(-1, b).exp(&pa, trunc, (-9, 9)).unwrap();
        let prod = ea.mul(&eb);
        for n in -3..=3i64 {
            let c = prod.coeff_or_zero(n, &PSeries::zero(trunc));
            let total = c.neg().add(&c);
            assert!(total.is_zero(), "n={}", n);
        }
    }

    #[test]
    fn window_product_rule() {
        let pa = pa();
        let f: ZSeries<Scalar> =
            ZSeries::single(2, pa.s_one()).add(&ZSeries::single(5, pa.s_int(3)));
        let mut g: ZSeries<Scalar> = ZSeries::windowed(Bound::Complete, Bound::Win(4));
        g.insert_add(0, pa.s_one());
        g.insert_add(4, pa.s_int(7));
        let prod = convolve(&f, &g, |a, b| a.mul(b));
        // exact up to 4 + 2 = 6
        assert_eq!(prod.hi, Bound::Win(6));
        assert!(prod.coeff(6, &Scalar::zero()).is_ok());
        assert!(prod.coeff(7, &Scalar::zero()).is_err());
    }

    proptest::proptest! {
        #[test]
        fn truncated_products_associate(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let pa = Params::default_eval();
            let trunc = Trunc::new(5, 1, 4);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut s = PSeries::zero(trunc);
                for _ in 0..3 {
                    let k = rng.gen_range(1..=4i64) * if rng.gen_bool(0.5) { 1 } else { -1 };
                    let v = if rng.gen_bool(0.7) { TimeVar::T(k) } else { TimeVar::E(k) };
                    let c = pa.s_int(rng.gen_range(-3..=3));
                    s.add_assign(&PSeries::var(trunc, v, &pa).mul_scalar(&c));
                }
                s
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let c = mk(&mut rng);
            proptest::prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            proptest::prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        }
    }
}
