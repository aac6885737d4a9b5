//! Exact coefficient arithmetic.
//!
//! The universal coefficient ring is Q(Q,T) tensored with Laurent monomials
//! in formal weight symbols. The quarter-power generators satisfy q = Q^4,
//! t = T^4, so that every half power of gamma = (t/q)^{1/2} is a Laurent
//! monomial: gamma^{1/2} = T/Q.
//!
//! Two execution modes share one interface:
//! - symbolic: reduced fractions of integer polynomials in (Q,T),
//! - evaluated: exact rationals at a generic point (Q,T), validated against
//!   a root-of-unity exclusion so that identity checking is faithful.

use std::collections::BTreeMap;
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::{Error, Result};

// ---------------------------------------------------------------------------
// integer polynomials in (Q,T)
// ---------------------------------------------------------------------------

/// Sparse polynomial in Z[Q,T] with nonnegative exponents.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Poly {
    terms: BTreeMap<(u32, u32), BigInt>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Poly::constant(BigInt::one())
    }

    pub fn constant(c: BigInt) -> Self {
        let mut t = BTreeMap::new();
        if !c.is_zero() {
            t.insert((0, 0), c);
        }
        Poly { terms: t }
    }

    pub fn monomial(qe: u32, te: u32, c: BigInt) -> Self {
        let mut t = BTreeMap::new();
        if !c.is_zero() {
            t.insert((qe, te), c);
        }
        Poly { terms: t }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms.get(&(0, 0)).map_or(false, |c| c.is_one())
    }

    fn add_term(&mut self, key: (u32, u32), c: &BigInt) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(key).or_insert_with(BigInt::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (k, c) in &o.terms {
            r.add_term(*k, c);
        }
        r
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (k, c) in &o.terms {
            r.add_term(*k, &(-c));
        }
        r
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(k, c)| (*k, -c)).collect() }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &o.terms {
                r.add_term((ka.0 + kb.0, ka.1 + kb.1), &(ca * cb));
            }
        }
        r
    }

    pub fn mul_int(&self, c: &BigInt) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect() }
    }

    /// Smallest exponents in Q and T across all terms.
    fn min_exponents(&self) -> (u32, u32) {
        let mut mq = u32::MAX;
        let mut mt = u32::MAX;
        for (q, t) in self.terms.keys() {
            mq = mq.min(*q);
            mt = mt.min(*t);
        }
        (mq, mt)
    }

    fn shift_down(&self, dq: u32, dt: u32) -> Poly {
        Poly {
            terms: self.terms.iter().map(|((q, t), c)| ((*q - dq, *t - dt), c.clone())).collect(),
        }
    }

    /// Lexicographically leading coefficient (Q major, T minor).
    fn leading_coeff(&self) -> BigInt {
        self.terms.iter().next_back().map(|(_, c)| c.clone()).unwrap_or_else(BigInt::zero)
    }



    /// Exact multivariate division; `None` if `d` does not divide `self`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        let mut rem = self.clone();
        let mut quo = Poly::zero();
        let (dk, dc) = {
            let (k, c) = d.terms.iter().next_back().unwrap();
            (*k, c.clone())
        };
        while !rem.is_zero() {
            let (rk, rc) = {
                let (k, c) = rem.terms.iter().next_back().unwrap();
                (*k, c.clone())
            };
            if rk.0 < dk.0 || rk.1 < dk.1 {
                return None;
            }
            let (q, r) = num::integer::div_rem(rc, dc.clone());
            if !r.is_zero() {
                return None;
            }
            let mk = (rk.0 - dk.0, rk.1 - dk.1);
            let piece = Poly::monomial(mk.0, mk.1, q);
            rem = rem.sub(&d.mul(&piece));
            quo = quo.add(&piece);
        }
        Some(quo)
    }

    pub fn eval(&self, qv: &BigRational, tv: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for ((qe, te), c) in &self.terms {
            let mut term = BigRational::from_integer(c.clone());
            term *= rat_pow(qv, *qe as i64);
            term *= rat_pow(tv, *te as i64);
            acc += term;
        }
        acc
    }

    /// Substitute T -> Q (the self-dual collapse).
    pub fn subst_t_to_q(&self) -> Poly {
        let mut r = Poly::zero();
        for ((qe, te), c) in &self.terms {
            r.add_term((qe + te, 0), c);
        }
        r
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((qe, te), c) in self.terms.iter().rev() {
            if !first {
                write!(f, " {} ", if c.is_negative() { "-" } else { "+" })?;
            } else {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            }
            let a = c.abs();
            let unit = *qe == 0 && *te == 0;
            if !a.is_one() || unit {
                write!(f, "{}", a)?;
                if !unit {
                    write!(f, "*")?;
                }
            }
            if *qe > 0 {
                write!(f, "Q{}", if *qe == 1 { String::new() } else { format!("^{}", qe) })?;
            }
            if *te > 0 {
                if *qe > 0 {
                    write!(f, "*")?;
                }
                write!(f, "T{}", if *te == 1 { String::new() } else { format!("^{}", te) })?;
            }
        }
        Ok(())
    }
}

fn rat_pow(x: &BigRational, e: i64) -> BigRational {
    if e == 0 {
        return BigRational::one();
    }
    let mut base = if e > 0 { x.clone() } else { x.recip() };
    let mut e = e.unsigned_abs();
    let mut acc = BigRational::one();
    while e > 0 {
        if e & 1 == 1 {
            acc *= base.clone();
        }
        base = base.clone() * base;
        e >>= 1;
    }
    acc
}

// ---------------------------------------------------------------------------
// gcd over Z[Q,T] via primitive PRS in (Z[T])[Q]
// ---------------------------------------------------------------------------

type TP = Vec<BigInt>; // dense poly in T

fn tp_trim(v: &mut TP) {
    while v.last().map_or(false, |c| c.is_zero()) {
        v.pop();
    }
}

fn tp_is_zero(v: &TP) -> bool {
    v.is_empty()
}

fn tp_mul(a: &TP, b: &TP) -> TP {
    if tp_is_zero(a) || tp_is_zero(b) {
        return Vec::new();
    }
    let mut r = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, ca) in a.iter().enumerate() {
        if ca.is_zero() {
            continue;
        }
        for (j, cb) in b.iter().enumerate() {
            r[i + j] += ca * cb;
        }
    }
    tp_trim(&mut r);
    r
}

fn tp_sub(a: &TP, b: &TP) -> TP {
    let mut r = vec![BigInt::zero(); a.len().max(b.len())];
    for (i, c) in a.iter().enumerate() {
        r[i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        r[i] -= c;
    }
    tp_trim(&mut r);
    r
}

fn tp_content(a: &TP) -> BigInt {
    let mut g = BigInt::zero();
    for c in a {
        g = num::integer::gcd(g, c.abs());
        if g.is_one() {
            break;
        }
    }
    g
}

fn tp_div_int(a: &TP, d: &BigInt) -> TP {
    a.iter().map(|c| c / d).collect()
}

fn tp_primitive(a: &TP) -> TP {
    let c = tp_content(a);
    if c.is_zero() || c.is_one() {
        a.clone()
    } else {
        tp_div_int(a, &c)
    }
}

/// Pseudo-remainder of univariate integer polynomials.
fn tp_prem(a: &TP, b: &TP) -> TP {
    let db = b.len() - 1;
    let lb = b.last().unwrap().clone();
    let mut r = a.clone();
    while r.len() > db {
        let dr = r.len() - 1;
        let lr = r.last().unwrap().clone();
        // r := lb*r - lr*T^(dr-db)*b  (strictly lowers the degree)
        let mut nr: TP = r.iter().map(|c| c * &lb).collect();
        for (j, cb) in b.iter().enumerate() {
            nr[dr - db + j] -= &lr * cb;
        }
        tp_trim(&mut nr);
        debug_assert!(nr.len() < r.len());
        r = nr;
    }
    r
}

fn tp_sign_norm(a: &TP) -> TP {
    if a.last().map_or(false, |c| c.is_negative()) {
        a.iter().map(|c| -c).collect()
    } else {
        a.clone()
    }
}

fn tp_gcd(a: &TP, b: &TP) -> TP {
    if tp_is_zero(a) {
        return tp_sign_norm(b);
    }
    if tp_is_zero(b) {
        return tp_sign_norm(a);
    }
    let ca = tp_content(a);
    let cb = tp_content(b);
    let cg = num::integer::gcd(ca.clone(), cb.clone());
    let mut p = tp_div_int(a, &ca);
    let mut q = tp_div_int(b, &cb);
    if p.len() < q.len() {
        std::mem::swap(&mut p, &mut q);
    }
    loop {
        let r = tp_prem(&p, &q);
        if tp_is_zero(&r) {
            let mut g: TP = q.iter().map(|c| c * &cg).collect();
            if g.last().map_or(false, |c| c.is_negative()) {
                g = g.iter().map(|c| -c).collect();
            }
            return g;
        }
        p = q;
        q = tp_primitive(&r);
    }
}

type QP = Vec<TP>; // dense poly in Q with Z[T] coefficients

fn qp_trim(v: &mut QP) {
    while v.last().map_or(false, tp_is_zero) {
        v.pop();
    }
}

fn poly_to_qp(p: &Poly) -> QP {
    let mut dq = 0usize;
    let mut dt = 0usize;
    for (qe, te) in p.terms.keys() {
        dq = dq.max(*qe as usize);
        dt = dt.max(*te as usize);
    }
    let mut v = vec![vec![BigInt::zero(); dt + 1]; dq + 1];
    for ((qe, te), c) in &p.terms {
        v[*qe as usize][*te as usize] = c.clone();
    }
    for tp in v.iter_mut() {
        tp_trim(tp);
    }
    qp_trim(&mut v);
    v
}

fn qp_to_poly(v: &QP) -> Poly {
    let mut p = Poly::zero();
    for (qe, tp) in v.iter().enumerate() {
        for (te, c) in tp.iter().enumerate() {
            p.add_term((qe as u32, te as u32), c);
        }
    }
    p
}

fn qp_content(v: &QP) -> TP {
    let mut g: TP = Vec::new();
    for tp in v {
        g = tp_gcd(&g, tp);
        if g.len() == 1 && g[0].is_one() {
            break;
        }
    }
    g
}

fn qp_divide_tp(v: &QP, d: &TP) -> QP {
    v.iter()
        .map(|tp| {
            if tp_is_zero(tp) {
                Vec::new()
            } else {
                tp_div_exact(tp, d).expect("content division is exact")
            }
        })
        .collect()
}

/// Exact division in Z[T]; `None` when not divisible.
fn tp_div_exact(a: &TP, b: &TP) -> Option<TP> {
    if tp_is_zero(b) {
        return None;
    }
    let mut r = a.clone();
    let db = b.len() - 1;
    let lb = b.last().unwrap();
    let mut quo = vec![BigInt::zero(); a.len().saturating_sub(db)];
    while !tp_is_zero(&r) {
        let dr = r.len() - 1;
        if dr < db {
            return None;
        }
        let (qc, rem) = num::integer::div_rem(r.last().unwrap().clone(), lb.clone());
        if !rem.is_zero() {
            return None;
        }
        quo[dr - db] = qc.clone();
        for (j, cb) in b.iter().enumerate() {
            r[dr - db + j] -= &qc * cb;
        }
        tp_trim(&mut r);
    }
    tp_trim(&mut quo);
    Some(quo)
}

/// Pseudo-remainder in (Z[T])[Q].
fn qp_prem(a: &QP, b: &QP) -> QP {
    let db = b.len() - 1;
    let lb = b.last().unwrap().clone();
    let mut r = a.clone();
    while r.len() > db {
        let dr = r.len() - 1;
        let lr = r.last().unwrap().clone();
        let mut nr: QP = r.iter().map(|tp| tp_mul(tp, &lb)).collect();
        for (j, cb) in b.iter().enumerate() {
            let sub = tp_mul(&lr, cb);
            nr[dr - db + j] = tp_sub(&nr[dr - db + j], &sub);
        }
        qp_trim(&mut nr);
        debug_assert!(nr.len() < r.len());
        r = nr;
    }
    r
}

/// gcd in Z[Q,T] (primitive PRS; adequate for the polynomial sizes here).
pub fn poly_gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    let mut p = poly_to_qp(a);
    let mut q = poly_to_qp(b);
    let cp = qp_content(&p);
    let cq = qp_content(&q);
    let cg = tp_gcd(&cp, &cq);
    p = qp_divide_tp(&p, &cp);
    q = qp_divide_tp(&q, &cq);
    if p.len() < q.len() {
        std::mem::swap(&mut p, &mut q);
    }
    loop {
        let r = qp_prem(&p, &q);
        if r.is_empty() {
            let qc = qp_content(&q);
            let prim = qp_divide_tp(&q, &qc);
            let mut g = qp_to_poly(&prim);
            // reattach the shared content
            let cgp = {
                let mut poly = Poly::zero();
                for (te, c) in cg.iter().enumerate() {
                    poly.add_term((0, te as u32), c);
                }
                poly
            };
            g = g.mul(&cgp);
            if g.leading_coeff().is_negative() {
                g = g.neg();
            }
            return g;
        }
        p = q;
        let rc = qp_content(&r);
        q = qp_divide_tp(&r, &rc);
    }
}

// ---------------------------------------------------------------------------
// rational functions and the two-mode coefficient Rf
// ---------------------------------------------------------------------------

/// Reduced fraction of integer polynomials in (Q,T).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RatFun {
    pub num: Poly,
    pub den: Poly,
}

impl RatFun {
    pub fn new(num: Poly, den: Poly) -> Result<RatFun> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(RatFun::reduce(num, den))
    }

    fn reduce(num: Poly, den: Poly) -> RatFun {
        if num.is_zero() {
            return RatFun { num, den: Poly::one() };
        }
        // strip common monomial factor first
        let (nq, nt) = num.min_exponents();
        let (dq, dt) = den.min_exponents();
        let sq = nq.min(dq);
        let st = nt.min(dt);
        let mut num = num.shift_down(sq, st);
        let mut den = den.shift_down(sq, st);
        let g = poly_gcd(&num, &den);
        if !g.is_one() {
            num = num.div_exact(&g).expect("gcd divides");
            den = den.div_exact(&g).expect("gcd divides");
        }
        if den.leading_coeff().is_negative() {
            num = num.neg();
            den = den.neg();
        }
        RatFun { num, den }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
}

/// Coefficient in one of the two execution modes.
#[derive(Clone, PartialEq, Debug)]
pub enum Rf {
    Sym(RatFun),
    Num(BigRational),
}

impl Rf {
    pub fn zero_sym() -> Rf {
        Rf::Sym(RatFun { num: Poly::zero(), den: Poly::one() })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Rf::Sym(r) => r.is_zero(),
            Rf::Num(r) => r.is_zero(),
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Rf::Sym(r) => r.num.is_one() && r.den.is_one(),
            Rf::Num(r) => r.is_one(),
        }
    }

    pub fn add(&self, o: &Rf) -> Rf {
        match (self, o) {
            (Rf::Sym(a), Rf::Sym(b)) => Rf::Sym(RatFun::reduce(
                a.num.mul(&b.den).add(&b.num.mul(&a.den)),
                a.den.mul(&b.den),
            )),
            (Rf::Num(a), Rf::Num(b)) => Rf::Num(a + b),
            _ => panic!("mixed symbolic/evaluated coefficients"),
        }
    }

    pub fn sub(&self, o: &Rf) -> Rf {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Rf {
        match self {
            Rf::Sym(a) => Rf::Sym(RatFun { num: a.num.neg(), den: a.den.clone() }),
            Rf::Num(a) => Rf::Num(-a),
        }
    }

    pub fn mul(&self, o: &Rf) -> Rf {
        match (self, o) {
            (Rf::Sym(a), Rf::Sym(b)) => {
                Rf::Sym(RatFun::reduce(a.num.mul(&b.num), a.den.mul(&b.den)))
            }
            (Rf::Num(a), Rf::Num(b)) => Rf::Num(a * b),
            _ => panic!("mixed symbolic/evaluated coefficients"),
        }
    }

    pub fn inv(&self) -> Result<Rf> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(match self {
            Rf::Sym(a) => Rf::Sym(RatFun::reduce(a.den.clone(), a.num.clone())),
            Rf::Num(a) => Rf::Num(a.recip()),
        })
    }

    pub fn div(&self, o: &Rf) -> Result<Rf> {
        Ok(self.mul(&o.inv()?))
    }

    pub fn pow(&self, e: i64) -> Result<Rf> {
        if e == 0 {
            return Ok(match self {
                Rf::Sym(_) => Rf::Sym(RatFun { num: Poly::one(), den: Poly::one() }),
                Rf::Num(_) => Rf::Num(BigRational::one()),
            });
        }
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut acc = base.clone();
        for _ in 1..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    /// Self-dual substitution T -> Q (a ring homomorphism on symbolic data).
    pub fn subst_t_to_q(&self) -> Rf {
        match self {
            Rf::Sym(a) => Rf::Sym(RatFun::reduce(a.num.subst_t_to_q(), a.den.subst_t_to_q())),
            Rf::Num(_) => panic!("self-dual substitution is a symbolic operation"),
        }
    }
}

impl fmt::Display for Rf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rf::Sym(r) => {
                if r.den.is_one() {
                    write!(f, "{}", r.num)
                } else {
                    write!(f, "({})/({})", r.num, r.den)
                }
            }
            Rf::Num(r) => write!(f, "{}", r),
        }
    }
}

// ---------------------------------------------------------------------------
// weight monomials
// ---------------------------------------------------------------------------

pub const MAX_XI: usize = 8;

/// Monomial in the formal weight symbols u, v, x, alpha, xi_1..xi_8.
/// u, v, alpha carry Laurent exponents; x and xi_k are polynomial-only.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct Mono {
    pub u: i16,
    pub v: i16,
    pub x: i16,
    pub al: i16,
    pub xi: [i16; MAX_XI],
}

impl Mono {
    pub fn one() -> Mono {
        Mono { u: 0, v: 0, x: 0, al: 0, xi: [0; MAX_XI] }
    }

    pub fn u_pow(e: i16) -> Mono {
        Mono { u: e, ..Mono::one() }
    }

    pub fn v_pow(e: i16) -> Mono {
        Mono { v: e, ..Mono::one() }
    }

    pub fn x_pow(e: i16) -> Mono {
        Mono { x: e, ..Mono::one() }
    }

    pub fn alpha_pow(e: i16) -> Mono {
        Mono { al: e, ..Mono::one() }
    }

    pub fn xi_pow(k: usize, e: i16) -> Mono {
        assert!(k >= 1 && k <= MAX_XI, "xi index out of range");
        let mut m = Mono::one();
        m.xi[k - 1] = e;
        m
    }

    pub fn is_one(&self) -> bool {
        *self == Mono::one()
    }

    /// True when the monomial stays in the polynomial cone for x and xi.
    pub fn is_valid(&self) -> bool {
        self.x >= 0 && self.xi.iter().all(|&e| e >= 0)
    }

    pub fn mul(&self, o: &Mono) -> Mono {
        let mut xi = [0i16; MAX_XI];
        for i in 0..MAX_XI {
            xi[i] = self.xi[i] + o.xi[i];
        }
        Mono { u: self.u + o.u, v: self.v + o.v, x: self.x + o.x, al: self.al + o.al, xi }
    }

    pub fn inv(&self) -> Mono {
        let mut xi = [0i16; MAX_XI];
        for i in 0..MAX_XI {
            xi[i] = -self.xi[i];
        }
        Mono { u: -self.u, v: -self.v, x: -self.x, al: -self.al, xi }
    }

    pub fn pow(&self, e: i64) -> Mono {
        let mut xi = [0i16; MAX_XI];
        let e = e as i16;
        for i in 0..MAX_XI {
            xi[i] = self.xi[i] * e;
        }
        Mono { u: self.u * e, v: self.v * e, x: self.x * e, al: self.al * e, xi }
    }

    pub fn x_degree(&self) -> i16 {
        self.x
    }
}

impl fmt::Display for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        let mut push = |name: &str, e: i16| {
            if e == 1 {
                parts.push(name.to_string());
            } else if e != 0 {
                parts.push(format!("{}^{}", name, e));
            }
        };
        push("u", self.u);
        push("v", self.v);
        push("x", self.x);
        push("al", self.al);
        for (i, &e) in self.xi.iter().enumerate() {
            push(&format!("xi{}", i + 1), e);
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

impl Serialize for Mono {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        if self.u != 0 {
            map.serialize_entry("u", &self.u)?;
        }
        if self.v != 0 {
            map.serialize_entry("v", &self.v)?;
        }
        if self.x != 0 {
            map.serialize_entry("x", &self.x)?;
        }
        if self.al != 0 {
            map.serialize_entry("al", &self.al)?;
        }
        for (i, &e) in self.xi.iter().enumerate() {
            if e != 0 {
                map.serialize_entry(&format!("xi{}", i + 1), &e)?;
            }
        }
        map.end()
    }
}

// ---------------------------------------------------------------------------
// Scalar
// ---------------------------------------------------------------------------

/// Element of the universal coefficient ring: a sparse sum of
/// (rational function in Q,T) x (weight monomial) terms in canonical form.
#[derive(Clone, PartialEq, Debug)]
pub struct Scalar {
    terms: BTreeMap<Mono, Rf>,
}

impl Scalar {
    pub fn zero() -> Scalar {
        Scalar { terms: BTreeMap::new() }
    }

    pub fn from_rf(rf: Rf) -> Scalar {
        let mut t = BTreeMap::new();
        if !rf.is_zero() {
            t.insert(Mono::one(), rf);
        }
        Scalar { terms: t }
    }

    pub fn term(rf: Rf, mono: Mono) -> Scalar {
        debug_assert!(mono.is_valid(), "x/xi exponents must be nonnegative");
        let mut t = BTreeMap::new();
        if !rf.is_zero() {
            t.insert(mono, rf);
        }
        Scalar { terms: t }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Rf)> {
        self.terms.iter()
    }

    /// The single (rf, mono) pair of a one-term scalar.
    pub fn as_single_term(&self) -> Option<(&Mono, &Rf)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    pub fn add_assign(&mut self, o: &Scalar) {
        for (m, rf) in &o.terms {
            match self.terms.get_mut(m) {
                Some(e) => {
                    *e = e.add(rf);
                    if e.is_zero() {
                        self.terms.remove(m);
                    }
                }
                None => {
                    self.terms.insert(*m, rf.clone());
                }
            }
        }
    }

    pub fn add(&self, o: &Scalar) -> Scalar {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn sub(&self, o: &Scalar) -> Scalar {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Scalar {
        Scalar { terms: self.terms.iter().map(|(m, rf)| (*m, rf.neg())).collect() }
    }

    pub fn mul(&self, o: &Scalar) -> Scalar {
        let mut r = Scalar::zero();
        for (ma, ra) in &self.terms {
            for (mb, rb) in &o.terms {
                let m = ma.mul(mb);
                let c = ra.mul(rb);
                if c.is_zero() {
                    continue;
                }
                match r.terms.get_mut(&m) {
                    Some(e) => {
                        *e = e.add(&c);
                        if e.is_zero() {
                            r.terms.remove(&m);
                        }
                    }
                    None => {
                        r.terms.insert(m, c);
                    }
                }
            }
        }
        r
    }

    pub fn mul_rf(&self, rf: &Rf) -> Scalar {
        if rf.is_zero() {
            return Scalar::zero();
        }
        Scalar { terms: self.terms.iter().map(|(m, r)| (*m, r.mul(rf))).collect() }
    }

    pub fn mul_mono(&self, mono: &Mono) -> Scalar {
        Scalar { terms: self.terms.iter().map(|(m, r)| (m.mul(mono), r.clone())).collect() }
    }

    /// Division by a single-term scalar with invertible monomial part.
    pub fn div(&self, o: &Scalar) -> Result<Scalar> {
        let (m, rf) = match o.as_single_term() {
            Some(p) => p,
            None => {
                return Err(if o.is_zero() {
                    Error::DivisionByZero
                } else {
                    Error::NonMonomialDivisor
                })
            }
        };
        let inv = rf.inv()?;
        let minv = m.inv();
        let mut r = Scalar::zero();
        for (mm, rr) in &self.terms {
            let nm = mm.mul(&minv);
            if !nm.is_valid() {
                return Err(Error::Domain(
                    "division would leave the polynomial cone of x/xi".into(),
                ));
            }
            r.terms.insert(nm, rr.mul(&inv));
        }
        Ok(r)
    }

    pub fn inv(&self) -> Result<Scalar> {
        Scalar::from_rf(match self.as_single_term() {
            Some((_, _)) => Rf::Num(BigRational::one()),
            None => return Err(Error::NonMonomialDivisor),
        })
        .div(self)
    }

    pub fn pow(&self, e: i64) -> Result<Scalar> {
        if e < 0 {
            return self.inv()?.pow(-e);
        }
        let mut acc: Option<Scalar> = None;
        for _ in 0..e {
            acc = Some(match acc {
                None => self.clone(),
                Some(a) => a.mul(self),
            });
        }
        Ok(acc.unwrap_or_else(|| {
            // e == 0: the multiplicative unit in whichever mode self lives in
            match self.terms.values().next() {
                Some(Rf::Sym(_)) => {
                    Scalar::from_rf(Rf::Sym(RatFun { num: Poly::one(), den: Poly::one() }))
                }
                _ => Scalar::from_rf(Rf::Num(BigRational::one())),
            }
        }))
    }

    /// Self-dual substitution T -> Q on every coefficient (symbolic mode).
    pub fn subst_t_to_q(&self) -> Scalar {
        let mut r = Scalar::zero();
        for (m, rf) in &self.terms {
            r.add_assign(&Scalar::term(rf.subst_t_to_q(), *m));
        }
        r
    }

    /// Pure (Q,T) content of a scalar with no weight-symbol dependence.
    pub fn as_rf(&self) -> Option<Rf> {
        if self.is_zero() {
            return None;
        }
        let (m, rf) = self.as_single_term()?;
        if m.is_one() {
            Some(rf.clone())
        } else {
            None
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, rf)| {
                if m.is_one() {
                    format!("{}", rf)
                } else if rf.is_one() {
                    format!("{}", m)
                } else {
                    format!("({})*{}", rf, m)
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct TermRepr {
            rf: String,
            mono: Mono,
        }
        let v: Vec<TermRepr> = self
            .terms
            .iter()
            .map(|(m, rf)| TermRepr { rf: format!("{}", rf), mono: *m })
            .collect();
        let mut map = s.serialize_map(Some(1))?;
        map.serialize_entry("terms", &v)?;
        map.end()
    }
}

// ---------------------------------------------------------------------------
// seeded single-token mutations (for the mutation-sensitivity suite)
// ---------------------------------------------------------------------------

/// Deliberate single-token defects injected into kernel definitions.
/// Every mutation must make at least one identity check fail.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mutation {
    None,
    /// zeta numerator factor (x - 1) -> (x + 1)
    ZetaNumFlip,
    /// eta^+ creation coefficient (1 - q1^k) -> (1 - q2^k)
    EtaPlusCreation,
    /// eta^- gamma^k -> gamma^{-k}
    EtaMinusGamma,
    /// (q,t)-shift coefficient r_k -> 1/r_k
    ShiftQtInverted,
    /// screening zero-mode power z^{-n-1} -> z^{-n}
    ScreeningZPow,
    /// S_- creation sign flip
    ScreeningMinusSign,
    /// bilinear 0-contour kernel p^k -> p^{-k}
    KernelGamma,
    /// coproduct Delta(a_k) central twist gamma^{|k|c/2} -> gamma^{-|k|c/2}
    CoproductTwist,
    /// Nekrasov factor first group q1^{i-i'+1} -> q1^{i-i'}
    NekrasovShift,
    /// horizontal a_k normalization gamma^{-k/2} -> gamma^{k/2}
    QOscGamma,
}

impl Mutation {
    pub fn all() -> [Mutation; 10] {
        use Mutation::*;
        [
            ZetaNumFlip,
            EtaPlusCreation,
            EtaMinusGamma,
            ShiftQtInverted,
            ScreeningZPow,
            ScreeningMinusSign,
            KernelGamma,
            CoproductTwist,
            NekrasovShift,
            QOscGamma,
        ]
    }
}

// ---------------------------------------------------------------------------
// Params
// ---------------------------------------------------------------------------

/// Execution mode of the coefficient ring.
#[derive(Clone, Debug)]
pub enum Mode {
    Symbolic,
    /// Exact rational evaluation at a generic point (Q, T).
    Eval { q_gen: BigRational, t_gen: BigRational },
}

/// Shared parameter context: mode, derived constants, mutation switch.
#[derive(Clone, Debug)]
pub struct Params {
    mode: Mode,
    self_dual: bool,
    pub mutation: Mutation,
    max_degree: u32,
}

fn big(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl Params {
    /// Symbolic mode over Q(Q,T).
    pub fn symbolic() -> Params {
        Params { mode: Mode::Symbolic, self_dual: false, mutation: Mutation::None, max_degree: 6 }
    }

    /// Symbolic self-dual mode (T identified with Q exactly).
    pub fn symbolic_self_dual() -> Params {
        Params { mode: Mode::Symbolic, self_dual: true, mutation: Mutation::None, max_degree: 6 }
    }

    /// Evaluated mode at the default generic point (Q,T) = (3/5, 7/11).
    pub fn default_eval() -> Params {
        Params::eval(big(3, 5), big(7, 11), 6).expect("default point is generic")
    }

    /// Evaluated self-dual mode (T = Q exactly) at Q = 3/5.
    pub fn self_dual_eval() -> Params {
        let q = big(3, 5);
        Params {
            mode: Mode::Eval { q_gen: q.clone(), t_gen: q },
            self_dual: true,
            mutation: Mutation::None,
            max_degree: 6,
        }
    }

    /// Evaluated mode at (Q,T), validated against the root-of-unity exclusion:
    /// Q,T nonzero, |Q| != 1 != |T|, and Q^{4k} != T^{4l} for 0 < k,l <= 2*max_degree.
    pub fn eval(q_gen: BigRational, t_gen: BigRational, max_degree: u32) -> Result<Params> {
        if q_gen.is_zero() || t_gen.is_zero() {
            return Err(Error::Config("Q and T must be nonzero".into()));
        }
        let one = BigRational::one();
        if q_gen.abs() == one || t_gen.abs() == one {
            return Err(Error::Config("|Q| and |T| must differ from 1".into()));
        }
        let bound = (2 * max_degree).max(1) as i64;
        for k in 1..=bound {
            for l in 1..=bound {
                if rat_pow(&q_gen, 4 * k) == rat_pow(&t_gen, 4 * l) {
                    return Err(Error::Config(format!(
                        "degenerate point: Q^{} = T^{}",
                        4 * k,
                        4 * l
                    )));
                }
            }
        }
        Ok(Params {
            mode: Mode::Eval { q_gen, t_gen },
            self_dual: false,
            mutation: Mutation::None,
            max_degree,
        })
    }

    pub fn with_mutation(mut self, m: Mutation) -> Params {
        self.mutation = m;
        self
    }

    pub fn is_self_dual(&self) -> bool {
        self.self_dual
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self.mode, Mode::Symbolic)
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    /// Q^a T^b as a coefficient (Laurent exponents allowed).
    pub fn qt(&self, a: i64, b: i64) -> Rf {
        // self-dual collapse: T = Q exactly
        let (a, b) = if self.self_dual { (a + b, 0) } else { (a, b) };
        match &self.mode {
            Mode::Symbolic => {
                let mut nq = 0u32;
                let mut nt = 0u32;
                let mut dq = 0u32;
                let mut dt = 0u32;
                if a >= 0 {
                    nq = a as u32;
                } else {
                    dq = (-a) as u32;
                }
                if b >= 0 {
                    nt = b as u32;
                } else {
                    dt = (-b) as u32;
                }
                Rf::Sym(RatFun {
                    num: Poly::monomial(nq, nt, BigInt::one()),
                    den: Poly::monomial(dq, dt, BigInt::one()),
                })
            }
            Mode::Eval { q_gen, t_gen } => Rf::Num(rat_pow(q_gen, a) * rat_pow(t_gen, b)),
        }
    }

    pub fn rf_int(&self, n: i64) -> Rf {
        self.rf_ratio(n, 1)
    }

    pub fn rf_ratio(&self, n: i64, d: i64) -> Rf {
        assert!(d != 0);
        match &self.mode {
            Mode::Symbolic => Rf::Sym(RatFun::reduce(
                Poly::constant(BigInt::from(n)),
                Poly::constant(BigInt::from(d)),
            )),
            Mode::Eval { .. } => Rf::Num(big(n, d)),
        }
    }

    pub fn one(&self) -> Rf {
        self.rf_int(1)
    }

    // deformation parameters ------------------------------------------------

    pub fn q_pow(&self, k: i64) -> Rf {
        self.qt(4 * k, 0)
    }

    pub fn t_pow(&self, k: i64) -> Rf {
        self.qt(0, 4 * k)
    }

    pub fn q1_pow(&self, k: i64) -> Rf {
        self.t_pow(-k)
    }

    pub fn q2_pow(&self, k: i64) -> Rf {
        self.q_pow(k)
    }

    pub fn q3_pow(&self, k: i64) -> Rf {
        self.qt(-4 * k, 4 * k)
    }

    pub fn p_pow(&self, k: i64) -> Rf {
        self.qt(4 * k, -4 * k)
    }

    /// gamma^{n/2} where gamma = (t/q)^{1/2}; half-integer steps are exact.
    pub fn gamma_half_pow(&self, n: i64) -> Rf {
        self.qt(-n, n)
    }

    pub fn gamma_pow(&self, k: i64) -> Rf {
        self.gamma_half_pow(2 * k)
    }

    /// kappa = (1-q1)(1-q2)/(1-q1q2).
    pub fn kappa(&self) -> Rf {
        let one = self.one();
        let n = one.sub(&self.q1_pow(1)).mul(&one.sub(&self.q2_pow(1)));
        let d = one.sub(&self.q1_pow(1).mul(&self.q2_pow(1)));
        n.div(&d).expect("kappa denominator nonzero at a generic point")
    }

    /// c_k = -(1/k) prod_a (1 - q_a^k).
    pub fn c_k(&self, k: i64) -> Rf {
        assert!(k != 0);
        let one = self.one();
        let prod = one
            .sub(&self.q1_pow(k))
            .mul(&one.sub(&self.q2_pow(k)))
            .mul(&one.sub(&self.q3_pow(k)));
        prod.mul(&self.rf_ratio(-1, k))
    }

    /// r_k = (1-t^k)/(1-q^k).
    pub fn r_k(&self, k: i64) -> Rf {
        assert!(k != 0);
        let one = self.one();
        one.sub(&self.t_pow(k))
            .div(&one.sub(&self.q_pow(k)))
            .expect("generic point excludes q^k = 1")
    }

    // scalar helpers ---------------------------------------------------------

    pub fn s_zero(&self) -> Scalar {
        Scalar::zero()
    }

    pub fn s_one(&self) -> Scalar {
        Scalar::from_rf(self.one())
    }

    pub fn s_int(&self, n: i64) -> Scalar {
        Scalar::from_rf(self.rf_int(n))
    }

    pub fn s_ratio(&self, n: i64, d: i64) -> Scalar {
        Scalar::from_rf(self.rf_ratio(n, d))
    }

    pub fn s_qt(&self, a: i64, b: i64) -> Scalar {
        Scalar::from_rf(self.qt(a, b))
    }

    pub fn s_mono(&self, m: Mono) -> Scalar {
        Scalar::term(self.one(), m)
    }
}

// ---------------------------------------------------------------------------
// zeta and g
// ---------------------------------------------------------------------------

fn parameter_monomial(arg: &Scalar) -> Result<Rf> {
    match arg.as_single_term() {
        Some((m, rf)) if m.is_one() => Ok(rf.clone()),
        _ => Err(Error::Domain(
            "argument must be a single monomial in the deformation parameters".into(),
        )),
    }
}

/// zeta(x) = (x-1)(x-q1q2) / ((x-q1)(x-q2)) at a parameter monomial.
pub fn zeta(pa: &Params, arg: &Scalar) -> Result<Scalar> {
    let x = parameter_monomial(arg)?;
    let one = pa.one();
    let q1 = pa.q1_pow(1);
    let q2 = pa.q2_pow(1);
    let d1 = x.sub(&q1);
    let d2 = x.sub(&q2);
    if d1.is_zero() || d2.is_zero() {
        return Err(Error::PoleAtArgument(format!("{}", arg)));
    }
    let first = match pa.mutation {
        Mutation::ZetaNumFlip => x.add(&one),
        _ => x.sub(&one),
    };
    let num = first.mul(&x.sub(&q1.mul(&q2)));
    Ok(Scalar::from_rf(num.div(&d1.mul(&d2))?))
}

/// g(z) = prod_a (1 - q_a z)/(1 - q_a^{-1} z) at a parameter monomial.
pub fn g_function(pa: &Params, arg: &Scalar) -> Result<Scalar> {
    let z = parameter_monomial(arg)?;
    let one = pa.one();
    let mut num = pa.one();
    let mut den = pa.one();
    for qa in [pa.q1_pow(1), pa.q2_pow(1), pa.q3_pow(1)] {
        num = num.mul(&one.sub(&qa.mul(&z)));
        let d = one.sub(&qa.inv()?.mul(&z));
        if d.is_zero() {
            return Err(Error::PoleAtArgument(format!("{}", arg)));
        }
        den = den.mul(&d);
    }
    Ok(Scalar::from_rf(num.div(&den)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_scalar(pa: &Params, rng: &mut ChaCha8Rng, nterms: usize) -> Scalar {
        let mut s = Scalar::zero();
        for _ in 0..nterms {
            let a = rng.gen_range(-3..=3);
            let b = rng.gen_range(-3..=3);
            let c = rng.gen_range(-5..=5i64);
            let mut m = Mono::one();
            m.u = rng.gen_range(-2..=2);
            m.x = rng.gen_range(0..=2);
            s.add_assign(&Scalar::term(pa.qt(a, b).mul(&pa.rf_int(c)), m));
        }
        s
    }

    #[test]
    fn ring_axioms_randomized() {
        for pa in [Params::default_eval(), Params::symbolic()] {
            let trials = if pa.is_symbolic() { 60 } else { 1000 };
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            for _ in 0..trials {
                let a = random_scalar(&pa, &mut rng, 2);
                let b = random_scalar(&pa, &mut rng, 2);
                let c = random_scalar(&pa, &mut rng, 2);
                assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
                assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
                assert_eq!(a.mul(&b), b.mul(&a));
                assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            }
        }
    }

    #[test]
    fn symbolic_matches_eval_on_random_expressions() {
        let sym = Params::symbolic();
        let ev = Params::default_eval();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let point = (big(3, 5), big(7, 11));
        for _ in 0..50 {
            // build the same expression tree in both modes
            let mut s_sym = sym.s_one();
            let mut s_ev = ev.s_one();
            for _ in 0..4 {
                let a = rng.gen_range(-3..=3);
                let b = rng.gen_range(-3..=3);
                let c = rng.gen_range(-4..=4i64);
                let add = rng.gen_bool(0.5);
                let t_sym = Scalar::from_rf(sym.qt(a, b).mul(&sym.rf_int(c)));
                let t_ev = Scalar::from_rf(ev.qt(a, b).mul(&ev.rf_int(c)));
                if add {
                    s_sym = s_sym.add(&t_sym);
                    s_ev = s_ev.add(&t_ev);
                } else {
                    s_sym = s_sym.mul(&t_sym);
                    s_ev = s_ev.mul(&t_ev);
                }
            }
            // evaluate the symbolic result and compare
            let mut total = BigRational::zero();
            let mut total_ev = BigRational::zero();
            for (m, rf) in s_sym.terms() {
                assert!(m.is_one());
                if let Rf::Sym(r) = rf {
                    total += r.num.eval(&point.0, &point.1) / r.den.eval(&point.0, &point.1);
                }
            }
            for (m, rf) in s_ev.terms() {
                assert!(m.is_one());
                if let Rf::Num(r) = rf {
                    total_ev += r.clone();
                }
            }
            assert_eq!(total, total_ev);
        }
    }

    #[test]
    fn inverse_pair_cancels() {
        let pa = Params::symbolic();
        let one = pa.one();
        let a = one.sub(&pa.q_pow(1)).div(&one.sub(&pa.t_pow(1))).unwrap();
        let b = one.sub(&pa.t_pow(1)).div(&one.sub(&pa.q_pow(1))).unwrap();
        assert!(a.mul(&b).is_one());
    }

    #[test]
    fn kappa_closed_form() {
        let pa = Params::symbolic();
        let one = pa.one();
        let expect = one
            .sub(&pa.t_pow(-1))
            .mul(&one.sub(&pa.q_pow(1)))
            .div(&one.sub(&pa.t_pow(-1).mul(&pa.q_pow(1))))
            .unwrap();
        assert_eq!(pa.kappa(), expect);
    }

    #[test]
    fn weight_exponents_cancel() {
        let pa = Params::default_eval();
        let a = Scalar::term(pa.one(), Mono::u_pow(1));
        let b = Scalar::term(pa.one(), Mono::u_pow(-1));
        assert_eq!(a.mul(&b), pa.s_one());
    }

    #[test]
    fn zeta_zeros_and_generic_value() {
        let pa = Params::symbolic();
        // q1 q2 = q3^{-1}: both stated zeros coincide
        let q1q2 = Scalar::from_rf(pa.q1_pow(1).mul(&pa.q2_pow(1)));
        assert!(zeta(&pa, &q1q2).unwrap().is_zero());
        assert!(zeta(&pa, &pa.s_one()).unwrap().is_zero());
        assert!(zeta(&pa, &Scalar::from_rf(pa.q3_pow(-1))).unwrap().is_zero());
        // pole detection
        assert!(matches!(
            zeta(&pa, &Scalar::from_rf(pa.q1_pow(1))),
            Err(Error::PoleAtArgument(_))
        ));
        // a generic argument: direct substitution oracle
        let x = pa.q3_pow(2);
        let one = pa.one();
        let oracle = x
            .sub(&one)
            .mul(&x.sub(&pa.q1_pow(1).mul(&pa.q2_pow(1))))
            .div(&x.sub(&pa.q1_pow(1)).mul(&x.sub(&pa.q2_pow(1))))
            .unwrap();
        assert_eq!(zeta(&pa, &Scalar::from_rf(pa.q3_pow(2))).unwrap(), Scalar::from_rf(oracle));
    }

    #[test]
    fn g_inversion_identity() {
        // g(z) g(z^{-1}) = 1, checked symbolically at monomial arguments
        let pa = Params::symbolic();
        for k in [1i64, 2, 3] {
            let z = Scalar::from_rf(pa.qt(k, 2 * k));
            let zi = Scalar::from_rf(pa.qt(-k, -2 * k));
            let prod = g_function(&pa, &z).unwrap().mul(&g_function(&pa, &zi).unwrap());
            assert_eq!(prod, pa.s_one());
        }
        // numerator zero at z = q1^{-1}
        let z = Scalar::from_rf(pa.q1_pow(-1));
        assert!(g_function(&pa, &z).unwrap().is_zero());
    }

    #[test]
    fn self_dual_constants_collapse() {
        let pa = Params::self_dual_eval();
        assert!(pa.gamma_pow(1).is_one());
        assert!(pa.p_pow(1).is_one());
        assert!(pa.q3_pow(1).is_one());
        // g(z) = 1 identically at q3 = 1
        let z = Scalar::from_rf(pa.q_pow(2));
        assert_eq!(g_function(&pa, &z).unwrap(), pa.s_one());
    }

    #[test]
    fn self_dual_substitution_is_homomorphism() {
        let pa = Params::symbolic();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let a = random_scalar(&pa, &mut rng, 2);
            let b = random_scalar(&pa, &mut rng, 2);
            assert_eq!(a.mul(&b).subst_t_to_q(), a.subst_t_to_q().mul(&b.subst_t_to_q()));
            assert_eq!(a.add(&b).subst_t_to_q(), a.subst_t_to_q().add(&b.subst_t_to_q()));
        }
    }

    #[test]
    fn eval_point_validation() {
        assert!(Params::eval(big(1, 1), big(7, 11), 6).is_err());
        assert!(Params::eval(big(3, 5), big(3, 5), 6).is_err());
        assert!(Params::eval(big(0, 1), big(7, 11), 6).is_err());
        assert!(Params::eval(big(3, 5), big(7, 11), 6).is_ok());
    }

    #[test]
    fn division_preconditions() {
        let pa = Params::default_eval();
        let two_terms = pa.s_one().add(&Scalar::term(pa.one(), Mono::u_pow(1)));
        assert!(matches!(pa.s_one().div(&two_terms), Err(Error::NonMonomialDivisor)));
        assert!(matches!(pa.s_one().div(&Scalar::zero()), Err(Error::DivisionByZero)));
        // dividing by x would leave the polynomial cone
        let x = Scalar::term(pa.one(), Mono::x_pow(1));
        assert!(pa.s_one().div(&x).is_err());
        assert!(x.mul(&x).div(&x).is_ok());
    }

    #[test]
    fn gcd_reduces_fractions() {
        let pa = Params::symbolic();
        let one = pa.one();
        // (1-q)(1-t) / (1-q) = (1-t)
        let n = one.sub(&pa.q_pow(1)).mul(&one.sub(&pa.t_pow(1)));
        let d = one.sub(&pa.q_pow(1));
        let r = n.div(&d).unwrap();
        assert_eq!(r, one.sub(&pa.t_pow(1)));
    }
}
