//! Normal-ordered vertex operators on truncated Fock states.
//!
//! A [`VertexOp`] is prefactor * z^{zpow} * exp(sum_k A_k J_{-k}) *
//! exp(sum_k B_k J_k) together with zero-mode data (weight multiplier and
//! relabel). Mode coefficients are given by closed-form laws
//! A_k = (1/k) sum_i c_i w_i^k / prod_j (1 - s_j d_j^k), which is what every
//! operator in this hierarchy looks like; the laws drive both the numeric
//! application at each k and the exact resummation of OPE contractions.
//!
//! Operator products are computed either by sequential application (exact per
//! graded coefficient at the working truncation) or through [`ope`], which
//! returns the contraction as exact rational data plus possibly a
//! non-geometric log remainder, together with the merged composite.

use std::collections::BTreeMap;

use crate::fock::{Coeff, State, Weight};
use crate::partition::{factorial, Partition};
use crate::ring::{Mutation, Params, Scalar};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// mode-coefficient laws
// ---------------------------------------------------------------------------

/// Closed-form mode coefficient: (1/k) sum_i c_i w_i^k / prod_j (1 - s_j d_j^k).
#[derive(Clone, Debug, PartialEq)]
pub struct Law {
    pub num: Vec<(i64, Weight)>,
    /// (sign, base): factor (1 - sign * base^k); base must be symbol-free
    pub den: Vec<(i64, Weight)>,
}

impl Law {
    pub fn new(num: Vec<(i64, Weight)>) -> Law {
        Law { num, den: Vec::new() }
    }

    pub fn with_den(num: Vec<(i64, Weight)>, den: Vec<(i64, Weight)>) -> Law {
        Law { num, den }
    }

    pub fn scaled(&self, c: i64) -> Law {
        Law { num: self.num.iter().map(|(a, w)| (a * c, *w)).collect(), den: self.den.clone() }
    }

    /// Multiply every numerator base by a fixed monomial (argument rescale).
    pub fn arg_mul(&self, w: &Weight) -> Law {
        Law { num: self.num.iter().map(|(c, b)| (*c, b.mul(w))).collect(), den: self.den.clone() }
    }

    pub fn eval(&self, pa: &Params, k: i64) -> Scalar {
        assert!(k > 0);
        let mut acc = Scalar::zero();
        for (c, w) in &self.num {
            acc.add_assign(&w.pow(k).as_scalar(pa).mul(&pa.s_int(*c)));
        }
        let mut den = pa.one();
        for (s, d) in &self.den {
            assert!(d.mono.is_one(), "law denominators must be parameter monomials");
            let dk = d.pow(k);
            let rf = pa.qt(dk.qp, dk.tp);
            let rf = if dk.neg { rf.neg() } else { rf };
            den = den.mul(&pa.one().sub(&rf.mul(&pa.rf_int(*s))));
        }
        acc.mul(&Scalar::from_rf(pa.rf_ratio(1, k).div(&den).expect("generic point")))
    }
}

/// One exponential channel of a vertex operator.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub create: bool,
    /// formal variable tag: None for fixed-argument channels
    pub var: Option<usize>,
    pub law: Law,
}

/// Normal-ordered vertex operator record.
#[derive(Clone, Debug)]
pub struct VertexOp {
    pub prefactor: Scalar,
    /// explicit z-power per variable tag
    pub zpows: BTreeMap<usize, i64>,
    /// z-power read from the leg charge, per variable tag
    pub zpow_charge: BTreeMap<usize, i64>,
    pub channels: Vec<Channel>,
    /// multiply the coefficient by weight^{weight_mult} (u-hat insertions)
    pub weight_mult: i64,
    /// weight relabel applied after the action
    pub relabel: Weight,
}

impl VertexOp {
    pub fn identity(pa: &Params) -> VertexOp {
        VertexOp {
            prefactor: pa.s_one(),
            zpows: BTreeMap::new(),
            zpow_charge: BTreeMap::new(),
            channels: Vec::new(),
            weight_mult: 0,
            relabel: Weight::one(),
        }
    }

    pub fn with_prefactor(mut self, s: Scalar) -> VertexOp {
        self.prefactor = self.prefactor.mul(&s);
        self
    }

    pub fn with_zpow(mut self, var: usize, p: i64) -> VertexOp {
        *self.zpows.entry(var).or_insert(0) += p;
        self
    }

    pub fn with_weight_mult(mut self, m: i64) -> VertexOp {
        self.weight_mult += m;
        self
    }

    pub fn with_relabel(mut self, w: Weight) -> VertexOp {
        self.relabel = self.relabel.mul(&w);
        self
    }

    pub fn with_charge_zpow(mut self, var: usize, c: i64) -> VertexOp {
        *self.zpow_charge.entry(var).or_insert(0) += c;
        self
    }

    pub fn with_channel(mut self, create: bool, var: Option<usize>, law: Law) -> VertexOp {
        self.channels.push(Channel { create, var, law });
        self
    }

    /// Rescale the formal argument z -> c z: channel bases pick up c^{+-k}
    /// and explicit z-powers pick up c^{zpow} into the prefactor.
    pub fn arg_rescale(&self, pa: &Params, var: usize, c: &Weight) -> VertexOp {
        let mut r = self.clone();
        for ch in r.channels.iter_mut() {
            if ch.var == Some(var) {
                let base = if ch.create { *c } else { c.inv() };
                ch.law = ch.law.arg_mul(&base);
            }
        }
        let zp = r.zpows.get(&var).copied().unwrap_or(0);
        if zp != 0 {
            r.prefactor = r.prefactor.mul(&c.pow(zp).as_scalar(pa));
        }
        assert!(
            r.zpow_charge.get(&var).copied().unwrap_or(0) == 0,
            "cannot rescale a charge-graded argument"
        );
        r
    }

    /// Evaluate the formal variable at a fixed monomial argument: var-graded
    /// channels become fixed channels with bases multiplied by arg^{+-1}, and
    /// the explicit z-power folds into the prefactor.
    pub fn fix_var(&self, pa: &Params, var: usize, arg: &Weight) -> VertexOp {
        assert!(
            self.zpow_charge.get(&var).copied().unwrap_or(0) == 0,
            "cannot fix a charge-graded argument"
        );
        let mut r = self.clone();
        for ch in r.channels.iter_mut() {
            if ch.var == Some(var) {
                let base = if ch.create { *arg } else { arg.inv() };
                ch.law = ch.law.arg_mul(&base);
                ch.var = None;
            }
        }
        if let Some(zp) = r.zpows.remove(&var) {
            r.prefactor = r.prefactor.mul(&arg.pow(zp).as_scalar(pa));
        }
        r
    }

    /// Split into the annihilation half (carrying all zero modes) and the
    /// creation half. Applying all annihilation halves of a tensor operator
    /// before any creation half keeps intermediate degrees from overshooting
    /// the truncation cap.
    pub fn split_halves(&self, pa: &Params) -> (VertexOp, VertexOp) {
        let mut ann = self.clone();
        ann.channels = self.channels.iter().filter(|c| !c.create).cloned().collect();
        let mut cre = VertexOp::identity(pa);
        cre.channels = self.channels.iter().filter(|c| c.create).cloned().collect();
        (ann, cre)
    }

    /// Formal inverse of the exponential part: negate all channel laws and
    /// invert zero modes.
    pub fn exp_inverse(&self, pa: &Params) -> VertexOp {
        VertexOp {
            prefactor: Scalar::from_rf(pa.one())
                .div(&self.prefactor)
                .expect("invertible prefactor"),
            zpows: self.zpows.iter().map(|(v, p)| (*v, -p)).collect(),
            zpow_charge: self.zpow_charge.iter().map(|(v, p)| (*v, -p)).collect(),
            channels: self
                .channels
                .iter()
                .map(|ch| Channel { create: ch.create, var: ch.var, law: ch.law.scaled(-1) })
                .collect(),
            weight_mult: -self.weight_mult,
            relabel: self.relabel.inv(),
        }
    }
}

/// Parse an integer charge n from a weight of the form q^n.
pub fn charge_of(w: &Weight) -> Result<i64> {
    if !w.mono.is_one() || w.neg {
        return Err(Error::Domain(format!("weight {} carries no integer charge", w)));
    }
    let tot = w.qp + w.tp;
    if tot % 4 != 0 {
        return Err(Error::Domain(format!("weight {} carries no integer charge", w)));
    }
    Ok(tot / 4)
}

// ---------------------------------------------------------------------------
// graded application
// ---------------------------------------------------------------------------

/// State-valued coefficients graded by powers of several formal variables.
#[derive(Clone, Debug)]
pub struct Graded<C: Coeff> {
    pub axes: usize,
    pub weights: Vec<Weight>,
    pub trunc_deg: u32,
    terms: BTreeMap<Vec<i64>, State<C>>,
}

impl<C: Coeff> Graded<C> {
    pub fn from_state(st: State<C>) -> Graded<C> {
        let weights = st.weights.clone();
        let trunc_deg = st.trunc_deg;
        let mut terms = BTreeMap::new();
        if !st.is_zero() {
            terms.insert(Vec::new(), st);
        }
        Graded { axes: 0, weights, trunc_deg, terms }
    }

    pub fn zero_like(&self) -> Graded<C> {
        Graded {
            axes: self.axes,
            weights: self.weights.clone(),
            trunc_deg: self.trunc_deg,
            terms: BTreeMap::new(),
        }
    }

    pub fn add_axis(&self) -> Graded<C> {
        let mut terms = BTreeMap::new();
        for (k, v) in &self.terms {
            let mut nk = k.clone();
            nk.push(0);
            terms.insert(nk, v.clone());
        }
        Graded {
            axes: self.axes + 1,
            weights: self.weights.clone(),
            trunc_deg: self.trunc_deg,
            terms,
        }
    }

    pub fn insert_add(&mut self, key: Vec<i64>, st: State<C>) {
        if st.is_zero() {
            return;
        }
        debug_assert_eq!(key.len(), self.axes);
        debug_assert_eq!(st.weights, self.weights);
        match self.terms.get_mut(&key) {
            Some(e) => {
                let s = e.add(&st).expect("weights agree within a graded family");
                if s.is_zero() {
                    self.terms.remove(&key);
                } else {
                    *e = s;
                }
            }
            None => {
                self.terms.insert(key, st);
            }
        }
    }

    pub fn add(&self, o: &Graded<C>) -> Graded<C> {
        let mut r = self.clone();
        if r.terms.is_empty() {
            r.weights = o.weights.clone();
        }
        for (k, v) in &o.terms {
            r.insert_add(k.clone(), v.clone());
        }
        r
    }

    pub fn neg(&self) -> Graded<C> {
        Graded {
            axes: self.axes,
            weights: self.weights.clone(),
            trunc_deg: self.trunc_deg,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v.neg())).collect(),
        }
    }

    pub fn sub(&self, o: &Graded<C>) -> Graded<C> {
        self.add(&o.neg())
    }

    pub fn scale(&self, s: &Scalar) -> Graded<C> {
        let mut r = self.zero_like();
        for (k, v) in &self.terms {
            r.insert_add(k.clone(), v.scale(s));
        }
        r
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i64>, &State<C>)> {
        self.terms.iter()
    }

    pub fn coeff(&self, key: &[i64]) -> State<C> {
        self.terms
            .get(key)
            .cloned()
            .unwrap_or_else(|| State::zero(self.weights.clone(), self.trunc_deg))
    }

    pub fn retain_axis(&mut self, axis: usize, lo: i64, hi: i64) {
        self.terms.retain(|k, _| k[axis] >= lo && k[axis] <= hi);
    }

    pub fn shift_axis(&mut self, axis: usize, d: i64) {
        if d == 0 {
            return;
        }
        let old = std::mem::take(&mut self.terms);
        for (mut k, v) in old {
            k[axis] += d;
            self.terms.insert(k, v);
        }
    }

    /// Map every state, keeping the grading; weights may be relabeled.
    pub fn map_states(&self, f: impl Fn(&State<C>) -> State<C>) -> Graded<C> {
        let mut weights = self.weights.clone();
        let mut terms = BTreeMap::new();
        for (k, v) in &self.terms {
            let nv = f(v);
            weights = nv.weights.clone();
            if !nv.is_zero() {
                terms.insert(k.clone(), nv);
            }
        }
        Graded { axes: self.axes, weights, trunc_deg: self.trunc_deg, terms }
    }
}

/// Per-axis materialization windows.
pub type AxisWindows = Vec<(i64, i64)>;

fn binom(n: i64, k: i64) -> i64 {
    if k < 0 || k > n {
        return 0;
    }
    let mut r = 1i64;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Apply a vertex operator on one leg of a graded state.
///
/// `var_axis` maps each variable tag of the operator to an axis of the
/// graded state. Every surviving coefficient is exact per z-power at the
/// state truncation degree.
pub fn apply<C: Coeff>(
    pa: &Params,
    op: &VertexOp,
    g: &Graded<C>,
    leg: usize,
    var_axis: &BTreeMap<usize, usize>,
    wins: &AxisWindows,
) -> Result<Graded<C>> {
    assert_eq!(wins.len(), g.axes);
    let deg_cap = g.trunc_deg;
    let mut ann_cache: BTreeMap<i64, Vec<(Option<usize>, Scalar)>> = BTreeMap::new();
    let mut cre_cache: BTreeMap<i64, Vec<(Option<usize>, Scalar)>> = BTreeMap::new();
    let eval_channels = |create: bool, k: i64| -> Vec<(Option<usize>, Scalar)> {
        let mut merged: BTreeMap<Option<usize>, Scalar> = BTreeMap::new();
        for ch in &op.channels {
            if ch.create != create {
                continue;
            }
            let v = ch.law.eval(pa, k);
            if v.is_zero() {
                continue;
            }
            merged.entry(ch.var).or_insert_with(Scalar::zero).add_assign(&v);
        }
        merged.into_iter().filter(|(_, s)| !s.is_zero()).collect()
    };

    let out_weights = {
        let mut w = g.weights.clone();
        w[leg] = w[leg].mul(&op.relabel).canon(pa);
        w
    };
    let mut out = Graded {
        axes: g.axes,
        weights: out_weights.clone(),
        trunc_deg: deg_cap,
        terms: BTreeMap::new(),
    };

    // constant zero-mode z-shift from explicit powers and charge reading
    let mut const_shift: Vec<i64> = vec![0; g.axes];
    for (v, p) in &op.zpows {
        const_shift[*var_axis.get(v).expect("variable axis assigned")] += *p;
    }
    if !op.zpow_charge.is_empty() {
        let c = charge_of(&g.weights[leg])?;
        for (v, p) in &op.zpow_charge {
            const_shift[*var_axis.get(v).expect("variable axis assigned")] += p * c;
        }
    }
    let weight_factor = if op.weight_mult == 0 {
        pa.s_one()
    } else {
        g.weights[leg].pow(op.weight_mult).as_scalar(pa)
    };
    let pref = op.prefactor.mul(&weight_factor);
    if pref.is_zero() {
        return Ok(out);
    }

    for (zkey, st) in g.terms() {
        for (pkey, c) in st.terms() {
            let la = &pkey[leg];
            // --- annihilation phase: per part size, multinomial over channels
            let distinct: Vec<(u32, u32)> = {
                let mut v: Vec<(u32, u32)> = Vec::new();
                for &p in la.parts() {
                    match v.iter_mut().find(|(k, _)| *k == p) {
                        Some((_, m)) => *m += 1,
                        None => v.push((p, 1)),
                    }
                }
                v
            };
            // pieces: (z-deltas, remaining multiplicities, scalar)
            let mut pieces: Vec<(Vec<i64>, Vec<u32>, Scalar)> =
                vec![(vec![0; g.axes], distinct.iter().map(|(_, m)| *m).collect(), pref.clone())];
            for (di, (k, m)) in distinct.iter().enumerate() {
                let cats = ann_cache
                    .entry(*k as i64)
                    .or_insert_with(|| eval_channels(false, *k as i64))
                    .clone();
                if cats.is_empty() {
                    continue;
                }
                let mut next: Vec<(Vec<i64>, Vec<u32>, Scalar)> = Vec::new();
                for (zd, mults, sc) in &pieces {
                    let mut tuples: Vec<(Vec<u32>, u32)> = vec![(vec![0; cats.len()], 0)];
                    for ci in 0..cats.len() {
                        let mut nt = Vec::new();
                        for (tu, tot) in &tuples {
                            for j in 0..=(m - tot) {
                                let mut t2 = tu.clone();
                                t2[ci] = j;
                                nt.push((t2, tot + j));
                            }
                        }
                        tuples = nt;
                    }
                    for (tu, j) in tuples {
                        // coefficient C(m,j) k^j j!/prod(j_c!) prod b_c^{j_c}
                        let mut factor = pa.s_ratio(
                            binom(*m as i64, j as i64) * factorial(j as i64),
                            tu.iter().map(|&x| factorial(x as i64)).product::<i64>(),
                        );
                        factor = factor.mul(&pa.s_int((*k as i64).pow(j)));
                        let mut zd2 = zd.clone();
                        for (ci, &jc) in tu.iter().enumerate() {
                            if jc == 0 {
                                continue;
                            }
                            factor = factor.mul(&cats[ci].1.pow(jc as i64).unwrap());
                            if let Some(v) = cats[ci].0 {
                                zd2[*var_axis.get(&v).expect("axis")] -=
                                    (*k as i64) * jc as i64;
                            }
                        }
                        if factor.is_zero() {
                            continue;
                        }
                        let mut mults2 = mults.clone();
                        mults2[di] -= j;
                        next.push((zd2, mults2, sc.mul(&factor)));
                    }
                }
                pieces = next;
            }
            // --- creation phase
            let other_deg: u32 =
                pkey.iter().enumerate().filter(|(i, _)| *i != leg).map(|(_, p)| p.size()).sum();
            for (zd, mults, sc) in pieces {
                let mut rem_parts: Vec<u32> = Vec::new();
                for (di, (k, _)) in distinct.iter().enumerate() {
                    for _ in 0..mults[di] {
                        rem_parts.push(*k);
                    }
                }
                let cur_deg = other_deg + rem_parts.iter().sum::<u32>();
                let room = deg_cap.saturating_sub(cur_deg);
                let mut emit = |zd2: &Vec<i64>, add_parts: &[u32], sc2: &Scalar| {
                    let mut zfin = zkey.clone();
                    for a in 0..g.axes {
                        zfin[a] += zd2[a] + const_shift[a];
                        if zfin[a] < wins[a].0 || zfin[a] > wins[a].1 {
                            return;
                        }
                    }
                    let mut parts = rem_parts.clone();
                    parts.extend_from_slice(add_parts);
                    parts.sort_unstable_by(|a, b| b.cmp(a));
                    let mut nk = pkey.clone();
                    nk[leg] = Partition::new(parts);
                    let mut stt = State::zero(out_weights.clone(), deg_cap);
                    stt.insert_add(nk, c.c_mul_scalar(sc2));
                    out.insert_add(zfin, stt);
                };
                rec_create(
                    pa,
                    &mut cre_cache,
                    &eval_channels,
                    room,
                    1,
                    &zd,
                    &sc,
                    &Vec::new(),
                    &mut emit,
                    var_axis,
                );
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn rec_create(
    pa: &Params,
    cache: &mut BTreeMap<i64, Vec<(Option<usize>, Scalar)>>,
    eval: &dyn Fn(bool, i64) -> Vec<(Option<usize>, Scalar)>,
    room: u32,
    kmin: u32,
    zd: &Vec<i64>,
    sc: &Scalar,
    parts: &Vec<u32>,
    emit: &mut dyn FnMut(&Vec<i64>, &[u32], &Scalar),
    var_axis: &BTreeMap<usize, usize>,
) {
    emit(zd, parts, sc);
    for k in kmin..=room {
        let cats = cache.entry(k as i64).or_insert_with(|| eval(true, k as i64)).clone();
        if cats.is_empty() {
            continue;
        }
        let maxj_total = room / k;
        let mut tuples: Vec<(Vec<u32>, u32)> = vec![(vec![0; cats.len()], 0)];
        for ci in 0..cats.len() {
            let mut nt = Vec::new();
            for (tu, tot) in &tuples {
                for j in 0..=(maxj_total - tot) {
                    let mut t2 = tu.clone();
                    t2[ci] = j;
                    nt.push((t2, tot + j));
                }
            }
            tuples = nt;
        }
        for (tu, j) in tuples {
            if j == 0 {
                continue;
            }
            let mut factor = sc.clone();
            let mut zd2 = zd.clone();
            let mut parts2 = parts.clone();
            for (ci, &jc) in tu.iter().enumerate() {
                if jc == 0 {
                    continue;
                }
                factor = factor
                    .mul(&cats[ci].1.pow(jc as i64).unwrap())
                    .mul(&pa.s_ratio(1, factorial(jc as i64)));
                if let Some(v) = cats[ci].0 {
                    zd2[*var_axis.get(&v).expect("axis")] += (k as i64) * jc as i64;
                }
                for _ in 0..jc {
                    parts2.push(k);
                }
            }
            if factor.is_zero() {
                continue;
            }
            rec_create(pa, cache, eval, room - j * k, k + 1, &zd2, &factor, &parts2, emit, var_axis);
        }
    }
}

/// Convenience: apply an operator with a single variable as a fresh axis.
pub fn apply_z<C: Coeff>(
    pa: &Params,
    op: &VertexOp,
    st: &State<C>,
    leg: usize,
    win: (i64, i64),
) -> Result<Graded<C>> {
    let g = Graded::from_state(st.clone()).add_axis();
    let mut va = BTreeMap::new();
    va.insert(0usize, 0usize);
    apply(pa, op, &g, leg, &va, &vec![win])
}

/// Tensor operator: one vertex factor per leg sharing the formal variable,
/// an overall prefactor, and an overall z-power (the resolved zero mode).
#[derive(Clone, Debug)]
pub struct TensorOp {
    pub prefactor: Scalar,
    pub zpow: i64,
    pub legs: Vec<(usize, VertexOp)>,
}

impl TensorOp {
    pub fn apply<C: Coeff>(
        &self,
        pa: &Params,
        g: &Graded<C>,
        axis: usize,
        wins: &AxisWindows,
    ) -> Result<Graded<C>> {
        let mut cur = g.clone();
        // widen the window on the shared axis; the zero mode shifts at the end
        let mut wide = wins.clone();
        let slack = self.zpow.abs() + 2 * g.trunc_deg as i64;
        wide[axis] = (wins[axis].0 - slack, wins[axis].1 + slack);
        // all annihilation halves first: intermediate degrees never overshoot
        let mut halves: Vec<(usize, VertexOp)> = Vec::new();
        for (leg, op) in &self.legs {
            let (ann, _) = op.split_halves(pa);
            halves.push((*leg, ann));
        }
        for (leg, op) in &self.legs {
            let (_, cre) = op.split_halves(pa);
            halves.push((*leg, cre));
        }
        for (leg, op) in &halves {
            let mut va = BTreeMap::new();
            for ch in &op.channels {
                if let Some(v) = ch.var {
                    va.insert(v, axis);
                }
            }
            for v in op.zpows.keys().chain(op.zpow_charge.keys()) {
                va.insert(*v, axis);
            }
            if va.is_empty() {
                va.insert(0usize, axis);
            }
            cur = apply(pa, op, &cur, *leg, &va, &wide)?;
        }
        cur.shift_axis(axis, self.zpow);
        let mut out = cur.scale(&self.prefactor);
        out.retain_axis(axis, wins[axis].0, wins[axis].1);
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// OPE: contraction and composite
// ---------------------------------------------------------------------------

/// One exact rational factor (1 - base z^{dz k} w^{dw k})^{expo}.
#[derive(Clone, Debug, PartialEq)]
pub struct SFactor {
    pub base: Weight,
    pub dz: i64,
    pub dw: i64,
    pub expo: i64,
}

/// Non-geometric remainder exp(mult sum_k (1/k) base^k (z^dz w^dw)^k / dens).
#[derive(Clone, Debug, PartialEq)]
pub struct LogFactor {
    pub mult: i64,
    pub base: Weight,
    pub dz: i64,
    pub dw: i64,
    pub den: Vec<(i64, Weight)>,
}

/// Structure function of an operator product: exact rational data plus a
/// declared expansion direction; log remainders stay as truncated series.
#[derive(Clone, Debug)]
pub struct Structure {
    pub rational: Vec<SFactor>,
    pub logs: Vec<LogFactor>,
}

impl Structure {
    pub fn one() -> Structure {
        Structure { rational: Vec::new(), logs: Vec::new() }
    }

    pub fn is_trivial(&self) -> bool {
        self.rational.is_empty() && self.logs.is_empty()
    }

    fn split_constant(&self) -> (Structure, Structure) {
        let mut con = Structure::one();
        let mut var = Structure::one();
        for f in &self.rational {
            if f.dz == 0 && f.dw == 0 {
                con.rational.push(f.clone());
            } else {
                var.rational.push(f.clone());
            }
        }
        for l in &self.logs {
            if l.dz == 0 && l.dw == 0 {
                con.logs.push(l.clone());
            } else {
                var.logs.push(l.clone());
            }
        }
        (con, var)
    }

    /// Remove constant (variable-free) log remainders, returning them.
    /// This is how overall infinite-product constants are dropped when the
    /// caller knows they cancel against a matching normalization.
    pub fn drop_constant_logs(&mut self) -> Vec<LogFactor> {
        let logs = std::mem::take(&mut self.logs);
        let (dropped, kept): (Vec<_>, Vec<_>) =
            logs.into_iter().partition(|l| l.dz == 0 && l.dw == 0);
        self.logs = kept;
        dropped
    }

    /// Constant value of a variable-free structure.
    pub fn constant(&self, pa: &Params) -> Result<Scalar> {
        if !self.logs.is_empty() {
            return Err(Error::NonResummableContraction(
                "log remainder present; expand or drop it explicitly".into(),
            ));
        }
        let mut acc = pa.s_one();
        for f in &self.rational {
            if f.dz != 0 || f.dw != 0 {
                return Err(Error::Domain("structure depends on a formal variable".into()));
            }
            let b = f.base.as_scalar(pa);
            let factor = pa.s_one().sub(&b);
            if factor.is_zero() && f.expo < 0 {
                return Err(Error::PoleAtArgument(format!("structure pole at base {}", f.base)));
            }
            if factor.is_zero() {
                return Ok(Scalar::zero());
            }
            let rf = factor
                .as_rf()
                .ok_or_else(|| Error::Domain("structure base must stay parameter-valued".into()))?;
            acc = acc.mul_rf(&rf.pow(f.expo)?);
        }
        Ok(acc)
    }

    /// Expansion as a bi-graded polynomial in (z, w) powers, truncated to
    /// |z-power|, |w-power| <= nmax; the constant rational part is folded in.
    /// Constant log remainders are an error (drop them first if they cancel).
    pub fn expand(&self, pa: &Params, nmax: i64) -> BTreeMap<(i64, i64), Scalar> {
        let (con, var) = self.split_constant();
        assert!(con.logs.is_empty(), "constant log remainder: drop it explicitly first");
        let cval = con.constant(pa).expect("constant part evaluates");
        let mut log: BTreeMap<(i64, i64), Scalar> = BTreeMap::new();
        let mut bump = |key: (i64, i64), s: Scalar| {
            if s.is_zero() {
                return;
            }
            let e = log.entry(key).or_insert_with(Scalar::zero);
            e.add_assign(&s);
            if e.is_zero() {
                log.remove(&key);
            }
        };
        for f in &var.rational {
            for k in 1..=nmax {
                if (f.dz * k).abs() > nmax || (f.dw * k).abs() > nmax {
                    break;
                }
                let c = f.base.pow(k).as_scalar(pa).mul(&pa.s_ratio(-f.expo, k));
                bump((f.dz * k, f.dw * k), c);
            }
        }
        for l in &var.logs {
            for k in 1..=nmax {
                if (l.dz * k).abs() > nmax || (l.dw * k).abs() > nmax {
                    break;
                }
                let mut den = pa.one();
                for (s, d) in &l.den {
                    let dk = d.pow(k);
                    let rf = pa.qt(dk.qp, dk.tp);
                    let rf = if dk.neg { rf.neg() } else { rf };
                    den = den.mul(&pa.one().sub(&rf.mul(&pa.rf_int(*s))));
                }
                let c = l
                    .base
                    .pow(k)
                    .as_scalar(pa)
                    .mul(&Scalar::from_rf(pa.rf_ratio(l.mult, k).div(&den).unwrap()));
                bump((l.dz * k, l.dw * k), c);
            }
        }
        // exponentiate the truncated log series
        let mut acc: BTreeMap<(i64, i64), Scalar> = BTreeMap::new();
        acc.insert((0, 0), cval);
        let mut pow: BTreeMap<(i64, i64), Scalar> = BTreeMap::new();
        pow.insert((0, 0), pa.s_one());
        for n in 1..=(2 * nmax).max(1) {
            let mut np: BTreeMap<(i64, i64), Scalar> = BTreeMap::new();
            for ((az, aw), s) in &pow {
                for ((bz, bw), t) in &log {
                    let key = (az + bz, aw + bw);
                    if key.0.abs() > nmax || key.1.abs() > nmax {
                        continue;
                    }
                    let v = s.mul(t);
                    if v.is_zero() {
                        continue;
                    }
                    let e = np.entry(key).or_insert_with(Scalar::zero);
                    e.add_assign(&v);
                    if e.is_zero() {
                        np.remove(&key);
                    }
                }
            }
            pow = np;
            if pow.is_empty() {
                break;
            }
            let cpref = acc.get(&(0, 0)).cloned();
            let _ = cpref;
            for (key, s) in &pow {
                let v = s.mul(&pa.s_ratio(1, factorial(n)));
                let e = acc.entry(*key).or_insert_with(Scalar::zero);
                e.add_assign(&v);
                if e.is_zero() {
                    acc.remove(key);
                }
            }
        }
        // fold the constant into every term
        if acc.get(&(0, 0)).is_none() && self.rational.iter().any(|f| f.dz == 0 && f.dw == 0) {
            // constant became zero: whole expansion vanishes
        }
        let cval2 = con.constant(pa).expect("constant part evaluates");
        if !cval2.is_one_like() {
            let mut folded = BTreeMap::new();
            for (k, s) in acc {
                if k == (0, 0) {
                    folded.insert(k, s);
                } else {
                    folded.insert(k, s.mul(&cval2));
                }
            }
            // the (0,0) entry was seeded with cval already
            return folded;
        }
        acc
    }
}

trait IsOneLike {
    fn is_one_like(&self) -> bool;
}

impl IsOneLike for Scalar {
    fn is_one_like(&self) -> bool {
        match self.as_single_term() {
            Some((m, rf)) => m.is_one() && rf.is_one(),
            None => false,
        }
    }
}

/// Cancel denominator patterns against numerator sums: a log group whose
/// numerator sum factors as prod_j (1 - s_j d_j^k) * (signed monomials)
/// is really geometric and is converted to rational factors.
pub fn simplify_structure(structure: &mut Structure) {
    // group log factors by (den, dz, dw)
    let logs = std::mem::take(&mut structure.logs);
    let mut groups: BTreeMap<(Vec<(i64, (bool, crate::ring::Mono, i64, i64))>, i64, i64), Vec<(i64, Weight)>> =
        BTreeMap::new();
    for l in logs {
        let mut den_key: Vec<(i64, (bool, crate::ring::Mono, i64, i64))> = l
            .den
            .iter()
            .map(|(s, d)| (*s, (d.neg, d.mono, d.qp, d.tp)))
            .collect();
        den_key.sort();
        groups.entry((den_key, l.dz, l.dw)).or_default().push((l.mult, l.base));
    }
    for ((den_key, dz, dw), mut num) in groups {
        let den: Vec<(i64, Weight)> = den_key
            .iter()
            .map(|(s, (neg, mono, qp, tp))| {
                (*s, Weight { neg: *neg, mono: *mono, qp: *qp, tp: *tp })
            })
            .collect();
        // merge identical bases
        merge_num(&mut num);
        // try exact division by every denominator factor; the mirrored
        // attempt uses (1 - s d^k) = -s d^k (1 - s d^{-k})
        let mut rest = num.clone();
        let mut ok = true;
        for (s, d) in &den {
            match divide_by_one_minus(&rest, *s, d) {
                Some(q) => rest = q,
                None => match divide_by_one_minus(&rest, *s, &d.inv()) {
                    Some(q) => {
                        rest = q
                            .into_iter()
                            .map(|(c, w)| (-c * s, w.mul(&d.inv())))
                            .collect();
                    }
                    None => {
                        ok = false;
                        break;
                    }
                },
            }
        }
        if ok {
            // exp(sum_k (1/k) sum_i c_i w_i^k Z^k) = prod (1 - w_i Z)^{-c_i}
            for (c, w) in rest {
                structure.rational.push(SFactor { base: w, dz, dw, expo: -c });
            }
        } else {
            for (c, w) in num {
                structure.logs.push(LogFactor { mult: c, base: w, dz, dw, den: den.clone() });
            }
        }
    }
    structure.rational.sort_by(|a, b| {
        (a.base.neg, a.base.mono, a.base.qp, a.base.tp, a.dz, a.dw).cmp(&(
            b.base.neg,
            b.base.mono,
            b.base.qp,
            b.base.tp,
            b.dz,
            b.dw,
        ))
    });
    let rational = std::mem::take(&mut structure.rational);
    let mut merged: Vec<SFactor> = Vec::new();
    for f in rational {
        match merged.last_mut() {
            Some(m) if m.base == f.base && m.dz == f.dz && m.dw == f.dw => m.expo += f.expo,
            _ => merged.push(f),
        }
    }
    merged.retain(|f| f.expo != 0);
    structure.rational = merged;
}

fn merge_num(num: &mut Vec<(i64, Weight)>) {
    num.sort_by(|a, b| {
        (a.1.neg, a.1.mono, a.1.qp, a.1.tp).cmp(&(b.1.neg, b.1.mono, b.1.qp, b.1.tp))
    });
    let mut merged: Vec<(i64, Weight)> = Vec::new();
    for (c, w) in num.drain(..) {
        match merged.last_mut() {
            Some((mc, mw)) if *mw == w => *mc += c,
            _ => merged.push((c, w)),
        }
    }
    merged.retain(|(c, _)| *c != 0);
    *num = merged;
}

/// Exact division of a signed-monomial sum N(k) by (1 - s d^k):
/// returns M with N = (1 - s d^k) M, or None when not divisible.
fn divide_by_one_minus(num: &[(i64, Weight)], s: i64, d: &Weight) -> Option<Vec<(i64, Weight)>> {
    let mut rest: Vec<(i64, Weight)> = num.to_vec();
    merge_num(&mut rest);
    let mut quo: Vec<(i64, Weight)> = Vec::new();
    let mut steps = 0;
    while !rest.is_empty() {
        steps += 1;
        if steps > 512 {
            return None;
        }
        let (c, w) = rest[0];
        quo.push((c, w));
        // N -= c w^k - c s (w d)^k
        rest.push((-c, w));
        rest.push((c * s, w.mul(d)));
        merge_num(&mut rest);
    }
    merge_num(&mut quo);
    Some(quo)
}

/// Variable-tag offset for the second factor's variables in a composite.
pub const W_OFFSET: usize = 8;

/// Operator product v1(z) v2(w) = structure * :v1 v2:, with v1 on the left.
/// In the composite, v1's variable tags are kept and v2's are offset by
/// [`W_OFFSET`].
pub fn ope(pa: &Params, v1: &VertexOp, v2: &VertexOp) -> Result<(Structure, VertexOp)> {
    let mut structure = Structure::one();
    for ch1 in v1.channels.iter().filter(|c| !c.create) {
        for ch2 in v2.channels.iter().filter(|c| c.create) {
            // k * B1(k) * A2(k) = (1/k) sum c1 c2 (w1 w2)^k / (D1 D2)
            let dz = if ch1.var.is_some() { -1 } else { 0 };
            let dw = if ch2.var.is_some() { 1 } else { 0 };
            let mut den = ch1.law.den.clone();
            den.extend_from_slice(&ch2.law.den);
            for (c1, w1) in &ch1.law.num {
                for (c2, w2) in &ch2.law.num {
                    let base = w1.mul(w2);
                    let mult = c1 * c2;
                    if mult == 0 {
                        continue;
                    }
                    if den.is_empty() {
                        structure.rational.push(SFactor { base, dz, dw, expo: -mult });
                    } else {
                        structure.logs.push(LogFactor { mult, base, dz, dw, den: den.clone() });
                    }
                }
            }
        }
    }
    simplify_structure(&mut structure);

    let mut comp = VertexOp::identity(pa);
    comp.prefactor = v1.prefactor.mul(&v2.prefactor);
    if v1.weight_mult != 0 {
        // v1's u-hat acts after v2's relabel
        comp.prefactor = comp.prefactor.mul(&v2.relabel.pow(v1.weight_mult).as_scalar(pa));
    }
    comp.weight_mult = v1.weight_mult + v2.weight_mult;
    comp.relabel = v1.relabel.mul(&v2.relabel);
    for (v, p) in &v1.zpows {
        *comp.zpows.entry(*v).or_insert(0) += *p;
    }
    for (v, p) in &v2.zpows {
        *comp.zpows.entry(v + W_OFFSET).or_insert(0) += *p;
    }
    for (v, p) in &v1.zpow_charge {
        *comp.zpow_charge.entry(*v).or_insert(0) += *p;
        let extra = charge_of(&v2.relabel).unwrap_or(0);
        if extra != 0 {
            *comp.zpows.entry(*v).or_insert(0) += p * extra;
        }
    }
    for (v, p) in &v2.zpow_charge {
        *comp.zpow_charge.entry(v + W_OFFSET).or_insert(0) += *p;
    }
    for ch in &v1.channels {
        comp.channels.push(ch.clone());
    }
    for ch in &v2.channels {
        comp.channels.push(Channel {
            create: ch.create,
            var: ch.var.map(|v| v + W_OFFSET),
            law: ch.law.clone(),
        });
    }
    Ok((structure, comp))
}

/// OPE of two tensor operators: leg-wise contraction, one structure.
pub fn ope_tensor(pa: &Params, v1: &TensorOp, v2: &TensorOp) -> Result<(Structure, TensorOp)> {
    let mut structure = Structure::one();
    let mut legs: Vec<(usize, VertexOp)> = Vec::new();
    let leg_ids: Vec<usize> = {
        let mut ids: Vec<usize> = v1.legs.iter().chain(v2.legs.iter()).map(|(l, _)| *l).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    for leg in leg_ids {
        let id = VertexOp::identity(pa);
        let a = v1.legs.iter().find(|(l, _)| *l == leg).map(|(_, o)| o).unwrap_or(&id);
        let b = v2.legs.iter().find(|(l, _)| *l == leg).map(|(_, o)| o).unwrap_or(&id);
        let (s, c) = ope(pa, a, b)?;
        structure.rational.extend(s.rational);
        structure.logs.extend(s.logs);
        legs.push((leg, c));
    }
    Ok((
        structure,
        TensorOp { prefactor: v1.prefactor.mul(&v2.prefactor), zpow: v1.zpow + v2.zpow, legs },
    ))
}

// ---------------------------------------------------------------------------
// standard operators
// ---------------------------------------------------------------------------

fn w_one() -> Weight {
    Weight::one()
}

pub fn w_q1() -> Weight {
    Weight::qt(0, -4)
}

pub fn w_q2() -> Weight {
    Weight::qt(4, 0)
}

pub fn w_q3() -> Weight {
    Weight::qt(-4, 4)
}

pub fn w_q() -> Weight {
    Weight::qt(4, 0)
}

pub fn w_t() -> Weight {
    Weight::qt(0, 4)
}

pub fn w_p() -> Weight {
    Weight::qt(4, -4)
}

/// gamma^{n/2} as a weight.
pub fn w_gamma_half(n: i64) -> Weight {
    Weight::qt(-n, n)
}

/// (1 - a^k)-style numerator: 1*1^k - 1*a^k.
pub fn one_minus(a: Weight) -> Vec<(i64, Weight)> {
    vec![(1, w_one()), (-1, a)]
}

pub fn scale_num(num: Vec<(i64, Weight)>, c: i64, m: Weight) -> Vec<(i64, Weight)> {
    num.into_iter().map(|(a, w)| (a * c, w.mul(&m))).collect()
}

pub fn mul_nums(a: Vec<(i64, Weight)>, b: Vec<(i64, Weight)>) -> Vec<(i64, Weight)> {
    let mut out = Vec::new();
    for (c1, w1) in &a {
        for (c2, w2) in &b {
            out.push((c1 * c2, w1.mul(w2)));
        }
    }
    out
}

/// eta^+(z): exp(sum (z^k/k)(1-q1^k) J_{-k}) exp(-sum (z^{-k}/k)(1-q2^k) J_k).
pub fn eta_plus(pa: &Params) -> VertexOp {
    let cre_base = match pa.mutation {
        Mutation::EtaPlusCreation => w_q2(),
        _ => w_q1(),
    };
    VertexOp::identity(pa)
        .with_channel(true, Some(0), Law::new(one_minus(cre_base)))
        .with_channel(false, Some(0), Law::new(scale_num(one_minus(w_q2()), -1, w_one())))
}

/// eta^-(z): exp(-sum (z^k/k) gamma^k (1-q1^k) J_{-k})
///           exp(+sum (z^{-k}/k) gamma^k (1-q2^k) J_k).
pub fn eta_minus(pa: &Params) -> VertexOp {
    let g = match pa.mutation {
        Mutation::EtaMinusGamma => w_gamma_half(-2),
        _ => w_gamma_half(2),
    };
    VertexOp::identity(pa)
        .with_channel(true, Some(0), Law::new(scale_num(one_minus(w_q1()), -1, g)))
        .with_channel(false, Some(0), Law::new(scale_num(one_minus(w_q2()), 1, g)))
}

/// gamma^{s/2} base for the horizontal Cartan normalization (mutable).
pub fn qosc_gamma(pa: &Params, s: i64) -> Weight {
    match pa.mutation {
        Mutation::QOscGamma => w_gamma_half(-s),
        _ => w_gamma_half(s),
    }
}

/// Horizontal psi^+(z) at level (1,n): gamma^{-n} exp(sum_{k>0} z^{-k} rho(a_k)).
pub fn psi_plus_horizontal(pa: &Params, level_n: i64) -> VertexOp {
    // rho(a_k) = -(gamma^{-k/2}/k)(1-q2^k)(1-q3^k) J_k
    let g = qosc_gamma(pa, -1);
    let num = mul_nums(scale_num(one_minus(w_q2()), -1, g), one_minus(w_q3()));
    VertexOp::identity(pa)
        .with_prefactor(Scalar::from_rf(pa.gamma_pow(-level_n)))
        .with_channel(false, Some(0), Law::new(num))
}

/// Horizontal psi^-(z) at level (1,n): gamma^{n} exp(-sum_{k>0} z^k rho(a_{-k})).
pub fn psi_minus_horizontal(pa: &Params, level_n: i64) -> VertexOp {
    // rho(a_{-k}) = -(gamma^{-k/2}/k)(1-q1^k)(1-q3^k) J_{-k}
    let g = qosc_gamma(pa, -1);
    let num = mul_nums(scale_num(one_minus(w_q1()), 1, g), one_minus(w_q3()));
    VertexOp::identity(pa)
        .with_prefactor(Scalar::from_rf(pa.gamma_pow(level_n)))
        .with_channel(true, Some(0), Law::new(num))
}

/// AFS vacuum component Phi_empty(v).
pub fn phi_empty(pa: &Params, v: Weight) -> VertexOp {
    VertexOp::identity(pa)
        .with_channel(true, None, Law::with_den(vec![(-1, v)], vec![(1, w_q2())]))
        .with_channel(
            false,
            None,
            Law::with_den(vec![(1, v.inv().mul(&w_q3().inv()))], vec![(1, w_q1())]),
        )
}

/// AFS vacuum component Phi*_empty(v).
pub fn phi_star_empty(pa: &Params, v: Weight) -> VertexOp {
    VertexOp::identity(pa)
        .with_channel(
            true,
            None,
            Law::with_den(vec![(1, v.mul(&w_gamma_half(2)))], vec![(1, w_q2())]),
        )
        .with_channel(
            false,
            None,
            Law::with_den(vec![(-1, v.inv().mul(&w_gamma_half(-2)))], vec![(1, w_q1())]),
        )
}

/// Refined-fermion factor V(z) = e^{sum (z^k/k) r_k J_{-k}} e^{-sum (z^{-k}/k) p^k J_k}.
pub fn v_factor(pa: &Params) -> VertexOp {
    VertexOp::identity(pa)
        .with_channel(true, Some(0), Law::with_den(one_minus(w_t()), vec![(1, w_q())]))
        .with_channel(false, Some(0), Law::new(vec![(-1, w_p())]))
}

/// Refined-fermion factor V*(z) = e^{-sum (z^k/k) r_k gamma^k J_{-k}}
/// e^{+sum (z^{-k}/k) gamma^{-k} J_k} (p gamma = gamma^{-1}).
pub fn v_star_factor(pa: &Params) -> VertexOp {
    VertexOp::identity(pa)
        .with_channel(
            true,
            Some(0),
            Law::with_den(scale_num(one_minus(w_t()), -1, w_gamma_half(2)), vec![(1, w_q())]),
        )
        .with_channel(false, Some(0), Law::new(vec![(1, w_gamma_half(-2))]))
}

/// Transposed factor V'(z) = e^{-sum (z^k/k) J_{-k}} e^{sum (z^{-k}/k) (1-q^k)/(1-t^k) J_k}.
pub fn v_prime_factor(pa: &Params) -> VertexOp {
    VertexOp::identity(pa)
        .with_channel(true, Some(0), Law::new(vec![(-1, w_one())]))
        .with_channel(false, Some(0), Law::with_den(one_minus(w_q()), vec![(1, w_t())]))
}

/// V'*(z) = e^{sum (z^k/k) gamma^k J_{-k}} e^{-sum (z^{-k}/k) gamma^k (1-q^k)/(1-t^k) J_k}.
pub fn v_prime_star_factor(pa: &Params) -> VertexOp {
    VertexOp::identity(pa)
        .with_channel(true, Some(0), Law::new(vec![(1, w_gamma_half(2))]))
        .with_channel(
            false,
            Some(0),
            Law::with_den(scale_num(one_minus(w_q()), -1, w_gamma_half(2)), vec![(1, w_t())]),
        )
}

/// Bosonized free fermion psi-bar(z) = :e^{phi(z)}: (self-dual sector):
/// |n> -> z^n e^{sum (z^k/k) J_{-k}} |n+1>.
pub fn psi_bar_boson(pa: &Params) -> VertexOp {
    VertexOp::identity(pa)
        .with_charge_zpow(0, 1)
        .with_relabel(Weight::qt(4, 0))
        .with_channel(true, Some(0), Law::new(vec![(1, w_one())]))
        .with_channel(false, Some(0), Law::new(vec![(-1, w_one())]))
}

/// Bosonized free fermion psi(z) = :e^{-phi(z)}::
/// |n> -> z^{-n} e^{-sum (z^k/k) J_{-k}} |n-1>.
pub fn psi_boson(pa: &Params) -> VertexOp {
    VertexOp::identity(pa)
        .with_charge_zpow(0, -1)
        .with_relabel(Weight::qt(-4, 0))
        .with_channel(true, Some(0), Law::new(vec![(-1, w_one())]))
        .with_channel(false, Some(0), Law::new(vec![(1, w_one())]))
}

/// zeta(Z) as structure factors with Z = base z^{dz} w^{dw}:
/// (1-Z)(1-q1q2 Z)/((1-q1 Z)(1-q2 Z)).
pub fn zeta_structure(base: Weight, dz: i64, dw: i64) -> Structure {
    Structure {
        rational: vec![
            SFactor { base, dz, dw, expo: 1 },
            SFactor { base: base.mul(&w_q1()).mul(&w_q2()), dz, dw, expo: 1 },
            SFactor { base: base.mul(&w_q1()), dz, dw, expo: -1 },
            SFactor { base: base.mul(&w_q2()), dz, dw, expo: -1 },
        ],
        logs: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::partitions_up_to;

    fn pa() -> Params {
        Params::default_eval()
    }

    fn vac(d: u32) -> State<Scalar> {
        State::vacuum(vec![Weight::u()], d, Params::default_eval().s_one())
    }

    #[test]
    fn eta_plus_on_vacuum() {
        let pa = pa();
        let g = apply_z(&pa, &eta_plus(&pa), &vac(4), 0, (-4, 4)).unwrap();
        let c0 = g.coeff(&[0]);
        assert_eq!(c0, vac(4));
        let c1 = g.coeff(&[1]);
        let expect = vac(4)
            .apply_j(&pa, -1)
            .unwrap()
            .scale(&Scalar::from_rf(pa.one().sub(&pa.q1_pow(1))));
        assert_eq!(c1, expect);
        assert!(g.coeff(&[-1]).is_zero());
    }

    #[test]
    fn ope_eta_plus_pair_is_zeta() {
        let pa = pa();
        let (s, _) = ope(&pa, &eta_plus(&pa), &eta_plus(&pa)).unwrap();
        assert!(s.logs.is_empty());
        let want = zeta_structure(Weight::one(), -1, 1).expand(&pa, 6);
        let got = s.expand(&pa, 6);
        assert_eq!(got, want);
    }

    #[test]
    fn ope_eta_mixed_is_zeta_inverse() {
        let pa = pa();
        let (s, _) = ope(&pa, &eta_plus(&pa), &eta_minus(&pa)).unwrap();
        // zeta(z/(gamma w))^{-1}
        let z = zeta_structure(w_gamma_half(2), -1, 1);
        let inv = Structure {
            rational: z.rational.iter().map(|f| SFactor { expo: -f.expo, ..*f }).collect(),
            logs: Vec::new(),
        };
        assert_eq!(s.expand(&pa, 6), inv.expand(&pa, 6));
    }

    #[test]
    fn ope_matrix_elements_match_double_apply() {
        // <a| eta^+(z) eta^+(w) |b> = structure(w/z) * <a| :eta eta: |b>
        let pa = pa();
        let dcap = 4u32;
        let nwin = 3i64;
        // intermediate states up to dcap + nwin can re-enter the window
        let dwork = dcap + nwin as u32;
        let ep = eta_plus(&pa);
        let (structure, comp) = ope(&pa, &ep, &ep).unwrap();
        let sexp = structure.expand(&pa, 2 * nwin + 2 * dwork as i64);
        for b in partitions_up_to(2) {
            let ket = State::basis(vec![Weight::u()], dwork, vec![b.clone()], pa.s_one());
            let g0 = Graded::from_state(ket.clone()).add_axis().add_axis();
            let mut va_w = BTreeMap::new();
            va_w.insert(0usize, 1usize);
            let wide = 2 * nwin + 2 * dwork as i64;
            let gw = apply(&pa, &ep, &g0, 0, &va_w, &vec![(-wide, wide), (-wide, wide)]).unwrap();
            let mut va_z = BTreeMap::new();
            va_z.insert(0usize, 0usize);
            let direct =
                apply(&pa, &ep, &gw, 0, &va_z, &vec![(-nwin, nwin), (-nwin, nwin)]).unwrap();
            let mut va_c = BTreeMap::new();
            va_c.insert(0usize, 0usize);
            va_c.insert(W_OFFSET, 1usize);
            let comp_app =
                apply(&pa, &comp, &g0, 0, &va_c, &vec![(-wide, wide), (-wide, wide)]).unwrap();
            for az in -nwin..=nwin {
                for aw in -nwin..=nwin {
                    let lhs = direct.coeff(&[az, aw]).truncate_degree(dcap);
                    let mut rhs = State::zero(lhs.weights.clone(), dcap);
                    for ((sz, sw), c) in &sexp {
                        let st = comp_app.coeff(&[az - sz, aw - sw]).truncate_degree(dcap);
                        rhs = rhs.add(&st.scale(c)).unwrap();
                    }
                    assert_eq!(lhs, rhs, "b={} z^{} w^{}", b, az, aw);
                }
            }
        }
    }

    #[test]
    fn exchange_relation_polynomial_identity() {
        // prod_a (z - q_a w) zeta(z/w) = prod_a (z - q_a^{-1} w) zeta(w/z)
        // as rational functions, with z,w realized as free symbols.
        let pa = Params::symbolic();
        let z = Scalar::term(pa.one(), crate::ring::Mono::u_pow(1));
        let w = Scalar::term(pa.one(), crate::ring::Mono::v_pow(1));
        let zeta_of = |a: &Scalar, b: &Scalar| -> (Scalar, Scalar) {
            let num =
                a.sub(b).mul(&a.sub(&b.mul(&Scalar::from_rf(pa.q1_pow(1).mul(&pa.q2_pow(1))))));
            let den = a
                .sub(&b.mul(&Scalar::from_rf(pa.q1_pow(1))))
                .mul(&a.sub(&b.mul(&Scalar::from_rf(pa.q2_pow(1)))));
            (num, den)
        };
        let (n1, d1) = zeta_of(&z, &w);
        let (n2, d2) = zeta_of(&w, &z);
        let mut lhs = n1.mul(&d2);
        let mut rhs = n2.mul(&d1);
        for qa in [pa.q1_pow(1), pa.q2_pow(1), pa.q3_pow(1)] {
            lhs = lhs.mul(&z.sub(&w.mul(&Scalar::from_rf(qa.clone()))));
            rhs = rhs.mul(&z.sub(&w.mul(&Scalar::from_rf(qa.inv().unwrap()))));
        }
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn fermion_pi_structure() {
        // V(z) V*(w) carries Pi_{q,t}(gamma w / z): a log remainder with
        // numerator (1-t^k) and denominator (1-q^k)
        let pa = pa();
        let (s, _) = ope(&pa, &v_factor(&pa), &v_star_factor(&pa)).unwrap();
        assert!(!s.logs.is_empty());
        let got = s.expand(&pa, 6);
        // Pi_{q,t}(gamma^{-1} w/z): exp(sum (1/k) (1-t^k)/(1-q^k) (gamma^{-1} w/z)^k),
        // as follows from the screening-current factors V, V*
        let pi = Structure {
            rational: Vec::new(),
            logs: vec![
                LogFactor { mult: 1, base: w_gamma_half(-2), dz: -1, dw: 1, den: vec![(1, w_q())] },
                LogFactor {
                    mult: -1,
                    base: w_gamma_half(-2).mul(&w_t()),
                    dz: -1,
                    dw: 1,
                    den: vec![(1, w_q())],
                },
            ],
        };
        assert_eq!(got, pi.expand(&pa, 6));
    }

    #[test]
    fn bosonized_fermion_action() {
        // psi-bar(z)|n> = z^n e^{sum z^k/k J_{-k}} |n+1>
        let pa = Params::self_dual_eval();
        let n = 2i64;
        let st: State<Scalar> = State::vacuum(vec![Weight::qt(4 * n, 0)], 3, pa.s_one());
        let g = apply_z(&pa, &psi_bar_boson(&pa), &st, 0, (-1, 6)).unwrap();
        assert_eq!(g.weights[0], Weight::qt(4 * (n + 1), 0));
        let vac_out: State<Scalar> = State::vacuum(vec![Weight::qt(4 * (n + 1), 0)], 3, pa.s_one());
        assert_eq!(g.coeff(&[n]), vac_out);
        assert_eq!(g.coeff(&[n + 1]), vac_out.apply_j(&pa, -1).unwrap());
        assert!(g.coeff(&[n - 1]).is_zero());
    }

    #[test]
    fn tensor_ope_contracts_leg_wise() {
        let pa = pa();
        let t1 = TensorOp {
            prefactor: pa.s_one(),
            zpow: 0,
            legs: vec![(0, eta_plus(&pa)), (1, eta_minus(&pa))],
        };
        let (s, _) = ope_tensor(&pa, &t1, &t1).unwrap();
        assert!(s.logs.is_empty());
        assert_eq!(s.rational.len(), 8);
    }
}
