//! Quantum toroidal gl(1) representations.
//!
//! Horizontal Fock representations of level (1,n) on bosonic states, the
//! vertical level-(0,1) representation on the partition basis, the
//! level-(2,0) coproduct action on two tensor legs, and the AFS intertwiner
//! components expanded in the vertical basis.

use std::collections::BTreeMap;

use crate::fock::{Coeff, State, Weight};
use crate::partition::Partition;
use crate::ring::{Mutation, Params, Rf, Scalar};
use crate::vertexop::{
    apply, eta_minus, eta_plus, one_minus, phi_empty, phi_star_empty, scale_num, w_gamma_half,
    w_q1, w_q2, w_q3, Graded, Law, VertexOp,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// horizontal representation
// ---------------------------------------------------------------------------

/// rho^{(1,n)}(a_k) = coeff * J_k: the q-deformed oscillator normalization.
/// For k > 0: -(gamma^{-k/2}/k)(1-q2^k)(1-q3^k); for k < 0 the mirror with q1.
pub fn h_a_coeff(pa: &Params, k: i64) -> Rf {
    assert!(k != 0);
    let m = k.abs();
    let one = pa.one();
    let g = match pa.mutation {
        Mutation::QOscGamma => pa.gamma_half_pow(m),
        _ => pa.gamma_half_pow(-m),
    };
    let prod = if k > 0 {
        one.sub(&pa.q2_pow(m)).mul(&one.sub(&pa.q3_pow(m)))
    } else {
        one.sub(&pa.q1_pow(m)).mul(&one.sub(&pa.q3_pow(m)))
    };
    g.mul(&prod).mul(&pa.rf_ratio(-1, m))
}

/// Apply rho^{(1,n)}(a_k) on one leg.
pub fn h_apply_a<C: Coeff>(pa: &Params, k: i64, st: &State<C>, leg: usize) -> State<C> {
    st.apply_j_trunc(pa, leg, k).scale(&Scalar::from_rf(h_a_coeff(pa, k)))
}

/// x^{+-}(z) in the horizontal representation of level (1,n):
/// u-hat^{+-1} z^{-+n} eta^{+-}(z).
pub fn h_x_current(pa: &Params, sign: i64, level_n: i64) -> VertexOp {
    assert!(sign == 1 || sign == -1);
    let base = if sign == 1 { eta_plus(pa) } else { eta_minus(pa) };
    base.with_weight_mult(sign).with_zpow(0, -sign * level_n)
}

/// Mode x^{+-}_k = [z^{-k}] x^{+-}(z) applied on one leg.
pub fn h_apply_x_mode<C: Coeff>(
    pa: &Params,
    sign: i64,
    k: i64,
    level_n: i64,
    st: &State<C>,
    leg: usize,
) -> Result<State<C>> {
    let op = h_x_current(pa, sign, level_n);
    let g = Graded::from_state(st.clone()).add_axis();
    let mut va = BTreeMap::new();
    va.insert(0usize, 0usize);
    let out = apply(pa, &op, &g, leg, &va, &vec![(-k, -k)])?;
    Ok(out.coeff(&[-k]))
}

/// psi^+ mode: psi^+_l = [z^{-l}] psi^+(z), l >= 0 (annihilation side).
pub fn h_apply_psi_plus_mode<C: Coeff>(
    pa: &Params,
    l: i64,
    level_n: i64,
    st: &State<C>,
    leg: usize,
) -> Result<State<C>> {
    assert!(l >= 0);
    let op = crate::vertexop::psi_plus_horizontal(pa, level_n);
    let g = Graded::from_state(st.clone()).add_axis();
    let mut va = BTreeMap::new();
    va.insert(0usize, 0usize);
    let out = apply(pa, &op, &g, leg, &va, &vec![(-l, -l)])?;
    Ok(out.coeff(&[-l]))
}

/// psi^- mode: psi^-_{-l} = [z^{l}] psi^-(z), l >= 0 (creation side).
pub fn h_apply_psi_minus_mode<C: Coeff>(
    pa: &Params,
    l: i64,
    level_n: i64,
    st: &State<C>,
    leg: usize,
) -> Result<State<C>> {
    assert!(l >= 0);
    let op = crate::vertexop::psi_minus_horizontal(pa, level_n);
    let g = Graded::from_state(st.clone()).add_axis();
    let mut va = BTreeMap::new();
    va.insert(0usize, 0usize);
    let out = apply(pa, &op, &g, leg, &va, &vec![(l, l)])?;
    Ok(out.coeff(&[l]))
}

// ---------------------------------------------------------------------------
// level (2,0): coproduct-evaluated action on two legs
// ---------------------------------------------------------------------------

/// Delta(a_k) evaluated in rho x rho: a_k ox gamma^{-|k|/2} + gamma^{|k|/2} ox a_k.
pub fn rho20_apply_a<C: Coeff>(pa: &Params, k: i64, st: &State<C>) -> State<C> {
    assert!(st.legs() == 2);
    let (tw1, tw2) = match pa.mutation {
        Mutation::CoproductTwist => (pa.gamma_half_pow(k.abs()), pa.gamma_half_pow(-k.abs())),
        _ => (pa.gamma_half_pow(-k.abs()), pa.gamma_half_pow(k.abs())),
    };
    let a = h_apply_a(pa, k, st, 0).scale(&Scalar::from_rf(tw1));
    let b = h_apply_a(pa, k, st, 1).scale(&Scalar::from_rf(tw2));
    a.add(&b).expect("same weights")
}

/// Delta(x^{+-}_k) or its opposite, evaluated on a two-leg state at level
/// (2,0). The l-sum is cut off at the degree budget; the first dropped term
/// is asserted to annihilate the state.
pub fn rho20_apply_x_mode<C: Coeff>(
    pa: &Params,
    sign: i64,
    k: i64,
    st: &State<C>,
    opposite: bool,
) -> Result<State<C>> {
    assert!(st.legs() == 2);
    let lmax = st.trunc_deg as i64 + 1;
    let (loc_leg, far_leg) = if opposite { (1usize, 0usize) } else { (0usize, 1usize) };
    let mut acc = if sign == 1 {
        h_apply_x_mode(pa, 1, k, 0, st, loc_leg)?
    } else {
        h_apply_x_mode(pa, -1, k, 0, st, far_leg)?
    };
    for l in 0..=lmax {
        let term = if sign == 1 {
            // gamma^{-(k+l/2)} psi^-_{-l} ox x^+_{k+l}
            let tw = pa.gamma_half_pow(-(2 * k + l));
            let s1 = h_apply_psi_minus_mode(pa, l, 0, st, loc_leg)?;
            h_apply_x_mode(pa, 1, k + l, 0, &s1, far_leg)?.scale(&Scalar::from_rf(tw))
        } else {
            // gamma^{-(k-l/2)} x^-_{k-l} ox psi^+_l
            let tw = pa.gamma_half_pow(-(2 * k - l));
            let s1 = h_apply_psi_plus_mode(pa, l, 0, st, far_leg)?;
            h_apply_x_mode(pa, -1, k - l, 0, &s1, loc_leg)?.scale(&Scalar::from_rf(tw))
        };
        if l == lmax {
            if !term.is_zero() {
                return Err(Error::TruncationExceeded(format!(
                    "coproduct l-sum does not terminate at l = {}",
                    lmax
                )));
            }
            break;
        }
        acc = acc.add(&term)?;
    }
    Ok(acc)
}

/// The two current pieces of rho^{(2,0)}(x^{+-}(z)), as per-leg operator
/// lists sharing the variable tag 0.
pub fn rho20_x_current_pieces(pa: &Params, sign: i64) -> Vec<Vec<(usize, VertexOp)>> {
    let g2 = w_gamma_half(2);
    let g1 = w_gamma_half(1);
    if sign == 1 {
        vec![
            vec![(0, h_x_current(pa, 1, 0))],
            vec![
                (0, crate::vertexop::psi_minus_horizontal(pa, 0).arg_rescale(pa, 0, &g1)),
                (1, h_x_current(pa, 1, 0).arg_rescale(pa, 0, &g2)),
            ],
        ]
    } else {
        vec![
            vec![
                (0, h_x_current(pa, -1, 0).arg_rescale(pa, 0, &g2)),
                (1, crate::vertexop::psi_plus_horizontal(pa, 0).arg_rescale(pa, 0, &g1)),
            ],
            vec![(1, h_x_current(pa, -1, 0))],
        ]
    }
}

// ---------------------------------------------------------------------------
// rational functions of one variable with monomial zeros and poles
// ---------------------------------------------------------------------------

/// prefactor * z^{zpow} * prod (z - a_i) / prod (z - b_j), with a_i, b_j
/// invertible weight monomials. Expansions at 0 and infinity and residues at
/// the poles are exact.
#[derive(Clone, Debug)]
pub struct RatZ {
    pub pref: Scalar,
    pub zpow: i64,
    pub zeros: Vec<Weight>,
    pub poles: Vec<Weight>,
}

impl RatZ {
    pub fn one(pa: &Params) -> RatZ {
        RatZ { pref: pa.s_one(), zpow: 0, zeros: Vec::new(), poles: Vec::new() }
    }

    pub fn mul(&self, o: &RatZ) -> RatZ {
        RatZ {
            pref: self.pref.mul(&o.pref),
            zpow: self.zpow + o.zpow,
            zeros: self.zeros.iter().chain(o.zeros.iter()).copied().collect(),
            poles: self.poles.iter().chain(o.poles.iter()).copied().collect(),
        }
    }

    pub fn inv(&self) -> RatZ {
        RatZ {
            pref: self.pref.inv().expect("invertible prefactor"),
            zpow: -self.zpow,
            zeros: self.poles.clone(),
            poles: self.zeros.clone(),
        }
    }

    /// Substitute z -> c z.
    pub fn arg_scale(&self, pa: &Params, c: &Weight) -> RatZ {
        let n = self.zeros.len() as i64 - self.poles.len() as i64;
        RatZ {
            pref: self.pref.mul(&c.pow(self.zpow + n).as_scalar(pa)),
            zpow: self.zpow,
            zeros: self.zeros.iter().map(|a| a.mul(&c.inv())).collect(),
            poles: self.poles.iter().map(|b| b.mul(&c.inv())).collect(),
        }
    }

    /// Cancel zero/pole pairs at identical points.
    pub fn reduce(&self) -> RatZ {
        let mut zeros = self.zeros.clone();
        let mut poles = Vec::new();
        'outer: for b in &self.poles {
            for (i, a) in zeros.iter().enumerate() {
                if a == b {
                    zeros.remove(i);
                    continue 'outer;
                }
            }
            poles.push(*b);
        }
        RatZ { pref: self.pref.clone(), zpow: self.zpow, zeros, poles }
    }

    pub fn eval(&self, pa: &Params, at: &Weight) -> Result<Scalar> {
        let mut acc = self.pref.mul(&at.pow(self.zpow).as_scalar(pa));
        for a in &self.zeros {
            acc = acc.mul(&at.as_scalar(pa).sub(&a.as_scalar(pa)));
        }
        for b in &self.poles {
            let d = at.as_scalar(pa).sub(&b.as_scalar(pa));
            if d.is_zero() {
                return Err(Error::PoleAtArgument(format!("{}", b)));
            }
            acc = acc.div(&d)?;
        }
        Ok(acc)
    }

    /// Residue at a simple pole z = b.
    pub fn residue_at(&self, pa: &Params, b: &Weight) -> Result<Scalar> {
        let mut rest = self.clone();
        let pos = rest
            .poles
            .iter()
            .position(|p| p == b)
            .ok_or_else(|| Error::Domain(format!("{} is not a pole", b)))?;
        rest.poles.remove(pos);
        if rest.poles.contains(b) {
            return Err(Error::Domain(format!("pole at {} is not simple", b)));
        }
        rest.eval(pa, b)
    }

    /// Expansion around infinity: coefficients of z^n for n in [lo, hi].
    pub fn expand_at_infinity(&self, pa: &Params, lo: i64, hi: i64) -> BTreeMap<i64, Scalar> {
        let shift = self.zpow + self.zeros.len() as i64 - self.poles.len() as i64;
        let order = (shift - lo).max(0) as usize;
        let mut acc: Vec<Scalar> = vec![Scalar::zero(); order + 1];
        acc[0] = self.pref.clone();
        for a in &self.zeros {
            let mut next = acc.clone();
            for j in (1..=order).rev() {
                let s = acc[j - 1].mul(&a.as_scalar(pa)).neg();
                next[j] = next[j].add(&s);
            }
            acc = next;
        }
        for b in &self.poles {
            let mut next = vec![Scalar::zero(); order + 1];
            for j in 0..=order {
                if acc[j].is_zero() {
                    continue;
                }
                for m in 0..=(order - j) {
                    let s = acc[j].mul(&b.pow(m as i64).as_scalar(pa));
                    next[j + m] = next[j + m].add(&s);
                }
            }
            acc = next;
        }
        let mut out = BTreeMap::new();
        for (j, s) in acc.into_iter().enumerate() {
            let n = shift - j as i64;
            if n >= lo && n <= hi && !s.is_zero() {
                out.insert(n, s);
            }
        }
        out
    }

    /// Expansion around zero: coefficients of z^n for n in [lo, hi].
    pub fn expand_at_zero(&self, pa: &Params, lo: i64, hi: i64) -> BTreeMap<i64, Scalar> {
        let order = (hi - self.zpow).max(0) as usize;
        let mut pref = self.pref.clone();
        for a in &self.zeros {
            pref = pref.mul(&a.as_scalar(pa)).neg();
        }
        for b in &self.poles {
            pref = pref.mul(&b.negated().inv().as_scalar(pa));
        }
        let mut acc: Vec<Scalar> = vec![Scalar::zero(); order + 1];
        acc[0] = pref;
        for a in &self.zeros {
            let ai = a.inv();
            let mut next = acc.clone();
            for j in (1..=order).rev() {
                let s = acc[j - 1].mul(&ai.as_scalar(pa)).neg();
                next[j] = next[j].add(&s);
            }
            acc = next;
        }
        for b in &self.poles {
            let bi = b.inv();
            let mut next = vec![Scalar::zero(); order + 1];
            for j in 0..=order {
                if acc[j].is_zero() {
                    continue;
                }
                for m in 0..=(order - j) {
                    let s = acc[j].mul(&bi.pow(m as i64).as_scalar(pa));
                    next[j + m] = next[j + m].add(&s);
                }
            }
            acc = next;
        }
        let mut out = BTreeMap::new();
        for (j, s) in acc.into_iter().enumerate() {
            let n = self.zpow + j as i64;
            if n >= lo && n <= hi && !s.is_zero() {
                out.insert(n, s);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// vertical representation
// ---------------------------------------------------------------------------

/// v * chi_box as a weight.
pub fn content_weight(v: &Weight, b: (u32, u32)) -> Weight {
    v.mul(&w_q1().pow(b.0 as i64 - 1)).mul(&w_q2().pow(b.1 as i64 - 1))
}

/// Y_lambda(z) with contents scaled by the vertical weight v: zeros of Y at
/// the addable contents v chi, poles at q3^{-1} v chi over removable boxes.
pub fn y_function(pa: &Params, v: &Weight, la: &Partition) -> RatZ {
    let zeros: Vec<Weight> = la.addable().into_iter().map(|b| content_weight(v, b)).collect();
    let poles: Vec<Weight> =
        la.removable().into_iter().map(|b| content_weight(v, b).mul(&w_q3().inv())).collect();
    RatZ {
        pref: pa.s_one(),
        zpow: poles.len() as i64 - zeros.len() as i64,
        zeros,
        poles,
    }
}

/// Vertical action of x^{+-}(z): list of (support point, new partition,
/// residue coefficient); the delta supports are kept explicit.
pub fn vertical_x(
    pa: &Params,
    sign: i64,
    v: &Weight,
    la: &Partition,
) -> Result<Vec<(Weight, Partition, Scalar)>> {
    let y = y_function(pa, v, la);
    let mut out = Vec::new();
    if sign == 1 {
        // Res_{w = v chi} 1/(w Y(w)) over addable boxes
        let mut f = y.inv();
        f.zpow -= 1;
        for b in la.addable() {
            let pt = content_weight(v, b);
            let res = f.residue_at(pa, &pt)?;
            out.push((pt, la.add_box(b), res));
        }
    } else {
        // gamma^{-1} Res_{w = v chi} w^{-1} Y(q3^{-1} w) over removable boxes
        let mut f = y.arg_scale(pa, &w_q3().inv());
        f.zpow -= 1;
        let f = f.reduce();
        for b in la.removable() {
            let pt = content_weight(v, b);
            let res = f.residue_at(pa, &pt)?.mul_rf(&pa.gamma_pow(-1));
            out.push((pt, la.remove_box(b), res));
        }
    }
    Ok(out)
}

/// Vertical mode x^{+-}_m = [z^{-m}]: sum over supports of support^{-m} * residue.
pub fn vertical_x_mode(
    pa: &Params,
    sign: i64,
    m: i64,
    v: &Weight,
    la: &Partition,
) -> Result<Vec<(Partition, Scalar)>> {
    Ok(vertical_x(pa, sign, v, la)?
        .into_iter()
        .map(|(pt, mu, c)| (mu, c.mul(&pt.pow(-m).as_scalar(pa))))
        .collect())
}

/// Vertical psi^{+-}(z) eigen-expansion: coefficients of z^{-j} (psi^+) or
/// z^{+j} (psi^-) for j = 0..order, of gamma^{-1} Y(q3^{-1} z)/Y(z).
pub fn vertical_psi_coeffs(
    pa: &Params,
    sign: i64,
    v: &Weight,
    la: &Partition,
    order: i64,
) -> Vec<Scalar> {
    let y = y_function(pa, v, la);
    let ratio = y.arg_scale(pa, &w_q3().inv()).mul(&y.inv()).reduce();
    let map = if sign == 1 {
        ratio.expand_at_infinity(pa, -order, 0)
    } else {
        ratio.expand_at_zero(pa, 0, order)
    };
    (0..=order)
        .map(|j| {
            let n = if sign == 1 { -j } else { j };
            map.get(&n).cloned().unwrap_or_else(Scalar::zero).mul_rf(&pa.gamma_pow(-1))
        })
        .collect()
}

/// Vertical eigenvalue of the Cartan mode a_k (k != 0) on |lambda>.
pub fn vertical_a_eigen(pa: &Params, k: i64, v: &Weight, la: &Partition) -> Scalar {
    let order = k.abs();
    let sign = if k > 0 { 1 } else { -1 };
    let coeffs = vertical_psi_coeffs(pa, sign, v, la, order);
    let lead = coeffs[0].clone();
    let inv = lead.inv().expect("leading eigenvalue invertible");
    let norm: Vec<Scalar> = coeffs.iter().map(|c| c.mul(&inv)).collect();
    // norm = exp(L): j N_j = sum_{m=1}^{j} m L_m N_{j-m}
    let mut logc: Vec<Scalar> = vec![Scalar::zero(); order as usize + 1];
    for j in 1..=(order as usize) {
        let mut s = norm[j].clone();
        for m in 1..j {
            let c = logc[m].mul(&norm[j - m]).mul(&pa.s_ratio(m as i64, j as i64));
            s = s.sub(&c);
        }
        logc[j] = s;
    }
    let val = logc[order as usize].clone();
    if k > 0 {
        val
    } else {
        val.neg()
    }
}

// ---------------------------------------------------------------------------
// AFS intertwiner components
// ---------------------------------------------------------------------------

/// t_lambda[u,v,n] = (-gamma u)^{|l|} v^{-n|l|} prod chi^{-n-1}.
pub fn afs_t(pa: &Params, la: &Partition, u: &Weight, v: &Weight, n: i64) -> Scalar {
    let size = la.size() as i64;
    let mut acc = u.pow(size).mul(&w_gamma_half(2).pow(size)).mul(&v.pow(-n * size));
    if size % 2 != 0 {
        acc = acc.negated();
    }
    let mut s = acc.as_scalar(pa);
    for b in la.boxes() {
        s = s.mul(&content_weight(&Weight::one(), b).pow(-n - 1).as_scalar(pa));
    }
    s
}

/// t*_lambda[u,v,n] = u^{-|l|} gamma^{-|l|} v^{n|l|} prod chi^{n}.
pub fn afs_t_star(pa: &Params, la: &Partition, u: &Weight, v: &Weight, n: i64) -> Scalar {
    let size = la.size() as i64;
    let acc = u.pow(-size).mul(&w_gamma_half(-2).pow(size)).mul(&v.pow(n * size));
    let mut s = acc.as_scalar(pa);
    for b in la.boxes() {
        s = s.mul(&content_weight(&Weight::one(), b).pow(n).as_scalar(pa));
    }
    s
}

/// Phi_lambda[u,v,n] = t_lambda :Phi_empty(v) prod eta^+(v chi):, one
/// normal-ordered vertex operator with fixed arguments; the horizontal
/// weight is relabeled u -> -gamma u v.
pub fn afs_phi(pa: &Params, la: &Partition, u: &Weight, v: &Weight, n: i64) -> VertexOp {
    let mut op = phi_empty(pa, *v).with_prefactor(afs_t(pa, la, u, v, n));
    for b in la.boxes() {
        let arg = content_weight(v, b);
        op = op
            .with_channel(true, None, Law::new(scale_num(one_minus(w_q1()), 1, arg)))
            .with_channel(false, None, Law::new(scale_num(one_minus(w_q2()), -1, arg.inv())));
    }
    op.with_relabel(v.mul(&w_gamma_half(2)).negated())
}

/// Phi*_lambda[u,v,n] = t*_lambda :Phi*_empty(v) prod eta^-(v chi):; the
/// horizontal weight is relabeled u' = -gamma u v -> u.
pub fn afs_phi_star(pa: &Params, la: &Partition, u: &Weight, v: &Weight, n: i64) -> VertexOp {
    let mut op = phi_star_empty(pa, *v).with_prefactor(afs_t_star(pa, la, u, v, n));
    let g = w_gamma_half(2);
    for b in la.boxes() {
        let arg = content_weight(v, b);
        op = op
            .with_channel(true, None, Law::new(scale_num(one_minus(w_q1()), -1, arg.mul(&g))))
            .with_channel(
                false,
                None,
                Law::new(scale_num(one_minus(w_q2()), 1, arg.inv().mul(&g))),
            );
    }
    op.with_relabel(v.mul(&w_gamma_half(2)).negated().inv())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::partitions_up_to;
    use crate::vertexop::apply_z;

    fn pa() -> Params {
        Params::default_eval()
    }

    fn vac(d: u32) -> State<Scalar> {
        State::vacuum(vec![Weight::u()], d, Params::default_eval().s_one())
    }

    fn apply_fixed(pa: &Params, op: &VertexOp, st: &State<Scalar>, leg: usize) -> State<Scalar> {
        let g = Graded::from_state(st.clone());
        let out = apply(pa, op, &g, leg, &BTreeMap::new(), &vec![]).unwrap();
        out.coeff(&[])
    }

    #[test]
    fn q_osc_normalization() {
        let pa = pa();
        let one = pa.one();
        // rho(a_1) J_{-1}|u> = -gamma^{-1/2}(1-q2)(1-q3)|u>
        let st = vac(4).apply_j(&pa, -1).unwrap();
        let got = h_apply_a(&pa, 1, &st, 0);
        let c = pa
            .gamma_half_pow(-1)
            .mul(&one.sub(&pa.q2_pow(1)))
            .mul(&one.sub(&pa.q3_pow(1)))
            .neg();
        assert_eq!(got, vac(4).scale(&Scalar::from_rf(c)));
        // [rho(a_1), rho(a_{-1})] = (gamma - gamma^{-1}) c_1 on |u>
        let v = vac(4);
        let ab = h_apply_a(&pa, 1, &h_apply_a(&pa, -1, &v, 0), 0);
        let ba = h_apply_a(&pa, -1, &h_apply_a(&pa, 1, &v, 0), 0);
        let comm = ab.sub(&ba).unwrap();
        let expect = pa.gamma_pow(1).sub(&pa.gamma_pow(-1)).mul(&pa.c_k(1));
        assert_eq!(comm, v.scale(&Scalar::from_rf(expect)));
        // x^+_0 on |u>: constant term of u-hat eta^+(z): u * (|u> + ...)
        let got = h_apply_x_mode(&pa, 1, 0, 0, &vac(4), 0).unwrap();
        let expect = vac(4).scale(&Scalar::term(pa.one(), crate::ring::Mono::u_pow(1)));
        assert_eq!(got, expect);
    }

    #[test]
    fn horizontal_xx_relation() {
        // [x^+(z), x^-(w)] = kappa (delta(gamma^{-1}z/w) psi^+(gamma^{1/2}w)
        //                          - delta(gamma z/w) psi^-(gamma^{-1/2}w))
        let pa = pa();
        let dcmp = 3u32;
        let span = 3i64;
        let dwork = dcmp + span as u32;
        let xp = h_x_current(&pa, 1, 0);
        let xm = h_x_current(&pa, -1, 0);
        let wide = 2 * span + 2 * dwork as i64;
        for la in partitions_up_to(2) {
            let ket = State::basis(vec![Weight::u()], dwork, vec![la.clone()], pa.s_one());
            let g0 = Graded::from_state(ket.clone()).add_axis().add_axis();
            let mut va_w = BTreeMap::new();
            va_w.insert(0usize, 1usize);
            let mut va_z = BTreeMap::new();
            va_z.insert(0usize, 0usize);
            let wins = vec![(-wide, wide), (-wide, wide)];
            let zw = {
                let a = apply(&pa, &xm, &g0, 0, &va_w, &wins).unwrap();
                apply(&pa, &xp, &a, 0, &va_z, &wins).unwrap()
            };
            let wz = {
                let a = apply(&pa, &xp, &g0, 0, &va_z, &wins).unwrap();
                apply(&pa, &xm, &a, 0, &va_w, &wins).unwrap()
            };
            let lhs = zw.sub(&wz);
            let psi_p = crate::vertexop::psi_plus_horizontal(&pa, 0)
                .arg_rescale(&pa, 0, &w_gamma_half(1));
            let psi_m = crate::vertexop::psi_minus_horizontal(&pa, 0)
                .arg_rescale(&pa, 0, &w_gamma_half(-1));
            let gp = apply_z(&pa, &psi_p, &ket, 0, (-wide, wide)).unwrap();
            let gm = apply_z(&pa, &psi_m, &ket, 0, (-wide, wide)).unwrap();
            let kap = Scalar::from_rf(pa.kappa());
            for a in -span..=span {
                for b in -span..=span {
                    let l = lhs.coeff(&[a, b]).truncate_degree(dcmp);
                    let m = a + b;
                    let rp = gp.coeff(&[m]).scale(&Scalar::from_rf(pa.gamma_pow(-a)));
                    let rm = gm.coeff(&[m]).scale(&Scalar::from_rf(pa.gamma_pow(a)));
                    let r = rp.sub(&rm).unwrap().scale(&kap).truncate_degree(dcmp);
                    assert_eq!(l, r, "la={} z^{} w^{}", la, a, b);
                }
            }
        }
    }

    #[test]
    fn vertical_examples() {
        let pa = pa();
        let v = Weight::v();
        let got = vertical_x_mode(&pa, 1, 0, &v, &Partition::empty()).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0, Partition::new(vec![1]));
        assert_eq!(got[0].1, pa.s_one());
        let got = vertical_x_mode(&pa, -1, 0, &v, &Partition::new(vec![1])).unwrap();
        assert_eq!(got.len(), 1);
        let one = pa.one();
        let expect =
            pa.gamma_pow(-1).mul(&one.sub(&pa.q1_pow(-1))).mul(&one.sub(&pa.q2_pow(-1)));
        assert_eq!(got[0].1, Scalar::from_rf(expect));
        let c = vertical_psi_coeffs(&pa, 1, &v, &Partition::empty(), 0);
        assert_eq!(c[0], Scalar::from_rf(pa.gamma_pow(-1)));
        let c = vertical_psi_coeffs(&pa, -1, &v, &Partition::empty(), 0);
        assert_eq!(c[0], Scalar::from_rf(pa.gamma_pow(1)));
    }

    #[test]
    fn vertical_xx_relation_c0() {
        // [x^+(z), x^-(w)] = kappa delta(z/w)(psi^+(w) - psi^-(w)) at c = 0:
        // surviving supports are diagonal, and the coefficient at support p
        // equals kappa * gamma^{-1} Res_{z=p}[Y(q3^{-1}z)/Y(z)] / p.
        let pa = pa();
        let v = Weight::v();
        for la in partitions_up_to(3) {
            let mut lhs: BTreeMap<(Weight, Weight), Scalar> = BTreeMap::new();
            for (ptw, mu, cw) in vertical_x(&pa, -1, &v, &la).unwrap() {
                for (ptz, nu, cz) in vertical_x(&pa, 1, &v, &mu).unwrap() {
                    if nu == la {
                        let e = lhs
                            .entry((ptz, ptw))
                            .or_insert_with(Scalar::zero);
                        e.add_assign(&cz.mul(&cw));
                    }
                }
            }
            for (ptz, mu, cz) in vertical_x(&pa, 1, &v, &la).unwrap() {
                for (ptw, nu, cw) in vertical_x(&pa, -1, &v, &mu).unwrap() {
                    if nu == la {
                        let e = lhs
                            .entry((ptz, ptw))
                            .or_insert_with(Scalar::zero);
                        e.add_assign(&cz.mul(&cw).neg());
                    }
                }
            }
            lhs.retain(|_, s| !s.is_zero());
            for ((pz, pw), _) in &lhs {
                assert_eq!(pz, pw, "off-diagonal support survives at la={}", la);
            }
            let y = y_function(&pa, &v, &la);
            let ratio = y.arg_scale(&pa, &w_q3().inv()).mul(&y.inv()).reduce();
            for ((p, _), got) in &lhs {
                let res = ratio.residue_at(&pa, p).unwrap().mul_rf(&pa.gamma_pow(-1));
                let expect =
                    res.mul(&Scalar::from_rf(pa.kappa())).mul(&p.inv().as_scalar(&pa));
                assert_eq!(got, &expect, "la={} support={}", la, p);
            }
            // every pole of the eigen-ratio shows up in the commutator
            for p in &ratio.poles {
                assert!(lhs.keys().any(|(a, _)| a == p), "missing support {} at {}", p, la);
            }
        }
    }

    #[test]
    fn coproduct_examples() {
        let pa = pa();
        let st: State<Scalar> =
            State::vacuum(vec![Weight::u(), Weight::u().shift_qt(1, 0)], 4, pa.s_one());
        for k in [1i64, -1, 2, -2] {
            let got = rho20_apply_a(&pa, k, &st);
            let t1 =
                h_apply_a(&pa, k, &st, 0).scale(&Scalar::from_rf(pa.gamma_half_pow(-k.abs())));
            let t2 =
                h_apply_a(&pa, k, &st, 1).scale(&Scalar::from_rf(pa.gamma_half_pow(k.abs())));
            assert_eq!(got, t1.add(&t2).unwrap());
        }
        // Delta(x^+_0): vacuum -> vacuum coefficient is u1 + u2 (psi^-_0 = 1)
        let got = rho20_apply_x_mode(&pa, 1, 0, &st, false).unwrap();
        let u1 = Scalar::term(pa.one(), crate::ring::Mono::u_pow(1));
        let u2 = Scalar::term(pa.q_pow(1), crate::ring::Mono::u_pow(1));
        let vac_key = vec![Partition::empty(), Partition::empty()];
        assert_eq!(got.coeff(&vac_key).unwrap().clone(), u1.add(&u2));
        // opposite coproduct differs at a degree-1 state
        let st1 = st.apply_j_trunc(&pa, 0, -1);
        let a = rho20_apply_x_mode(&pa, 1, 0, &st1, false).unwrap();
        let b = rho20_apply_x_mode(&pa, 1, 0, &st1, true).unwrap();
        assert!(!a.sub(&b).unwrap().is_zero());
    }

    #[test]
    fn afs_prefactors_and_components() {
        let pa = pa();
        let u = Weight::u();
        let v = Weight::v();
        let b1 = Partition::new(vec![1]);
        let got = afs_t_star(&pa, &b1, &u, &v, 0);
        let expect = Scalar::term(pa.gamma_pow(-1), crate::ring::Mono::u_pow(-1));
        assert_eq!(got, expect);
        let phi0 = afs_phi(&pa, &Partition::empty(), &u, &v, 0);
        assert_eq!(phi0.prefactor, pa.s_one());
        // Phi_{(1)} creation at k=1: -v/(1-q2) + v(1-q1)
        let phi1 = afs_phi(&pa, &b1, &u, &v, 0);
        let mut total = Scalar::zero();
        for ch in phi1.channels.iter().filter(|c| c.create) {
            total.add_assign(&ch.law.eval(&pa, 1));
        }
        let one = pa.one();
        let vs = Scalar::term(pa.one(), crate::ring::Mono::v_pow(1));
        let expect = vs
            .mul_rf(&one.div(&one.sub(&pa.q2_pow(1))).unwrap().neg())
            .add(&vs.mul_rf(&one.sub(&pa.q1_pow(1))));
        assert_eq!(total, expect);
        assert_eq!(phi1.relabel, v.mul(&w_gamma_half(2)).negated());
    }

    #[test]
    fn intertwining_property() {
        // Phi (rho_v ox rho_u) Delta(e) = rho_{u'}^{(1,1)}(e) Phi with
        // u' = -gamma u v, on vertical components |mu| <= 2 and horizontal
        // inputs of degree <= 2 at working degree 3.
        let pa = pa();
        let u = Weight::u();
        let v = Weight::v();
        let uprime = u.mul(&v).mul(&w_gamma_half(2)).negated();
        let d = 3u32;
        for mu in partitions_up_to(2) {
            for hla in partitions_up_to(2) {
                let h: State<Scalar> = State::basis(vec![u], d, vec![hla.clone()], pa.s_one());
                for e_tag in ["x+0", "x-0", "a1", "a-1"] {
                    // the equation sums over all vertical outputs into one
                    // horizontal state on each side
                    let mut lhs: Option<State<Scalar>> = None;
                    let add_term = |lhs: &mut Option<State<Scalar>>,
                                    _nu: &Partition,
                                    st: State<Scalar>| {
                        *lhs = Some(match lhs.take() {
                            Some(e) => e.add(&st).unwrap(),
                            None => st,
                        });
                    };
                    match e_tag {
                        "x+0" => {
                            // vertical leg has c = 0: no central twist
                            for (nu, c) in vertical_x_mode(&pa, 1, 0, &v, &mu).unwrap() {
                                let op = afs_phi(&pa, &nu, &u, &v, 0);
                                let st = apply_fixed(&pa, &op, &h, 0).scale(&c);
                                add_term(&mut lhs, &nu, st);
                            }
                            let psic =
                                vertical_psi_coeffs(&pa, -1, &v, &mu, d as i64 + 1);
                            let op = afs_phi(&pa, &mu, &u, &v, 0);
                            for (l, c) in psic.iter().enumerate() {
                                let hx = h_apply_x_mode(&pa, 1, l as i64, 0, &h, 0)
                                    .unwrap()
                                    .scale(c);
                                let st = apply_fixed(&pa, &op, &hx, 0);
                                add_term(&mut lhs, &mu, st);
                            }
                        }
                        "x-0" => {
                            // sum_l gamma^{l/2} (vertical x^-_{-l}) ox psi^+_l
                            // resummed on the delta supports: psi^+ at the
                            // fixed argument gamma^{-1/2} pt
                            for (pt, nu, c) in vertical_x(&pa, -1, &v, &mu).unwrap() {
                                let psi = crate::vertexop::psi_plus_horizontal(&pa, 0)
                                    .fix_var(&pa, 0, &pt.mul(&w_gamma_half(-1)));
                                let hp = apply_fixed(&pa, &psi, &h, 0);
                                let opn = afs_phi(&pa, &nu, &u, &v, 0);
                                let st = apply_fixed(&pa, &opn, &hp, 0).scale(&c);
                                add_term(&mut lhs, &nu, st);
                            }
                            let hx = h_apply_x_mode(&pa, -1, 0, 0, &h, 0).unwrap();
                            let op = afs_phi(&pa, &mu, &u, &v, 0);
                            add_term(&mut lhs, &mu, apply_fixed(&pa, &op, &hx, 0));
                        }
                        "a1" | "a-1" => {
                            let k = if e_tag == "a1" { 1 } else { -1 };
                            let ev = vertical_a_eigen(&pa, k, &v, &mu);
                            let op = afs_phi(&pa, &mu, &u, &v, 0);
                            let base = apply_fixed(&pa, &op, &h, 0);
                            let t1 = base
                                .scale(&ev.mul(&Scalar::from_rf(pa.gamma_half_pow(-1))));
                            let t2 = apply_fixed(&pa, &op, &h_apply_a(&pa, k, &h, 0), 0);
                            add_term(&mut lhs, &mu, t1.add(&t2).unwrap());
                        }
                        _ => unreachable!(),
                    }
                    let l = lhs.expect("nonempty left side");
                    let op = afs_phi(&pa, &mu, &u, &v, 0);
                    let base = apply_fixed(&pa, &op, &h, 0);
                    let r = match e_tag {
                        "x+0" => h_apply_x_mode(&pa, 1, 0, 1, &base, 0).unwrap(),
                        "x-0" => h_apply_x_mode(&pa, -1, 0, 1, &base, 0).unwrap(),
                        "a1" => h_apply_a(&pa, 1, &base, 0),
                        "a-1" => h_apply_a(&pa, -1, &base, 0),
                        _ => unreachable!(),
                    };
                    assert_eq!(r.weights[0], uprime);
                    // horizontal inputs of degree <= 2 keep outputs exact
                    // up to degree 2 at working cap 3 for these modes
                    let diff = l.truncate_degree(2).sub(&r.truncate_degree(2)).unwrap();
                    assert!(
                        diff.is_zero(),
                        "intertwining fails: e={} mu={} h={}",
                        e_tag,
                        mu,
                        hla
                    );
                }
            }
        }
    }

    #[test]
    fn self_dual_x_matches_fermion_bilinear() {
        // x^+_k -> (1-q^{-1}) q^{-k/2} W_{k,1} + c1 delta_{k,0} at t = q,
        // with rho_f(W_{k,1}) = oint dz/(2 i pi) z^k :psi-bar(z) psi(q^{-1}z):
        let pa = Params::self_dual_eval();
        let dcmp = 2u32;
        let span = 4i64;
        let dwork = dcmp + span as u32;
        // kets are charged vacua: there the bilinear mode sum has finite
        // support (no conditionally convergent geometric tail)
        for n in [0i64, 1] {
            let w0 = Weight::qt(4 * n, 0);
            {
                let la = Partition::empty();
                let ket: State<Scalar> =
                    State::basis(vec![w0], dwork, vec![la.clone()], pa.s_one());
                for k in [-1i64, 0, 1] {
                    let lhs = h_apply_x_mode(&pa, 1, k, 0, &ket, 0).unwrap();
                    let g0 = Graded::from_state(ket.clone()).add_axis().add_axis();
                    let mut va_w = BTreeMap::new();
                    va_w.insert(0usize, 1usize);
                    let mut va_z = BTreeMap::new();
                    va_z.insert(0usize, 0usize);
                    let wide = 2 * span + 2 * dwork as i64 + 2 * n.abs() + 2;
                    let wins = vec![(-wide, wide), (-wide, wide)];
                    let a =
                        apply(&pa, &crate::vertexop::psi_boson(&pa), &g0, 0, &va_w, &wins)
                            .unwrap();
                    let b = apply(&pa, &crate::vertexop::psi_bar_boson(&pa), &a, 0, &va_z, &wins)
                        .unwrap();
                    // fermionic normal ordering: subtract the contraction
                    // <psi-bar(z) psi(w)> = sum_j z^{-j-1} w^j term by term,
                    // then collapse the diagonal az + aw = -k - 1 with the
                    // weight q^{-aw} from w = q^{-1} z
                    let mut rhs: State<Scalar> = State::zero(vec![w0], dwork);
                    for (key, st) in b.terms() {
                        let (az, aw) = (key[0], key[1]);
                        if az + aw != -k - 1 {
                            continue;
                        }
                        let mut piece = st.clone();
                        if az + 1 == -aw && aw >= 0 {
                            piece = piece.sub(&ket).unwrap();
                        }
                        let c = Scalar::from_rf(pa.q_pow(-aw));
                        rhs = rhs.add(&piece.scale(&c)).unwrap();
                    }
                    let pref = pa.one().sub(&pa.q_pow(-1));
                    let mut rhs = rhs.scale(&Scalar::from_rf(pref));
                    if k == 0 {
                        rhs = rhs.add(&ket).unwrap(); // central term c1 = 1
                    }
                    assert_eq!(
                        lhs.truncate_degree(dcmp),
                        rhs.truncate_degree(dcmp),
                        "n={} la={} k={}",
                        n,
                        la,
                        k
                    );
                }
            }
        }
    }
}
