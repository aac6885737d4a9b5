//! Deformed Virasoro sector on two tensor legs.
//!
//! The level-(2,0) toroidal representation factorizes into a u(1) Heisenberg
//! factor (beta modes) and the deformed Virasoro algebra (alpha modes). The
//! screening currents S_{+-}(z) act with integer z-powers exactly on the
//! admissible charge sectors, where their zero modes resolve to the power
//! z^{-n-1} (resp. z^{-m-1}) and a weight relabel. The screening charges are
//! the z^{-1} coefficients.

use std::collections::BTreeMap;

use crate::fock::{Coeff, State, Weight};
use crate::ring::{Mutation, Params, Scalar};
use crate::vertexop::{
    apply, mul_nums, one_minus, scale_num, w_gamma_half, w_p, w_q, w_q1, w_q2, w_q3, w_t, Graded,
    Law, TensorOp, VertexOp,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// mode dictionary
// ---------------------------------------------------------------------------

/// Charges (m, n) of a two-leg state: u2/u1 = t^m q^{-n}.
pub fn parse_charges<C: Coeff>(st: &State<C>) -> Result<(i64, i64)> {
    assert_eq!(st.legs(), 2);
    let ratio = st.weights[1].ratio(&st.weights[0]);
    match ratio.as_qt_ratio() {
        Some((a, b)) => Ok((b, -a)),
        None => Err(Error::ChargeRestriction(format!(
            "weight ratio {} is not of the form t^m q^-n",
            ratio
        ))),
    }
}

/// alpha_k action through the dictionary:
/// alpha_{-k} = -(gamma^k J^{(1)}_{-k} - J^{(2)}_{-k}),
/// alpha_{k}  = -((1-q^k)/(1-t^k)) p^k (gamma^k J^{(1)}_k - J^{(2)}_k)/(1+p^k).
pub fn apply_alpha<C: Coeff>(pa: &Params, k: i64, st: &State<C>) -> State<C> {
    assert!(k != 0 && st.legs() == 2);
    let m = k.abs();
    let (c1, c2) = if k < 0 {
        let g = pa.gamma_pow(m);
        (g.neg(), pa.one())
    } else {
        let one = pa.one();
        let f = one
            .sub(&pa.q_pow(m))
            .mul(&pa.p_pow(m))
            .div(&one.sub(&pa.t_pow(m)).mul(&one.add(&pa.p_pow(m))))
            .unwrap();
        (f.mul(&pa.gamma_pow(m)).neg(), f)
    };
    let a = st.apply_j_trunc(pa, 0, k).scale(&Scalar::from_rf(c1));
    let b = st.apply_j_trunc(pa, 1, k).scale(&Scalar::from_rf(c2));
    a.add(&b).expect("same weights")
}

/// beta_k action (the u(1) factor):
/// beta_k = -gamma^{-k}(1-q2^k)(1-q3^k)(J^{(1)}_k + gamma^k J^{(2)}_k),
/// beta_{-k} = gamma^{-k}(1-q1^k)(1-q3^k)(J^{(1)}_{-k} + gamma^k J^{(2)}_{-k}).
pub fn apply_beta<C: Coeff>(pa: &Params, k: i64, st: &State<C>) -> State<C> {
    assert!(k != 0 && st.legs() == 2);
    let m = k.abs();
    let one = pa.one();
    let base = if k > 0 {
        pa.gamma_pow(-m).mul(&one.sub(&pa.q2_pow(m))).mul(&one.sub(&pa.q3_pow(m))).neg()
    } else {
        pa.gamma_pow(-m).mul(&one.sub(&pa.q1_pow(m))).mul(&one.sub(&pa.q3_pow(m)))
    };
    let a = st.apply_j_trunc(pa, 0, k).scale(&Scalar::from_rf(base.clone()));
    let b = st.apply_j_trunc(pa, 1, k).scale(&Scalar::from_rf(base.mul(&pa.gamma_pow(m))));
    a.add(&b).expect("same weights")
}

// ---------------------------------------------------------------------------
// screening currents and charges
// ---------------------------------------------------------------------------

/// Oscillator part of S_+(z) as a two-leg tensor operator (no zero modes).
pub fn s_plus_osc(pa: &Params) -> TensorOp {
    // creation: -(1/k) r_k (gamma^k J^{(1)}_{-k} - J^{(2)}_{-k})
    // annihilation: +(1/k) p^k (gamma^k J^{(1)}_k - J^{(2)}_k)
    let g = w_gamma_half(2);
    let leg1 = VertexOp::identity(pa)
        .with_channel(true, Some(0), Law::with_den(scale_num(one_minus(w_t()), -1, g), vec![(1, w_q())]))
        .with_channel(false, Some(0), Law::new(vec![(1, w_gamma_half(-2))]));
    let leg2 = VertexOp::identity(pa)
        .with_channel(true, Some(0), Law::with_den(one_minus(w_t()), vec![(1, w_q())]))
        .with_channel(false, Some(0), Law::new(vec![(-1, w_p())]));
    TensorOp { prefactor: pa.s_one(), zpow: 0, legs: vec![(0, leg1), (1, leg2)] }
}

/// Oscillator part of S_-(z) as a two-leg tensor operator.
pub fn s_minus_osc(pa: &Params) -> TensorOp {
    // creation: +(1/k)(gamma^k J^{(1)}_{-k} - J^{(2)}_{-k})
    // annihilation: -(1/k)(1-q^k)/(1-t^k) (gamma^k J^{(1)}_k - J^{(2)}_k)
    let g = w_gamma_half(2);
    let flip = match pa.mutation {
        Mutation::ScreeningMinusSign => -1,
        _ => 1,
    };
    let leg1 = VertexOp::identity(pa)
        .with_channel(true, Some(0), Law::new(vec![(flip, g)]))
        .with_channel(
            false,
            Some(0),
            Law::with_den(scale_num(one_minus(w_q()), -1, g), vec![(1, w_t())]),
        );
    let leg2 = VertexOp::identity(pa)
        .with_channel(true, Some(0), Law::new(vec![(-flip, Weight::one())]))
        .with_channel(false, Some(0), Law::with_den(one_minus(w_q()), vec![(1, w_t())]));
    TensorOp { prefactor: pa.s_one(), zpow: 0, legs: vec![(0, leg1), (1, leg2)] }
}

/// Screening charge Psi_{+-}: the z^{-1} coefficient of the screening
/// current, with the zero modes resolved on the admissible charge sector.
/// Psi_+ needs u2/u1 = t^{-1} q^{-n} and relabels (u1,u2) -> (t^{-1}u1, t u2);
/// Psi_- needs u2/u1 = q t^m and relabels (u1,u2) -> (q u1, q^{-1} u2).
pub fn screening_apply<C: Coeff>(pa: &Params, plus: bool, st: &State<C>) -> Result<State<C>> {
    let (m, n) = parse_charges(st)?;
    // at t = q the (m,n) split is ambiguous and the exponent collapses to
    // (m+1) - (n+1) = m - n for S_+ (mirror for S_-)
    let (osc, zpow, rel1, rel2) = if plus {
        if m != -1 && !pa.is_self_dual() {
            return Err(Error::ChargeRestriction(format!(
                "S_+ needs charge m = -1, found (m,n) = ({},{})",
                m, n
            )));
        }
        let zp = if pa.is_self_dual() { m - n } else { -n - 1 };
        (s_plus_osc(pa), zp, Weight::qt(0, -4), Weight::qt(0, 4))
    } else {
        if n != -1 && !pa.is_self_dual() {
            return Err(Error::ChargeRestriction(format!(
                "S_- needs charge n = -1, found (m,n) = ({},{})",
                m, n
            )));
        }
        let zp = if pa.is_self_dual() { n - m } else { -m - 1 };
        (s_minus_osc(pa), zp, Weight::qt(4, 0), Weight::qt(-4, 0))
    };
    let zpow = match pa.mutation {
        Mutation::ScreeningZPow => zpow + 1,
        _ => zpow,
    };
    let g = Graded::from_state(st.clone()).add_axis();
    let op = TensorOp { prefactor: osc.prefactor.clone(), zpow, legs: osc.legs.clone() };
    let out = op.apply(pa, &g, 0, &vec![(-1, -1)])?;
    let res = out.coeff(&[-1]);
    let res = res.relabel(0, &rel1).relabel(1, &rel2);
    let mut res = res;
    res.weights = res.weights.iter().map(|w| w.canon(pa)).collect();
    Ok(res)
}

// ---------------------------------------------------------------------------
// stress tensor
// ---------------------------------------------------------------------------

/// The zero mode q^{beta alpha_0} resolved on charges: t^{alpha_0} with
/// t^{2 alpha_0} = (u2/u1) t/q; requires the ratio exponents to be even.
fn zero_mode_eigen(pa: &Params, st_w: &[Weight]) -> Result<Scalar> {
    let ratio = st_w[1].ratio(&st_w[0]);
    if ratio.neg || !ratio.mono.is_one() {
        return Err(Error::ChargeRestriction(format!("ratio {} is not a parameter monomial", ratio)));
    }
    let a = ratio.qp - 4;
    let b = ratio.tp + 4;
    if a % 2 != 0 || b % 2 != 0 {
        return Err(Error::ChargeRestriction(format!(
            "zero mode of the stress tensor is not integer-resolved at ratio {}",
            ratio
        )));
    }
    Ok(Scalar::from_rf(pa.qt(a / 2, b / 2)))
}

/// Lambda(z) as a two-leg tensor operator with the zero mode folded in.
pub fn lambda_op(pa: &Params, st_w: &[Weight], inverse_at_pz: bool) -> Result<TensorOp> {
    // creation coefficient of J_{-k}: +(1/k) (1-t^k)/(1+p^k) q^{-k} on leg 1
    // (base q^{-1} from t^{-1} p^{-1/2} gamma = q^{-1}), and the same with
    // base t^{-1} gamma = t^{-1} p^{-1/2} on leg 2 with the opposite sign.
    // annihilation coefficient of J_k: +(1/k)(1-q^k) p^{3k/2} / (1+p^k) with
    // gamma-weighted legs.
    let z0 = zero_mode_eigen(pa, st_w)?;
    let den = vec![(-1i64, w_p())];
    let cre1 = Law::with_den(scale_num(one_minus(w_t()), 1, w_q().inv()), den.clone());
    let cre2 = Law::with_den(
        scale_num(one_minus(w_t()), -1, w_t().inv().mul(&w_gamma_half(2))),
        den.clone(),
    );
    let p32 = w_p().mul(&w_gamma_half(-2)); // p^{3/2}
    let ann1 = Law::with_den(scale_num(one_minus(w_q()), 1, p32.mul(&w_gamma_half(2))), den.clone());
    let ann2 = Law::with_den(scale_num(one_minus(w_q()), -1, p32), den);
    let mut leg1 = VertexOp::identity(pa)
        .with_channel(true, Some(0), cre1)
        .with_channel(false, Some(0), ann1);
    let mut leg2 = VertexOp::identity(pa)
        .with_channel(true, Some(0), cre2)
        .with_channel(false, Some(0), ann2);
    let mut pref = Scalar::from_rf(pa.p_pow(1)).pow(1).unwrap();
    // p^{1/2} = gamma^{-1}
    pref = Scalar::from_rf(pa.gamma_pow(-1)).mul(&z0);
    if inverse_at_pz {
        leg1 = leg1.exp_inverse(pa).arg_rescale(pa, 0, &w_p());
        leg2 = leg2.exp_inverse(pa).arg_rescale(pa, 0, &w_p());
        pref = Scalar::from_rf(pa.gamma_pow(1))
            .mul(&z0.inv().expect("invertible zero mode"));
    }
    Ok(TensorOp { prefactor: pref, zpow: 0, legs: vec![(0, leg1), (1, leg2)] })
}

/// Stress tensor mode T_m = [z^{-m}] (Lambda(z) + :Lambda(pz)^{-1}:).
pub fn stress_tensor<C: Coeff>(pa: &Params, m: i64, st: &State<C>) -> Result<State<C>> {
    let g = Graded::from_state(st.clone()).add_axis();
    let win = vec![(-m, -m)];
    let a = lambda_op(pa, &st.weights, false)?.apply(pa, &g, 0, &win)?;
    let b = lambda_op(pa, &st.weights, true)?.apply(pa, &g, 0, &win)?;
    Ok(a.coeff(&[-m]).add(&b.coeff(&[-m]))?)
}

/// u(1) factor V_b^{+-}(z) of the x^{+-}(z) factorization.
pub fn vb_op(pa: &Params, sign: i64, st_w: &[Weight]) -> Result<TensorOp> {
    // (u1 u2)^{+-1/2}: exact when the ratio exponents are even
    let prod = st_w[0].mul(&st_w[1]);
    if prod.qp % 2 != 0 || prod.tp % 2 != 0 || prod.neg {
        return Err(Error::ChargeRestriction(format!(
            "(u1 u2)^{{1/2}} is not monomial-resolved at {}",
            prod
        )));
    }
    let mut half = Weight {
        neg: false,
        mono: prod.mono,
        qp: prod.qp / 2,
        tp: prod.tp / 2,
    };
    // the weight-symbol part must also halve exactly
    {
        let mut mm = half.mono;
        let ok = mm.u % 2 == 0 && mm.v % 2 == 0 && mm.x % 2 == 0 && mm.al % 2 == 0;
        if !ok {
            return Err(Error::ChargeRestriction("(u1 u2)^{1/2} needs even symbol powers".into()));
        }
        mm.u /= 2;
        mm.v /= 2;
        mm.x /= 2;
        mm.al /= 2;
        for e in mm.xi.iter_mut() {
            *e /= 2;
        }
        half.mono = mm;
    }
    if sign == -1 {
        half = half.inv();
    }
    let den = vec![(-1i64, w_q3())];
    let (cre1_n, cre2_n, ann1_n, ann2_n) = if sign == 1 {
        (
            one_minus(w_q1()),
            scale_num(one_minus(w_q1()), 1, w_gamma_half(2)),
            scale_num(one_minus(w_q2()), -1, Weight::one()),
            scale_num(one_minus(w_q2()), -1, w_gamma_half(2)),
        )
    } else {
        (
            scale_num(one_minus(w_q1()), -1, w_q3()),
            scale_num(one_minus(w_q1()), -1, w_q3().mul(&w_gamma_half(2))),
            scale_num(one_minus(w_q2()), 1, w_q3()),
            scale_num(one_minus(w_q2()), 1, w_q3().mul(&w_gamma_half(2))),
        )
    };
    let leg1 = VertexOp::identity(pa)
        .with_channel(true, Some(0), Law::with_den(cre1_n, den.clone()))
        .with_channel(false, Some(0), Law::with_den(ann1_n, den.clone()));
    let leg2 = VertexOp::identity(pa)
        .with_channel(true, Some(0), Law::with_den(cre2_n, den.clone()))
        .with_channel(false, Some(0), Law::with_den(ann2_n, den));
    Ok(TensorOp { prefactor: half.as_scalar(pa), zpow: 0, legs: vec![(0, leg1), (1, leg2)] })
}

/// Residual of rho^{(2,0)}(x^{+-}(z)) - V_b^{+-}(z) T(z) on a z window.
///
/// The same-argument product V_b(z) Lambda(z) is evaluated through its
/// resummed normal-ordered composite; the contraction collapses to 1 by the
/// u(1) decoupling, which is certified on a finite expansion before use.
pub fn u1_factorization_residual<C: Coeff>(
    pa: &Params,
    sign: i64,
    st: &State<C>,
    win: (i64, i64),
) -> Result<Graded<C>> {
    let g = Graded::from_state(st.clone()).add_axis();
    let wins = vec![win];
    let mut lhs: Option<Graded<C>> = None;
    for piece in crate::toroidal::rho20_x_current_pieces(pa, sign) {
        let op = TensorOp { prefactor: pa.s_one(), zpow: 0, legs: piece };
        let part = op.apply(pa, &g, 0, &wins)?;
        lhs = Some(match lhs {
            None => part,
            Some(x) => x.add(&part),
        });
    }
    let mut lhs = lhs.unwrap();
    // rhs: V_b(z) T(z) through the composites :V_b Lambda: and :V_b Lambda^{-1}:
    let vb = vb_op(pa, sign, &st.weights)?;
    let mut rhs: Option<Graded<C>> = None;
    for inv in [false, true] {
        let lam = lambda_op(pa, &st.weights, inv)?;
        let (s, comp) = crate::vertexop::ope_tensor(pa, &vb, &lam)?;
        let order = 2 * st.trunc_deg as i64 + 2;
        let exp = s.expand(pa, order);
        let trivial = exp.len() == 1
            && exp
                .get(&(0, 0))
                .map_or(false, |c| c.sub(&pa.s_one()).is_zero());
        if !trivial {
            return Err(Error::NonResummableContraction(
                "u(1) factor does not decouple from the stress tensor".into(),
            ));
        }
        let b = comp.apply(pa, &g, 0, &wins)?;
        rhs = Some(match rhs {
            None => b,
            Some(x) => x.add(&b),
        });
    }
    let mut r = rhs.unwrap();
    r.retain_axis(0, win.0, win.1);
    lhs.retain_axis(0, win.0, win.1);
    Ok(lhs.sub(&r))
}
