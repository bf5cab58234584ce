//! Airy function `Ai` and its derivative from the Maclaurin two-series form.
//!
//! The two series cancel heavily for positive arguments (`Ai(6) ≈ 1e−5` while
//! each series is `≈ 1e4`), so they are summed in double-double arithmetic.

use super::dd::Dd;

// 1/(3^{2/3} Γ(2/3)) and 1/(3^{1/3} Γ(1/3)) as unevaluated sums.
const C1: Dd = Dd::new(0.355_028_053_887_817_2, 2.052_336_324_362_12e-17);
const C2: Dd = Dd::new(0.258_819_403_792_806_8, -2.522_243_111_610_832e-17);

const MAX_TERMS: usize = 400;

/// Values of `Ai`, `Ai′` and `∫₀ˣ Ai` at one point.
#[derive(Debug, Clone, Copy)]
pub struct AiryValues {
    pub ai: f64,
    pub ai_prime: f64,
    pub integral_from_zero: f64,
}

fn converged(term: Dd, sum: Dd) -> bool {
    term.hi.abs() <= 1e-33 * sum.hi.abs().max(1e-300)
}

/// Evaluates `Ai(x)`, `Ai′(x)` and `∫₀ˣ Ai(t) dt`. Accurate to near double precision
/// for `|x| ≤ 10`; the series converge for every `x` but lose accuracy beyond that.
pub fn airy(x: f64) -> AiryValues {
    let xd = Dd::from(x);
    let x3 = xd.mul(xd).mul(xd);

    // f = Σ t_k, g = Σ s_k with t_0 = 1, s_0 = x.
    let (mut t, mut s) = (Dd::from(1.0), xd);
    let (mut f, mut g) = (t, s);
    // Term-wise antiderivatives: t_k x/(3k+1), s_k x/(3k+2).
    let (mut fi, mut gi) = (xd, xd.mul(xd).div_f64(2.0));
    // f' = Σ u_k (u_1 = x²/2), g' = Σ v_k (v_0 = 1).
    let (mut u, mut v) = (xd.mul(xd).div_f64(2.0), Dd::from(1.0));
    let (mut fp, mut gp) = (u, v);
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        t = t.mul(x3).div_f64((3.0 * kf - 1.0) * 3.0 * kf);
        s = s.mul(x3).div_f64(3.0 * kf * (3.0 * kf + 1.0));
        f = f.add(t);
        g = g.add(s);
        fi = fi.add(t.mul(xd).div_f64(3.0 * kf + 1.0));
        gi = gi.add(s.mul(xd).div_f64(3.0 * kf + 2.0));
        if k >= 2 {
            u = u.mul(x3).div_f64((3.0 * kf - 3.0) * (3.0 * kf - 1.0));
            fp = fp.add(u);
        }
        v = v.mul(x3).div_f64((3.0 * kf - 2.0) * 3.0 * kf);
        gp = gp.add(v);
        if converged(t, f) && converged(s, g) && converged(v, gp) && (k < 2 || converged(u, fp)) {
            break;
        }
    }
    AiryValues {
        ai: C1.mul(f).add(C2.mul(g).neg()).to_f64(),
        ai_prime: C1.mul(fp).add(C2.mul(gp).neg()).to_f64(),
        integral_from_zero: C1.mul(fi).add(C2.mul(gi).neg()).to_f64(),
    }
}

/// `∫ₓ^∞ Ai(t) dt = 1/3 − ∫₀ˣ Ai`, with the subtraction carried in double-double.
pub fn airy_tail_integral(x: f64) -> f64 {
    let third_hi = 1.0 / 3.0;
    let third = Dd::new(third_hi, -third_hi.mul_add(3.0, -1.0) / 3.0);
    let xd = Dd::from(x);
    let x3 = xd.mul(xd).mul(xd);
    let (mut t, mut s) = (Dd::from(1.0), xd);
    let (mut fi, mut gi) = (xd, xd.mul(xd).div_f64(2.0));
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        t = t.mul(x3).div_f64((3.0 * kf - 1.0) * 3.0 * kf);
        s = s.mul(x3).div_f64(3.0 * kf * (3.0 * kf + 1.0));
        let dt = t.mul(xd).div_f64(3.0 * kf + 1.0);
        let ds = s.mul(xd).div_f64(3.0 * kf + 2.0);
        fi = fi.add(dt);
        gi = gi.add(ds);
        if converged(dt, fi) && converged(ds, gi) {
            break;
        }
    }
    let from_zero = C1.mul(fi).add(C2.mul(gi).neg());
    third.add(from_zero.neg()).to_f64()
}
