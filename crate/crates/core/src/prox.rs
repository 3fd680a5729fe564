//! Proximal operators of K|.|^p for 1 <= p <= 2: closed forms at the
//! endpoints, a safeguarded scalar Newton solve in between.

use crate::error::{Error, Result};

/// Threshold weight K and shape exponent p of the penalty K|.|^p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxParams {
    k: f64,
    p: f64,
}

impl ProxParams {
    pub fn new(k: f64, p: f64) -> Result<Self> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!("prox weight K must be >= 0, got {k}")));
        }
        if !(1.0..=2.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("prox exponent p must be in [1,2], got {p}")));
        }
        Ok(ProxParams { k, p })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

const RESIDUAL_TOL: f64 = 1e-12;
const MAX_NEWTON_ITERS: usize = 100;

/// sign(x) * q where q >= 0 solves q + p K q^(p-1) = |x|.
pub fn prox_lp_scalar(x: f64, params: ProxParams) -> f64 {
    let (k, p) = (params.k, params.p);
    if x == 0.0 || k == 0.0 {
        return if k == 0.0 { x } else { 0.0 };
    }
    let a = x.abs();
    let q = if p == 1.0 {
        (a - k).max(0.0)
    } else if p == 2.0 {
        a / (1.0 + 2.0 * k)
    } else {
        newton_bisect(a, k, p)
    };
    q.copysign(x)
}

/// Root of g(q) = q + p K q^(p-1) - a on (0, a]; g is monotone increasing
/// with g(0+) = -a < 0 and g(a) >= 0, so the bracket always holds.
fn newton_bisect(a: f64, k: f64, p: f64) -> f64 {
    let g = |q: f64| q + p * k * q.powf(p - 1.0) - a;
    let (mut lo, mut hi) = (0.0_f64, a);
    let mut q = a;
    for _ in 0..MAX_NEWTON_ITERS {
        let r = g(q);
        if r.abs() < RESIDUAL_TOL {
            return q;
        }
        if r > 0.0 {
            hi = q;
        } else {
            lo = q;
        }
        // the derivative term q^(p-2) is singular at q -> 0
        let next = if q > 1e-14 {
            let dg = 1.0 + p * (p - 1.0) * k * q.powf(p - 2.0);
            q - r / dg
        } else {
            f64::NAN
        };
        q = if next.is_finite() && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    q
}

/// Elementwise proximal operator of K ||.||_p^p (the penalty is separable).
pub fn prox_lp_vector(v: &[f64], params: ProxParams) -> Vec<f64> {
    v.iter().map(|&x| prox_lp_scalar(x, params)).collect()
}

/// Soft thresholding, the proximal operator of K ||.||_1.
pub fn prox_l1(v: &[f64], k: f64) -> Result<Vec<f64>> {
    if !(k >= 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be >= 0, got {k}")));
    }
    Ok(v.iter().map(|&x| (x.abs() - k).max(0.0).copysign(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: bisection on the defining equation, no Newton.
    fn bisect_oracle(a: f64, k: f64, p: f64) -> f64 {
        let g = |q: f64| q + p * k * q.powf(p - 1.0) - a;
        let (mut lo, mut hi) = (0.0, a);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Brute-force 1D grid minimizer of K|u|^p + (u-x)^2/2, refined once.
    fn grid_oracle(x: f64, k: f64, p: f64) -> f64 {
        let f = |u: f64| k * u.abs().powf(p) + 0.5 * (u - x) * (u - x);
        let mut best = 0.0;
        let mut best_val = f(0.0);
        let lo = -x.abs() - 1.0;
        let hi = x.abs() + 1.0;
        let coarse = 1e-4 * (hi - lo);
        let mut u = lo;
        while u <= hi {
            let val = f(u);
            if val < best_val {
                best_val = val;
                best = u;
            }
            u += coarse;
        }
        let mut refined = best;
        let step = coarse * 1e-4;
        let mut u = best - coarse;
        while u <= best + coarse {
            if f(u) < best_val {
                best_val = f(u);
                refined = u;
            }
            u += step;
        }
        refined
    }

    #[test]
    fn soft_threshold_case() {
        let params = ProxParams::new(0.5, 1.0).unwrap();
        assert_eq!(prox_lp_scalar(2.0, params), 1.5);
        assert_eq!(prox_lp_scalar(-2.0, params), -1.5);
        assert_eq!(prox_lp_scalar(0.3, params), 0.0);
    }

    #[test]
    fn quadratic_case() {
        let params = ProxParams::new(1.0, 2.0).unwrap();
        assert!((prox_lp_scalar(3.0, params) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn intermediate_case_matches_bisection() {
        // q + 1.5 sqrt(q) = 2  =>  q ~ 0.72
        let params = ProxParams::new(1.0, 1.5).unwrap();
        let got = prox_lp_scalar(2.0, params);
        let expect = bisect_oracle(2.0, 1.0, 1.5);
        assert!((got - expect).abs() < 1e-11, "{got} vs {expect}");
        assert!((got - 0.72).abs() < 5e-3);
    }

    #[test]
    fn zero_input() {
        let params = ProxParams::new(3.0, 1.7).unwrap();
        assert_eq!(prox_lp_scalar(0.0, params), 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ProxParams::new(-1.0, 1.5).is_err());
        assert!(ProxParams::new(1.0, 0.5).is_err());
        assert!(ProxParams::new(1.0, 2.5).is_err());
        assert!(prox_l1(&[1.0], -0.1).is_err());
    }

    #[test]
    fn vector_is_elementwise_and_l1_consistent() {
        let params = ProxParams::new(1.0, 1.0).unwrap();
        let v = [3.0, -0.2, 0.0];
        let out = prox_lp_vector(&v, params);
        assert_eq!(out, vec![2.0, 0.0, 0.0]);
        assert_eq!(out, prox_l1(&v, 1.0).unwrap());
        for (&x, &o) in v.iter().zip(&out) {
            assert_eq!(o, prox_lp_scalar(x, params));
        }
        assert!(prox_lp_vector(&[0.0; 5], params).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_oracle_optimality() {
        let cases = [(2.0, 1.0, 1.5), (-3.5, 0.7, 1.3), (1.2, 2.0, 1.9), (0.4, 0.2, 1.1)];
        for (x, k, p) in cases {
            let params = ProxParams::new(k, p).unwrap();
            let got = prox_lp_scalar(x, params);
            let expect = grid_oracle(x, k, p);
            assert!((got - expect).abs() < 1e-3, "({x},{k},{p}): {got} vs {expect}");
        }
    }

    #[test]
    fn residual_of_defining_equation() {
        for &(x, k, p) in &[(5.0, 2.0, 1.5), (0.01, 0.3, 1.2), (9.9, 4.9, 1.9)] {
            let q = prox_lp_scalar(x, ProxParams::new(k, p).unwrap()).abs();
            let r = q + p * k * q.powf(p - 1.0) - x.abs();
            assert!(r.abs() < 1e-10, "residual {r}");
        }
    }

    #[test]
    fn continuity_at_endpoints() {
        for &(x, k) in &[(2.0, 0.5), (-4.0, 1.5), (0.7, 3.0)] {
            let near1 = prox_lp_scalar(x, ProxParams::new(k, 1.0 + 1e-9).unwrap());
            let at1 = prox_lp_scalar(x, ProxParams::new(k, 1.0).unwrap());
            assert!((near1 - at1).abs() < 1e-8, "p->1: {near1} vs {at1}");
            let near2 = prox_lp_scalar(x, ProxParams::new(k, 2.0 - 1e-9).unwrap());
            let at2 = prox_lp_scalar(x, ProxParams::new(k, 2.0).unwrap());
            assert!((near2 - at2).abs() < 1e-8, "p->2: {near2} vs {at2}");
        }
    }

    proptest! {
        #[test]
        fn shrinkage_and_monotonicity(
            x1 in -10.0..10.0f64,
            x2 in -10.0..10.0f64,
            k in 0.0..5.0f64,
            p in 1.0..2.0f64,
        ) {
            let params = ProxParams::new(k, p).unwrap();
            let q1 = prox_lp_scalar(x1, params);
            let q2 = prox_lp_scalar(x2, params);
            prop_assert!(q1.abs() <= x1.abs() + 1e-12);
            prop_assert!(q1 == 0.0 || q1.signum() == x1.signum());
            if x1.abs() <= x2.abs() {
                prop_assert!(q1.abs() <= q2.abs() + 1e-10);
            }
            // nonexpansiveness
            prop_assert!((q1 - q2).abs() <= (x1 - x2).abs() + 1e-10);
        }

        #[test]
        fn optimality_against_random_points(
            x in -10.0..10.0f64,
            k in 0.0..5.0f64,
            p in 1.0..2.0f64,
            us in proptest::collection::vec(-12.0..12.0f64, 20),
        ) {
            let params = ProxParams::new(k, p).unwrap();
            let q = prox_lp_scalar(x, params);
            let f = |u: f64| k * u.abs().powf(p) + 0.5 * (u - x) * (u - x);
            let fq = f(q);
            for u in us {
                prop_assert!(fq <= f(u) + 1e-9, "f({q})={fq} > f({u})={}", f(u));
            }
        }
    }
}
