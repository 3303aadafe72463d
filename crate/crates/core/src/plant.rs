//! Averaged single-phase inverter in its own rotating frame.

use crate::droop::PowerPair;
use crate::numerics::{Poly, RationalTF};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

/// `(d, q)` components in a rotating frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DQPair {
    pub d: f64,
    pub q: f64,
}

impl DQPair {
    pub const ZERO: DQPair = DQPair { d: 0.0, q: 0.0 };

    pub fn new(d: f64, q: f64) -> Self {
        Self { d, q }
    }

    pub fn norm(&self) -> f64 {
        self.d.hypot(self.q)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.d, self.q)
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self { d: z.re, q: z.im }
    }
}

impl Add for DQPair {
    type Output = DQPair;
    fn add(self, o: DQPair) -> DQPair {
        DQPair::new(self.d + o.d, self.q + o.q)
    }
}

impl Sub for DQPair {
    type Output = DQPair;
    fn sub(self, o: DQPair) -> DQPair {
        DQPair::new(self.d - o.d, self.q - o.q)
    }
}

impl Mul<f64> for DQPair {
    type Output = DQPair;
    fn mul(self, k: f64) -> DQPair {
        DQPair::new(self.d * k, self.q * k)
    }
}

/// `d + jq = (alpha + j beta) e^{-j theta}`
pub fn dq_transform(alpha: f64, beta: f64, theta: f64) -> DQPair {
    DQPair::from_complex(Complex64::new(alpha, beta) * Complex64::from_polar(1.0, -theta))
}

/// `alpha + j beta = (d + jq) e^{j theta}`
pub fn dq_inverse(dq: DQPair, theta: f64) -> (f64, f64) {
    let z = dq.to_complex() * Complex64::from_polar(1.0, theta);
    (z.re, z.im)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverterParams {
    /// Output capacitance (F).
    pub c: f64,
    /// Filter inductance (H).
    pub l_i: f64,
    /// Inductor series resistance (ohm).
    pub r_i: f64,
    /// DC link voltage (V).
    pub v_dc: f64,
}

impl InverterParams {
    pub fn is_valid(&self) -> bool {
        [self.c, self.l_i, self.r_i, self.v_dc]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InverterState {
    pub i_l: DQPair,
    pub v_c: DQPair,
    /// Frame angle, unwrapped.
    pub theta1: f64,
    /// PLL filter integrator.
    pub pll_aux: f64,
}

/// Feedback-linearized current-loop inputs and the frame speed.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControlInput {
    pub u_d: f64,
    pub u_q: f64,
    pub theta_dot: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StateDerivative {
    pub di_l: DQPair,
    pub dv_c: DQPair,
    pub dtheta: f64,
}

/// Averaged dq dynamics with the rotation coupling of `i_L` absorbed into `u`.
pub fn plant_derivatives(x: &InverterState, u: &ControlInput, i_load: DQPair, p: &InverterParams) -> StateDerivative {
    let w = u.theta_dot;
    StateDerivative {
        di_l: DQPair::new(
            (u.u_d - p.r_i * x.i_l.d) / p.l_i,
            (u.u_q - p.r_i * x.i_l.q) / p.l_i,
        ),
        dv_c: DQPair::new(
            (x.i_l.d - i_load.d) / p.c + w * x.v_c.q,
            (x.i_l.q - i_load.q) / p.c - w * x.v_c.d,
        ),
        dtheta: w,
    }
}

/// Modulation indices in the rotating frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Modulation {
    pub d: f64,
    pub q: f64,
}

impl Modulation {
    pub fn magnitude(&self) -> f64 {
        self.d.hypot(self.q)
    }

    /// True when the averaged bridge cannot produce this index.
    pub fn exceeds_unit_circle(&self) -> bool {
        self.magnitude() > 1.0
    }
}

/// Recovers `(m^d, m^q)` from the linearized inputs.
pub fn modulation_from_u(u: &ControlInput, x: &InverterState, p: &InverterParams) -> Modulation {
    let li_w = p.l_i * u.theta_dot;
    Modulation {
        d: (u.u_d - li_w * x.i_l.q + x.v_c.d) / p.v_dc,
        q: (u.u_q + li_w * x.i_l.d + x.v_c.q) / p.v_dc,
    }
}

/// Inverse of [`modulation_from_u`].
pub fn u_from_modulation(m: &Modulation, theta_dot: f64, x: &InverterState, p: &InverterParams) -> ControlInput {
    let li_w = p.l_i * theta_dot;
    ControlInput {
        u_d: m.d * p.v_dc + li_w * x.i_l.q - x.v_c.d,
        u_q: m.q * p.v_dc - li_w * x.i_l.d - x.v_c.q,
        theta_dot,
    }
}

/// Per-axis input range that keeps `m^d, m^q` within `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaturationBounds {
    pub lo_d: f64,
    pub hi_d: f64,
    pub lo_q: f64,
    pub hi_q: f64,
}

impl SaturationBounds {
    /// Clamps `u` into the bounds; the flag reports whether anything moved.
    pub fn clamp(&self, u: &ControlInput) -> (ControlInput, bool) {
        let d = u.u_d.clamp(self.lo_d, self.hi_d);
        let q = u.u_q.clamp(self.lo_q, self.hi_q);
        let hit = d != u.u_d || q != u.u_q;
        (
            ControlInput {
                u_d: d,
                u_q: q,
                theta_dot: u.theta_dot,
            },
            hit,
        )
    }

    pub fn contains_zero(&self) -> bool {
        self.lo_d < 0.0 && self.hi_d > 0.0 && self.lo_q < 0.0 && self.hi_q > 0.0
    }
}

pub fn saturation_bounds(x: &InverterState, theta_dot: f64, p: &InverterParams) -> SaturationBounds {
    let li_w = p.l_i * theta_dot;
    let off_d = -x.v_c.d + li_w * x.i_l.q;
    let off_q = -x.v_c.q - li_w * x.i_l.d;
    SaturationBounds {
        lo_d: -p.v_dc + off_d,
        hi_d: p.v_dc + off_d,
        lo_q: -p.v_dc + off_q,
        hi_q: p.v_dc + off_q,
    }
}

/// `G_c = 1 / (L_i s + R_i)`
pub fn current_plant(p: &InverterParams) -> RationalTF {
    RationalTF::from_polys(Poly::one(), Poly::new(vec![p.r_i, p.l_i])).expect("positive inductance")
}

/// `P = v^d i^d + v^q i^q`, `Q = v^q i^d - v^d i^q`.
pub fn instantaneous_power(v_c: DQPair, i: DQPair) -> PowerPair {
    PowerPair {
        p: v_c.d * i.d + v_c.q * i.q,
        q: v_c.q * i.d - v_c.d * i.q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ode::rk4_step;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inv1() -> InverterParams {
        InverterParams {
            c: 40e-6,
            l_i: 3.3e-3,
            r_i: 0.2,
            v_dc: 250.0,
        }
    }

    #[test]
    fn transform_basics() {
        assert_eq!(dq_transform(0.3, -0.7, 0.0), DQPair::new(0.3, -0.7));
        let th: f64 = 1.234;
        let dq = dq_transform(th.cos(), th.sin(), th);
        assert!((dq.d - 1.0).abs() < 1e-15 && dq.q.abs() < 1e-15);
    }

    #[test]
    fn transform_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (a, b, th): (f64, f64, f64) = (rng.gen_range(-300.0..300.0), rng.gen_range(-300.0..300.0), rng.gen_range(-10.0..10.0));
            let dq = dq_transform(a, b, th);
            let (a2, b2) = dq_inverse(dq, th);
            assert!((a - a2).abs() < 1e-14 * 300.0 && (b - b2).abs() < 1e-14 * 300.0);
            assert!((dq.norm() - a.hypot(b)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_state_zero_derivative() {
        let d = plant_derivatives(&InverterState::default(), &ControlInput::default(), DQPair::ZERO, &inv1());
        assert_eq!(d, StateDerivative::default());
    }

    #[test]
    fn inductor_slope() {
        let u = ControlInput { u_d: 1.0, ..Default::default() };
        let d = plant_derivatives(&InverterState::default(), &u, DQPair::ZERO, &inv1());
        assert!((d.di_l.d - 303.030303).abs() < 1e-5);
    }

    #[test]
    fn capacitor_rotation_coupling() {
        let x = InverterState {
            v_c: DQPair::new(100.0, 0.0),
            ..Default::default()
        };
        let u = ControlInput { theta_dot: 377.0, ..Default::default() };
        let d = plant_derivatives(&x, &u, DQPair::ZERO, &inv1());
        assert!((d.dv_c.q + 37700.0).abs() < 1e-9);
    }

    #[test]
    fn modulation_examples() {
        let p = inv1();
        let m = modulation_from_u(&ControlInput::default(), &InverterState::default(), &p);
        assert_eq!(m, Modulation::default());
        let x = InverterState {
            v_c: DQPair::new(170.0, 0.0),
            ..Default::default()
        };
        let m = modulation_from_u(&ControlInput::default(), &x, &p);
        assert!((m.d - 0.68).abs() < 1e-15 && m.q == 0.0);
        assert!(!m.exceeds_unit_circle());
    }

    #[test]
    fn bounds_examples() {
        let p = inv1();
        let b = saturation_bounds(&InverterState::default(), 377.0, &p);
        assert_eq!((b.lo_d, b.hi_d, b.lo_q, b.hi_q), (-250.0, 250.0, -250.0, 250.0));
        let x = InverterState {
            v_c: DQPair::new(170.0, 0.0),
            ..Default::default()
        };
        let b = saturation_bounds(&x, 377.0, &p);
        assert_eq!((b.lo_d, b.hi_d), (-420.0, 80.0));
        assert!(b.contains_zero());
        let (u, hit) = b.clamp(&ControlInput { u_d: 100.0, u_q: -10.0, theta_dot: 377.0 });
        assert!(hit && u.u_d == 80.0 && u.u_q == -10.0);
    }

    #[test]
    fn current_plant_values() {
        let g = current_plant(&inv1());
        assert!((g.dc_gain().unwrap() - 5.0).abs() < 1e-12);
        let pole = g.poles()[0];
        assert!((pole.re + 60.60606060606).abs() < 1e-6 && pole.im == 0.0);
        assert!(g.magnitude(1e9).unwrap() < 1e-6);
    }

    #[test]
    fn power_examples() {
        let p = instantaneous_power(DQPair::new(1.0, 0.0), DQPair::new(1.0, 0.0));
        assert_eq!((p.p, p.q), (1.0, 0.0));
        let p = instantaneous_power(DQPair::new(170.0, 0.0), DQPair::new(100.0, -10.0));
        assert_eq!((p.p, p.q), (17000.0, 1700.0));
        let p = instantaneous_power(DQPair::ZERO, DQPair::new(3.0, 4.0));
        assert_eq!((p.p, p.q), (0.0, 0.0));
    }

    fn pack(x: &InverterState) -> [f64; 4] {
        [x.i_l.d, x.i_l.q, x.v_c.d, x.v_c.q]
    }

    fn unpack(v: &[f64]) -> InverterState {
        InverterState {
            i_l: DQPair::new(v[0], v[1]),
            v_c: DQPair::new(v[2], v[3]),
            ..Default::default()
        }
    }

    #[test]
    fn lossless_energy_conserved() {
        let p = InverterParams { r_i: 1e-300, ..inv1() };
        let w = 377.0;
        let mut x = [10.0, -4.0, 150.0, 20.0];
        let energy = |v: &[f64]| 0.5 * p.l_i * (v[0] * v[0] + v[1] * v[1]) + 0.5 * p.c * (v[2] * v[2] + v[3] * v[3]);
        let e0 = energy(&x);
        let mut f = |_: f64, v: &[f64], dv: &mut [f64]| {
            let s = unpack(v);
            // open bridge: m = 0, rotation coupling kept
            let u = u_from_modulation(&Modulation::default(), w, &s, &p);
            let d = plant_derivatives(&s, &u, DQPair::ZERO, &p);
            dv[0] = d.di_l.d;
            dv[1] = d.di_l.q;
            dv[2] = d.dv_c.d;
            dv[3] = d.dv_c.q;
        };
        for k in 0..10_000 {
            rk4_step(&mut f, k as f64 * 1e-6, &mut x, 1e-6).unwrap();
        }
        assert!((energy(&x) - e0).abs() / e0 < 1e-6);
    }

    #[test]
    fn decoupled_axes_match_current_plant() {
        // identical u on both axes gives identical, first-order current responses
        let p = inv1();
        let dt = 1e-5;
        let mut x = pack(&InverterState::default());
        let mut y = [0.0];
        let mut f = |_: f64, v: &[f64], dv: &mut [f64]| {
            let s = unpack(v);
            let u = ControlInput { u_d: 2.0, u_q: 2.0, theta_dot: 377.0 };
            let d = plant_derivatives(&s, &u, DQPair::ZERO, &p);
            dv.copy_from_slice(&[d.di_l.d, d.di_l.q, d.dv_c.d, d.dv_c.q]);
        };
        let ss = crate::numerics::tf_to_ss(&current_plant(&p)).unwrap();
        for k in 0..2000 {
            rk4_step(&mut f, k as f64 * dt, &mut x, dt).unwrap();
            rk4_step(|_, v, dv| dv[0] = ss.a[(0, 0)] * v[0] + ss.b[(0, 0)] * 2.0, 0.0, &mut y, dt).unwrap();
            let out = ss.c[(0, 0)] * y[0];
            assert_eq!(x[0], x[1]);
            assert!((x[0] - out).abs() <= 1e-9 * out.abs().max(1e-9));
        }
    }

    proptest! {
        #[test]
        fn modulation_round_trip(
            id in -200.0f64..200.0, iq in -200.0f64..200.0,
            vd in -300.0f64..300.0, vq in -300.0f64..300.0,
            ud in -500.0f64..500.0, uq in -500.0f64..500.0, w in 300.0f64..450.0,
        ) {
            let p = inv1();
            let x = InverterState { i_l: DQPair::new(id, iq), v_c: DQPair::new(vd, vq), ..Default::default() };
            let u = ControlInput { u_d: ud, u_q: uq, theta_dot: w };
            let m = modulation_from_u(&u, &x, &p);
            let back = u_from_modulation(&m, w, &x, &p);
            prop_assert!((back.u_d - ud).abs() < 1e-12 * 1000.0);
            prop_assert!((back.u_q - uq).abs() < 1e-12 * 1000.0);
            let b = saturation_bounds(&x, w, &p);
            let inside = m.d.abs() <= 1.0 && m.q.abs() <= 1.0;
            let in_bounds = ud >= b.lo_d && ud <= b.hi_d && uq >= b.lo_q && uq <= b.hi_q;
            prop_assert_eq!(inside, in_bounds);
        }
    }
}
