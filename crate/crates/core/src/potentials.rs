//! Composite scalar potential: a supercritical Sauter step at `x = 0` plus a
//! control step at `x = -d` driven by a time envelope.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::grid::SpatialGrid;

/// Sauter step `[1 + tanh(x/w)] / 2`.
pub fn sauter(x: f64, w: f64) -> f64 {
    0.5 * (1.0 + (x / w).tanh())
}

/// Derivative of [`sauter`] with respect to `x`.
pub fn sauter_slope(x: f64, w: f64) -> f64 {
    let ch = (x / w).cosh();
    0.5 / (w * ch * ch)
}

fn gaussian(t: f64, center: f64, sigma: f64) -> f64 {
    let z = (t - center) / sigma;
    (-0.5 * z * z).exp()
}

/// Time dependence of the control field, bounded by one in magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    /// Static control; `value = +1` same direction as the supercritical
    /// field, `-1` opposite, `0` switched off.
    Constant { value: f64 },
    /// `sign * sin(omega t + phase)`.
    Sinusoid {
        omega: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default = "unit")]
        sign: f64,
    },
    /// `sign * exp(-(t - center)^2 / 2 sigma^2) * sin(omega t)`.
    GaussSin {
        center: f64,
        sigma: f64,
        omega: f64,
        sign: f64,
    },
    /// `sign1 * g(t - first) + sign2 * g(t - second)`, clamped to `[-1, 1]`.
    DoubleGauss {
        first: f64,
        second: f64,
        sigma: f64,
        sign1: f64,
        sign2: f64,
    },
    /// Piecewise-linear table of `(t, value)` pairs, held flat outside.
    Table { points: Vec<[f64; 2]> },
}

fn unit() -> f64 {
    1.0
}

impl Envelope {
    /// `f(t) = -sin(omega t)`.
    pub fn negative_sine(omega: f64) -> Self {
        Envelope::Sinusoid {
            omega,
            phase: 0.0,
            sign: -1.0,
        }
    }

    /// `f(t) = -exp(-(t - 0.015)^2 / 2 sigma^2) sin(omega t)`.
    pub fn gauss_modulated_sine(omega: f64, sigma: f64) -> Self {
        Envelope::GaussSin {
            center: 0.015,
            sigma,
            omega,
            sign: -1.0,
        }
    }

    /// Two same-sign Gaussians at `t = 0.01` and `t = 0.02`.
    pub fn identical_pulses(sigma: f64) -> Self {
        Envelope::DoubleGauss {
            first: 0.01,
            second: 0.02,
            sigma,
            sign1: -1.0,
            sign2: -1.0,
        }
    }

    /// Opposite-sign Gaussians at `t = 0.006` and `t = 0.024`.
    pub fn alternating_pulses(sigma: f64) -> Self {
        Envelope::DoubleGauss {
            first: 0.006,
            second: 0.024,
            sigma,
            sign1: -1.0,
            sign2: 1.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Envelope::Constant { value } => value,
            Envelope::Sinusoid { omega, phase, sign } => sign * (omega * t + phase).sin(),
            Envelope::GaussSin {
                center,
                sigma,
                omega,
                sign,
            } => sign * gaussian(t, center, sigma) * (omega * t).sin(),
            Envelope::DoubleGauss {
                first,
                second,
                sigma,
                sign1,
                sign2,
            } => (sign1 * gaussian(t, first, sigma) + sign2 * gaussian(t, second, sigma))
                .clamp(-1.0, 1.0),
            Envelope::Table { ref points } => table_value(points, t),
        }
    }

    /// Is the envelope time-independent?
    pub fn is_static(&self) -> bool {
        match self {
            Envelope::Constant { .. } => true,
            Envelope::Sinusoid { omega, .. } => *omega == 0.0,
            Envelope::Table { points } => points.len() <= 1,
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(param(name, "must be finite"))
            }
        };
        let sign = |name: &'static str, v: f64| {
            if v.abs() <= 1.0 {
                Ok(())
            } else {
                Err(param(name, format!("|{v}| exceeds 1")))
            }
        };
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(param(name, "must be positive"))
            }
        };
        match *self {
            Envelope::Constant { value } => sign("value", value),
            Envelope::Sinusoid { omega, phase, sign: s } => {
                finite("omega", omega)?;
                finite("phase", phase)?;
                sign("sign", s)
            }
            Envelope::GaussSin {
                center,
                sigma,
                omega,
                sign: s,
            } => {
                finite("center", center)?;
                positive("sigma", sigma)?;
                finite("omega", omega)?;
                sign("sign", s)
            }
            Envelope::DoubleGauss {
                first,
                second,
                sigma,
                sign1,
                sign2,
            } => {
                finite("first", first)?;
                finite("second", second)?;
                positive("sigma", sigma)?;
                sign("sign1", sign1)?;
                sign("sign2", sign2)
            }
            Envelope::Table { ref points } => {
                if points.is_empty() {
                    return Err(param("points", "table is empty"));
                }
                for w in points.windows(2) {
                    if !(w[1][0] > w[0][0]) {
                        return Err(param("points", "times must be strictly increasing"));
                    }
                }
                for p in points {
                    finite("points", p[0])?;
                    sign("points", p[1])?;
                }
                Ok(())
            }
        }
    }
}

fn table_value(points: &[[f64; 2]], t: f64) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    if t <= first[0] {
        return first[1];
    }
    let last = points[points.len() - 1];
    if t >= last[0] {
        return last[1];
    }
    let i = points.partition_point(|p| p[0] <= t);
    let (a, b) = (points[i - 1], points[i]);
    a[1] + (b[1] - a[1]) * (t - a[0]) / (b[0] - a[0])
}

/// Free function form of [`Envelope::value`].
pub fn envelope_value(env: &Envelope, t: f64) -> f64 {
    env.value(t)
}

/// Turn-on profile of the supercritical step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Ramp {
    /// Field present at full strength from `t = 0`.
    #[default]
    Instant,
    /// Rising half-Gaussian `exp(-(t - center)^2 / 2 sigma^2)` for
    /// `t < center`, one afterwards.
    HalfGaussian { center: f64, sigma: f64 },
}

impl Ramp {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Ramp::Instant => 1.0,
            Ramp::HalfGaussian { center, sigma } => {
                if t >= center {
                    1.0
                } else {
                    gaussian(t, center, sigma)
                }
            }
        }
    }
}

/// Wide Sauter step near the right box edge that brings the potential back
/// to zero, removing the sharp periodic image of the supercritical step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Closure {
    pub center: f64,
    pub width: f64,
}

impl Closure {
    /// Closure centred at `3L/8` with width `L/40`.
    pub fn for_box(length: f64) -> Self {
        Self {
            center: 0.375 * length,
            width: length / 40.0,
        }
    }
}

/// Full description of `V(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    /// Supercritical step height.
    pub v1: f64,
    /// Control step height; negative for a control field opposing the
    /// supercritical one.
    pub v2: f64,
    /// Width of the supercritical Sauter step.
    pub width: f64,
    /// Width of the control step.
    pub control_width: f64,
    /// Separation between the two steps.
    pub separation: f64,
    #[serde(default = "static_envelope")]
    pub envelope: Envelope,
    #[serde(default)]
    pub ramp: Ramp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closure: Option<Closure>,
}

fn static_envelope() -> Envelope {
    Envelope::Constant { value: 1.0 }
}

impl FieldSpec {
    /// Static configuration with `control_width = width`, instant turn-on and
    /// no closure.
    pub fn new(v1: f64, v2: f64, width: f64, separation: f64) -> Self {
        Self {
            v1,
            v2,
            width,
            control_width: width,
            separation,
            envelope: Envelope::Constant { value: 1.0 },
            ramp: Ramp::Instant,
            closure: None,
        }
    }

    /// `V = 0` everywhere.
    pub fn vacuum() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn with_envelope(mut self, envelope: Envelope) -> Self {
        self.envelope = envelope;
        self
    }

    pub fn with_control_width(mut self, w: f64) -> Self {
        self.control_width = w;
        self
    }

    pub fn with_ramp(mut self, ramp: Ramp) -> Self {
        self.ramp = ramp;
        self
    }

    pub fn with_closure(mut self, closure: Option<Closure>) -> Self {
        self.closure = closure;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("v1", self.v1), ("v2", self.v2)] {
            if !v.is_finite() {
                return Err(param(name, "must be finite"));
            }
        }
        for (name, v) in [
            ("width", self.width),
            ("control_width", self.control_width),
            ("separation", self.separation),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(param(name, "must be positive"));
            }
        }
        if let Some(c) = self.closure {
            if !(c.width > 0.0 && c.width.is_finite() && c.center.is_finite()) {
                return Err(param("closure", "needs finite center and positive width"));
            }
        }
        if let Ramp::HalfGaussian { center, sigma } = self.ramp {
            if !(sigma > 0.0 && center.is_finite()) {
                return Err(param("ramp", "needs finite center and positive sigma"));
            }
        }
        self.envelope.validate()
    }

    pub fn is_static(&self) -> bool {
        self.envelope.is_static() && self.ramp == Ramp::Instant
    }

    /// Coefficient multiplying [`Self::step_profile`] at time `t`.
    pub fn step_amplitude(&self, t: f64) -> f64 {
        self.v1 * self.ramp.value(t)
    }

    /// Coefficient multiplying [`Self::control_profile`] at time `t`.
    pub fn control_amplitude(&self, t: f64) -> f64 {
        self.v2 * self.envelope.value(t)
    }

    fn closure_profile(&self, x: f64) -> f64 {
        self.closure.map_or(0.0, |c| sauter(x - c.center, c.width))
    }

    fn closure_slope(&self, x: f64) -> f64 {
        self.closure.map_or(0.0, |c| sauter_slope(x - c.center, c.width))
    }

    /// Spatial shape of the supercritical term.
    pub fn step_profile(&self, x: f64) -> f64 {
        sauter(x, self.width) - self.closure_profile(x)
    }

    /// Spatial shape of the control term.
    pub fn control_profile(&self, x: f64) -> f64 {
        sauter(x + self.separation, self.control_width) - self.closure_profile(x)
    }

    pub fn potential_at(&self, x: f64, t: f64) -> f64 {
        self.step_amplitude(t) * self.step_profile(x)
            + self.control_amplitude(t) * self.control_profile(x)
    }

    /// Electric field `-dV/dx`.
    pub fn electric_field_at(&self, x: f64, t: f64) -> f64 {
        let closure = self.closure_slope(x);
        let step = sauter_slope(x, self.width) - closure;
        let control = sauter_slope(x + self.separation, self.control_width) - closure;
        -(self.step_amplitude(t) * step + self.control_amplitude(t) * control)
    }

    /// Spatial profiles sampled on the grid, reusable for every time step.
    pub fn profiles(&self, grid: &SpatialGrid) -> PotentialProfiles {
        let xs = grid.positions();
        PotentialProfiles {
            step: xs.iter().map(|&x| self.step_profile(x)).collect(),
            control: xs.iter().map(|&x| self.control_profile(x)).collect(),
        }
    }

    /// Resolution diagnostic: narrowest Sauter width divided by `dx`.
    pub fn resolution(&self, grid: &SpatialGrid) -> f64 {
        grid.resolution_ratio(self.width.min(self.control_width))
    }
}

/// Grid samples of the two spatial shapes making up `V(x, t)`.
#[derive(Debug, Clone)]
pub struct PotentialProfiles {
    pub step: Vec<f64>,
    pub control: Vec<f64>,
}

impl PotentialProfiles {
    /// Fills `out` with `V(x_j, t)`.
    pub fn sample_into(&self, spec: &FieldSpec, t: f64, out: &mut [f64]) {
        let a = spec.step_amplitude(t);
        let b = spec.control_amplitude(t);
        for ((o, s), c) in out.iter_mut().zip(&self.step).zip(&self.control) {
            *o = a * s + b * c;
        }
    }
}

/// `V(x_j, t)` on every grid point.
pub fn sample_potential(spec: &FieldSpec, grid: &SpatialGrid, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    spec.profiles(grid).sample_into(spec, t, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{C, C2};
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    fn paper_static(v2: f64) -> FieldSpec {
        FieldSpec::new(2.5 * C2, v2, 0.075 / C, 0.2)
    }

    #[test]
    fn sauter_values() {
        assert_eq!(sauter(0.0, 0.3), 0.5);
        assert_eq!(sauter(1e3, 0.01), 1.0);
        assert_eq!(sauter(-1e3, 0.01), 0.0);
        // (1 + tanh 1) / 2 = 0.880797077977882...
        assert!((sauter(0.7, 0.7) - 0.880_797_077_977_882_4).abs() < 1e-15);
    }

    #[test]
    fn potential_asymptotes() {
        let spec = paper_static(0.25 * C2);
        assert!((spec.potential_at(50.0, 0.0) - 2.75 * C2).abs() < 1e-9);
        assert!(spec.potential_at(-50.0, 0.0).abs() < 1e-9);
        assert!((spec.potential_at(-0.1, 0.0) - 0.25 * C2).abs() < 1e-6 * C2);
        // x = 0: half the step plus an essentially full control step
        let v0 = spec.potential_at(0.0, 0.0);
        let expect = 1.25 * C2 + 0.25 * C2 * sauter(0.2, spec.control_width);
        assert!((v0 - expect).abs() < 1e-9);
        assert!((v0 - 1.5 * C2).abs() < 1e-9 * C2);
    }

    #[test]
    fn sinusoid_is_periodic() {
        let omega = 0.1 * C2;
        let spec = paper_static(0.25 * C2).with_envelope(Envelope::Sinusoid {
            omega,
            phase: 0.3,
            sign: 1.0,
        });
        let period = 2.0 * PI / omega;
        for &x in &[-0.2, 0.0, 0.13] {
            let a = spec.potential_at(x, 0.0);
            let b = spec.potential_at(x, period);
            assert!((a - b).abs() < 1e-9 * C2);
        }
        let g = build_grid(6.0, 256).unwrap();
        let a = sample_potential(&spec, &g, 0.001);
        let b = sample_potential(&spec, &g, 0.001 + period);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9 * C2);
        }
    }

    #[test]
    fn field_peaks() {
        let spec = paper_static(0.25 * C2);
        let e0 = spec.electric_field_at(0.0, 0.0);
        assert!((e0 / (-spec.v1 / (2.0 * spec.width)) - 1.0).abs() < 1e-12);
        let ed = spec.electric_field_at(-0.2, 0.0);
        assert!((ed / (-spec.v2 / (2.0 * spec.control_width)) - 1.0).abs() < 1e-12);
    }

    fn check_field_matches_gradient(spec: &FieldSpec, t: f64) {
        // central difference, step well below every width
        let w = spec.width.min(spec.control_width);
        let h = 1e-4 * w;
        for i in 0..400 {
            let x = -0.6 + i as f64 * 0.003 + 0.1 * w;
            let fd = -(spec.potential_at(x + h, t) - spec.potential_at(x - h, t)) / (2.0 * h);
            let e = spec.electric_field_at(x, t);
            let scale = (spec.v1.abs() + spec.v2.abs()) / (2.0 * w);
            assert!((fd - e).abs() <= 1e-8 * scale.max(e.abs()), "x={x} fd={fd} e={e}");
        }
    }

    #[test]
    fn field_is_minus_gradient() {
        let base = paper_static(0.25 * C2)
            .with_control_width(0.6 / C)
            .with_closure(Some(Closure::for_box(1.2)));
        let envs = [
            Envelope::Constant { value: -1.0 },
            Envelope::negative_sine(0.1 * C2),
            Envelope::gauss_modulated_sine(0.1 * C2, 0.005),
            Envelope::identical_pulses(0.001),
            Envelope::alternating_pulses(0.002),
            Envelope::Table {
                points: vec![[0.0, 0.0], [0.01, 1.0], [0.02, -0.5]],
            },
        ];
        for env in envs {
            let spec = base.clone().with_envelope(env);
            for &t in &[0.0, 0.0042, 0.0101, 0.017] {
                check_field_matches_gradient(&spec, t);
            }
        }
    }

    #[test]
    fn paper_envelope_forms() {
        let omega = 0.1 * C2;
        let f1 = Envelope::negative_sine(omega);
        assert_eq!(f1.value(0.0), 0.0);
        assert!((f1.value(0.001) + (omega * 0.001).sin()).abs() < 1e-15);
        let f3 = Envelope::identical_pulses(0.001);
        assert!((f3.value(0.01) + 1.0).abs() < 1e-15);
        let f4 = Envelope::alternating_pulses(0.002);
        assert!(f4.value(0.015).abs() < 1e-15);
        assert!((f4.value(0.006) + 1.0).abs() < 1e-12);
        assert!((f4.value(0.024) - 1.0).abs() < 1e-12);
        let f2 = Envelope::gauss_modulated_sine(omega, 0.005);
        let t = 0.0151;
        let expect = -(-(t - 0.015f64).powi(2) / (2.0 * 0.005f64.powi(2))).exp() * (omega * t).sin();
        assert!((f2.value(t) - expect).abs() < 1e-15);
    }

    #[test]
    fn envelopes_are_bounded() {
        let envs = [
            Envelope::negative_sine(0.1 * C2),
            Envelope::gauss_modulated_sine(2.0 * C2, 0.005),
            Envelope::identical_pulses(0.001),
            Envelope::DoubleGauss {
                first: 0.01,
                second: 0.0101,
                sigma: 0.01,
                sign1: 1.0,
                sign2: 1.0,
            },
            Envelope::alternating_pulses(0.002),
        ];
        for env in envs {
            for i in 0..30_000 {
                let t = i as f64 * 1e-6;
                assert!(env.value(t).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn limiting_region_heights() {
        let spec = paper_static(0.25 * C2);
        let w = spec.width;
        assert!(spec.potential_at(-0.2 - 40.0 * w, 0.0).abs() < 1e-20 * C2 + 1e-9);
        assert!((spec.potential_at(-0.1, 0.0) - 0.25 * C2).abs() < 1e-9 * C2);
        assert!((spec.potential_at(40.0 * w, 0.0) - 2.75 * C2).abs() < 1e-9 * C2);
    }

    #[test]
    fn sampled_potential_is_bounded() {
        let g = build_grid(6.0, 512).unwrap();
        let spec = paper_static(-0.25 * C2);
        let v = sample_potential(&spec, &g, 0.0);
        let hi = spec.v1 + 0.0f64.max(spec.v2);
        let lo = 0.0f64.min(spec.v2);
        assert!(v.iter().all(|&x| x >= lo - 1e-9 && x <= hi + 1e-9));
        let off = paper_static(0.25 * C2).with_envelope(Envelope::Constant { value: 0.0 });
        let v = sample_potential(&off, &g, 0.0);
        for (j, &x) in v.iter().enumerate() {
            assert_eq!(x, off.v1 * sauter(g.x(j), off.width));
        }
        for (j, &x) in sample_potential(&spec, &g, 0.01).iter().enumerate() {
            assert_eq!(x, spec.potential_at(g.x(j), 0.01));
        }
    }

    #[test]
    fn closure_returns_to_zero_at_box_edge() {
        let g = build_grid(6.0, 2048).unwrap();
        let spec = paper_static(0.25 * C2).with_closure(Some(Closure::for_box(6.0)));
        let v = sample_potential(&spec, &g, 0.0);
        assert!(v[0].abs() < 1e-6 * C2);
        assert!(v[g.len() - 1].abs() < 1e-3 * C2);
        // flat region III between the step and the closure
        let j = ((1.0 + 3.0) / g.dx()) as usize;
        assert!((v[j] - 2.75 * C2).abs() < 1e-3 * C2);
    }

    #[test]
    fn validation() {
        assert!(paper_static(0.25 * C2).validate().is_ok());
        let mut bad = paper_static(0.25 * C2);
        bad.separation = 0.0;
        assert!(bad.validate().is_err());
        let bad = paper_static(0.25 * C2).with_envelope(Envelope::Constant { value: 2.0 });
        assert!(bad.validate().is_err());
        let bad = paper_static(0.25 * C2).with_envelope(Envelope::Table {
            points: vec![[0.0, 0.0], [0.0, 1.0]],
        });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn half_gaussian_ramp() {
        let r = Ramp::HalfGaussian {
            center: 0.002,
            sigma: 0.0005,
        };
        assert_eq!(r.value(0.003), 1.0);
        assert_eq!(r.value(0.002), 1.0);
        assert!(r.value(0.0) < 1e-3);
        let mut prev = 0.0;
        for i in 0..100 {
            let v = r.value(i as f64 * 3e-5);
            assert!(v >= prev);
            prev = v;
        }
    }
}
