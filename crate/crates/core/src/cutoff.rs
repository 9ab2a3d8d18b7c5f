//! Cutoff machinery: the smoothing profile `chi`, the scale `eta(t) = t e^{alpha t}`
//! and the regularized multipliers `gamma_t`, `gamma_dot_t`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{FrequencyVector, TruncationBox};

/// Quintic smoothstep: 0 on `[0,1]`, 1 on `[2, inf)`, C^2 everywhere.
pub fn chi(s: f64) -> f64 {
    if s <= 1.0 {
        0.0
    } else if s >= 2.0 {
        1.0
    } else {
        let u = s - 1.0;
        u * u * u * (u * (6.0 * u - 15.0) + 10.0)
    }
}

pub fn chi_prime(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        0.0
    } else {
        let u = s - 1.0;
        30.0 * u * u * (u - 1.0) * (u - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChiProfile {
    #[default]
    Quintic,
}

/// End of the flow: a fixed time or the first time the box is frozen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EndTime {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for EndTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EndTime::Auto => s.serialize_str("auto"),
            EndTime::Fixed(t) => s.serialize_f64(*t),
        }
    }
}

impl<'de> Deserialize<'de> for EndTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => Ok(EndTime::Fixed(t)),
            Raw::Str(s) if s == "auto" => Ok(EndTime::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("t_end must be a number or \"auto\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSchedule {
    pub alpha: f64,
    #[serde(default)]
    pub chi: ChiProfile,
    #[serde(default)]
    pub t_end: EndTime,
}

impl Default for CutoffSchedule {
    fn default() -> Self {
        CutoffSchedule { alpha: 0.2, chi: ChiProfile::Quintic, t_end: EndTime::Auto }
    }
}

impl CutoffSchedule {
    pub fn new(alpha: f64) -> Result<Self> {
        let s = CutoffSchedule { alpha, ..Default::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn with_end(mut self, t_end: EndTime) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.25) {
            return Err(Error::Config(format!("alpha = {} must lie in (0, 1/4)", self.alpha)));
        }
        if let EndTime::Fixed(t) = self.t_end {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("t_end = {t} must be finite and nonnegative")));
            }
        }
        Ok(())
    }

    pub fn eta(&self, t: f64) -> f64 {
        t * (self.alpha * t).exp()
    }

    pub fn eta_prime(&self, t: f64) -> f64 {
        (1.0 + self.alpha * t) * (self.alpha * t).exp()
    }

    /// The time `t >= 0` with `eta(t) = e`.
    pub fn eta_inverse(&self, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        // f(t) = eta(t) - e is convex and increasing, so Newton from the right is monotone.
        let mut t = e;
        if e > 1.0 {
            let c = e.ln() / self.alpha;
            if c >= 1.0 {
                t = t.min(c);
            }
        }
        for _ in 0..200 {
            let step = (self.eta(t) - e) / self.eta_prime(t);
            t -= step;
            if step.abs() <= 4.0 * f64::EPSILON * t.max(1e-300) {
                break;
            }
        }
        t
    }

    pub fn gamma(&self, t: f64, kappa: f64) -> f64 {
        if kappa == 0.0 {
            return 0.0;
        }
        chi(self.eta(t) * kappa.abs()) / (kappa * kappa)
    }

    pub fn gamma_dot(&self, t: f64, kappa: f64) -> f64 {
        if kappa == 0.0 {
            return 0.0;
        }
        let k = kappa.abs();
        chi_prime(self.eta(t) * k) * self.eta_prime(t) / k
    }

    /// `d gamma / d eta` at scale `eta`.
    pub fn gamma_dot_eta(eta: f64, kappa: f64) -> f64 {
        if kappa == 0.0 {
            return 0.0;
        }
        let k = kappa.abs();
        chi_prime(eta * k) / k
    }

    /// First time at which `gamma_dot` vanishes on every nonzero box mode.
    pub fn freeze_time(&self, omega: &FrequencyVector, bx: &TruncationBox) -> Result<f64> {
        let min = min_divisor(omega, bx)?;
        Ok(self.eta_inverse(2.0 / min))
    }

    /// Resolves `t_end`; `Auto` means the freeze time plus one step `h`.
    pub fn resolve_end(&self, omega: &FrequencyVector, bx: &TruncationBox, h: f64) -> Result<f64> {
        match self.t_end {
            EndTime::Fixed(t) => Ok(t),
            EndTime::Auto => Ok(self.freeze_time(omega, bx)? + h),
        }
    }
}

/// Smallest `|omega . q|` over nonzero box modes; a resonance is an error.
pub fn min_divisor(omega: &FrequencyVector, bx: &TruncationBox) -> Result<f64> {
    let mut min = f64::INFINITY;
    for i in (0..bx.len()).filter(|&i| i != bx.zero_index()) {
        let w = omega.dot(bx.coords(i)).abs();
        if w == 0.0 {
            return Err(Error::Resonance(bx.coords(i).to_vec()));
        }
        min = min.min(w);
    }
    if min.is_finite() {
        Ok(min)
    } else {
        Err(Error::EmptyBox)
    }
}

/// Scales `eta` at which `eta |kappa|` crosses 1 or 2, sorted and deduplicated.
pub fn eta_breakpoints(kappas: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = kappas
        .into_iter()
        .map(f64::abs)
        .filter(|&k| k > 0.0)
        .flat_map(|k| [1.0 / k, 2.0 / k])
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * b.abs());
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn chi_profile_values() {
        assert_eq!(chi(0.5), 0.0);
        assert_eq!(chi_prime(0.5), 0.0);
        assert_eq!(chi(3.0), 1.0);
        assert_eq!(chi_prime(3.0), 0.0);
        assert_relative_eq!(chi(1.5), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn chi_prime_matches_difference_quotient() {
        for i in 1..100 {
            let s = 1.0 + i as f64 / 100.0;
            let h = 1e-6;
            let fd = (chi(s + h) - chi(s - h)) / (2.0 * h);
            assert!((fd - chi_prime(s)).abs() < 1e-8);
        }
    }

    #[test]
    fn gamma_support_and_evenness() {
        let s = CutoffSchedule::default();
        let t = s.eta_inverse(0.9);
        assert_eq!(s.gamma(t, 1.0), 0.0);
        assert_eq!(s.gamma_dot(t, 1.0), 0.0);
        let t = s.eta_inverse(2.5);
        assert_relative_eq!(s.gamma(t, 1.0), 1.0, epsilon = 1e-15);
        assert_eq!(s.gamma_dot(t, 1.0), 0.0);
        for k in [0.1, 0.37, 1.3] {
            for t in [0.5, 2.0, 7.0] {
                assert_eq!(s.gamma(t, k), s.gamma(t, -k));
                assert_eq!(s.gamma_dot(t, k), s.gamma_dot(t, -k));
            }
        }
    }

    #[test]
    fn eta_inverse_round_trips() {
        let s = CutoffSchedule::default();
        for e in [1e-6, 0.3, 1.0, 5.0, 40.0, 3e3] {
            let t = s.eta_inverse(e);
            assert_relative_eq!(s.eta(t), e, max_relative = 1e-14);
        }
    }

    #[test]
    fn rejects_alpha_outside_range() {
        assert!(CutoffSchedule::new(0.3).is_err());
        assert!(CutoffSchedule::new(0.0).is_err());
        assert!(CutoffSchedule::new(0.2).is_ok());
    }

    #[test]
    fn end_time_serde() {
        let s: CutoffSchedule = serde_json::from_str(r#"{"alpha":0.2,"t_end":"auto"}"#).unwrap();
        assert_eq!(s.t_end, EndTime::Auto);
        let s: CutoffSchedule = serde_json::from_str(r#"{"alpha":0.2,"t_end":3.5}"#).unwrap();
        assert_eq!(s.t_end, EndTime::Fixed(3.5));
    }
}
