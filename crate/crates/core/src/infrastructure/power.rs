use crate::error::{Error, Result};

use super::check_fraction;

/// Static idle power plus a piecewise-linear dynamic power curve with one
/// breakpoint per number of busy cores.
///
/// `breakpoints[j]` is the dynamic power drawn when `j` of the `k` cores are
/// busy, so the curve has `k + 1` points and starts at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DevicePowerProfile {
    idle_w: f64,
    breakpoints: Vec<f64>,
}

impl DevicePowerProfile {
    pub fn new(idle_w: f64, breakpoints: Vec<f64>) -> Result<Self> {
        if !(idle_w.is_finite() && idle_w >= 0.0) {
            return Err(Error::InvalidTopology(format!("idle power must be >= 0, got {idle_w}")));
        }
        if breakpoints.len() < 2 {
            return Err(Error::InvalidTopology(
                "dynamic power needs at least two breakpoints (one core)".into(),
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidTopology(format!(
                "dynamic power at zero busy cores must be 0, got {}",
                breakpoints[0]
            )));
        }
        if breakpoints.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidTopology("non-finite dynamic power breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidTopology(
                "dynamic power breakpoints must be non-decreasing".into(),
            ));
        }
        Ok(Self { idle_w, breakpoints })
    }

    /// Evenly spaced breakpoints from 0 to `max_dyn_w`.
    pub fn linear(idle_w: f64, max_dyn_w: f64, cores: u32) -> Self {
        let k = f64::from(cores);
        let breakpoints = (0..=cores).map(|j| max_dyn_w * f64::from(j) / k).collect();
        Self::new(idle_w, breakpoints).expect("linear profile is well-formed")
    }

    pub fn idle_w(&self) -> f64 {
        self.idle_w
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn cores(&self) -> u32 {
        (self.breakpoints.len() - 1) as u32
    }

    /// Dynamic power at utilization `u`, interpolated on the segment
    /// `j/k <= u <= (j+1)/k`.
    pub fn dynamic_power(&self, u: f64) -> Result<f64> {
        check_fraction(u)?;
        let k = self.breakpoints.len() - 1;
        let j = ((u * k as f64).floor() as usize).min(k - 1);
        Ok(self.segment_power(j, u))
    }

    /// Line of segment `j` evaluated at `u`, without range checks.
    pub fn segment_power(&self, j: usize, u: f64) -> f64 {
        let k = (self.breakpoints.len() - 1) as f64;
        let lo = self.breakpoints[j];
        let hi = self.breakpoints[j + 1];
        let jf = j as f64;
        (hi - lo) * k * u + ((jf + 1.0) * lo - jf * hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table2() -> DevicePowerProfile {
        DevicePowerProfile::linear(98.0, 143.0, 16)
    }

    #[test]
    fn endpoints_and_first_segment() {
        let p = table2();
        assert_eq!(p.dynamic_power(0.0).unwrap(), 0.0);
        assert!((p.dynamic_power(1.0).unwrap() - 143.0).abs() < 1e-12);
        assert!((p.dynamic_power(1.0 / 16.0).unwrap() - 8.9375).abs() < 1e-12);
        assert!(p.dynamic_power(1.01).is_err());
        assert!(p.dynamic_power(-0.01).is_err());
    }

    #[test]
    fn concave_profile_interpolates_each_segment() {
        // two cores: 0 -> 60 W -> 80 W
        let p = DevicePowerProfile::new(50.0, vec![0.0, 60.0, 80.0]).unwrap();
        assert!((p.dynamic_power(0.25).unwrap() - 30.0).abs() < 1e-12);
        assert!((p.dynamic_power(0.5).unwrap() - 60.0).abs() < 1e-12);
        assert!((p.dynamic_power(0.75).unwrap() - 70.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_malformed_breakpoints() {
        assert!(DevicePowerProfile::new(98.0, vec![1.0, 2.0]).is_err());
        assert!(DevicePowerProfile::new(98.0, vec![0.0, 5.0, 4.0]).is_err());
        assert!(DevicePowerProfile::new(98.0, vec![0.0]).is_err());
        assert!(DevicePowerProfile::new(-1.0, vec![0.0, 1.0]).is_err());
    }

    fn profile_strategy() -> impl Strategy<Value = DevicePowerProfile> {
        prop::collection::vec(0.0f64..50.0, 1..20).prop_map(|steps| {
            let mut bp = vec![0.0];
            for s in steps {
                let last = *bp.last().unwrap();
                bp.push(last + s);
            }
            DevicePowerProfile::new(98.0, bp).unwrap()
        })
    }

    proptest! {
        #[test]
        fn continuous_at_every_breakpoint(p in profile_strategy()) {
            let k = p.cores() as usize;
            for j in 1..k {
                let u = j as f64 / k as f64;
                let left = p.segment_power(j - 1, u);
                let right = p.segment_power(j, u);
                prop_assert!((left - right).abs() < 1e-9);
                prop_assert!((left - p.breakpoints()[j]).abs() < 1e-9);
            }
        }

        #[test]
        fn non_decreasing(p in profile_strategy(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(p.dynamic_power(lo).unwrap() <= p.dynamic_power(hi).unwrap() + 1e-9);
        }
    }
}
