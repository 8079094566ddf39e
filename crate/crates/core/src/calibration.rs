//! Minimum thresholds that still leave the driver room to brake.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationInputs {
    /// Driver reaction time, seconds.
    pub tr: f64,
    /// Vehicle speed when the alert fires, m/s.
    pub s_iveh: f64,
    /// Pedestrian speed, m/s.
    pub s_ped: f64,
    /// Target deceleration, m/s².
    pub decel: f64,
}

impl Default for CalibrationInputs {
    fn default() -> Self {
        Self { tr: 0.5, s_iveh: 60.0 / 3.6, s_ped: 1.6, decel: 5.0 }
    }
}

impl CalibrationInputs {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.decel > 0.0 && self.decel.is_finite()) {
            return Err(ConfigError::invalid("decel", format!("must be positive, got {}", self.decel)));
        }
        if !(self.s_ped > 0.0 && self.s_ped.is_finite()) {
            return Err(ConfigError::invalid("ped_speed", format!("must be positive, got {}", self.s_ped)));
        }
        if !(self.s_iveh >= 0.0 && self.s_iveh.is_finite()) {
            return Err(ConfigError::invalid("speed", format!("must be non-negative, got {}", self.s_iveh)));
        }
        if !(self.tr >= 0.0 && self.tr.is_finite()) {
            return Err(ConfigError::invalid("reaction", format!("must be non-negative, got {}", self.tr)));
        }
        Ok(())
    }
}

/// Reaction distance plus braking distance at `decel`: the smallest alert
/// distance that lets the vehicle stop in time.
pub fn min_alert_distance(i: &CalibrationInputs) -> Result<f64, ConfigError> {
    i.validate()?;
    Ok(i.tr * i.s_iveh + 0.5 * i.s_iveh * i.s_iveh / i.decel)
}

/// Distance a pedestrian covers while the vehicle reacts and then stops at
/// `decel`.
pub fn min_pedestrian_safety_threshold(i: &CalibrationInputs) -> Result<f64, ConfigError> {
    i.validate()?;
    Ok(i.s_ped * (i.s_iveh / i.decel + i.tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{required_deceleration, stop_before_pedestrian};
    use proptest::prelude::*;

    fn inputs(tr: f64, s: f64, s_ped: f64, decel: f64) -> CalibrationInputs {
        CalibrationInputs { tr, s_iveh: s, s_ped, decel }
    }

    #[test]
    fn reference_values() {
        let d = CalibrationInputs::default();
        assert!((min_alert_distance(&d).unwrap() - 36.11).abs() <= 0.01);
        assert!((min_pedestrian_safety_threshold(&d).unwrap() - 6.13).abs() <= 0.01);
    }

    #[test]
    fn hand_values() {
        assert!((min_alert_distance(&inputs(0.0, 10.0, 1.6, 5.0)).unwrap() - 10.0).abs() < 1e-12);
        assert!((min_pedestrian_safety_threshold(&inputs(0.0, 10.0, 1.0, 5.0)).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(min_alert_distance(&inputs(0.5, 0.0, 1.6, 5.0)).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(min_alert_distance(&inputs(0.5, 10.0, 1.6, 0.0)).is_err());
        assert!(min_pedestrian_safety_threshold(&inputs(0.5, 10.0, 0.0, 5.0)).is_err());
        assert!(min_alert_distance(&inputs(0.5, -1.0, 1.6, 5.0)).is_err());
    }

    proptest! {
        #[test]
        fn alert_distance_monotone(tr in 0.0f64..2.0, s in 0.5f64..40.0, decel in 0.5f64..10.0, ds in 0.01f64..5.0) {
            let base = min_alert_distance(&inputs(tr, s, 1.6, decel)).unwrap();
            prop_assert!(min_alert_distance(&inputs(tr, s + ds, 1.6, decel)).unwrap() > base);
            prop_assert!(min_alert_distance(&inputs(tr + ds, s, 1.6, decel)).unwrap() > base);
            prop_assert!(min_alert_distance(&inputs(tr, s, 1.6, decel + ds)).unwrap() < base);
        }

        #[test]
        fn round_trip_through_required_deceleration(tr in 0.0f64..2.0, s in 0.5f64..40.0, decel in 0.5f64..10.0) {
            let th_ad = min_alert_distance(&inputs(tr, s, 1.6, decel)).unwrap();
            let term1 = stop_before_pedestrian(s, th_ad, tr).unwrap();
            prop_assert!((term1 - decel).abs() <= 1e-9 * decel);
            let full = required_deceleration(s, th_ad, f64::INFINITY, 1.6, tr).value().unwrap();
            prop_assert!(full <= term1);
        }
    }
}
