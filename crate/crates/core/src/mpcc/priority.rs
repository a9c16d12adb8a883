use super::config::{PrioritySettings, Weights};

/// Weights with obstacle avoidance ranked above tracking.
pub fn prioritized_weights(w: &Weights, p: &PrioritySettings) -> Weights {
    Weights {
        e_obs: w.e_obs * p.obstacle_multiplier,
        e_edg: w.e_edg * p.obstacle_multiplier,
        e_con: w.e_con * p.tracking_multiplier,
        e_vel: w.e_vel * p.tracking_multiplier,
        ..*w
    }
}

/// Hysteresis switch for collision-avoidance prioritization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PrioritySwitch {
    active: bool,
}

impl PrioritySwitch {
    pub fn is_active(&self) -> bool {
        self.active
    }

    /// Updates the switch from the minimum predicted clearance and returns
    /// whether prioritization is active.
    pub fn update(&mut self, clearance: f64, p: &PrioritySettings) -> bool {
        if self.active {
            if clearance > p.activate_below + p.hysteresis {
                self.active = false;
            }
        } else if clearance < p.activate_below {
            self.active = true;
        }
        self.active
    }
}

/// Weights to use for a cycle given the predicted clearance.
pub fn collision_priority_weights(
    w: &Weights,
    p: &PrioritySettings,
    switch: &mut PrioritySwitch,
    min_predicted_clearance: f64,
) -> Weights {
    if switch.update(min_predicted_clearance, p) {
        prioritized_weights(w, p)
    } else {
        *w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn far_obstacle_leaves_weights() {
        let w = Weights::default();
        let mut s = PrioritySwitch::default();
        assert_eq!(collision_priority_weights(&w, &PrioritySettings::default(), &mut s, 10.0), w);
    }

    #[test]
    fn close_obstacle_scales_weights() {
        let w = Weights::default();
        let mut s = PrioritySwitch::default();
        let p = collision_priority_weights(&w, &PrioritySettings::default(), &mut s, 0.5);
        assert_eq!(p.e_obs, 10.0 * w.e_obs);
        assert_eq!(p.e_edg, 10.0 * w.e_edg);
        assert!((p.e_con - 0.1 * w.e_con).abs() < 1e-15);
        assert!((p.e_vel - 0.1 * w.e_vel).abs() < 1e-15);
        assert_eq!(p.e_lag, w.e_lag);
        assert_eq!(p.d_delta, w.d_delta);
    }

    #[test]
    fn hysteresis_limits_switching() {
        let p = PrioritySettings::default();
        let mut s = PrioritySwitch::default();
        // oscillation of +-0.1 m around the activation threshold
        let trace: Vec<f64> = (0..200).map(|i| 2.0 + if i % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let mut switches = 0;
        let mut prev = s.is_active();
        for c in &trace {
            let now = s.update(*c, &p);
            switches += usize::from(now != prev);
            prev = now;
        }
        assert_eq!(switches, 1);
        // one full crossing of the band each way
        assert!(!s.update(2.6, &p));
        assert!(!s.update(2.1, &p));
        assert!(s.update(1.9, &p));
        assert!(s.update(2.4, &p));
    }
}
