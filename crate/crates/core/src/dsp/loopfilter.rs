//! Proportional-integral gains for second-order tracking loops.

/// Gains for a loop updated once every `update_period` symbols.
///
/// `kp` multiplies the detector output directly; `ki` is the per-update
/// increment of the integrator, which the caller spreads over the
/// `update_period` symbols of the next block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopGains {
    pub kp: f64,
    pub ki: f64,
}

impl LoopGains {
    /// `bandwidth` is the normalized noise bandwidth in cycles per symbol,
    /// `detector_gain` the slope of the error detector around lock.
    pub fn design(bandwidth: f64, damping: f64, update_period: usize, detector_gain: f64) -> Self {
        let bt = bandwidth * update_period as f64;
        let theta = bt / (damping + 1.0 / (4.0 * damping));
        let d = 1.0 + 2.0 * damping * theta + theta * theta;
        Self {
            kp: 4.0 * damping * theta / (d * detector_gain),
            ki: 4.0 * theta * theta / (d * detector_gain),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gains_scale_with_bandwidth() {
        let a = LoopGains::design(1e-4, 0.707, 64, 1.0);
        let b = LoopGains::design(2e-4, 0.707, 64, 1.0);
        assert!(b.kp > a.kp && b.ki > a.ki);
        assert!(a.kp > 0.0 && a.ki > 0.0 && a.ki < a.kp);
    }

    #[test]
    fn closed_loop_tracks_a_ramp() {
        // Phase ramp of 1e-3 per update; the PI loop must settle to zero error.
        let g = LoopGains::design(0.01, 0.707, 1, 1.0);
        let (mut est, mut rate) = (0.0f64, 0.0f64);
        let mut err = 0.0;
        for n in 0..20_000 {
            let truth = 1e-3 * n as f64;
            err = truth - est;
            rate += g.ki * err;
            est += rate + g.kp * err;
        }
        assert!(err.abs() < 1e-6, "{err}");
        assert!((rate - 1e-3).abs() < 1e-6);
    }
}
