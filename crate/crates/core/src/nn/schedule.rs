//! Exponential temperature annealing for the relaxed channel.

use serde::{Deserialize, Serialize};

/// `temperature(epoch) = initial * decay^epoch`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub initial: f64,
    pub decay: f64,
}

impl TemperatureSchedule {
    pub fn new(initial: f64, decay: f64) -> Self {
        assert!(initial > 0.0, "initial temperature must be positive");
        assert!(decay > 0.0 && decay <= 1.0, "decay must lie in (0, 1]");
        TemperatureSchedule { initial, decay }
    }

    pub fn temperature_at(&self, epoch: usize) -> f64 {
        self.initial * self.decay.powi(epoch as i32)
    }
}

impl Default for TemperatureSchedule {
    fn default() -> Self {
        TemperatureSchedule::new(1.5, 0.99)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let s = TemperatureSchedule::default();
        assert_eq!(s.temperature_at(0), 1.5);
        assert!((s.temperature_at(1) - 1.485).abs() < 1e-12);
        assert!((s.temperature_at(300) - 1.5 * 0.99f64.powi(300)).abs() < 1e-15);
        assert!((s.temperature_at(300) - 0.0735).abs() < 5e-4);
    }

    #[test]
    #[should_panic(expected = "decay")]
    fn rejects_bad_decay() {
        let _ = TemperatureSchedule::new(1.5, 1.5);
    }
}
