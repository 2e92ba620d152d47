use serde::{Deserialize, Serialize};

/// Flight endurance on a full charge.
pub const FLIGHT_SECONDS: f64 = 1500.0;
/// Docked charging runs this many times faster than flight drains.
pub const RECHARGE_FACTOR: u64 = 3;
pub const CRITICAL_CHARGE: f64 = 0.2;

/// Charge counted in integer quanta of one flight tick so drain and recharge
/// are exact over any number of steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatteryState {
    quanta: u64,
    capacity: u64,
}

impl BatteryState {
    pub fn full(dt: f64) -> Self {
        let capacity = (FLIGHT_SECONDS / dt).round() as u64;
        Self {
            quanta: capacity,
            capacity,
        }
    }

    pub fn with_charge(dt: f64, charge: f64) -> Self {
        let mut b = Self::full(dt);
        b.quanta = (charge.clamp(0.0, 1.0) * b.capacity as f64).round() as u64;
        b
    }

    pub fn charge(&self) -> f64 {
        self.quanta as f64 / self.capacity as f64
    }

    pub fn capacity_minutes(&self) -> f64 {
        FLIGHT_SECONDS / 60.0
    }

    pub fn is_empty(&self) -> bool {
        self.quanta == 0
    }

    pub fn is_full(&self) -> bool {
        self.quanta == self.capacity
    }

    pub fn is_critical(&self) -> bool {
        self.charge() < CRITICAL_CHARGE
    }

    /// One tick of flight.
    pub fn drain(&mut self) {
        self.quanta = self.quanta.saturating_sub(1);
    }

    /// One tick on the charging pads.
    pub fn recharge(&mut self) {
        self.quanta = (self.quanta + RECHARGE_FACTOR).min(self.capacity);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drain_and_recharge_tick_counts() {
        let dt = 0.02;
        let mut b = BatteryState::full(dt);
        let mut ticks = 0u64;
        while !b.is_empty() {
            b.drain();
            ticks += 1;
        }
        assert_eq!(ticks, 75_000);
        let mut up = 0u64;
        while !b.is_full() {
            b.recharge();
            up += 1;
        }
        assert_eq!(up, 25_000);
        b.recharge();
        assert_eq!(b.charge(), 1.0);
    }
}
