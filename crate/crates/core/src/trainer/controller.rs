//! Adaptive penalty coefficients.
//!
//! After each local iteration the measured step sizes are compared against
//! the targets and the coefficients move by a factor of 2 when the
//! measurement leaves the deadband `[target / 1.1, target * 1.1]`:
//!
//! * local KL `d` vs `d_local`: `d < d_local/1.1 -> c2 /= 2`,
//!   `d > d_local*1.1 -> c2 *= 2`;
//! * global `sqrt(0.5 KL)` vs `d_global`: same rules for c1.
//!
//! Inequalities are strict; a measurement exactly on the band edge leaves
//! the coefficient unchanged.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyController {
    pub c1: f64,
    pub c2: f64,
    pub d_local: f64,
    pub d_global: f64,
}

pub const BAND: f64 = 1.1;
pub const SCALE: f64 = 2.0;

impl PenaltyController {
    pub fn new(c1: f64, c2: f64, d_local: f64, d_global: f64) -> Self {
        Self { c1, c2, d_local, d_global }
    }

    /// Applies both three-phase rules to the measured divergences.
    pub fn adapt(&self, measured_local_kl: f64, measured_global_sqrtkl: f64) -> Self {
        let mut next = *self;
        if measured_local_kl < self.d_local / BAND {
            next.c2 /= SCALE;
        } else if measured_local_kl > self.d_local * BAND {
            next.c2 *= SCALE;
        }
        if measured_global_sqrtkl < self.d_global / BAND {
            next.c1 /= SCALE;
        } else if measured_global_sqrtkl > self.d_global * BAND {
            next.c1 *= SCALE;
        }
        next
    }
}
