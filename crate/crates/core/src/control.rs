use crate::hybrid::ClampEvent;
use crate::plant::State;

/// A feedback law evaluated once per integration step.
///
/// `reference` is the cart position command; implementations that regulate
/// the pendulum angle take their angle setpoint as zero.
pub trait Controller: Send {
    fn control(&mut self, reference: f64, state: &State, dt_s: f64) -> f64;

    /// Clears all internal integrator, filter and adaptation state.
    fn reset(&mut self);

    /// Adaptive-parameter clamp events recorded since the last reset.
    fn clamp_events(&self) -> &[ClampEvent] {
        &[]
    }
}

/// Always outputs zero force.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroController;

impl Controller for ZeroController {
    fn control(&mut self, _reference: f64, _state: &State, _dt_s: f64) -> f64 {
        0.0
    }

    fn reset(&mut self) {}
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn control(&mut self, reference: f64, state: &State, dt_s: f64) -> f64 {
        (**self).control(reference, state, dt_s)
    }

    fn reset(&mut self) {
        (**self).reset()
    }

    fn clamp_events(&self) -> &[ClampEvent] {
        (**self).clamp_events()
    }
}
