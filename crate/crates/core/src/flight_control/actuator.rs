use serde::{Deserialize, Serialize};

/// Limiter plus rate limiter, the model of the steering actuator in the
/// control pod. Also reused to shape feedforward signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorModel {
    pub max_deflection: f64,
    pub max_rate: f64,
    deflection: f64,
}

impl ActuatorModel {
    pub fn new(max_deflection: f64, max_rate: f64) -> Self {
        Self {
            max_deflection,
            max_rate,
            deflection: 0.0,
        }
    }

    pub fn deflection(&self) -> f64 {
        self.deflection
    }

    pub fn reset(&mut self, deflection: f64) {
        self.deflection = deflection.clamp(-self.max_deflection, self.max_deflection);
    }

    /// Move toward `command`, respecting both limits.
    pub fn step(&mut self, command: f64, dt: f64) -> f64 {
        let target = command.clamp(-self.max_deflection, self.max_deflection);
        let max_step = self.max_rate * dt;
        let change = (target - self.deflection).clamp(-max_step, max_step);
        self.deflection =
            (self.deflection + change).clamp(-self.max_deflection, self.max_deflection);
        self.deflection
    }

    /// Whether `command` would be cut by the deflection limit.
    pub fn saturates(&self, command: f64) -> bool {
        command.abs() >= self.max_deflection
    }
}

/// First-order low-pass, `y += (1 - exp(-dt/tau)) (x - y)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LowPass {
    pub tau: f64,
    value: f64,
}

impl LowPass {
    pub fn new(tau: f64) -> Self {
        Self { tau, value: 0.0 }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn reset(&mut self, value: f64) {
        self.value = value;
    }

    pub fn step(&mut self, input: f64, dt: f64) -> f64 {
        if self.tau <= 0.0 {
            self.value = input;
        } else {
            let alpha = 1.0 - (-dt / self.tau).exp();
            self.value += alpha * (input - self.value);
        }
        self.value
    }
}
