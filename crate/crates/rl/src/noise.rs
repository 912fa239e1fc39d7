use rand::Rng;
use rand_distr::StandardNormal;

/// Ornstein-Uhlenbeck process, one independent channel per action.
#[derive(Debug, Clone, PartialEq)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    pub state: Vec<f64>,
}

impl OuNoise {
    pub fn new(channels: usize, theta: f64, sigma: f64) -> Self {
        Self {
            theta,
            sigma,
            state: vec![0.0; channels],
        }
    }

    pub fn reset(&mut self) {
        self.state.fill(0.0);
    }

    /// `x ← x − θx + σ·N(0, 1)`; returns the new state.
    pub fn sample<R: Rng>(&mut self, rng: &mut R) -> &[f64] {
        for x in &mut self.state {
            let g: f64 = rng.sample(StandardNormal);
            *x += -self.theta * *x + self.sigma * g;
        }
        &self.state
    }
}
