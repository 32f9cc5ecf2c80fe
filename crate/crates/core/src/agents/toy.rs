use super::Agent;

/// Weakly expanding planar map
/// `F(v) = 1.1 (v₁ + 0.2, v₂ − 0.2 sin(2v₂))`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ToyExpanding;

pub fn toy_expanding_agent() -> ToyExpanding {
    ToyExpanding
}

impl Agent for ToyExpanding {
    fn label(&self) -> &str {
        "toy-expanding"
    }

    fn dim(&self) -> usize {
        2
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        out[0] = 1.1 * (v[0] + 0.2);
        out[1] = 1.1 * (v[1] - 0.2 * (2.0 * v[1]).sin());
    }
}
