//! Fixtures shared by the criterion benches.

use catbox_core::bench::{mixed_wrap, FnKind, MixedObjective};
use catbox_core::{initial_design, MixedPoint};

/// Mixed Ackley with 2 categorical (5 levels) and 2 continuous variables.
pub fn ackley_2c2d() -> MixedObjective {
    mixed_wrap(FnKind::Ackley, 2, 5, 2).expect("valid wrap")
}

/// `n` observations of `objective` at seeded random points.
pub fn observations(objective: &MixedObjective, n: usize, seed: u64) -> Vec<(MixedPoint, f64)> {
    initial_design(&objective.space, n, seed)
        .into_iter()
        .map(|p| {
            let y = objective.value(&p).expect("in-domain point");
            (p, y)
        })
        .collect()
}
