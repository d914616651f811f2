//! Shared fixtures for the benchmarks in `benches/`.

use flatcrane::{CraneModel, PhysicalParams, PlanSpec, RestPosition};

pub fn default_model() -> CraneModel {
    CraneModel::new(PhysicalParams::default()).expect("default parameters are valid")
}

/// Travel of 10 m while lifting from 1 m to 8 m over `n` steps.
pub fn transition(n: usize) -> PlanSpec {
    PlanSpec {
        start: RestPosition::new(0.0, 1.0),
        goal: RestPosition::new(10.0, 8.0),
        n,
        head_len: 10,
        tail_len: 10,
        blend_degree: 9,
        q3_min: 1.0,
        q3_max: 9.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_valid() {
        transition(300).validate(&default_model()).unwrap();
    }
}
