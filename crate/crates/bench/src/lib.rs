//! Fixtures shared by the benchmarks.

use refracted_core::{LevySpec, RefractedSpec};

pub fn cpp_x() -> LevySpec {
    LevySpec::cpp(2.0, vec![1.0], vec![1.0]).expect("valid model")
}

pub fn cpp_y() -> LevySpec {
    LevySpec::cpp(1.2, vec![1.0], vec![2.0]).expect("valid model")
}

pub fn stable_x() -> LevySpec {
    LevySpec::stable(1.5).expect("valid model")
}

pub fn cpp_pair() -> RefractedSpec {
    RefractedSpec::new(cpp_x(), cpp_y()).expect("valid pair")
}

pub fn stable_pair() -> RefractedSpec {
    RefractedSpec::new(stable_x(), cpp_y()).expect("valid pair")
}
