//! Built-in benchmark models and cases for the reproduction harness.
//!
//! Two unstable second-order systems with distinct channels are used across
//! the whole crate: a two-system heterogeneous case, homogeneous replicas of
//! system 2, and heterogeneous mixes of both. The same cases ship as JSON
//! configs under `configs/` for CLI use; [`crate::cli`] reproduces them
//! against recorded reference values.

use nalgebra::dmatrix;

use crate::model::{System, SystemModel};

/// First benchmark system: |A| ≈ 1.365, ε = 0.95, ε̲ = 0.5.
pub fn system_1() -> SystemModel {
    SystemModel::new(
        dmatrix![1.2, 0.2; 0.3, 1.0],
        dmatrix![1.0, 0.0],
        dmatrix![2.0, 0.0; 0.0, 1.0],
        dmatrix![1.0],
        0.95,
        0.5,
        1.0,
        "system-1",
    )
    .expect("benchmark system 1 is well-formed")
}

/// Second benchmark system: |A| = 1.2, ε = 0.9, ε̲ = 0.4.
pub fn system_2() -> SystemModel {
    SystemModel::new(
        dmatrix![1.2, 0.15; 0.0, 1.1],
        dmatrix![1.0, 0.2],
        dmatrix![1.0, 0.5; 0.5, 0.5],
        dmatrix![3.0],
        0.9,
        0.4,
        1.0,
        "system-2",
    )
    .expect("benchmark system 2 is well-formed")
}

fn relabel(mut model: SystemModel, idx: usize) -> SystemModel {
    model.label = format!("{}#{}", model.label, idx);
    model
}

/// The two-system heterogeneous case (budget 1, truncation 19).
pub fn example1_systems() -> Vec<System> {
    vec![
        System::prepare(system_1()).expect("system 1 steady state"),
        System::prepare(system_2()).expect("system 2 steady state"),
    ]
}

/// Homogeneous replicas of system 2.
pub fn homogeneous_systems(m: usize) -> Vec<System> {
    homogeneous_systems_of(system_2(), m)
}

/// Homogeneous replicas of an arbitrary base model.
pub fn homogeneous_systems_of(model: SystemModel, m: usize) -> Vec<System> {
    let base = System::prepare(model).expect("base model steady state");
    (0..m)
        .map(|i| {
            let mut sys = base.clone();
            sys.model = relabel(sys.model, i);
            sys
        })
        .collect()
}

/// Heterogeneous mix: the first ⌊M/2⌋ systems are copies of system 1, the
/// rest copies of system 2.
pub fn heterogeneous_systems(m: usize) -> Vec<System> {
    let s1 = System::prepare(system_1()).expect("system 1 steady state");
    let s2 = System::prepare(system_2()).expect("system 2 steady state");
    (0..m)
        .map(|i| {
            let mut sys = if i < m / 2 { s1.clone() } else { s2.clone() };
            sys.model = relabel(sys.model, i);
            sys
        })
        .collect()
}

/// (M, N) per homogeneous benchmark case, truncation 19.
pub const TABLE1_CASES: [(usize, usize); 3] = [(2, 1), (3, 2), (5, 2)];
/// (M, N) per heterogeneous benchmark case, truncation 12.
pub const TABLE2_CASES: [(usize, usize); 4] = [(2, 1), (3, 2), (5, 2), (6, 3)];

/// Truncation level for the two-system case and the homogeneous table.
pub const TRUNC_TABLE1: usize = 19;
/// Truncation level for the heterogeneous table, limited by how far the
/// closed-form index stays numerically reliable.
pub const TRUNC_TABLE2: usize = 12;
