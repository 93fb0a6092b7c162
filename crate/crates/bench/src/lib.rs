// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the benchmarks.

use drayage_core::instancegen::{gen_practical_instance, gen_small_instance, PracticalSpec, Problem};
use drayage_core::scenario::{build_lattice, RandomStream, ScenarioLattice};

pub fn small_fixture(seed: u64, lattice_size: usize) -> (Problem, ScenarioLattice) {
    let p = gen_small_instance(&RandomStream::new(seed).child("instance")).expect("small instance");
    let l = build_lattice(&p.instance, &p.flow_model, lattice_size, &RandomStream::new(seed).child("lattice"))
        .expect("lattice");
    (p, l)
}

pub fn downsized_fixture(seed: u64, lattice_size: usize) -> (Problem, ScenarioLattice) {
    let p = gen_practical_instance(&PracticalSpec::downsized(), &RandomStream::new(seed).child("instance"))
        .expect("downsized instance");
    let l = build_lattice(&p.instance, &p.flow_model, lattice_size, &RandomStream::new(seed).child("lattice"))
        .expect("lattice");
    (p, l)
}
