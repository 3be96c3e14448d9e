mod support;

const CASES: u32 = 1000;

#[test]
fn crossover_conserves_multiset() {
    support::crossover_conserves_multiset(CASES).unwrap();
}

#[test]
fn mutation_preserves_size() {
    support::mutation_preserves_size(CASES).unwrap();
}

#[test]
fn population_size_is_constant() {
    support::population_size_constant(CASES).unwrap();
}

#[test]
fn init_and_gap_bags_obey_size_law() {
    support::init_obeys_size_law(CASES).unwrap();
}

#[test]
fn fitness_is_monotone() {
    support::fitness_is_monotone(CASES).unwrap();
}
