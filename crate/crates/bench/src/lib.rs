//! Fixtures shared by the benchmarks in `benches/`.

use ltadmm::compressors::CompressorSpec;
use ltadmm::objectives::generate_logistic;
use ltadmm::protocol::{Hyperparameters, Network};
use ltadmm::topology::Topology;

/// Ring of `agents` logistic agents with 5 features and 100 samples each,
/// using the reference hyperparameters.
pub fn reference_network(agents: usize, compressor: CompressorSpec) -> Network {
    let problems = generate_logistic(agents, 5, 100, 0.1, 1).expect("valid sizes");
    let topology = Topology::ring(agents).expect("ring needs at least 3 nodes");
    Network::new(
        topology,
        problems,
        Hyperparameters::reference(compressor),
        1,
    )
    .expect("valid network")
}
