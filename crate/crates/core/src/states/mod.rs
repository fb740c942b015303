//! Named state families, white-noise mixtures, separability-structured
//! samplers, the merging construction and graph states.

mod families;
mod graph;
mod merge;
mod samplers;

use serde::{Deserialize, Serialize};

pub use families::{
    cluster4, dicke24, ghz, mix_with_white_noise, projector, qutrit_family, w, MixtureBase, NoiseConvention,
    NoiseMixture,
};
pub use graph::{balanced_graph, graph_state, is_connected, random_graph, random_graph_from, Graph, GRAPH_EDGE_PROBS};
pub use merge::{merge, merge_pure};
pub use samplers::{
    has_npt_cut, sample_biseparable, sample_biseparable_from, sample_fully_separable, sample_fully_separable_from,
    sample_intactness, sample_intactness_from, sample_npt_bipartite, sample_separable_terms, set_partitions,
    NPT_THRESHOLD,
};

/// Entanglement intactness of a sample and whether it is certified genuinely
/// multipartite entangled (`gme` implies `intactness == 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparabilityLabel {
    pub intactness: usize,
    pub gme: bool,
}

impl SeparabilityLabel {
    pub fn genuine() -> Self {
        Self { intactness: 1, gme: true }
    }

    pub fn separable(k: usize) -> Self {
        Self { intactness: k, gme: false }
    }
}
