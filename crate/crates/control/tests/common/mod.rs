#![allow(dead_code)]

pub mod trained;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softarm_neural::{BiLstmSpec, BiLstmWeights, ModelBundle, ModelKind, Normalizer, C2A_FEATURES};

/// Small randomly initialized forward model with plausible normalization.
pub fn toy_forward(seed: u64) -> ModelBundle {
    let spec = BiLstmSpec {
        layer_count: 2,
        hidden_size: 6,
        input_size: 3,
        output_size: 6,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min = Vec::new();
    let mut max = Vec::new();
    for m in 0..3 {
        let reach = 0.2 * (m + 1) as f64;
        min.extend([-reach, -reach, 0.05, -1.0, -1.0, -0.2]);
        max.extend([reach, reach, reach + 0.05, 1.0, 1.0, 1.0]);
    }
    ModelBundle {
        kind: ModelKind::ForwardModel,
        spec,
        weights: BiLstmWeights::init(&spec, &mut rng),
        module_count: 3,
        input_norm: Some(Normalizer {
            min: vec![-1.0, -1.0, -0.2, -1.0, -1.0, -0.2, -1.0, -1.0, -0.2],
            max: vec![1.0; 9],
        }),
        output_norm: Some(Normalizer { min, max }),
        seed,
    }
}

pub fn toy_controller(seed: u64) -> ModelBundle {
    let spec = BiLstmSpec {
        layer_count: 1,
        hidden_size: 5,
        input_size: C2A_FEATURES,
        output_size: 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ModelBundle {
        kind: ModelKind::Controller,
        spec,
        weights: BiLstmWeights::init(&spec, &mut rng),
        module_count: 3,
        input_norm: Some(Normalizer {
            min: vec![-1.0, -1.0, -0.2, -1.0, -1.0, -0.2, -1.0, -1.0, -0.2],
            max: vec![1.0; 9],
        }),
        output_norm: None,
        seed,
    }
}
