//! Models trained on simulated data. Test binaries share them through a
//! cache in the cargo target directory; the acceptance suite always trains
//! afresh and refreshes the cache.

use std::path::PathBuf;
use std::sync::Arc;

use softarm_core::babble::BabbleSchedule;
use softarm_core::dataset::{collect_dataset, Dataset};
use softarm_core::plant::DisturbanceParams;
use softarm_core::ArmGeometry;
use softarm_neural::{
    model_load, model_save, train_c2a, train_c2s, BiLstmSpec, ModelBundle, TrainConfig, TrainReport,
};

/// Epoch cap for test training; validation error has flattened out by then.
pub const TRAIN_EPOCHS: usize = 40;
/// Plant seed of the training data; evaluation presets use other seeds.
pub const TRAIN_PLANT_SEED: u64 = 1;

pub struct Trained {
    pub forward: Arc<ModelBundle>,
    pub controller: Arc<ModelBundle>,
}

pub struct Training {
    pub models: Trained,
    pub forward_report: TrainReport,
    pub controller_report: TrainReport,
}

pub fn training_dataset() -> Dataset {
    collect_dataset(
        &BabbleSchedule::default(),
        &DisturbanceParams::default().with_seed(TRAIN_PLANT_SEED),
        &ArmGeometry::default(),
    )
    .expect("dataset")
}

pub fn train_config() -> TrainConfig {
    TrainConfig {
        max_epochs: TRAIN_EPOCHS,
        ..Default::default()
    }
}

fn cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("trained-models")
}

fn save(models: &Trained) {
    let dir = cache_dir();
    std::fs::create_dir_all(&dir).expect("cache dir");
    model_save(&models.forward, dir.join("c2s.bin")).expect("save");
    model_save(&models.controller, dir.join("c2a.bin")).expect("save");
}

/// Trains both models on `dataset` and refreshes the cache.
pub fn train(dataset: &Dataset) -> Training {
    let cfg = train_config();
    let (forward, forward_report) = train_c2s(dataset, &BiLstmSpec::c2s(), &cfg).expect("train c2s");
    let (controller, controller_report) =
        train_c2a(dataset, &BiLstmSpec::c2a(), &cfg).expect("train c2a");
    let models = Trained {
        forward: Arc::new(forward),
        controller: Arc::new(controller),
    };
    save(&models);
    Training {
        models,
        forward_report,
        controller_report,
    }
}

/// Cached models, trained on first use.
pub fn cached() -> Trained {
    let dir = cache_dir();
    match (model_load(dir.join("c2s.bin")), model_load(dir.join("c2a.bin"))) {
        (Ok(f), Ok(c)) => Trained {
            forward: Arc::new(f),
            controller: Arc::new(c),
        },
        _ => train(&training_dataset()).models,
    }
}
