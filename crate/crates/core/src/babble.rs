//! Phased motor babbling.
//!
//! The run is split in thirds. In the first third every module follows one
//! shared random walk; in the second the base and middle modules keep sharing
//! it while the end module gets its own; in the last third every module walks
//! independently. Walks live in normalized cable space, are projected onto the
//! zero-sum plane at every step and are clipped radially to `max_bend`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::pcc::{estimate_arc, ArmGeometry, ModuleAction};
use crate::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BabbleSchedule {
    pub total_samples: usize,
    /// Std of each normalized cable increment per tick.
    pub step_std: f64,
    /// Bend limit of the walk (rad). Kept inside the set of actions the
    /// learned controller's output layer can represent.
    pub max_bend: f64,
    pub seed: u64,
}

impl Default for BabbleSchedule {
    fn default() -> Self {
        Self {
            total_samples: 9000,
            step_std: 0.1,
            max_bend: 1.25,
            seed: 0,
        }
    }
}

/// Which walk drives each module during a phase.
pub fn phase_sources(phase: usize, module_count: usize) -> Vec<usize> {
    let last = module_count.saturating_sub(1);
    (0..module_count)
        .map(|m| match phase {
            0 => 0,
            1 => {
                if m == last {
                    last
                } else {
                    0
                }
            }
            _ => m,
        })
        .collect()
}

impl BabbleSchedule {
    pub fn phase_of(&self, tick: usize) -> usize {
        let third = self.total_samples as f64 / 3.0;
        if (tick as f64) < third {
            0
        } else if (tick as f64) < 2.0 * third {
            1
        } else {
            2
        }
    }
}

/// Generates the per-tick, per-module actions (in meters).
pub fn make_babble_schedule(
    spec: &BabbleSchedule,
    geom: &ArmGeometry,
) -> Result<Vec<Vec<ModuleAction>>, DatasetError> {
    if spec.total_samples < 3 {
        return Err(DatasetError::Schedule(
            "total_samples must be at least 3".into(),
        ));
    }
    if !(spec.step_std.is_finite() && spec.step_std >= 0.0) {
        return Err(DatasetError::Schedule(
            "step_std must be non-negative".into(),
        ));
    }
    if !(spec.max_bend > 0.0) {
        return Err(DatasetError::Schedule("max_bend must be positive".into()));
    }
    let n = geom.module_count;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let step = Normal::new(0.0, spec.step_std).expect("validated std");
    let mut walks = vec![[0.0f64; 3]; n];
    let mut out = Vec::with_capacity(spec.total_samples);
    let mut phase = 0;
    let mut sources = phase_sources(0, n);

    for tick in 0..spec.total_samples {
        let p = spec.phase_of(tick);
        if p != phase {
            // newly independent walks start where their module currently is
            let next_sources = phase_sources(p, n);
            for m in 0..n {
                if next_sources[m] != sources[m] {
                    walks[next_sources[m]] = walks[sources[m]];
                }
            }
            phase = p;
            sources = next_sources;
        }
        let mut active: Vec<usize> = sources.clone();
        active.sort_unstable();
        active.dedup();
        for &w in &active {
            let mut v = walks[w];
            for c in v.iter_mut() {
                *c += step.sample(&mut rng);
            }
            walks[w] = clip(v, spec.max_bend, geom);
        }
        out.push(
            sources
                .iter()
                .map(|&w| ModuleAction::from_normalized(walks[w], geom))
                .collect(),
        );
    }
    Ok(out)
}

/// Projects onto the zero-sum plane and scales radially into the bend limit.
fn clip(v: [f64; 3], max_bend: f64, geom: &ArmGeometry) -> [f64; 3] {
    let mean = v.iter().sum::<f64>() / 3.0;
    let v = v.map(|c| c - mean);
    let action = ModuleAction::from_normalized(v, geom);
    let bend = estimate_arc(&action, geom)
        .map(|a| a.bend_angle)
        .unwrap_or(0.0);
    let v = if bend > max_bend {
        v.map(|c| c * max_bend / bend)
    } else {
        v
    };
    let mean = v.iter().sum::<f64>() / 3.0;
    v.map(|c| c - mean)
}
