//! Analytic versus central-difference gradients for every parameter group of
//! a small model.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{Dataset, Instance};
use crate::error::{Result, XcnError};
use crate::model::{ModelConfig, XCrossNetModel};
use crate::optim::{batch_gradient, objective, objective_gradient, Learner};
use crate::oracle::{finite_diff, relative_error, FD_EPSILON};
use crate::params::Parameterized;

/// A group passes when its worst relative error is below this.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// ReLU pre-activations closer than this to zero make finite differences
/// straddle the kink; such draws are resampled.
const KINK_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub config: ModelConfig,
    pub seed: u64,
    pub batch_size: usize,
    pub lambda: f64,
    /// Parameters are drawn uniformly from `[-param_scale, param_scale]`.
    pub param_scale: f64,
    /// Corrupts the analytic gradient of this group (a negative control).
    pub inject_fault: Option<String>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            config: ModelConfig::gradcheck_default(),
            seed: 0,
            batch_size: 4,
            lambda: 1e-3,
            param_scale: 0.5,
            inject_fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupResult {
    pub name: String,
    pub count: usize,
    /// Coordinates where at least one gradient was above the zero floor.
    pub checked: usize,
    pub max_rel_err: f64,
}

impl GroupResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err < GRADCHECK_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub groups: Vec<GroupResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(GroupResult::passed)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_err).fold(0.0, f64::max)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.groups {
            writeln!(
                f,
                "group={} count={} checked={} max_rel_err={:.3e} status={}",
                g.name,
                g.count,
                g.checked,
                g.max_rel_err,
                if g.passed() { "pass" } else { "FAIL" }
            )?;
        }
        write!(
            f,
            "max_rel_err={:.3e}\nstatus={}",
            self.max_rel_err(),
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}

fn random_batch(cfg: &ModelConfig, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let instances = (0..n)
        .map(|_| Instance {
            dense: (0..cfg.num_dense).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            sparse: cfg.vocab_sizes.iter().map(|&v| rng.gen_range(0..v as u32)).collect(),
            label: rng.gen_range(0..2),
        })
        .collect();
    Dataset::new(cfg.num_dense, cfg.num_sparse, instances)
}

fn near_kink(model: &XCrossNetModel, data: &Dataset) -> Result<bool> {
    for inst in data.instances() {
        let (_, cache) = model.forward(inst)?;
        if cache.mlp_pre_activations().any(|z| z.abs() < KINK_MARGIN) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Compares the gradient of `J = mean Logloss + λ‖θ‖²` on a random batch
/// against central differences, coordinate by coordinate.
pub fn run_gradcheck(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    if opts.batch_size == 0 {
        return Err(XcnError::InvalidConfig("batch_size: must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut model = XCrossNetModel::zeros(&opts.config)?;
    if let Some(name) = &opts.inject_fault {
        if !model.group_layout().iter().any(|(g, _)| g == name) {
            return Err(XcnError::InvalidConfig(format!("inject_fault: no parameter group named '{name}'")));
        }
    }

    let mut attempts = 0;
    let data = loop {
        let flat: Vec<f64> = (0..model.num_params())
            .map(|_| rng.gen_range(-opts.param_scale..opts.param_scale))
            .collect();
        model.set_flat_params(&flat)?;
        let data = random_batch(&opts.config, opts.batch_size, &mut rng)?;
        if !near_kink(&model, &data)? {
            break data;
        }
        attempts += 1;
        if attempts == 100 {
            return Err(XcnError::InvalidConfig(
                "could not draw parameters away from ReLU kinks in 100 attempts".into(),
            ));
        }
    };

    let batch: Vec<usize> = (0..data.len()).collect();
    let mut grads = model.zeros_like();
    batch_gradient(&model, &data, &batch, &mut grads)?;
    let mut analytic = objective_gradient(&model, &grads, opts.lambda);

    let layout = model.group_layout();
    if let Some(name) = &opts.inject_fault {
        let mut offset = 0;
        for (g, len) in &layout {
            if g == name {
                for v in &mut analytic[offset..offset + len] {
                    *v = *v * 1.5 + 1e-3;
                }
            }
            offset += len;
        }
    }

    let theta = model.flat_params();
    let mut probe = model.clone();
    let mut scratch = model.zeros_like();
    let mut failure = None;
    let numeric = finite_diff(
        |p| {
            probe.set_flat_params(p).expect("same length");
            match batch_gradient(&probe, &data, &batch, &mut scratch) {
                Ok(loss) => objective(loss, &probe, opts.lambda),
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &theta,
        FD_EPSILON,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let numeric = numeric?;

    let mut groups = Vec::with_capacity(layout.len());
    let mut offset = 0;
    for (name, len) in layout {
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        for k in offset..offset + len {
            if let Some(e) = relative_error(analytic[k], numeric[k]) {
                checked += 1;
                worst = worst.max(e);
            }
        }
        groups.push(GroupResult {
            name,
            count: len,
            checked,
            max_rel_err: worst,
        });
        offset += len;
    }
    Ok(GradcheckReport { groups })
}
