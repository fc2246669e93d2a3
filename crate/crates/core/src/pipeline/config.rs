use super::PipelineError;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimConfig {
    pub total_iterations: usize,
    pub warmup_iterations: usize,
    /// Views rendered per iteration.
    pub batch: usize,
    pub lr: f64,
    pub lambda_recon: f64,
    pub lambda_reg: f64,
    pub t_max: f64,
    pub t_min: f64,
    pub cfg_scale: f64,
    /// Point pairs drawn for the smoothness term each iteration.
    pub reg_samples: usize,
    /// Radius of the perturbation ball for the smoothness term.
    pub reg_epsilon: f64,
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            total_iterations: 400,
            warmup_iterations: 50,
            batch: 4,
            lr: 0.01,
            lambda_recon: 1000.0,
            lambda_reg: 10.0,
            t_max: 0.1,
            t_min: 0.02,
            cfg_scale: 50.0,
            reg_samples: 10_000,
            reg_epsilon: 0.01,
            seed: 0,
        }
    }
}

impl OptimConfig {
    /// Checks the invariants. A run made only of warm-up iterations
    /// (`warmup == total`) is accepted.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.total_iterations == 0 {
            return bad("total_iterations must be positive".into());
        }
        if self.warmup_iterations > self.total_iterations {
            return bad(format!(
                "warmup_iterations {} exceeds total_iterations {}",
                self.warmup_iterations, self.total_iterations
            ));
        }
        if self.batch == 0 {
            return bad("batch must be positive".into());
        }
        if !(0.0 < self.t_min && self.t_min < self.t_max && self.t_max <= 1.0) {
            return bad(format!("need 0 < t_min < t_max <= 1, got {} and {}", self.t_min, self.t_max));
        }
        for (name, v) in [
            ("lr", self.lr),
            ("lambda_recon", self.lambda_recon),
            ("lambda_reg", self.lambda_reg),
            ("reg_epsilon", self.reg_epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.cfg_scale >= 0.0 && self.cfg_scale.is_finite()) {
            return bad(format!("cfg_scale must be non-negative, got {}", self.cfg_scale));
        }
        if self.reg_samples == 0 {
            return bad("reg_samples must be positive".into());
        }
        Ok(())
    }

    /// Number of score-distillation iterations in the run.
    pub fn sds_iterations(&self) -> usize {
        (self.total_iterations - self.warmup_iterations.min(self.total_iterations)) / 2
    }
}
