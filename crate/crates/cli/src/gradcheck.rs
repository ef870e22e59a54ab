use andt::model::ModelConfig;
use andt::numerics::suite::{check_operator, OPERATORS};
use andt::numerics::GradCheckConfig;
use andt::training::model_gradcheck;
use clap::Args;

use crate::failure::{CmdResult, Failure};

/// Full-model tolerance relative to the operator tolerance.
pub const MODEL_TOLERANCE_FACTOR: f64 = 10.0;

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Check the full model at the tiny scale (2 frames of 8×8, width 8,
    /// one layer, two heads). This is the only supported scale.
    #[arg(long, default_value_t = true)]
    pub tiny_config: bool,
    /// Relative tolerance for operators; the full model gets ten times this.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: &GradcheckArgs) -> CmdResult {
    if args.tolerance.is_nan() || args.tolerance <= 0.0 {
        return Err(Failure::Usage("--tolerance must be positive".into()));
    }
    let op_cfg = GradCheckConfig {
        tolerance: args.tolerance,
        seed: args.seed,
        ..GradCheckConfig::default()
    };
    println!("{:<22} {:>14} {:>10}  status", "operator", "max rel err", "tolerance");
    let mut failing = Vec::new();
    let mut row = |name: &str, err: f64, tol: f64, passed: bool| {
        println!("{name:<22} {err:>14.3e} {tol:>10.1e}  {}", if passed { "ok" } else { "FAIL" });
        if !passed {
            failing.push(name.to_string());
        }
    };
    for name in OPERATORS {
        let r = check_operator(name, &op_cfg)?;
        row(name, r.max_relative_error, r.tolerance, r.passed);
    }
    let model_cfg = GradCheckConfig {
        tolerance: args.tolerance * MODEL_TOLERANCE_FACTOR,
        skip_nonsmooth: true,
        ..op_cfg
    };
    let (r, _) = model_gradcheck(&ModelConfig::tiny(), &model_cfg)?;
    row("full_model", r.max_relative_error, r.tolerance, r.passed);

    if failing.is_empty() {
        println!("all {} checks passed", OPERATORS.len() + 1);
        Ok(())
    } else {
        Err(Failure::Check(format!("gradient mismatch in: {}", failing.join(", "))))
    }
}
