use serde_json::json;

use pseudoiid::analysis::{nngp_regress, NngpArch, NngpProblem};
use pseudoiid::kernel::QuadratureOptions;
use pseudoiid::SCHEMA_VERSION;

use super::Output;
use crate::config::{PosteriorConfig, PosteriorData};
use crate::error::CliError;
use crate::inputs::toy_regression;

pub(super) fn run(cfg: &PosteriorConfig, out: &mut Output) -> Result<(), CliError> {
    let (train_x, train_y, test_x) = match &cfg.data {
        PosteriorData::Toy { train, test } => {
            if *train == 0 || *test == 0 {
                return Err(CliError::at("posterior.data", "train and test counts must be positive"));
            }
            toy_regression(*train, *test)
        }
        PosteriorData::Explicit { train_x, train_y, test_x } => (train_x.clone(), train_y.clone(), test_x.clone()),
    };
    if !(cfg.sigma_w2 > 0.0) || !(cfg.sigma_b2 >= 0.0) || !(cfg.noise >= 0.0) {
        return Err(CliError::at("posterior", "need sigma_w2 > 0, sigma_b2 >= 0 and noise >= 0"));
    }
    let problem = NngpProblem {
        train_x: &train_x,
        train_y: &train_y,
        test_x: &test_x,
        depth: cfg.depth,
        sigma_b2: cfg.sigma_b2,
        sigma_w2: cfg.sigma_w2,
        activation: &cfg.activation,
        noise: cfg.noise,
        arch: NngpArch::Fcn,
        quadrature: QuadratureOptions::default(),
    };
    let result = nngp_regress(&problem)?;
    out.csv("posterior.csv", |f| result.write_csv(f))?;
    out.json(
        "posterior.json",
        &json!({ "schema_version": SCHEMA_VERSION, "config": cfg, "test_x": test_x, "result": result }),
    )
}
