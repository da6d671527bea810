use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cnn::{cnn_shape, forward_cnn_regions, sample_cnn_weights, Region};
use super::config::{Architecture, NetworkConfig, Probe};
use super::fcn::{forward_fcn, sample_fcn_weights};
use crate::image::Image;
use crate::rng::RngSeed;
use crate::weights::fmt_f64;
use crate::{par, Error, Result, SCHEMA_VERSION};

/// Network inputs: flat vectors for fully connected networks, images for
/// convolutional ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Inputs {
    Vectors(Vec<Vec<f64>>),
    Images(Vec<Image>),
}

impl Inputs {
    pub fn len(&self) -> usize {
        match self {
            Inputs::Vectors(v) => v.len(),
            Inputs::Images(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).unwrap_or_default();
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Uniform point on the unit sphere in `R^dim`.
pub fn sample_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Probed preactivations, one row per trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleTable {
    pub trials: usize,
    pub probes: Vec<Probe>,
    /// Row-major `trials x probes`.
    pub values: Vec<f64>,
    pub config_digest: String,
    pub inputs_digest: String,
    pub seed: RngSeed,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    schema_version: u32,
    trials: usize,
    probes: &'a [Probe],
    config_digest: &'a str,
    inputs_digest: &'a str,
    seed: &'a RngSeed,
    config: &'a NetworkConfig,
}

impl EnsembleTable {
    pub fn value(&self, trial: usize, probe: usize) -> f64 {
        self.values[trial * self.probes.len() + probe]
    }

    pub fn column(&self, probe: usize) -> Vec<f64> {
        (0..self.trials).map(|t| self.value(t, probe)).collect()
    }

    /// CSV `trial,probe_id,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["trial", "probe_id", "value"])?;
        for t in 0..self.trials {
            for p in 0..self.probes.len() {
                wr.write_record([t.to_string(), p.to_string(), fmt_f64(self.value(t, p))])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// JSON metadata accompanying the CSV.
    pub fn sidecar(&self, config: &NetworkConfig) -> Result<serde_json::Value> {
        if config.digest() != self.config_digest {
            return Err(Error::mismatch("config does not match the ensemble digest"));
        }
        Ok(serde_json::to_value(Sidecar {
            schema_version: SCHEMA_VERSION,
            trials: self.trials,
            probes: &self.probes,
            config_digest: &self.config_digest,
            inputs_digest: &self.inputs_digest,
            seed: &self.seed,
            config,
        })?)
    }
}

/// Layer regions needed to evaluate every probe, from layer 1 up to the
/// deepest probe.
fn probe_regions(probes: &[Probe], k: usize, h: usize, w: usize) -> Vec<Region> {
    let top = probes.iter().map(|p| p.layer).max().unwrap_or(1);
    let mut regions: Vec<Option<Region>> = vec![None; top];
    for l in (1..=top).rev() {
        let mut reg = if l < top { regions[l].map(|r| r.dilate(k / 2, h, w)) } else { None };
        for p in probes.iter().filter(|p| p.layer == l) {
            let (r, c) = p.pixel.expect("checked probe");
            let pt = Region::point(r, c);
            reg = Some(reg.map_or(pt, |g| g.union(&pt)));
        }
        regions[l - 1] = reg;
    }
    regions.into_iter().map(|r| r.expect("every layer below the top probe is reached")).collect()
}

/// Monte-Carlo ensemble: trial `t` draws all weights from `seed.child(t)`,
/// runs every probed input through the network and records the probes.
pub fn run_ensemble(
    cfg: &NetworkConfig,
    inputs: &Inputs,
    probes: &[Probe],
    trials: usize,
    seed: &RngSeed,
) -> Result<EnsembleTable> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if probes.is_empty() {
        return Err(Error::invalid("at least one probe is required"));
    }
    for p in probes {
        p.check(cfg, inputs.len())?;
    }
    let top = probes.iter().map(|p| p.layer).max().unwrap();
    let mut used: Vec<usize> = probes.iter().map(|p| p.input).collect();
    used.sort_unstable();
    used.dedup();

    let rows: Vec<Vec<f64>> = match (&cfg.architecture, inputs) {
        (Architecture::Fcn { .. }, Inputs::Vectors(xs)) => par::try_map_indexed(trials, |t| {
            let w = sample_fcn_weights(cfg, &seed.child(t as u64), top)?;
            let mut acts = vec![None; xs.len()];
            for &i in &used {
                acts[i] = Some(forward_fcn(cfg, &w, &xs[i])?);
            }
            Ok::<_, Error>(
                probes
                    .iter()
                    .map(|p| acts[p.input].as_ref().unwrap()[p.layer - 1][p.index])
                    .collect(),
            )
        })?,
        (Architecture::Cnn { .. }, Inputs::Images(xs)) => {
            let shape = cnn_shape(cfg)?;
            let regions = probe_regions(probes, shape.k, shape.height, shape.width);
            par::try_map_indexed(trials, |t| {
                let w = sample_cnn_weights(cfg, &seed.child(t as u64), top)?;
                let mut maps = vec![None; xs.len()];
                for &i in &used {
                    maps[i] = Some(forward_cnn_regions(cfg, &w, &xs[i], &regions)?);
                }
                Ok::<_, Error>(
                    probes
                        .iter()
                        .map(|p| {
                            let (r, c) = p.pixel.unwrap();
                            maps[p.input].as_ref().unwrap()[p.layer - 1].get(p.index, r, c)
                        })
                        .collect(),
                )
            })?
        }
        _ => return Err(Error::mismatch("input kind does not match the architecture")),
    };
    Ok(EnsembleTable {
        trials,
        probes: probes.to_vec(),
        values: rows.into_iter().flatten().collect(),
        config_digest: cfg.digest(),
        inputs_digest: inputs.digest(),
        seed: seed.clone(),
    })
}
