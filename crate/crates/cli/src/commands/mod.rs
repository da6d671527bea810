//! One module per subcommand. Each returns the files it wrote, relative to
//! the output directory, in the order written.

mod check;
mod eoc;
mod kernel;
mod posterior;
mod sample;
mod sweep;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;

use pseudoiid::RngSeed;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::Command;

pub struct Ctx {
    pub seed: RngSeed,
    pub out: PathBuf,
    /// `--trials` override.
    pub trials: Option<usize>,
}

/// Collects output files under the run directory.
pub(crate) struct Output<'a> {
    ctx: &'a Ctx,
    pub files: Vec<String>,
}

impl<'a> Output<'a> {
    fn new(ctx: &'a Ctx) -> Result<Self, CliError> {
        std::fs::create_dir_all(&ctx.out)?;
        Ok(Output { ctx, files: Vec::new() })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.ctx.out.join(name))?))
    }

    /// Write via a fallible writer callback (the core CSV writers).
    fn csv(&mut self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> pseudoiid::Result<()>) -> Result<(), CliError> {
        let mut f = self.create(name)?;
        write(&mut f)?;
        f.flush()?;
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut f = self.create(name)?;
        serde_json::to_writer_pretty(&mut f, value)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }
}

pub fn dispatch(command: Command, cfg: &RunConfig, ctx: &Ctx) -> Result<Vec<String>, CliError> {
    let mut out = Output::new(ctx)?;
    match command {
        Command::Sample => sample::run(cfg.block("sample", |c| c.sample.as_ref())?, ctx, &mut out)?,
        Command::Check => check::run(cfg.block("check", |c| c.check.as_ref())?, ctx, &mut out)?,
        Command::Kernel => kernel::run(cfg.block("kernel", |c| c.kernel.as_ref())?, ctx, &mut out)?,
        Command::Simulate => sweep::simulate(cfg.block("simulate", |c| c.simulate.as_ref())?, ctx, &mut out)?,
        Command::Compare => sweep::compare(cfg.block("compare", |c| c.compare.as_ref())?, ctx, &mut out)?,
        Command::Eoc => eoc::run(cfg.block("eoc", |c| c.eoc.as_ref())?, &mut out)?,
        Command::Posterior => posterior::run(cfg.block("posterior", |c| c.posterior.as_ref())?, &mut out)?,
        Command::Presets => unreachable!("handled before loading a config"),
    }
    Ok(out.files)
}

/// File-name-safe form of a label.
pub(crate) fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}
