//! `oodkit simulate` — seeded Monte Carlo theorem checks on synthetic
//! Gaussian worlds. Exit code 0 means the check passed, 5 means it ran to
//! completion and failed.

use std::path::Path;

use oodkit::theorylab::{
    check_mcm_dominance, check_nonmax_order, GaussianWorld, THEOREM_MCM_DOMINANCE,
    THEOREM_NONMAX_ORDER,
};
use serde_json::json;

use crate::commands::{pick, pick_opt};
use crate::config::ConfigFile;
use crate::record::{self, RunRecord};
use crate::{CliError, SimulateArgs, EXIT_CHECK_FAILED};

pub fn run(args: &SimulateArgs, cfg: &ConfigFile, journal: &Path) -> Result<i32, CliError> {
    let sec = &cfg.simulate;
    let theorem = pick(
        args.theorem.clone(),
        sec.theorem.clone(),
        THEOREM_NONMAX_ORDER.to_string(),
    );
    let samples = pick(args.samples, sec.samples, 10_000);

    let (report, inputs, config_echo) = match theorem.as_str() {
        THEOREM_NONMAX_ORDER => {
            let mut inputs = Vec::new();
            let mut world = match pick_opt(args.input.clone(), sec.input.clone()) {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        CliError::Data(format!("cannot read world {}: {e}", path.display()))
                    })?;
                    let world: GaussianWorld = serde_json::from_str(&text).map_err(|e| {
                        CliError::Data(format!("bad world file {}: {e}", path.display()))
                    })?;
                    inputs.push(record::fingerprint(&path, world.k, world.d)?);
                    world
                }
                None => GaussianWorld::default_binary(),
            };
            if let Some(seed) = pick_opt(args.seed, sec.seed) {
                world.seed = seed;
            }
            let report = check_nonmax_order(&world, samples)?;
            let echo = json!({ "theorem": theorem, "samples": samples, "world": world });
            (report, inputs, echo)
        }
        THEOREM_MCM_DOMINANCE => {
            let k = pick(args.k, sec.k, 10);
            let tau = pick(args.tau, sec.tau, 2.0 * (k.saturating_sub(1)) as f64 + 1.0);
            let seed = pick(args.seed, sec.seed, 0);
            let report = check_mcm_dominance(k, tau, samples, seed)?;
            let echo = json!({
                "theorem": theorem,
                "k": k,
                "tau": tau,
                "samples": samples,
                "seed": seed,
            });
            (report, Vec::new(), echo)
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown theorem {other:?} (want {THEOREM_NONMAX_ORDER} or {THEOREM_MCM_DOMINANCE})"
            )))
        }
    };

    let payload = serde_json::to_value(&report)
        .map_err(|e| CliError::Data(format!("cannot encode report: {e}")))?;
    record::append_journal(
        journal,
        &RunRecord::new("simulate", config_echo, inputs, payload.clone()),
    )?;
    if let Some(out) = pick_opt(args.out.clone(), sec.out.clone()) {
        let text = serde_json::to_string_pretty(&payload)
            .map_err(|e| CliError::Data(format!("cannot encode report: {e}")))?;
        std::fs::write(&out, text + "\n")
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;
        println!("wrote {}", out.display());
    }

    println!(
        "{}: {} (margin {:.3} SE, {} samples per cohort)",
        report.name,
        if report.passed { "PASSED" } else { "FAILED" },
        report.margin,
        report.samples
    );
    Ok(if report.passed { 0 } else { EXIT_CHECK_FAILED })
}
