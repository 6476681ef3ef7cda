use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use safety_bounds::bounds::{
    decide, lower_risk_bound_independent, lower_risk_bound_min_marginal, lower_risk_bound_monotone,
    upper_risk_bound, Outcome, RiskBound,
};
use safety_bounds::combine::{CombinerRegistry, ConfidenceCombiner};
use safety_bounds::evidence::{
    ingest_frame_log, ingest_segments, miss_probability_evidence, obstacle_rate_evidence,
    GroupedFrames, SamplingDesign,
};
use safety_bounds::gsn::render_gsn;
use safety_bounds::intervals::{
    binomial_lower_bound, binomial_upper_bound, poisson_rate_lower_bound, poisson_rate_upper_bound,
    ConfidenceStatement, PoissonEvidence,
};
use safety_bounds::odd::{build_ladder, DetectionLadder, SafetyTarget};

use super::{parse_pair, required};
use crate::config::ToolkitConfig;
use crate::error::{CliError, CliResult, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_UNSAFE};
use crate::output::write_file;
use crate::Globals;

const MISS: &str = "miss probability";
const RATE: &str = "obstacle rate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Design {
    /// All draws from the innermost interval.
    Innermost,
    /// Equal weight on every interval.
    Uniform,
    /// Weight by frames held per interval.
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Assume {
    /// Independent frame errors: per-interval lower bounds multiply.
    Independent,
    /// Independent errors that shrink with distance: innermost bound to the N+1.
    Monotone,
}

#[derive(Debug, Clone, Args)]
pub struct ArgueArgs {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Alpha for the miss-probability and the obstacle-rate statements.
    #[arg(long, value_parser = parse_pair)]
    pub split: Option<[f64; 2]>,
    #[arg(long)]
    pub combine: Option<String>,
    /// Frame log CSV (`true_distance_m,estimated_distance_m`).
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Segment CSV (`length_km,obstacle_count`).
    #[arg(long)]
    pub segments: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Design::Innermost)]
    pub design: Design,
    /// Frames drawn for the miss estimate; defaults to the frames on offer.
    #[arg(long)]
    pub draws: Option<u64>,
    /// Also derive a lower bound from the data under this assumption.
    #[arg(long, value_enum)]
    pub assume: Option<Assume>,
    /// Count the lead-in update as one more detection opportunity.
    #[arg(long)]
    pub extra_frame: bool,
    /// Precomputed upper bound on the miss probability.
    #[arg(long)]
    pub miss_upper: Option<f64>,
    /// Precomputed upper bound on obstacles per km.
    #[arg(long)]
    pub rate_upper: Option<f64>,
    /// Precomputed lower bound on the smallest per-update miss probability.
    #[arg(long)]
    pub miss_lower: Option<f64>,
    #[arg(long)]
    pub rate_lower: Option<f64>,
    /// Guaranteed updates in the buffer when there is no [odd] section.
    #[arg(long)]
    pub updates: Option<usize>,
    /// Where to write the argument tree (JSON).
    #[arg(long)]
    pub gsn_out: Option<PathBuf>,
}

struct Budget {
    miss: f64,
    rate: f64,
}

fn budget(
    args: &ArgueArgs,
    target: &SafetyTarget,
    rule: &dyn ConfidenceCombiner,
) -> CliResult<Budget> {
    let [miss, rate] = match args.split {
        Some(s) => s,
        None => {
            let a = target.alpha;
            let first = if rule.name() == "union" {
                a / 2.0
            } else {
                1.0 - (1.0 - a).sqrt()
            };
            [first, rule.complement(a, first)]
        }
    };
    Ok(Budget { miss, rate })
}

fn ladder(cfg: &ToolkitConfig) -> CliResult<DetectionLadder> {
    let odd = cfg
        .odd
        .as_ref()
        .ok_or_else(|| CliError::usage("frame logs need an [odd] section in --config"))?;
    Ok(build_ladder(odd)?)
}

fn design(kind: Design, frames: &GroupedFrames) -> CliResult<SamplingDesign> {
    let n = frames.updates_in_buffer();
    Ok(match kind {
        Design::Innermost => SamplingDesign::innermost(n)?,
        Design::Uniform => SamplingDesign::uniform(n)?,
        Design::Proportional => SamplingDesign::proportional(&frames.counts())?,
    })
}

/// Collected evidence; every field is optional.
#[derive(Default)]
struct Evidence {
    frames: Option<GroupedFrames>,
    rate: Option<PoissonEvidence>,
}

pub fn run(g: &Globals, args: &ArgueArgs, out: &mut dyn Write) -> CliResult<u8> {
    let cfg = ToolkitConfig::load_optional(g.config.as_deref())?;
    let epsilon = required(
        args.epsilon.or(cfg.target.map(|t| t.epsilon)),
        "target epsilon (--epsilon)",
    )?;
    let alpha = required(
        args.alpha.or(cfg.target.map(|t| t.alpha)),
        "target alpha (--alpha)",
    )?;
    let target = SafetyTarget::new(epsilon, alpha)?;
    let rule = CombinerRegistry::default().get(args.combine.as_deref().unwrap_or("union"))?;
    let budget = budget(args, &target, rule.as_ref())?;

    let frames_path = args.frames.clone().or(cfg.paths.frame_log.clone());
    let segments_path = args.segments.clone().or(cfg.paths.segments.clone());
    let mut ev = Evidence::default();
    if let Some(p) = &frames_path {
        let frames = ingest_frame_log(p, &ladder(&cfg)?)?;
        let _ = writeln!(
            out,
            "frames: {} read, {} outside the buffer",
            frames.total(),
            frames.out_of_ladder().len()
        );
        for (j, (n, k)) in frames.histogram().iter().enumerate() {
            let _ = writeln!(out, "  interval {}: {n} frames, {k} above threshold", j + 1);
        }
        ev.frames = Some(frames);
    }
    if let Some(p) = &segments_path {
        let rate = obstacle_rate_evidence(&ingest_segments(p)?)?;
        let _ = writeln!(
            out,
            "segments: {} obstacles in {} km",
            rate.count(),
            rate.exposure_km()
        );
        ev.rate = Some(rate);
    }

    let mut bounds: Vec<RiskBound> = Vec::new();

    // sufficient condition
    let miss_up = match (args.miss_upper, &ev.frames) {
        (Some(v), _) => Some(ConfidenceStatement::probability_upper(
            MISS,
            v,
            budget.miss,
        )?),
        (None, Some(frames)) => {
            let d = design(args.design, frames)?;
            let offered: usize = frames
                .counts()
                .0
                .iter()
                .zip(d.weights())
                .filter(|(_, &w)| w > 0.0)
                .map(|(&c, _)| c)
                .sum();
            let draws = args.draws.unwrap_or(offered as u64);
            let sample = miss_probability_evidence(frames, &d, draws, g.seed.unwrap_or(0))?;
            Some(binomial_upper_bound(sample, budget.miss)?)
        }
        (None, None) => None,
    };
    let rate_up = match (args.rate_upper, &ev.rate) {
        (Some(v), _) => Some(ConfidenceStatement::rate_upper(RATE, v, budget.rate)?),
        (None, Some(r)) => Some(poisson_rate_upper_bound(*r, budget.rate)?),
        (None, None) => None,
    };
    if let (Some(m), Some(r)) = (&miss_up, &rate_up) {
        bounds.push(upper_risk_bound(m, r, rule.as_ref())?);
    }

    // necessary condition
    let rate_low = match (args.rate_lower, &ev.rate) {
        (Some(v), _) => Some(ConfidenceStatement::rate_lower(RATE, v, budget.rate)?),
        (None, Some(r)) if args.assume.is_some() => {
            Some(poisson_rate_lower_bound(*r, budget.rate)?)
        }
        _ => None,
    };
    if let (Some(q), Some(r)) = (args.miss_lower, &rate_low) {
        let n = match args.updates {
            Some(n) => n,
            None => ladder(&cfg)?.updates_in_buffer(),
        };
        let s = ConfidenceStatement::probability_lower(MISS, q, budget.miss)?;
        bounds.push(lower_risk_bound_min_marginal(&s, n, r)?);
    } else if let (Some(assume), Some(frames), Some(r)) = (args.assume, &ev.frames, &rate_low) {
        let n = frames.updates_in_buffer();
        match assume {
            Assume::Independent => {
                let each = budget.miss / n as f64;
                let per_frame = (1..=n)
                    .map(|j| {
                        let s = binomial_lower_bound(frames.interval_evidence(j)?, each)?;
                        Ok(s.with_parameter(format!("{MISS}, interval {j}")))
                    })
                    .collect::<safety_bounds::Result<Vec<_>>>()?;
                bounds.push(lower_risk_bound_independent(
                    &per_frame,
                    r,
                    args.extra_frame,
                )?);
            }
            Assume::Monotone => {
                let s = binomial_lower_bound(frames.interval_evidence(n)?, budget.miss)?
                    .with_parameter(format!("{MISS}, interval {n}"));
                bounds.push(lower_risk_bound_monotone(&s, n, r)?);
            }
        }
    }

    for b in &bounds {
        let _ = writeln!(
            out,
            "{} bound: {:e} collisions per km at confidence {} ({} rule)",
            b.direction, b.value, b.confidence, b.combination
        );
    }
    let verdict = decide(&target, &bounds)?;
    let tree = render_gsn(&verdict);
    let _ = writeln!(out, "verdict: {}", verdict.outcome);
    let _ = write!(out, "{}", tree.render_text());

    let gsn_path = args.gsn_out.clone().or_else(|| {
        g.out
            .as_ref()
            .or(cfg.paths.output_dir.as_ref())
            .map(|d| d.join("argument.json"))
    });
    if let Some(path) = gsn_path {
        let dir = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
        let name = path
            .file_name()
            .ok_or_else(|| CliError::usage("--gsn-out needs a file name"))?
            .to_string_lossy()
            .into_owned();
        let written = write_file(&dir, &name, &tree.to_json())?;
        let _ = writeln!(out, "wrote {}", written.display());
    }

    Ok(match verdict.outcome {
        Outcome::Safe => EXIT_OK,
        Outcome::Unsafe => EXIT_UNSAFE,
        Outcome::Inconclusive => EXIT_INCONCLUSIVE,
    })
}
