use std::fmt::Write as _;
use std::io::Write;

use clap::Args;
use safety_bounds::combine::CombinerRegistry;
use safety_bounds::planning::{
    optimize_alpha_split, plan_split, AlphaSplit, CostWeights, FamilyTarget, DEFAULT_POWER_GOAL,
};

use super::{parse_pair, required};
use crate::config::{PlanSection, ToolkitConfig};
use crate::error::{CliError, CliResult, EXIT_OK};
use crate::output::{km, num, short, write_file};
use crate::Globals;

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    /// Total confidence budget alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Binomial and Poisson shares, e.g. `0.08,0.02`.
    #[arg(long, value_parser = parse_pair)]
    pub split: Option<[f64; 2]>,
    /// Miss-probability threshold p_c.
    #[arg(long)]
    pub pc: Option<f64>,
    /// Obstacle-rate threshold lambda_c (per km).
    #[arg(long)]
    pub lambdac: Option<f64>,
    /// Alternative at which power is evaluated (both tests).
    #[arg(long)]
    pub alt: Option<f64>,
    #[arg(long)]
    pub alt_p: Option<f64>,
    #[arg(long)]
    pub alt_lambda: Option<f64>,
    #[arg(long)]
    pub power: Option<f64>,
    /// Search the split minimising weighted cost instead.
    #[arg(long)]
    pub optimize: bool,
    /// Confidence combination rule.
    #[arg(long)]
    pub combine: Option<String>,
    #[arg(long)]
    pub weight_trials: Option<f64>,
    #[arg(long)]
    pub weight_km: Option<f64>,
    /// Grid step for `--optimize`.
    #[arg(long, default_value_t = 0.005)]
    pub resolution: f64,
}

struct Resolved {
    alpha: Option<f64>,
    split: Option<[f64; 2]>,
    binomial: FamilyTarget,
    poisson: FamilyTarget,
    combine: String,
    weights: CostWeights,
}

fn resolve(args: &PlanArgs, cfg: &ToolkitConfig) -> CliResult<Resolved> {
    let any_flag = args.pc.is_some() || args.lambdac.is_some() || args.alt.is_some();
    let section = match (&cfg.plan, any_flag) {
        (Some(p), _) => p.clone(),
        (None, true) => PlanSection::default(),
        (None, false) => {
            return Err(CliError::usage(
                "plan needs a [plan] section in --config or --pc/--lambdac/--alt flags",
            ))
        }
    };
    let pc = required(args.pc.or(section.miss_threshold), "miss threshold (--pc)")?;
    let lc = required(
        args.lambdac.or(section.rate_threshold),
        "rate threshold (--lambdac)",
    )?;
    let alt = args.alt.or(section.alternative);
    let alt_p = required(
        args.alt_p.or(section.miss_alternative).or(alt),
        "alternative (--alt)",
    )?;
    let alt_l = required(
        args.alt_lambda.or(section.rate_alternative).or(alt),
        "alternative (--alt)",
    )?;
    let goal = args
        .power
        .or(section.power_goal)
        .unwrap_or(DEFAULT_POWER_GOAL);
    let weights = CostWeights {
        trials: args.weight_trials.or(section.weight_trials).unwrap_or(1.0),
        km: args.weight_km.or(section.weight_km).unwrap_or(1.0),
    };
    Ok(Resolved {
        alpha: args.alpha.or(section.alpha),
        split: args.split.or(section.split),
        binomial: FamilyTarget {
            threshold: pc,
            alternative: alt_p,
            power_goal: goal,
        },
        poisson: FamilyTarget {
            threshold: lc,
            alternative: alt_l,
            power_goal: goal,
        },
        combine: args
            .combine
            .clone()
            .or(section.combine)
            .unwrap_or_else(|| "union".into()),
        weights,
    })
}

pub fn run(g: &Globals, args: &PlanArgs, out: &mut dyn Write) -> CliResult<u8> {
    let cfg = ToolkitConfig::load_optional(g.config.as_deref())?;
    let r = resolve(args, &cfg)?;
    let rule = CombinerRegistry::default().get(&r.combine)?;

    let split = if args.optimize {
        let total = required(r.alpha, "total alpha (--alpha) for --optimize")?;
        optimize_alpha_split(
            total,
            &r.binomial,
            &r.poisson,
            rule.as_ref(),
            r.weights,
            args.resolution,
        )?
    } else {
        let [a1, a2] = match (r.split, r.alpha) {
            (Some(s), _) => s,
            (None, Some(total)) => {
                // even split under the chosen rule
                let a1 = if rule.name() == "union" {
                    total / 2.0
                } else {
                    1.0 - (1.0 - total).sqrt()
                };
                [a1, rule.complement(total, a1)]
            }
            (None, None) => return Err(CliError::usage("give --split or --alpha")),
        };
        if let Some(total) = r.alpha {
            let spent = rule.joint(&[a1, a2]).alpha();
            if spent > total + 1e-12 {
                return Err(CliError::usage(format!(
                    "split {a1},{a2} spends alpha {spent} under the {} rule, more than {total}",
                    rule.name()
                )));
            }
        }
        plan_split(a1, a2, &r.binomial, &r.poisson, r.weights)?
    };

    let joint = rule.joint(&[split.alpha_binomial, split.alpha_poisson]);
    let csv = plan_csv(&split, rule.name(), joint.confidence);
    let _ = writeln!(
        out,
        "alpha_binomial={} alpha_poisson={} ({} rule, joint confidence {})",
        short(split.alpha_binomial),
        short(split.alpha_poisson),
        rule.name(),
        short(joint.confidence)
    );
    let _ = writeln!(
        out,
        "n={} trials (power {:.4}, critical count {})",
        split.trials.trials(),
        split.trials.achieved_power,
        split.trials.critical_count
    );
    let _ = writeln!(
        out,
        "m={} km (power {:.4}, critical count {})",
        km(split.exposure.size),
        split.exposure.achieved_power,
        split.exposure.critical_count
    );
    if let Some(dir) = g.out.as_deref().or(cfg.paths.output_dir.as_deref()) {
        let path = write_file(dir, "plan.csv", &csv)?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(EXIT_OK)
}

fn plan_csv(s: &AlphaSplit, rule: &str, confidence: f64) -> String {
    let mut csv = String::from(
        "alpha_binomial,alpha_poisson,n,m,power_binomial,power_poisson,combine,joint_confidence\n",
    );
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{},{}",
        num(s.alpha_binomial),
        num(s.alpha_poisson),
        s.trials.trials(),
        km(s.exposure.size),
        num(s.trials.achieved_power),
        num(s.exposure.achieved_power),
        rule,
        num(confidence)
    );
    csv
}
