use std::io::Write;

use clap::Args;
use safety_bounds::bounds::upper_risk_bound;
use safety_bounds::combine::UnionRule;
use safety_bounds::intervals::ConfidenceStatement;
use safety_bounds::odd::build_ladder;
use safety_bounds::simulator::{
    analytic_checks, comparisons_csv, run as run_simulation, validate_bounds, BoundCheck,
    ModelParams, ModelRegistry, ScaleLaw, SimulationConfig, DEFAULT_MAX_APPROACHES,
};

use crate::config::{demo_odd, SimulationSection, ToolkitConfig};
use crate::error::{CliError, CliResult, EXIT_OK};
use crate::output::write_file;
use crate::Globals;

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// independent, comonotone, ar1, distance_scaled or exactly_one_or_none.
    #[arg(long)]
    pub model: Option<String>,
    /// Per-interval miss probabilities: one value, N values, or N+1 with the lead-in first.
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// distance_scaled only: `geometric:<ratio>` or `linear:<slope>`.
    #[arg(long, value_parser = parse_scale)]
    pub scale: Option<ScaleLaw>,
    #[arg(long)]
    pub late_q: Option<f64>,
    #[arg(long)]
    pub sessions: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Randomise the phase of the perception grid.
    #[arg(long)]
    pub phase_offset: bool,
    #[arg(long)]
    pub false_trigger: Option<f64>,
    #[arg(long)]
    pub route_km: Option<f64>,
    /// Obstacles per km.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub max_approaches: Option<u64>,
    /// Compare the run against the bounds implied by the model's marginals.
    #[arg(long)]
    pub check_bounds: bool,
}

fn parse_scale(s: &str) -> Result<ScaleLaw, String> {
    let (law, v) = s
        .split_once(':')
        .ok_or("expected `geometric:<ratio>` or `linear:<slope>`")?;
    let v: f64 = v.parse().map_err(|e| format!("`{v}`: {e}"))?;
    match law {
        "geometric" => Ok(ScaleLaw::Geometric { ratio: v }),
        "linear" => Ok(ScaleLaw::Linear { slope: v }),
        other => Err(format!("unknown scale law `{other}`")),
    }
}

pub fn build_config(
    g: &Globals,
    args: &SimulateArgs,
    cfg: &ToolkitConfig,
) -> CliResult<SimulationConfig> {
    let sim = cfg.simulation.clone().unwrap_or_default();
    let mut spec = cfg.odd.unwrap_or_else(demo_odd);
    if let Some(km) = args.route_km {
        spec.route_length_km = km;
    }
    if let Some(l) = args.lambda {
        spec.obstacle_intensity_prior = Some(l);
    }
    if spec.obstacle_intensity_prior.is_none() {
        return Err(CliError::usage(
            "simulate needs obstacle_intensity_prior in [odd] or --lambda",
        ));
    }
    let ladder = build_ladder(&spec)?;
    let SimulationSection {
        model,
        q,
        rho,
        scale,
        late_q,
        sessions,
        seed,
        phase_offset,
        false_trigger_prob,
        max_approaches,
    } = sim;
    let name = args
        .model
        .clone()
        .or(model)
        .unwrap_or_else(|| "independent".into());
    let params = ModelParams {
        q: args.q.clone().or(q).unwrap_or_else(|| vec![0.3]),
        rho: args.rho.or(rho).unwrap_or(0.0),
        scale: args.scale.or(scale),
        late_q: args.late_q.or(late_q),
    };
    let model = ModelRegistry::default().build(&name, &params, ladder.updates_in_buffer())?;
    let mut config = SimulationConfig::new(
        spec,
        model,
        args.sessions.or(sessions).unwrap_or(10),
        g.seed.or(seed).unwrap_or(0),
    );
    config.include_phase_offset = args.phase_offset || phase_offset.unwrap_or(false);
    config.false_trigger_prob = args.false_trigger.or(false_trigger_prob).unwrap_or(0.0);
    config.max_approaches = args
        .max_approaches
        .or(max_approaches)
        .unwrap_or(DEFAULT_MAX_APPROACHES);
    Ok(config)
}

pub fn run(g: &Globals, args: &SimulateArgs, out: &mut dyn Write) -> CliResult<u8> {
    let cfg = ToolkitConfig::load_optional(g.config.as_deref())?;
    let config = build_config(g, args, &cfg)?;
    let ladder = config.validate()?;
    let report = run_simulation(&config, args.threads)?;
    let _ = write!(out, "{}", report.summary());
    let dir = g.out.clone().or(cfg.paths.output_dir);
    if let Some(dir) = &dir {
        let path = write_file(dir, "simulation.csv", &report.to_csv())?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    if args.check_bounds {
        let mut checks = analytic_checks(&config.model, &ladder, config.include_phase_offset);
        // the same bound in collisions per km, with the marginals and the
        // intensity taken as known
        let lambda = config.spec.obstacle_intensity_prior.unwrap_or(0.0);
        let q_min = config
            .model
            .guaranteed()
            .iter()
            .copied()
            .fold(1.0, f64::min);
        let per_km = upper_risk_bound(
            &ConfidenceStatement::probability_upper("min_j q_j", q_min, 0.0)?,
            &ConfidenceStatement::rate_upper("obstacle rate", lambda, 0.0)?,
            &UnionRule,
        )?;
        checks.push(BoundCheck::from(&per_km));
        let rows = validate_bounds(&report, &checks);
        for r in &rows {
            let _ = writeln!(
                out,
                "{} {} {:.6e}: empirical {:.6e} (se {:.2e}, z {:+.2}) {}{}",
                r.check.label,
                r.check.relation.as_str(),
                r.check.value,
                r.empirical,
                r.std_error,
                r.z,
                if r.pass { "PASS" } else { "FAIL" },
                if r.tight { ", tight" } else { "" }
            );
        }
        if let Some(dir) = &dir {
            let path = write_file(dir, "bound_checks.csv", &comparisons_csv(&rows))?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
    }
    Ok(EXIT_OK)
}
