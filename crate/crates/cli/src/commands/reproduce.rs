use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use safety_bounds::planning::{
    alternative_grid, min_exposure, min_trials, sample_size_curve, CurveRow, PlanTarget, TestKind,
    DEFAULT_POWER_GOAL,
};

use crate::config::ToolkitConfig;
use crate::error::{CliResult, EXIT_OK};
use crate::output::{km, num, write_file};
use crate::Globals;

pub const TABLE1_ALPHAS: [f64; 8] = [0.08, 0.05, 0.04, 0.03, 0.025, 0.02, 0.01, 0.005];
const TABLE1_THRESHOLD: f64 = 0.001;
const TABLE1_ALTERNATIVE: f64 = 0.0005;
/// Shares of the total alpha given to the plotted test.
pub const SPLIT_SHARES: [f64; 3] = [0.2, 0.5, 0.8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Artifact {
    Table1,
    Curves,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Panel {
    /// Miss probability (binomial).
    P,
    /// Obstacle rate (Poisson).
    Lambda,
}

impl Panel {
    fn kind(self) -> TestKind {
        match self {
            Panel::P => TestKind::Binomial,
            Panel::Lambda => TestKind::Poisson,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Panel::P => "p",
            Panel::Lambda => "lambda",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub artifact: Artifact,
    /// Only curves for this parameter.
    #[arg(long, value_enum)]
    pub panel: Option<Panel>,
    /// Only miss-probability panels with this threshold.
    #[arg(long)]
    pub pc: Option<f64>,
    /// Only rate panels with this threshold.
    #[arg(long)]
    pub lambdac: Option<f64>,
    /// Only panels with this total alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Only curves whose test gets this share of alpha.
    #[arg(long)]
    pub alpha_split: Option<f64>,
    /// Alternatives per curve, from 0.1 to 0.9 of the threshold.
    #[arg(long, default_value_t = 17)]
    pub points: usize,
}

/// One subplot: parameter, threshold, total alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelSpec {
    pub panel: Panel,
    pub threshold: f64,
    pub alpha: f64,
}

/// Every (parameter, threshold, alpha) combination with a published curve:
/// four at alpha = 0.1, eight at smaller alphas.
pub fn figure_panels() -> Vec<PanelSpec> {
    let p = |threshold, alpha| PanelSpec {
        panel: Panel::P,
        threshold,
        alpha,
    };
    let l = |threshold, alpha| PanelSpec {
        panel: Panel::Lambda,
        threshold,
        alpha,
    };
    vec![
        p(0.001, 0.1),
        l(0.01, 0.1),
        p(0.01, 0.1),
        l(0.001, 0.1),
        p(0.001, 0.05),
        l(0.01, 0.05),
        p(0.01, 0.05),
        l(0.001, 0.05),
        p(0.001, 0.01),
        l(0.01, 0.01),
        p(0.01, 0.001),
        l(0.001, 0.01),
    ]
}

pub fn table1_csv() -> CliResult<String> {
    let rows: Vec<CliResult<(f64, u64, f64)>> = TABLE1_ALPHAS
        .par_iter()
        .map(|&alpha| {
            let t = PlanTarget::new(TABLE1_THRESHOLD, alpha, TABLE1_ALTERNATIVE)?;
            Ok((alpha, min_trials(&t)?.trials(), min_exposure(&t)?.size))
        })
        .collect();
    let mut csv = String::from("alpha,n,m\n");
    for row in rows {
        let (alpha, n, m) = row?;
        let _ = writeln!(csv, "{},{},{}", num(alpha), n, km(m));
    }
    Ok(csv)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

pub fn curve_csv(kind: TestKind, rows: &[CurveRow]) -> String {
    let mut csv = String::from("alternative,size,achieved_power,critical_count\n");
    for r in rows {
        let size = match kind {
            TestKind::Binomial => format!("{}", r.size as u64),
            TestKind::Poisson => km(r.size),
        };
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            num(r.alternative),
            size,
            num(r.achieved_power),
            r.critical_count
        );
    }
    csv
}

pub fn curve_file_name(spec: &PanelSpec, share_alpha: f64) -> String {
    format!(
        "curve_{}_{}_alpha{}_split{}.csv",
        spec.panel.as_str(),
        num(spec.threshold),
        num(spec.alpha),
        num(share_alpha)
    )
}

pub fn run(g: &Globals, args: &ReproduceArgs, out: &mut dyn Write) -> CliResult<u8> {
    let cfg = ToolkitConfig::load_optional(g.config.as_deref())?;
    let dir: PathBuf = g
        .out
        .clone()
        .or(cfg.paths.output_dir)
        .unwrap_or_else(|| PathBuf::from("."));
    match args.artifact {
        Artifact::Table1 => {
            let csv = table1_csv()?;
            let _ = write!(out, "{csv}");
            let path = write_file(&dir, "table1.csv", &csv)?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
        Artifact::Curves => {
            let grid_of = |t: f64| alternative_grid(t, 0.1, 0.9, args.points);
            let mut written = 0;
            for spec in figure_panels() {
                if args.panel.is_some_and(|p| p != spec.panel)
                    || args.alpha.is_some_and(|a| !close(a, spec.alpha))
                {
                    continue;
                }
                let wanted = match spec.panel {
                    Panel::P => args.pc,
                    Panel::Lambda => args.lambdac,
                };
                if wanted.is_some_and(|t| !close(t, spec.threshold)) {
                    continue;
                }
                for share in SPLIT_SHARES {
                    let a = (share * spec.alpha * 1e12).round() / 1e12;
                    if args.alpha_split.is_some_and(|s| !close(s, a)) {
                        continue;
                    }
                    let rows = sample_size_curve(
                        spec.panel.kind(),
                        spec.threshold,
                        a,
                        DEFAULT_POWER_GOAL,
                        &grid_of(spec.threshold),
                    )?;
                    let path = write_file(
                        &dir,
                        &curve_file_name(&spec, a),
                        &curve_csv(spec.panel.kind(), &rows),
                    )?;
                    let _ = writeln!(out, "wrote {}", path.display());
                    written += 1;
                }
            }
            if written == 0 {
                return Err(crate::CliError::usage(
                    "no figure panel matches the filters",
                ));
            }
        }
    }
    Ok(EXIT_OK)
}
