use clap::Args;
use serde::Serialize;

use bowtie_core::nvspin::{sweep, sweep_to_csv, transition_frequencies, zeeman_tune, Branch, NvAxes, SpinLevels};

use super::{parse_triple, vec3, Context, SpeciesArgs};
use crate::error::CliError;
use crate::output::Table;

#[derive(Args, Debug)]
pub struct SpinsArgs {
    /// Static field direction in crystal coordinates, e.g. 0,1,0 (normalized)
    #[arg(long, value_parser = parse_triple)]
    pub direction: Option<[f64; 3]>,
    /// Largest field magnitude of the sweep [mT]
    #[arg(long = "b-max-mT")]
    pub b_max_mt: Option<f64>,
    /// Number of field values in the sweep
    #[arg(long)]
    pub steps: Option<usize>,
    /// Find the field that puts a transition at this frequency [GHz]
    #[arg(long = "tune-to-GHz")]
    pub tune_to_ghz: Option<f64>,
    /// Transition branch used for tuning
    #[arg(long, value_enum)]
    pub branch: Option<BranchArg>,
    #[command(flatten)]
    pub species: SpeciesArgs,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy)]
pub enum BranchArg {
    Lower,
    Upper,
}

impl From<BranchArg> for Branch {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::Lower => Branch::Lower,
            BranchArg::Upper => Branch::Upper,
        }
    }
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct Tuning {
    target_Hz: f64,
    branch: Branch,
    B_T: f64,
    achieved_Hz: f64,
    axes: Vec<SpinLevels>,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct SpinsReport {
    direction: [f64; 3],
    zero_field_splitting_Hz: f64,
    g_factor: f64,
    sweep_points: usize,
    b_max_T: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tuning: Option<Tuning>,
}

pub fn run(ctx: Context, args: SpinsArgs) -> Result<(), CliError> {
    let cfg = &ctx.cfg.spins;
    let species = args.species.resolve(&ctx.cfg.species)?;
    let raw = vec3(args.direction.or(cfg.direction).unwrap_or([0.0, 1.0, 0.0]));
    let norm = raw.norm();
    // Zero or non-finite directions fall through to the axis check, which rejects them.
    let direction = if norm > 0.0 && norm.is_finite() { raw / norm } else { raw };
    let b_max = args.b_max_mt.map(|b| b * 1e-3).or(cfg.b_max_T).unwrap_or(0.02);
    let steps = args.steps.or(cfg.steps).unwrap_or(201);
    if steps < 2 || !(b_max > 0.0 && b_max.is_finite()) {
        return Err(CliError::Invalid(format!("sweep needs steps ≥ 2 and b_max > 0, got {steps} and {b_max} T")));
    }
    let axes = NvAxes::default();
    let fields: Vec<f64> = (0..steps).map(|i| b_max * i as f64 / (steps - 1) as f64).collect();
    let rows = sweep(&species, &axes, &direction, &fields)?;

    let tuning = match args.tune_to_ghz.map(|f| f * 1e9).or(cfg.tune_to_Hz) {
        Some(target) => {
            let branch: Branch = args.branch.map(Into::into).or(cfg.branch).unwrap_or(Branch::Upper);
            let b = zeeman_tune(&species, &axes, &direction, target, branch)?;
            let levels = axes
                .iter()
                .map(|a| transition_frequencies(&species, a, &(direction * b)))
                .collect::<Result<Vec<_>, _>>()?;
            Some(Tuning { target_Hz: target, branch, B_T: b, achieved_Hz: levels[0].branch(branch), axes: levels })
        }
        None => None,
    };

    let report = SpinsReport {
        direction: [direction.x, direction.y, direction.z],
        zero_field_splitting_Hz: species.zero_field_splitting,
        g_factor: species.g_factor,
        sweep_points: steps,
        b_max_T: b_max,
        tuning,
    };

    let mut out = ctx.output()?;
    out.write("spins_sweep.csv", &sweep_to_csv(&rows))?;
    out.write_json("spins.json", &report)?;
    out.write_plot("spins_sweep.dat", || {
        // One gnuplot data block per axis.
        let mut s = String::from("# B_T f_lower_Hz f_upper_Hz\n");
        for axis in 0..4 {
            s.push_str(&format!("# axis {axis}\n"));
            for r in rows.iter().filter(|r| r.axis_index == axis) {
                s.push_str(&format!("{:e} {:e} {:e}\n", r.field_t, r.f_lower_hz, r.f_upper_hz));
            }
            s.push_str("\n\n");
        }
        s
    })?;

    let mut t = Table::default();
    t.row("direction", format!("[{:.4}, {:.4}, {:.4}]", direction.x, direction.y, direction.z));
    let zero = &rows[0];
    t.row("f at B=0", format!("{:.6} / {:.6} GHz", zero.f_lower_hz * 1e-9, zero.f_upper_hz * 1e-9));
    let last = &rows[rows.len() - 4];
    t.row(
        &format!("f at B={:.3} mT", b_max * 1e3),
        format!("{:.6} / {:.6} GHz (axis 0)", last.f_lower_hz * 1e-9, last.f_upper_hz * 1e-9),
    );
    if let Some(tu) = &report.tuning {
        t.row("tuned field B*", format!("{:.6} mT", tu.B_T * 1e3));
        t.row("achieved", format!("{:.3} Hz off target", tu.achieved_Hz - tu.target_Hz));
    }
    ctx.report(&t, &report, &out)
}
