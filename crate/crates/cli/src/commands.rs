use serde_json::{json, Value};

use cvbell::bell::{optimize_angles, sweep_r0, OptimizerSettings, SweepSettings};
use cvbell::fock::circle_state_coeffs;
use cvbell::homodyne::{
    coarse_grained_s, convergence_report, joint_photocurrent_dist, outcome_gram, site_distribution_from_gram,
    LocalOscillator,
};
use cvbell::lhv::{lhv_noisy_s, lhv_noisy_s_exact, max_exact_lhv_s, random_angles, NoisyJointDensity};
use cvbell::quadrature::{density_grid, slope_sign_changes};
use cvbell::{BellAngles, BellResult, CircleStateCoeffs, Execution};

use crate::args::{Command, Report};
use crate::output::{Cell, Table};
use crate::CliError;

pub struct Context {
    pub exec: Execution,
    pub tail_tol: f64,
}

impl Context {
    fn state(&self, r0: f64) -> Result<CircleStateCoeffs, CliError> {
        Ok(circle_state_coeffs(r0, self.tail_tol)?)
    }
}

pub fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Sweep { .. } => "sweep",
        Command::Optimize { .. } => "optimize",
        Command::Dist { .. } => "dist",
        Command::Lhv { .. } => "lhv",
        Command::Homodyne { .. } => "homodyne",
    }
}

pub fn run(cmd: &Command, ctx: &Context) -> Result<Table, CliError> {
    match cmd {
        Command::Sweep { r0, angles } => {
            let mut settings = SweepSettings::new(r0.min, r0.max, r0.step, (*angles).into());
            settings.tail_tol = ctx.tail_tol;
            sweep(&settings, ctx)
        }
        Command::Optimize { r0, grid_points } => optimize(&r0.values(), *grid_points, ctx),
        Command::Dist { r0, chi, grid, noisy } => {
            let coeffs = ctx.state(*r0)?;
            let g = if *noisy {
                NoisyJointDensity::new(&coeffs, *chi, 0.0)?.grid(grid, grid, ctx.exec)
            } else {
                density_grid(&coeffs, *chi, grid, grid, ctx.exec)
            };
            let mut t = Table::new(&["x", "y", "density"]);
            for (i, &x) in g.x_grid.iter().enumerate() {
                for (j, &y) in g.y_grid.iter().enumerate() {
                    t.push(vec![x.into(), y.into(), g.value(i, j).into()]);
                }
            }
            t.note("trapezoid_mass", json!(g.trapezoid_mass()));
            let maxima: Vec<Value> = g
                .local_maxima()
                .iter()
                .take(4)
                .map(|(v, x, y)| json!({"x": x, "y": y, "density": v}))
                .collect();
            t.note("largest_local_maxima", Value::Array(maxima));
            if let Some(diag) = g.anti_diagonal() {
                let profile: Vec<f64> = diag.iter().map(|p| p.1).collect();
                t.note("anti_diagonal_slope_changes", json!(slope_sign_changes(&profile)));
            }
            Ok(t)
        }
        Command::Lhv {
            r0,
            angles,
            samples,
            seed,
            random_angles: n_random,
        } => {
            let angles = angles.angles();
            let scan = random_angles(*n_random, *seed);
            let mut t = Table::new(&[
                "r0",
                "s_mc",
                "s_std_err",
                "s_exact",
                "p_pp_1",
                "p_pp_2",
                "p_pp_3",
                "p_pp_4",
                "samples",
                "seed",
                "acceptance",
                "max_s_exact_random",
                "argmax_theta",
                "argmax_phi",
                "argmax_theta_p",
                "argmax_phi_p",
            ]);
            for r in r0.values() {
                let coeffs = ctx.state(r)?;
                let est = lhv_noisy_s(&coeffs, &angles, *samples, *seed, ctx.exec)?;
                let exact = lhv_noisy_s_exact(&coeffs, &angles);
                let mut row: Vec<Cell> = vec![r.into(), est.s.mean.into(), est.s.std_err.into(), exact.s.into()];
                row.extend(est.p_pp.iter().map(|e| Cell::from(e.mean)));
                row.extend([(*samples).into(), (*seed).into(), est.acceptance.into()]);
                match max_exact_lhv_s(&coeffs, &scan, ctx.exec) {
                    Some(best) => {
                        let a = best.angles;
                        row.extend([best.s, a.theta, a.phi, a.theta_p, a.phi_p].map(Cell::from));
                    }
                    None => row.extend([f64::NAN; 5].map(Cell::from)),
                }
                t.push(row);
            }
            t.note("random_angle_quadruples", json!(n_random));
            Ok(t)
        }
        Command::Homodyne {
            r0,
            amplitudes,
            angles,
            report,
            widths,
            min_prob,
            solver,
        } => {
            let coeffs = ctx.state(*r0)?;
            let angles = angles.angles();
            let solver = (*solver).into();
            let es = &amplitudes.0;
            let first = || -> Result<LocalOscillator, CliError> {
                let e = es.first().ok_or_else(|| CliError::Usage("--E needs at least one value".into()))?;
                Ok(LocalOscillator::new(*e)?)
            };
            match report {
                Report::Convergence => {
                    let rows = convergence_report(&coeffs, &angles, es, solver, ctx.exec)?;
                    let mut t = Table::new(&["E", "lo_cutoff", "s_e", "s_ideal", "abs_error", "leakage"]);
                    for p in rows {
                        t.push(vec![
                            p.amplitude.into(),
                            p.lo_cutoff.into(),
                            p.s_e.into(),
                            p.s_ideal.into(),
                            p.error.into(),
                            p.leakage.into(),
                        ]);
                    }
                    Ok(t)
                }
                Report::Table => {
                    let lo = first()?;
                    let table = joint_photocurrent_dist(&coeffs, &lo, angles.theta, angles.phi, solver, ctx.exec)?;
                    let mut t = Table::new(&["mu", "nu", "probability"]);
                    let mut omitted = 0.0;
                    let n = table.outcomes.len();
                    for (i, &mu) in table.outcomes.iter().enumerate() {
                        for (j, &nu) in table.outcomes.iter().enumerate() {
                            let p = table.probs[i * n + j];
                            if p >= *min_prob {
                                t.push(vec![mu.into(), nu.into(), p.into()]);
                            } else {
                                omitted += p;
                            }
                        }
                    }
                    t.note("E", json!(lo.amplitude()));
                    t.note("chi", json!(table.chi));
                    t.note("total_probability", json!(table.total()));
                    t.note("omitted_probability", json!(omitted));
                    t.note("leakage_bound", json!(table.leakage));
                    Ok(t)
                }
                Report::Distribution => {
                    let mut t = Table::new(&["E", "mu", "scaled", "probability"]);
                    let mut ks = Vec::new();
                    for &e in es {
                        let lo = LocalOscillator::new(e)?;
                        let gram = outcome_gram(coeffs.cutoff(), &lo, solver, ctx.exec)?;
                        let dist = site_distribution_from_gram(&coeffs, &gram);
                        for (&mu, &p) in dist.outcomes.iter().zip(&dist.probs) {
                            let scaled = if e > 0.0 { mu as f64 / e } else { f64::NAN };
                            t.push(vec![e.into(), mu.into(), scaled.into(), p.into()]);
                        }
                        if e > 0.0 {
                            let d = dist.ks_against_quadrature(&coeffs, e)?;
                            ks.push(json!({"E": e, "smoothed": d.smoothed, "lattice": d.lattice}));
                        }
                    }
                    t.note("ks_distance", Value::Array(ks));
                    Ok(t)
                }
                Report::Coarse => {
                    let lo = first()?;
                    let pts = coarse_grained_s(&coeffs, &lo, &angles, &widths.0, solver, ctx.exec)?;
                    let mut t = Table::new(&["width", "s"]);
                    for p in pts {
                        t.push(vec![p.width.into(), p.s.into()]);
                    }
                    t.note("E", json!(lo.amplitude()));
                    Ok(t)
                }
            }
        }
    }
}

fn bell_cells(r: &BellResult) -> Vec<Cell> {
    let a = r.angles;
    vec![
        r.r0.into(),
        r.s.into(),
        r.violates().into(),
        r.p_pp[0].into(),
        r.p_pp[1].into(),
        r.p_pp[2].into(),
        r.p_pp[3].into(),
        r.denominator.into(),
        a.theta.into(),
        a.phi.into(),
        a.theta_p.into(),
        a.phi_p.into(),
    ]
}

const BELL_COLUMNS: [&str; 12] = [
    "r0",
    "s",
    "violates",
    "p_pp_1",
    "p_pp_2",
    "p_pp_3",
    "p_pp_4",
    "denominator",
    "theta",
    "phi",
    "theta_p",
    "phi_p",
];

fn sweep(settings: &SweepSettings, ctx: &Context) -> Result<Table, CliError> {
    let report = sweep_r0(settings, ctx.exec)?;
    let mut t = Table::new(&BELL_COLUMNS);
    for p in &report.points {
        t.push(bell_cells(p));
    }
    let best = report.argmax();
    t.note("argmax", json!({"r0": best.r0, "s": best.s}));
    t.note("violation_windows", serde_json::to_value(&report.windows).expect("plain data"));
    Ok(t)
}

fn optimize(r0s: &[f64], grid_points: usize, ctx: &Context) -> Result<Table, CliError> {
    let settings = OptimizerSettings {
        grid_points,
        ..OptimizerSettings::default()
    };
    let paper = BellAngles::PAPER.reduced();
    let mut t = Table::new(&[
        "r0",
        "s",
        "theta",
        "phi",
        "theta_p",
        "phi_p",
        "chi1",
        "chi2",
        "chi3",
        "paper_distance",
        "grid_best",
        "converged",
        "iterations",
    ]);
    for &r0 in r0s {
        let o = optimize_angles(&ctx.state(r0)?, &settings, ctx.exec)?;
        let a = o.result.angles;
        t.push(vec![
            r0.into(),
            o.result.s.into(),
            a.theta.into(),
            a.phi.into(),
            a.theta_p.into(),
            a.phi_p.into(),
            o.reduced.chi1.into(),
            o.reduced.chi2.into(),
            o.reduced.chi3.into(),
            o.reduced.distance_mod_symmetry(&paper).into(),
            o.grid_best.into(),
            o.converged.into(),
            o.iterations.into(),
        ]);
    }
    Ok(t)
}
