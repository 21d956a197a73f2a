use std::collections::BTreeMap;

use gaussgeo::ahm::{interpolate, midpoint_n, AhmOptions, MidpointOptions};
use gaussgeo::geodesic::{
    distance, exp_map_from, first_integrals, geodesic_residual, shoot_log, GeodesicTrajectory, HorizontalGeodesic,
    ShootingOptions,
};
use gaussgeo::io::{lax_csv, trajectory_csv, PointRecord, TangentRecord};
use gaussgeo::laxflow::{integrate, verify_lax, LaxMatrices, LaxOrbit, LaxRhs};
use gaussgeo::manifold::{embed, fisher_numeric, metric_at, EmbeddedPoint};
use gaussgeo::matcore::{block_cholesky, check_special_symmetry, SymMatrix};
use gaussgeo::{GaussianPoint, MetricConvention, TangentN};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::input::{pair_input, point_input, read_bytes, tangent_input};
use crate::report::{digest, Check, Report};
use crate::{CliError, Command, Output, RunConfig};

// verify thresholds
const GEO_RESIDUAL: f64 = 1e-6;
const DRIFT: f64 = 1e-6;
const SYMMETRY: f64 = 1e-10;
const DET: f64 = 1e-9;
const STRUCTURE: f64 = 1e-10;
const LAX_COMMUTATOR: f64 = 1e-5;
const LAX_SPECTRAL: f64 = 1e-7;
const LAX_ORBIT: f64 = 1e-6;
// other commands
const ROUND_TRIP: f64 = 1e-8;
const MIDPOINT_CROSS: f64 = 1e-8;
const MEMBERSHIP: f64 = 1e-10;
const ON_GEODESIC: f64 = 1e-7;
const EQUAL_GAPS: f64 = 1e-6;
const FISHER: f64 = 1e-6;

fn shooting(cfg: &RunConfig) -> ShootingOptions {
    ShootingOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        ..ShootingOptions::default()
    }
}

fn midpoint_opts(cfg: &RunConfig) -> MidpointOptions {
    MidpointOptions {
        ahm: AhmOptions {
            tol: cfg.tol,
            max_iter: cfg.ahm_max_iter,
        },
        shooting: shooting(cfg),
    }
}

struct Ctx<'a> {
    bytes: Vec<u8>,
    cfg: &'a RunConfig,
    cmd: &'a Command,
}

impl Ctx<'_> {
    fn report(&self, results: serde_json::Value, checks: BTreeMap<String, Check>) -> Output {
        Output::Json(Report {
            command: self.cmd.name().into(),
            inputs_digest: digest(&self.bytes, &(self.cmd, self.cfg)),
            results,
            checks,
        })
    }
}

fn gap(a: &GaussianPoint, b: &GaussianPoint) -> f64 {
    (a.sigma.as_matrix() - b.sigma.as_matrix()).norm() + (&a.mu - &b.mu).norm()
}

fn point_json(p: &GaussianPoint) -> serde_json::Value {
    serde_json::to_value(PointRecord::from_point(p)).expect("record serializes")
}

fn tangent_json(xi: &TangentN) -> serde_json::Value {
    serde_json::to_value(TangentRecord::from_tangent(xi)).expect("record serializes")
}

fn required_input(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    read_bytes(cfg.input.as_deref().unwrap_or("-".as_ref()))
}

/// Symmetric entries and mean entries standard-uniform on `[-1, 1]`,
/// rescaled to the requested length in the default convention.
fn random_tangent(rng: &mut ChaCha8Rng, n: usize, length: f64) -> Result<TangentN, CliError> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let cov = SymMatrix::from_symmetrized(&a);
    let mean = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let xi = TangentN::new(cov, mean)?;
    let norm = xi.norm();
    Ok(if norm > 0.0 { xi.scale(length / norm) } else { xi })
}

pub fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Output, CliError> {
    match cmd {
        Command::Shoot { t_end } => shoot(cfg, *t_end),
        Command::Lax { t_end, rhs } => lax(cfg, *t_end, *rhs),
        Command::Log => log_cmd(Ctx { bytes: required_input(cfg)?, cfg, cmd }),
        Command::Dist => dist(Ctx { bytes: required_input(cfg)?, cfg, cmd }),
        Command::Midpoint => midpoint(Ctx { bytes: required_input(cfg)?, cfg, cmd }),
        Command::Interp { depth } => interp(Ctx { bytes: required_input(cfg)?, cfg, cmd }, *depth),
        Command::Verify { t_end, perturb } => {
            let bytes = match (&cfg.input, cfg.seed) {
                (Some(p), _) => read_bytes(p)?,
                (None, Some(_)) => Vec::new(),
                (None, None) => required_input(cfg)?,
            };
            verify(Ctx { bytes, cfg, cmd }, *t_end, *perturb)
        }
        Command::FisherCheck { nodes } => {
            let bytes = match &cfg.input {
                Some(p) => read_bytes(p)?,
                None => Vec::new(),
            };
            fisher_check(Ctx { bytes, cfg, cmd }, *nodes)
        }
    }
}

fn shoot(cfg: &RunConfig, t_end: f64) -> Result<Output, CliError> {
    let inp = tangent_input(&required_input(cfg)?)?;
    let base = inp.point.unwrap_or_else(|| GaussianPoint::identity(inp.tangent.dim()));
    let traj = match &inp.t_grid {
        Some(ts) => GeodesicTrajectory::sample(&base, &inp.tangent, ts)?,
        None => {
            if !t_end.is_finite() {
                return Err(CliError::Input("--t-end must be finite".into()));
            }
            GeodesicTrajectory::uniform(&base, &inp.tangent, 0.0, t_end, cfg.steps)?
        }
    };
    for (t, p) in traj.ts.iter().zip(&traj.points) {
        let h = embed(p)?.matrix().clone();
        EmbeddedPoint::new(h).map_err(|e| CliError::Numerical(format!("t = {t}: {e}")))?;
    }
    log::info!("{} samples", traj.len());
    Ok(Output::Csv(trajectory_csv(&traj)))
}

fn lax(cfg: &RunConfig, t_end: f64, rhs: LaxRhs) -> Result<Output, CliError> {
    let inp = tangent_input(&required_input(cfg)?)?;
    let samples = integrate(rhs, &inp.tangent, t_end, cfg.dt)?;
    Ok(Output::Csv(lax_csv(&samples)))
}

fn log_cmd(ctx: Ctx) -> Result<Output, CliError> {
    let (p, q) = pair_input(&ctx.bytes)?;
    let sol = shoot_log(&p, &q, &shooting(ctx.cfg))?;
    let end = exp_map_from(&p, &sol.tangent, 1.0)?;
    let length = sol.tangent.norm() * ctx.cfg.metric.factor().sqrt();
    let mut checks = BTreeMap::new();
    checks.insert("round_trip".into(), Check::at_most(gap(&end, &q), ROUND_TRIP));
    Ok(ctx.report(
        json!({
            "tangent": tangent_json(&sol.tangent),
            "chart": "normalized at p",
            "length": length,
            "metric": ctx.cfg.metric.to_string(),
            "residual": sol.residual,
            "iterations": sol.iterations,
        }),
        checks,
    ))
}

fn dist(ctx: Ctx) -> Result<Output, CliError> {
    let (p, q) = pair_input(&ctx.bytes)?;
    let opts = shooting(ctx.cfg);
    let d = distance(&p, &q, ctx.cfg.metric, &opts)?;
    let back = distance(&q, &p, ctx.cfg.metric, &opts)?;
    let mut checks = BTreeMap::new();
    checks.insert("symmetry".into(), Check::at_most((d - back).abs(), ROUND_TRIP * d.max(1.0)));
    Ok(ctx.report(
        json!({ "distance": d, "metric": ctx.cfg.metric.to_string() }),
        checks,
    ))
}

fn midpoint(ctx: Ctx) -> Result<Output, CliError> {
    let (p, q) = pair_input(&ctx.bytes)?;
    let opts = midpoint_opts(ctx.cfg);
    let m = midpoint_n(&p, &q, &opts)?;
    let d1 = distance(&p, &m.point, ctx.cfg.metric, &opts.shooting)?;
    let d2 = distance(&m.point, &q, ctx.cfg.metric, &opts.shooting)?;
    let mut checks = BTreeMap::new();
    checks.insert("cross_check".into(), Check::at_most(m.cross_check, MIDPOINT_CROSS));
    checks.insert("membership".into(), Check::at_most(m.membership, MEMBERSHIP));
    checks.insert(
        "equidistance".into(),
        Check::at_most((d1 - d2).abs(), MIDPOINT_CROSS * d1.max(1.0)),
    );
    Ok(ctx.report(
        json!({
            "midpoint": point_json(&m.point),
            "iterations": m.iterations,
            "distances": [d1, d2],
            "metric": ctx.cfg.metric.to_string(),
        }),
        checks,
    ))
}

fn interp(ctx: Ctx, depth: u32) -> Result<Output, CliError> {
    let (p, q) = pair_input(&ctx.bytes)?;
    let opts = midpoint_opts(ctx.cfg);
    let pts = interpolate(&p, &q, depth, &opts)?;
    let xi = shoot_log(&p, &q, &opts.shooting)?.tangent;
    let last = (pts.len() - 1) as f64;
    let mut off = 0.0f64;
    let mut gaps = Vec::with_capacity(pts.len() - 1);
    for (k, pt) in pts.iter().enumerate() {
        off = off.max(gap(pt, &exp_map_from(&p, &xi, k as f64 / last)?));
        if k > 0 {
            gaps.push(distance(&pts[k - 1], pt, ctx.cfg.metric, &opts.shooting)?);
        }
    }
    let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().copied().fold(0.0, f64::max);
    let mut checks = BTreeMap::new();
    checks.insert("on_geodesic".into(), Check::at_most(off, ON_GEODESIC));
    checks.insert("equal_gaps".into(), Check::at_most(hi - lo, EQUAL_GAPS));
    let points: Vec<_> = pts
        .iter()
        .enumerate()
        .map(|(k, pt)| json!({ "s": k as f64 / last, "point": point_json(pt) }))
        .collect();
    Ok(ctx.report(json!({ "depth": depth, "points": points }), checks))
}

fn verify(ctx: Ctx, t_end: f64, perturb: f64) -> Result<Output, CliError> {
    let cfg = ctx.cfg;
    let xi = if ctx.bytes.is_empty() {
        let seed = cfg.seed.expect("dispatch checked");
        random_tangent(&mut ChaCha8Rng::seed_from_u64(seed), cfg.dim, 1.0)?
    } else {
        tangent_input(&ctx.bytes)?.tangent
    };
    if !(t_end > 0.0 && t_end.is_finite()) || !perturb.is_finite() {
        return Err(CliError::Input("--t-end must be positive and --perturb finite".into()));
    }
    let steps = (t_end / cfg.dt).round() as usize;
    if steps < 4 || ((steps as f64) * cfg.dt - t_end).abs() > 1e-9 * t_end {
        return Err(CliError::Input("--dt must divide --t-end into at least 4 steps".into()));
    }
    let n = xi.dim();
    let h = cfg.dt;
    let base = GaussianPoint::identity(n);
    let mut traj = GeodesicTrajectory::uniform(&base, &xi, 0.0, t_end, steps)?;
    if perturb != 0.0 {
        for (t, p) in traj.ts.iter().zip(traj.points.iter_mut()) {
            let bump = perturb * t * t;
            let sigma = p.sigma.as_matrix() + DMatrix::identity(n, n) * bump;
            let mu = p.mu.add_scalar(bump);
            *p = GaussianPoint::new(gaussgeo::SpdMatrix::new(sigma)?, mu)?;
        }
    }
    let residual = geodesic_residual(&traj, h)?;
    let fi = first_integrals(&traj, h)?;

    let geo = HorizontalGeodesic::new(&xi)?;
    let (mut symmetry, mut det, mut structure) = (0.0f64, 0.0f64, 0.0f64);
    for &t in &traj.ts {
        let g = geo.lift(t)?;
        symmetry = symmetry.max(check_special_symmetry(&g)?);
        det = det.max((g.determinant() - 1.0).abs());
        structure = structure.max(block_cholesky(&g)?.structure_residuals().max());
    }

    let mut samples = integrate(LaxRhs::V1, &xi, t_end, cfg.dt)?;
    if perturb != 0.0 {
        for s in samples.iter_mut() {
            s.state.q[(0, 0)] += perturb * s.t;
        }
    }
    let lax = verify_lax(&samples, &xi.mean, h)?;
    let orbit = LaxOrbit::new(&xi)?;
    let mut orbit_gap = 0.0f64;
    for s in &samples {
        let l = LaxMatrices::build(&s.state, &xi.mean)?.l;
        orbit_gap = orbit_gap.max((l - orbit.at(s.t)?.l).norm());
    }

    let mut checks = BTreeMap::new();
    let mut add = |k: &str, v, t| {
        checks.insert(k.to_string(), Check::at_most(v, t));
    };
    add("geodesic_residual", residual, GEO_RESIDUAL);
    add("first_integral_drift", fi.mean_drift.max(fi.cov_drift), DRIFT);
    add("lift_symmetry", symmetry, SYMMETRY);
    add("lift_det", det, DET);
    add("lift_block_structure", structure, STRUCTURE);
    add("lax_commutator", lax.commutator, LAX_COMMUTATOR);
    add("lax_spectral", lax.spectral, LAX_SPECTRAL);
    add("lax_closed_form", orbit_gap, LAX_ORBIT);
    Ok(ctx.report(
        json!({
            "tangent": tangent_json(&xi),
            "t_end": t_end,
            "dt": cfg.dt,
            "samples": traj.len(),
            "perturb": perturb,
        }),
        checks,
    ))
}

fn fisher_check(ctx: Ctx, nodes: usize) -> Result<Output, CliError> {
    let cfg = ctx.cfg;
    let p = if !ctx.bytes.is_empty() {
        point_input(&ctx.bytes)?
    } else if let Some(seed) = cfg.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xi = random_tangent(&mut rng, cfg.dim, 1.0)?;
        exp_map_from(&GaussianPoint::identity(cfg.dim), &xi, 1.0)?
    } else {
        GaussianPoint::identity(cfg.dim)
    };
    let n = p.dim();
    let len = TangentN::coord_len(n);
    let basis = (0..len)
        .map(|k| TangentN::from_coords(n, &DVector::from_fn(len, |i, _| if i == k { 1.0 } else { 0.0 })))
        .collect::<Result<Vec<_>, _>>()?;
    let mut numeric = DMatrix::zeros(len, len);
    let mut exact = DMatrix::zeros(len, len);
    for (i, x) in basis.iter().enumerate() {
        for (j, y) in basis.iter().enumerate() {
            numeric[(i, j)] = fisher_numeric(&p, x, y, nodes)?;
            exact[(i, j)] = metric_at(&p, x, y, MetricConvention::Fisher)?;
        }
    }
    let worst = (&numeric - &exact).amax();
    let scale = exact.amax().max(1.0);
    let mut checks = BTreeMap::new();
    checks.insert("fisher_vs_metric".into(), Check::at_most(worst, FISHER * scale));
    Ok(ctx.report(
        json!({
            "point": point_json(&p),
            "nodes": nodes,
            "numeric": gaussgeo::io::matrix_to_rows(&numeric),
            "closed_form": gaussgeo::io::matrix_to_rows(&exact),
            "max_abs_error": worst,
        }),
        checks,
    ))
}
