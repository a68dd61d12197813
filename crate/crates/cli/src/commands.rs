//! The seven subcommands. Each returns the process exit code.

use anyhow::{bail, Context, Result};
use billiards_core::geometry::hull_distance;
use billiards_core::orbits::OrbitRecord;
use billiards_core::{
    advance, build_db, contact_reflection_check, det_grid, find_resonances, resolvent_identity_defect,
    resolvent_matrix_coeff, residue, trapped_set_grid, zeta_weighted, BumpCutoff, Determinant, Disc,
    FlowOptions, NewtonOptions, ObstacleSet, OrbitDb, PhaseState, Termination, TestFunction, Vec2, Weight,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::output::{print_json, OutDir};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

fn load_set(cfg: &RunConfig) -> Result<ObstacleSet> {
    let path = cfg.obstacles_path()?;
    ObstacleSet::load(path).with_context(|| format!("loading obstacles from {}", path.display()))
}

fn domain_radius(cfg: &RunConfig, set: &ObstacleSet) -> f64 {
    cfg.r_dom.unwrap_or_else(|| set.default_domain_radius())
}

fn newton_opts(cfg: &RunConfig) -> NewtonOptions {
    NewtonOptions {
        tol: cfg.newton_tol,
        grazing_tol: cfg.grazing_tol,
        ..Default::default()
    }
}

fn flow_opts(cfg: &RunConfig) -> FlowOptions {
    FlowOptions {
        grazing_tol: cfg.grazing_tol,
        ..Default::default()
    }
}

fn weight(cfg: &RunConfig) -> Result<Weight> {
    Weight::from_spec(&cfg.weight).context("invalid weight spec")
}

fn complex(z: [f64; 2]) -> Complex64 {
    Complex64::new(z[0], z[1])
}

/// The configured orbit database, or a freshly built one.
fn orbit_db(cfg: &RunConfig, set: &ObstacleSet) -> Result<OrbitDb> {
    let opts = newton_opts(cfg);
    match &cfg.orbit_db {
        Some(path) => {
            let db = OrbitDb::load(set, path, &opts)
                .with_context(|| format!("loading orbit database {}", path.display()))?;
            if db.max_len < cfg.zeta.max_len {
                log::warn!(
                    "orbit database holds orbits up to {} bounces, zeta.max_len is {}",
                    db.max_len,
                    cfg.zeta.max_len
                );
            }
            Ok(db)
        }
        None => Ok(build_db(set, cfg.zeta.max_len, &opts)),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSet {
    discs: Vec<Disc>,
}

/// Disjointness and no-eclipse reports on the raw disc list, so overlapping
/// discs are reported as violations rather than load errors.
pub fn geometry_check(cfg: &RunConfig) -> Result<u8> {
    let path = cfg.obstacles_path()?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw: RawSet = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let discs = raw.discs;
    if discs.is_empty() {
        bail!("obstacle set is empty");
    }
    for (i, d) in discs.iter().enumerate() {
        if !(d.radius > 0.0 && d.radius.is_finite()) || !d.center.x.is_finite() || !d.center.y.is_finite() {
            bail!("disc {} has an invalid center or radius", i + 1);
        }
    }
    let mut overlaps = Vec::new();
    let mut eclipses = Vec::new();
    for i in 0..discs.len() {
        for j in i + 1..discs.len() {
            let (a, b) = (&discs[i], &discs[j]);
            let dist = a.center.dist(b.center);
            if dist <= a.radius + b.radius {
                overlaps.push(json!({"i": i, "j": j, "gap": dist - a.radius - b.radius}));
            }
            for (k, c) in discs.iter().enumerate() {
                if k == i || k == j {
                    continue;
                }
                // A nested pair has no two-tangent hull; it is already an overlap.
                let blocked = (a.radius - b.radius).abs() >= dist
                    || hull_distance(a, b, c.center) - c.radius <= 0.0;
                if blocked {
                    eclipses.push([i, j, k]);
                }
            }
        }
    }
    let holds = overlaps.is_empty() && eclipses.is_empty();
    print_json(&json!({
        "command": "geometry-check",
        "schema_version": SCHEMA_VERSION,
        "n_discs": discs.len(),
        "disjoint": {"holds": overlaps.is_empty(), "violations": overlaps},
        "no_eclipse": {"holds": eclipses.is_empty(), "violations": eclipses},
        "holds": holds,
    }))?;
    Ok(if holds { EXIT_OK } else { EXIT_VIOLATION })
}

pub fn simulate(cfg: &RunConfig) -> Result<u8> {
    let sim = cfg.simulate.as_ref().context("simulate needs a `simulate` section {x, v | angle, horizon}")?;
    let set = load_set(cfg)?;
    let x = Vec2::new(sim.x[0], sim.x[1]);
    let state = match (sim.v, sim.angle) {
        (Some(v), None) => {
            let v = Vec2::new(v[0], v[1]);
            if !(v.norm() > 0.0 && v.norm().is_finite()) {
                bail!("simulate.v must be a nonzero finite vector");
            }
            PhaseState::new(x, v.normalized())?
        }
        (None, Some(a)) if a.is_finite() => PhaseState::from_angle(x, a),
        _ => bail!("give exactly one of simulate.v and simulate.angle"),
    };
    let res = advance(&set, state, sim.horizon, &flow_opts(cfg))?;
    eprintln!(
        "simulate: {} collisions, elapsed {}, termination {:?}{}",
        res.collisions.len(),
        res.elapsed,
        res.termination,
        if res.termination == Termination::GrazingHit {
            " (trajectory ceases at a grazing collision)"
        } else {
            ""
        }
    );
    let out = OutDir::create(&cfg.output_dir)?;
    out.csv("trajectory.csv", &["t", "x", "y"], res.polyline())?;
    out.json(
        "flow.json",
        &json!({
            "command": "simulate",
            "schema_version": SCHEMA_VERSION,
            "seed": cfg.seed,
            "set_hash": set.set_hash(),
            "grazing_tol": cfg.grazing_tol,
            "horizon": sim.horizon,
            "grazing": res.termination == Termination::GrazingHit,
            "result": res,
        }),
    )?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct OrbitRow {
    itinerary: String,
    #[serde(rename = "T_prim")]
    t_prim: f64,
    abs_lambda: f64,
    residual: f64,
}

pub fn orbits(cfg: &RunConfig) -> Result<u8> {
    let set = load_set(cfg)?;
    let db = build_db(&set, cfg.zeta.max_len, &newton_opts(cfg));
    let out = OutDir::create(&cfg.output_dir)?;
    db.save(out.path("orbits.jsonl"))?;
    out.csv(
        "orbits.csv",
        &["itinerary", "T_prim", "|Lambda|", "residual"],
        db.entries.iter().map(|o| {
            let rec = OrbitRecord::from(o);
            OrbitRow {
                itinerary: rec.itinerary.to_string(),
                t_prim: rec.t_prim,
                abs_lambda: rec.lambda.abs(),
                residual: rec.residual,
            }
        }),
    )?;
    let listed = |v: &[(billiards_core::Itinerary, String)]| -> Vec<serde_json::Value> {
        v.iter()
            .map(|(it, why)| json!({"itinerary": it.to_string(), "reason": why}))
            .collect()
    };
    let report = json!({
        "command": "orbits",
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "set_hash": db.set_hash,
        "max_len": cfg.zeta.max_len,
        "newton_tol": cfg.newton_tol,
        "found": db.len(),
        "summary": db.summary,
        "pruned": listed(&db.pruned),
        "failed": listed(&db.failed),
    });
    out.json("orbits_summary.json", &report)?;
    print_json(&report)?;
    if db.failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("orbits: {} itineraries failed without pruning evidence", db.failed.len());
        Ok(EXIT_NUMERICAL)
    }
}

#[derive(Serialize)]
struct ResonanceRow {
    re: f64,
    im: f64,
    residue_re: f64,
    residue_im: f64,
    residual: f64,
    stable: bool,
}

pub fn resonances(cfg: &RunConfig) -> Result<u8> {
    let set = load_set(cfg)?;
    let db = orbit_db(cfg, &set)?;
    let w = weight(cfg)?;
    let found = find_resonances(&cfg.region, &db, &cfg.zeta)?;
    let weighted = w != Weight::one();
    let mut entries = Vec::with_capacity(found.len());
    for (k, r) in found.iter().enumerate() {
        let nearest = found
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, o)| (o.lambda0 - r.lambda0).norm())
            .fold(f64::INFINITY, f64::min);
        let radius = (0.4 * nearest).min(0.1);
        let residue_f = if weighted {
            match residue(&w, r.lambda0, radius, &db, &cfg.zeta, 0) {
                Ok(z) => Some(z),
                Err(e) => {
                    log::warn!("weighted residue at {} failed: {e}", r.lambda0);
                    None
                }
            }
        } else {
            Some(r.residue_z1)
        };
        let mut v = serde_json::to_value(r)?;
        v["residue_f"] = serde_json::to_value(residue_f)?;
        entries.push(v);
    }
    let det = Determinant::new(&db, &cfg.zeta)?;
    let grid = det_grid(&det, &cfg.region, cfg.det_grid.nx, cfg.det_grid.ny);

    let out = OutDir::create(&cfg.output_dir)?;
    out.csv(
        "resonances.csv",
        &["re", "im", "residue_re", "residue_im", "residual", "stable"],
        found.iter().map(|r| ResonanceRow {
            re: r.lambda0.re,
            im: r.lambda0.im,
            residue_re: r.residue_z1.re,
            residue_im: r.residue_z1.im,
            residual: r.newton_residual,
            stable: r.stable_across_truncation,
        }),
    )?;
    out.csv("det_grid.csv", &["re", "im", "d_re", "d_im"], grid)?;
    out.json(
        "resonances.json",
        &json!({
            "command": "resonances",
            "schema_version": SCHEMA_VERSION,
            "seed": cfg.seed,
            "set_hash": db.set_hash,
            "zeta": cfg.zeta,
            "region": cfg.region,
            "weight": cfg.weight,
            "orbits": db.len(),
            "resonances": entries,
        }),
    )?;
    let stable = found.iter().filter(|r| r.stable_across_truncation).count();
    eprintln!("resonances: {} found, {} stable across truncations", found.len(), stable);
    Ok(if stable > 0 { EXIT_OK } else { EXIT_NUMERICAL })
}

pub fn zeta_eval(cfg: &RunConfig) -> Result<u8> {
    let set = load_set(cfg)?;
    let db = orbit_db(cfg, &set)?;
    let w = weight(cfg)?;
    let lambda = complex(cfg.zeta_eval.lambda);
    let direct = match zeta_weighted(lambda, &w, &db, &cfg.zeta) {
        Ok(z) => Some(z),
        Err(e) => {
            log::warn!("direct periodic-orbit sum failed: {e}");
            None
        }
    };
    let continued = Determinant::weighted(&db, &cfg.zeta, &w)?.zeta(lambda);
    let d = Determinant::new(&db, &cfg.zeta)?.eval(lambda);
    let report = json!({
        "command": "zeta-eval",
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "set_hash": db.set_hash,
        "zeta": cfg.zeta,
        "weight": cfg.weight,
        "lambda": lambda,
        "zeta_direct": direct,
        "zeta_continued": continued,
        "fredholm_det": d,
    });
    OutDir::create(&cfg.output_dir)?.json("zeta_eval.json", &report)?;
    print_json(&report)?;
    Ok(EXIT_OK)
}

/// Uniform point of the domain ball outside the obstacles, random direction.
fn interior_state(set: &ObstacleSet, center: Vec2, radius: f64, rng: &mut ChaCha8Rng) -> PhaseState {
    loop {
        let x = center + Vec2::new(rng.random_range(-radius..radius), rng.random_range(-radius..radius));
        if x.dist(center) < radius && set.containing(x).is_none() {
            return PhaseState::from_angle(x, rng.random_range(0.0..std::f64::consts::TAU));
        }
    }
}

pub fn resolvent(cfg: &RunConfig) -> Result<u8> {
    let set = load_set(cfg)?;
    let rc = &cfg.resolvent;
    let r_dom = domain_radius(cfg, &set);
    let lambda = complex(rc.lambda);
    let cutoff = BumpCutoff::standard(set.centroid(), r_dom);
    let f = TestFunction::new(weight(cfg)?, Some(cutoff));
    let g_spec = rc.g.clone().unwrap_or_else(|| cfg.weight.clone());
    let g = TestFunction::new(Weight::from_spec(&g_spec).context("invalid resolvent.g")?, Some(cutoff));
    let coeff = resolvent_matrix_coeff(&set, lambda, &f, &g, r_dom, rc.dt, rc.n_samples, cfg.seed)?;

    // Identity states use a generator derived from the seed, independent of the Monte-Carlo stream.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut defects = Vec::with_capacity(rc.identity_states);
    let mut skipped = 0usize;
    for _ in 0..rc.identity_states {
        let state = interior_state(&set, set.centroid(), r_dom, &mut rng);
        match resolvent_identity_defect(&set, lambda, &f, &state, r_dom, rc.dt, rc.fd_step) {
            Ok(d) => defects.push(d),
            Err(e) => {
                log::info!("identity check skipped at {:?}: {e}", state.x);
                skipped += 1;
            }
        }
    }
    let max = defects.iter().copied().fold(0.0, f64::max);
    let mean = if defects.is_empty() {
        0.0
    } else {
        defects.iter().sum::<f64>() / defects.len() as f64
    };
    let passed = !defects.is_empty() && max <= rc.identity_threshold;
    let report = json!({
        "command": "resolvent",
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "set_hash": set.set_hash(),
        "lambda": lambda,
        "domain_radius": r_dom,
        "dt": rc.dt,
        "cutoff": cutoff,
        "f": cfg.weight,
        "g": g_spec,
        "matrix_coefficient": coeff,
        "identity": {
            "states": rc.identity_states,
            "evaluated": defects.len(),
            "skipped": skipped,
            "fd_step": rc.fd_step,
            "max_defect": max,
            "mean_defect": mean,
            "threshold": rc.identity_threshold,
            "passed": passed,
        },
    });
    OutDir::create(&cfg.output_dir)?.json("resolvent.json", &report)?;
    print_json(&report)?;
    if passed {
        Ok(EXIT_OK)
    } else {
        eprintln!("resolvent: identity defect {max:e} exceeds {:e}", rc.identity_threshold);
        Ok(EXIT_NUMERICAL)
    }
}

#[derive(Serialize)]
struct CellRow {
    obstacle: usize,
    s: f64,
    p: f64,
    forward: bool,
    backward: bool,
    trapped: bool,
}

pub fn trapped_set(cfg: &RunConfig) -> Result<u8> {
    let set = load_set(cfg)?;
    let tc = &cfg.trapped_set;
    let r_dom = domain_radius(cfg, &set);
    let grid = trapped_set_grid(&set, r_dom, tc.n_s, tc.n_p, tc.n_bounce, cfg.grazing_tol);
    let mut rows = Vec::with_capacity(grid.trapped.len());
    for obstacle in 0..set.len() {
        for i in 0..tc.n_s {
            for a in 0..tc.n_p {
                let idx = grid.index(obstacle, i, a);
                let bc = grid.cell_center(&set, obstacle, i, a);
                rows.push(CellRow {
                    obstacle,
                    s: bc.s,
                    p: bc.p,
                    forward: grid.forward[idx],
                    backward: grid.backward[idx],
                    trapped: grid.trapped[idx],
                });
            }
        }
    }
    let count = |v: &[bool]| v.iter().filter(|&&b| b).count();
    let total = grid.trapped.len();
    let report = json!({
        "command": "trapped-set",
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "set_hash": set.set_hash(),
        "domain_radius": r_dom,
        "n_s": tc.n_s,
        "n_p": tc.n_p,
        "n_bounce": tc.n_bounce,
        "cells": total,
        "forward_trapped": count(&grid.forward),
        "backward_trapped": count(&grid.backward),
        "trapped": count(&grid.trapped),
        "trapped_fraction": count(&grid.trapped) as f64 / total as f64,
        "contact_form_defect": contact_reflection_check(&set, 1000, cfg.seed),
    });
    let out = OutDir::create(&cfg.output_dir)?;
    out.csv("trapped_set.csv", &["obstacle", "s", "p", "forward", "backward", "trapped"], rows)?;
    out.json("trapped_set.json", &report)?;
    print_json(&report)?;
    Ok(EXIT_OK)
}
