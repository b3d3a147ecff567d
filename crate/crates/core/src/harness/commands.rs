use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ImageMode, PatternKind, SolverKind, PS};
use super::{read_placement, write_patterns, write_placement, RunDir, RunOutput};
use crate::error::{invalid, Error, Result};
use crate::io::{fmt_f64, read_blob, write_blob};
use crate::patterns::{
    baseline_patterns, coherence_cost, optimize_patterns_with_w, precompute_w, OptimizeReport,
    PatternSet, Provenance, StackedTransport,
};
use crate::placement::{placement_coherence_sweep, Placement, Region};
use crate::raster::Raster;
use crate::simrecon::{
    assemble_q, pinv_reconstruct, psnr, simulate_measurement, ssim, tv_reconstruct, TotalOperator,
};
use crate::transport::{
    build_transport_weighted, resolution_limit, ring_map, ring_radius, single_pixel_transport,
    SceneGrid, TransportMatrix, Weighting,
};

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("worker pool: {e}")))
}

fn ps_label(t_ps: f64) -> String {
    format!("{t_ps}").replace('.', "p")
}

fn place(cfg: &ExperimentConfig, k: usize, region: &Region) -> Result<Placement> {
    match &cfg.sensors.placement_file {
        Some(p) => {
            let placement = read_placement(cfg.resolve(p))?;
            if placement.positions.len() != k {
                return Err(invalid(format!(
                    "placement file has {} sensors, config asks for {k}",
                    placement.positions.len()
                )));
            }
            Ok(placement)
        }
        None => cfg.sensors.strategy(cfg.seed).place(region, k),
    }
}

fn transports(
    scene: &SceneGrid,
    placement: &Placement,
    t_res: f64,
    weighting: Weighting,
) -> Result<Vec<TransportMatrix>> {
    placement
        .sensors(t_res)?
        .iter()
        .map(|s| build_transport_weighted(scene, s, weighting))
        .collect()
}

fn patterns_for(
    cfg: &ExperimentConfig,
    kind: PatternKind,
    m: usize,
    w: &DMatrix<f64>,
) -> Result<(PatternSet, Option<OptimizeReport>)> {
    match kind.baseline() {
        Some(b) => Ok((baseline_patterns(b, m, w.ncols(), cfg.seed)?, None)),
        None => {
            let report = optimize_patterns_with_w(w, m, cfg.seed, &cfg.patterns.optimize_options())?;
            Ok((report.patterns.clone(), Some(report)))
        }
    }
}

fn load_patterns(cfg: &ExperimentConfig, l: usize) -> Result<Option<PatternSet>> {
    let Some(p) = &cfg.patterns.file else {
        return Ok(None);
    };
    let ps = PatternSet::new(read_blob(cfg.resolve(p))?, Provenance::Loaded)?;
    if ps.l() != l {
        return Err(Error::DimensionMismatch {
            what: "pattern file length vs scene pixels",
            expected: l,
            found: ps.l(),
        });
    }
    Ok(Some(ps))
}

/// Transport matrices, ring maps and the resolution-limit table.
pub fn cmd_transport(cfg: &ExperimentConfig, config_text: &str, out: &Path) -> Result<RunOutput> {
    let tcfg = &cfg.transport;
    if tcfg.ring_t_ps.is_empty() {
        return Err(Error::Config("transport.ring_t_ps is empty".into()));
    }
    if tcfg.limit_d_m.is_empty() || tcfg.limit_t_ps.is_empty() {
        return Err(Error::Config("resolution-limit grid is empty".into()));
    }
    let scene = cfg.scene.grid()?;
    let region = cfg.sensors.region()?;
    let placement = place(cfg, cfg.sensors.k, &region)?;
    let mut dir = RunDir::create(out, "transport", config_text, cfg.seed)?;
    write_placement(&mut dir, "placement.csv", &placement)?;

    let ts = transports(&scene, &placement, cfg.sensors.t_res(), cfg.sensors.weighting)?;
    let stacked = StackedTransport::from_transports(&ts)?;
    dir.write_with("h_bar.blob", |p| write_blob(p, &stacked.h_bar))?;

    let sensor = placement.sensors(1.0)?[0];
    let mut ring_rows = Vec::new();
    for &t_ps in &tcfg.ring_t_ps {
        let s = crate::transport::Sensor::new(sensor.x, sensor.y, t_ps * PS)?;
        let rings = ring_map(&scene, &s)?;
        // alternate gray levels so ring widths are visible
        let img = Raster::from_fn(scene.nx, scene.ny, |x, y| {
            if rings.label(x, y) % 2 == 0 { 0.2 } else { 0.8 }
        })?;
        dir.pgm(&format!("rings_t{}ps.pgm", ps_label(t_ps)), &img)?;
        let t0 = build_transport_weighted(&scene, &s, Weighting::Unit)?.t0;
        ring_rows.push(vec![
            fmt_f64(t_ps),
            rings.n_bins.to_string(),
            fmt_f64(ring_radius(1, t0, s.t_res, scene.distance_d)),
        ]);
    }
    dir.csv("rings.csv", &["t_ps", "n_bins", "first_ring_radius_m"], &ring_rows)?;

    let mut limit_rows = Vec::new();
    for &d in &tcfg.limit_d_m {
        for &t_ps in &tcfg.limit_t_ps {
            limit_rows.push(vec![fmt_f64(d), fmt_f64(t_ps), fmt_f64(resolution_limit(d, t_ps * PS))]);
        }
    }
    dir.csv("resolution_limit.csv", &["d_m", "t_ps", "dx_m"], &limit_rows)?;
    Ok(dir.finish())
}

type PatternRow = (usize, PatternKind, f64, Option<OptimizeReport>, PatternSet);

/// Placement coherence sweep and, when `sweep.m` is set, the comparison of
/// optimized against baseline patterns.
pub fn cmd_design(cfg: &ExperimentConfig, config_text: &str, out: &Path) -> Result<RunOutput> {
    let sweep = &cfg.sweep;
    if sweep.k.is_empty() || sweep.t_ps.is_empty() || sweep.region_side_m.is_empty() {
        return Err(Error::Config("sweep needs k, t_ps and region_side_m".into()));
    }
    let scene = cfg.scene.grid()?;
    let mut dir = RunDir::create(out, "design", config_text, cfg.seed)?;
    let workers = pool(sweep.workers)?;
    let t_list: Vec<f64> = sweep.t_ps.iter().map(|t| t * PS).collect();
    let strategy = cfg.sensors.strategy(cfg.seed);

    let jobs: Vec<(f64, usize)> = sweep
        .region_side_m
        .iter()
        .flat_map(|&side| sweep.k.iter().map(move |&k| (side, k)))
        .collect();
    let results: Vec<Result<Vec<Vec<String>>>> = workers.install(|| {
        jobs.par_iter()
            .map(|&(side, k)| {
                let region = Region::square(side)?;
                let rows = placement_coherence_sweep(&scene, &region, &[k], &t_list, &strategy)?;
                Ok(rows
                    .into_iter()
                    .zip(&sweep.t_ps)
                    .map(|(r, &t_ps)| {
                        vec![
                            r.k.to_string(),
                            fmt_f64(t_ps),
                            fmt_f64(side),
                            fmt_f64(r.area),
                            fmt_f64(r.mu),
                        ]
                    })
                    .collect())
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    dir.csv("coherence.csv", &["k", "t_ps", "region_side_m", "area_m2", "mu"], &rows)?;

    if !sweep.m.is_empty() {
        let region = cfg.sensors.region()?;
        let placement = place(cfg, cfg.sensors.k, &region)?;
        write_placement(&mut dir, "placement.csv", &placement)?;
        let ts = transports(&scene, &placement, cfg.sensors.t_res(), cfg.sensors.weighting)?;
        let w = precompute_w(&StackedTransport::from_transports(&ts)?).w;
        let l = w.ncols() as f64;
        let jobs: Vec<(usize, PatternKind)> = sweep
            .m
            .iter()
            .flat_map(|&m| sweep.kinds.iter().map(move |&kind| (m, kind)))
            .collect();
        let results: Vec<Result<PatternRow>> =
            workers.install(|| {
                jobs.par_iter()
                    .map(|&(m, kind)| {
                        let (ps, report) = patterns_for(cfg, kind, m, &w)?;
                        let mu = coherence_cost(&ps, &w)? / l;
                        Ok((m, kind, mu, report, ps))
                    })
                    .collect()
            });
        let mut rows = Vec::new();
        for r in results {
            let (m, kind, mu, report, ps) = r?;
            let (iters, conv) = match &report {
                Some(rep) => (rep.iterations.to_string(), rep.converged.to_string()),
                None => ("0".into(), "true".into()),
            };
            rows.push(vec![
                kind.name().into(),
                cfg.sensors.k.to_string(),
                fmt_f64(cfg.sensors.t_res_ps),
                m.to_string(),
                fmt_f64(mu),
                iters,
                conv,
            ]);
            if report.is_some() {
                write_patterns(&mut dir, &format!("patterns_m{m}"), &ps, (scene.nx, scene.ny), sweep.previews)?;
            }
        }
        dir.csv(
            "patterns.csv",
            &["kind", "k", "t_ps", "m", "mu", "iterations", "converged"],
            &rows,
        )?;
    }
    Ok(dir.finish())
}

/// Everything `cmd_image` needs to reconstruct one input.
struct Setup {
    q: TotalOperator,
    grid: (usize, usize),
    k: usize,
    m: usize,
    snr_db: f64,
    solver: SolverKind,
}

fn image_setup(cfg: &ExperimentConfig, scene: &SceneGrid, dir: &mut RunDir) -> Result<Setup> {
    let grid = (scene.nx, scene.ny);
    let l = scene.num_pixels();
    match cfg.image.mode {
        ImageMode::Sanity => Ok(Setup {
            q: TotalOperator::from_matrix(DMatrix::identity(l, l)),
            grid,
            k: 0,
            m: 0,
            snr_db: f64::INFINITY,
            solver: SolverKind::Pinv,
        }),
        ImageMode::SinglePixel | ImageMode::Design => {
            let (ts, k) = if cfg.image.mode == ImageMode::SinglePixel {
                let region = cfg.sensors.region()?;
                let t = single_pixel_transport(scene, region.center(), cfg.sensors.weighting)?;
                (vec![t], 1)
            } else {
                let region = cfg.sensors.region()?;
                let placement = place(cfg, cfg.sensors.k, &region)?;
                write_placement(dir, "placement.csv", &placement)?;
                (
                    transports(scene, &placement, cfg.sensors.t_res(), cfg.sensors.weighting)?,
                    cfg.sensors.k,
                )
            };
            let patterns = match load_patterns(cfg, l)? {
                Some(ps) => ps,
                None => {
                    let w = precompute_w(&StackedTransport::from_transports(&ts)?).w;
                    let (ps, _) = patterns_for(cfg, cfg.patterns.kind, cfg.patterns.m, &w)?;
                    write_patterns(dir, "patterns", &ps, grid, 0)?;
                    ps
                }
            };
            Ok(Setup {
                q: assemble_q(&ts, &patterns)?,
                grid,
                k,
                m: patterns.m(),
                snr_db: cfg.noise.snr_db,
                solver: cfg.recon.solver,
            })
        }
    }
}

struct Scored {
    f_hat: Raster,
    psnr_db: f64,
    ssim: f64,
    iters: usize,
    converged: bool,
    residual: f64,
}

fn reconstruct(cfg: &ExperimentConfig, setup: &Setup, image: &Raster, seed: u64) -> Result<Scored> {
    let meas = simulate_measurement(&setup.q, &image.to_vector(), setup.snr_db, seed)?;
    let (f, iters, converged) = match setup.solver {
        SolverKind::Pinv => {
            let f = pinv_reconstruct(&setup.q.q, &meas.m_vec)?.map(|v| v.clamp(0.0, 1.0));
            (f, 0, true)
        }
        SolverKind::Tv => {
            let r = tv_reconstruct(&setup.q, &meas.m_vec, setup.grid, &cfg.recon.tv_options())?;
            (r.f_hat, r.solver_iters, r.converged)
        }
    };
    let residual = (setup.q.apply(&f) - &meas.m_vec).norm();
    let f_hat = Raster::from_vector(setup.grid.0, setup.grid.1, &f)?;
    Ok(Scored {
        psnr_db: psnr(&f_hat, image)?,
        ssim: ssim(&f_hat, image)?,
        f_hat,
        iters,
        converged,
        residual,
    })
}

fn load_inputs(cfg: &ExperimentConfig, scene: &SceneGrid) -> Result<Vec<(String, Raster)>> {
    if cfg.image.inputs.is_empty() {
        return Err(Error::Config("image.inputs is empty".into()));
    }
    cfg.image
        .inputs
        .iter()
        .map(|p| {
            let img = Raster::read_pgm(cfg.resolve(p))?;
            if (img.width(), img.height()) != (scene.nx, scene.ny) {
                return Err(Error::DimensionMismatch {
                    what: "input image pixels vs scene grid",
                    expected: scene.num_pixels(),
                    found: img.width() * img.height(),
                });
            }
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "image".into());
            Ok((stem, img))
        })
        .collect()
}

/// Full pipeline on every input image and noise seed.
pub fn cmd_image(cfg: &ExperimentConfig, config_text: &str, out: &Path) -> Result<RunOutput> {
    let scene = cfg.scene.grid()?;
    let inputs = load_inputs(cfg, &scene)?;
    let mut dir = RunDir::create(out, "image", config_text, cfg.seed)?;
    let setup = image_setup(cfg, &scene, &mut dir)?;
    let mode = match cfg.image.mode {
        ImageMode::Design => "design",
        ImageMode::SinglePixel => "single_pixel",
        ImageMode::Sanity => "sanity",
    };

    let jobs: Vec<(usize, u64)> = (0..inputs.len())
        .flat_map(|i| cfg.noise_seeds().into_iter().map(move |s| (i, s)))
        .collect();
    let results: Vec<Result<(Scored, f64)>> = pool(cfg.sweep.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(i, seed)| {
                let start = Instant::now();
                let scored = reconstruct(cfg, &setup, &inputs[i].1, seed)?;
                Ok((scored, start.elapsed().as_secs_f64()))
            })
            .collect()
    });

    let mut metrics = Vec::new();
    let mut runlog = Vec::new();
    for (&(i, seed), r) in jobs.iter().zip(results) {
        let (s, wall) = r?;
        let name = &inputs[i].0;
        let run_id = format!("{name}-{mode}-k{}-t{}-m{}-s{seed}", setup.k, ps_label(cfg.sensors.t_res_ps), setup.m);
        dir.pgm(&format!("recon_{name}_s{seed}.pgm"), &s.f_hat)?;
        metrics.push(vec![
            run_id.clone(),
            name.clone(),
            mode.into(),
            setup.k.to_string(),
            fmt_f64(cfg.sensors.t_res_ps),
            setup.m.to_string(),
            seed.to_string(),
            fmt_f64(s.psnr_db),
            fmt_f64(s.ssim),
            s.iters.to_string(),
            s.converged.to_string(),
            fmt_f64(s.residual),
        ]);
        runlog.push(vec![run_id, format!("{wall:.3}")]);
    }
    dir.csv(
        "metrics.csv",
        &[
            "run_id", "image", "mode", "k", "t_ps", "m", "seed", "psnr_db", "ssim", "solver_iters",
            "converged", "residual_norm",
        ],
        &metrics,
    )?;
    dir.csv("runlog.csv", &["run_id", "wall_s"], &runlog)?;
    Ok(dir.finish())
}

struct Probe {
    ok: bool,
    psnr_db: f64,
    ssim: f64,
}

/// Smallest `M` in `[m_lo, m_hi]` reaching the quality thresholds, by
/// bisection (quality is taken to be monotone in `M`).
pub fn cmd_min_patterns(cfg: &ExperimentConfig, config_text: &str, out: &Path) -> Result<RunOutput> {
    let mp = &cfg.min_patterns;
    if mp.k.is_empty() || mp.t_ps.is_empty() {
        return Err(Error::Config("min_patterns needs k and t_ps".into()));
    }
    if mp.m_lo == 0 || mp.m_lo > mp.m_hi {
        return Err(Error::Config(format!("bad bisection bounds [{}, {}]", mp.m_lo, mp.m_hi)));
    }
    let scene = cfg.scene.grid()?;
    let (_, image) = load_inputs(cfg, &scene)?.swap_remove(0);
    let f = image.to_vector();
    let seed = cfg.noise_seeds()[0];
    let mut dir = RunDir::create(out, "min-patterns", config_text, cfg.seed)?;
    let region = cfg.sensors.region()?;

    let jobs: Vec<(usize, f64)> = mp
        .k
        .iter()
        .flat_map(|&k| mp.t_ps.iter().map(move |&t| (k, t)))
        .collect();
    let results: Vec<Result<Vec<String>>> = pool(cfg.sweep.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(k, t_ps)| {
                let placement = place(cfg, k, &region)?;
                let ts = transports(&scene, &placement, t_ps * PS, cfg.sensors.weighting)?;
                let w = precompute_w(&StackedTransport::from_transports(&ts)?).w;
                let probe = |m: usize| -> Result<Probe> {
                    let (ps, _) = patterns_for(cfg, cfg.patterns.kind, m, &w)?;
                    let q = assemble_q(&ts, &ps)?;
                    let meas = simulate_measurement(&q, &f, cfg.noise.snr_db, seed)?;
                    let r = tv_reconstruct(&q, &meas.m_vec, (scene.nx, scene.ny), &cfg.recon.tv_options())?;
                    let f_hat = Raster::from_vector(scene.nx, scene.ny, &r.f_hat)?;
                    let (p, s) = (psnr(&f_hat, &image)?, ssim(&f_hat, &image)?);
                    Ok(Probe {
                        ok: s >= mp.ssim && p >= mp.psnr_db,
                        psnr_db: p,
                        ssim: s,
                    })
                };
                let (m_min, resolved, at) = bisect(mp.m_lo, mp.m_hi, probe)?;
                Ok(vec![
                    k.to_string(),
                    fmt_f64(t_ps),
                    m_min.to_string(),
                    resolved.to_string(),
                    fmt_f64(at.psnr_db),
                    fmt_f64(at.ssim),
                ])
            })
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    dir.csv(
        "min_patterns.csv",
        &["k", "t_ps", "m_min", "resolved", "psnr_db", "ssim"],
        &rows,
    )?;
    Ok(dir.finish())
}

/// Returns `(m, resolved, probe at m)`; unresolved rows report `hi`.
fn bisect(lo: usize, hi: usize, mut probe: impl FnMut(usize) -> Result<Probe>) -> Result<(usize, bool, Probe)> {
    let first = probe(lo)?;
    if first.ok {
        return Ok((lo, true, first));
    }
    let top = probe(hi)?;
    if !top.ok {
        return Ok((hi, false, top));
    }
    // invariant: probe(lo) fails, probe(hi) passes
    let (mut lo, mut hi, mut best) = (lo, hi, top);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let p = probe(mid)?;
        if p.ok {
            hi = mid;
            best = p;
        } else {
            lo = mid;
        }
    }
    Ok((hi, true, best))
}
