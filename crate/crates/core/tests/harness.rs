mod common;

use std::collections::HashMap;
use std::path::Path;

use lensless_core::harness::{cmd_design, cmd_image, cmd_min_patterns, cmd_transport, ExperimentConfig};
use lensless_core::io::read_csv;
use lensless_core::Error;

fn config(extra: &str) -> (ExperimentConfig, String) {
    let text = format!("seed = 11\n{extra}");
    (ExperimentConfig::parse(&text).unwrap(), text)
}

fn rows_by(path: &Path) -> Vec<HashMap<String, String>> {
    let (header, rows) = read_csv(path).unwrap();
    rows.into_iter()
        .map(|r| header.iter().cloned().zip(r).collect())
        .collect()
}

fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    let v = &row[key];
    if v == "inf" {
        f64::INFINITY
    } else {
        v.parse().unwrap()
    }
}

fn inputs(name: &str) -> String {
    format!("[image]\ninputs = [{:?}]\n", common::data(name))
}

#[test]
fn transport_rejects_empty_ring_list() {
    let (cfg, text) = config("[transport]\nring_t_ps = []\n");
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(cmd_transport(&cfg, &text, dir.path()), Err(Error::Config(_))));
}

#[test]
fn transport_limit_table_has_every_grid_point() {
    let (cfg, text) = config("[scene]\nnx = 8\nny = 8\n");
    let dir = tempfile::tempdir().unwrap();
    cmd_transport(&cfg, &text, dir.path()).unwrap();
    let rows = rows_by(&dir.path().join("resolution_limit.csv"));
    assert_eq!(rows.len(), 30);
    let spot = rows
        .iter()
        .find(|r| num(r, "d_m") == 10.0 && num(r, "t_ps") == 20.0)
        .unwrap();
    let c = 299_792_458.0 * 20e-12;
    assert!((num(spot, "dx_m") - ((10.0 + c) * (10.0 + c) - 100.0_f64).sqrt()).abs() < 1e-12);
    assert!((num(spot, "dx_m") - 0.3463).abs() < 1e-4);
}

#[test]
fn design_coherence_drops_with_finer_timing() {
    let (cfg, text) = config("[scene]\nnx = 16\nny = 16\n[sweep]\nk = [1, 2]\nt_ps = [100.0, 50.0, 20.0]\n");
    let dir = tempfile::tempdir().unwrap();
    cmd_design(&cfg, &text, dir.path()).unwrap();
    let rows = rows_by(&dir.path().join("coherence.csv"));
    assert_eq!(rows.len(), 6);
    for k in ["1", "2"] {
        let mus: Vec<f64> = rows.iter().filter(|r| r["k"] == k).map(|r| num(r, "mu")).collect();
        assert!(mus[0] > mus[1] && mus[1] > mus[2], "k={k}: {mus:?}");
    }
}

#[test]
fn design_single_point() {
    let (cfg, text) = config("[scene]\nnx = 10\nny = 10\n[sweep]\nk = [1]\nt_ps = [20.0]\n");
    let dir = tempfile::tempdir().unwrap();
    cmd_design(&cfg, &text, dir.path()).unwrap();
    let rows = rows_by(&dir.path().join("coherence.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["k"], "1");
    assert!(num(&rows[0], "mu") > 0.0);
    assert!(!dir.path().join("patterns.csv").exists());
}

#[test]
fn design_optimized_patterns_beat_baselines() {
    let (cfg, text) = config(
        "[scene]\nnx = 20\nny = 20\n[sweep]\nk = [1]\nt_ps = [20.0]\nm = [12]\n[patterns]\nmax_iter = 400\n",
    );
    let dir = tempfile::tempdir().unwrap();
    cmd_design(&cfg, &text, dir.path()).unwrap();
    let rows = rows_by(&dir.path().join("patterns.csv"));
    let mu = |kind: &str| num(rows.iter().find(|r| r["kind"] == kind).unwrap(), "mu");
    let best_baseline = mu("hadamard").min(mu("bernoulli")).min(mu("gaussian"));
    assert!(mu("optimized") < 0.95 * best_baseline, "{} vs {best_baseline}", mu("optimized"));
    assert!(dir.path().join("patterns_m12.blob").exists());
    assert!(dir.path().join("patterns_m12_0.pgm").exists());
}

#[test]
fn image_sanity_is_exact() {
    let (cfg, text) = config(&format!("[scene]\nnx = 40\nny = 40\n{}mode = \"sanity\"\n", inputs("cameraman40.pgm")));
    let dir = tempfile::tempdir().unwrap();
    cmd_image(&cfg, &text, dir.path()).unwrap();
    let rows = rows_by(&dir.path().join("metrics.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["psnr_db"], "inf");
    assert!((num(&rows[0], "ssim") - 1.0).abs() < 1e-12);
    assert!(dir.path().join("recon_cameraman40_s11.pgm").exists());
    assert!(dir.path().join("runlog.csv").exists());
}

#[test]
fn image_design_point_beats_single_pixel() {
    let design = format!(
        "[scene]\nnx = 40\nny = 40\n[sensors]\nk = 2\n[patterns]\nm = 50\nmax_iter = 100\n{}",
        inputs("cameraman40.pgm")
    );
    let (cfg, text) = config(&design);
    let dir = tempfile::tempdir().unwrap();
    cmd_image(&cfg, &text, dir.path()).unwrap();
    let good = num(&rows_by(&dir.path().join("metrics.csv"))[0], "ssim");
    assert!(good >= 0.95, "design ssim {good}");

    let single = format!(
        "[scene]\nnx = 40\nny = 40\n[patterns]\nkind = \"bernoulli\"\nm = 50\n{}mode = \"single_pixel\"\n",
        inputs("cameraman40.pgm")
    );
    let (cfg, text) = config(&single);
    let dir = tempfile::tempdir().unwrap();
    cmd_image(&cfg, &text, dir.path()).unwrap();
    let row = &rows_by(&dir.path().join("metrics.csv"))[0];
    assert_eq!(row["k"], "1");
    assert!(num(row, "ssim") < good - 0.3, "single-pixel ssim {}", num(row, "ssim"));
}

#[test]
fn image_consumes_design_artifacts() {
    let shared = "[scene]\nnx = 20\nny = 20\n[sensors]\nk = 2\n[patterns]\nmax_iter = 50\n";
    let (cfg, text) = config(&format!("{shared}[sweep]\nk = [2]\nt_ps = [20.0]\nm = [10]\nkinds = [\"optimized\"]\n"));
    let design = tempfile::tempdir().unwrap();
    cmd_design(&cfg, &text, design.path()).unwrap();

    let crop = tempfile::tempdir().unwrap();
    let img = common::cameraman(40);
    let small = lensless_core::raster::Raster::from_fn(20, 20, |x, y| img.get(2 * x, 2 * y)).unwrap();
    let input = crop.path().join("small.pgm");
    small.write_pgm(&input).unwrap();

    let image_cfg = format!(
        "[scene]\nnx = 20\nny = 20\n[sensors]\nk = 2\nplacement_file = {:?}\n[patterns]\nfile = {:?}\n[image]\ninputs = [{:?}]\n",
        design.path().join("placement.csv"),
        design.path().join("patterns_m10.blob"),
        input,
    );
    let (cfg, text) = config(&image_cfg);
    let out = tempfile::tempdir().unwrap();
    cmd_image(&cfg, &text, out.path()).unwrap();
    let row = &rows_by(&out.path().join("metrics.csv"))[0];
    assert_eq!(row["m"], "10");
    assert_eq!(row["k"], "2");
    assert!(!out.path().join("patterns.blob").exists());
    let placed = read_csv(out.path().join("placement.csv")).unwrap();
    assert_eq!(placed, read_csv(design.path().join("placement.csv")).unwrap());

    // a placement with the wrong sensor count is refused
    let (cfg, text) = config(&image_cfg.replace("k = 2", "k = 3"));
    assert!(cmd_image(&cfg, &text, tempfile::tempdir().unwrap().path()).is_err());
}

#[test]
fn min_patterns_trivial_threshold_is_one() {
    let (cfg, text) = config(&format!(
        "[scene]\nnx = 40\nny = 40\n[patterns]\nkind = \"bernoulli\"\n[min_patterns]\nk = [1]\nssim = 0.0\npsnr_db = 0.0\n{}",
        inputs("cameraman40.pgm")
    ));
    let dir = tempfile::tempdir().unwrap();
    cmd_min_patterns(&cfg, &text, dir.path()).unwrap();
    let rows = rows_by(&dir.path().join("min_patterns.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["m_min"], "1");
    assert_eq!(rows[0]["resolved"], "true");
}

#[test]
fn min_patterns_flags_unresolved_cap() {
    let (cfg, text) = config(&format!(
        "[scene]\nnx = 40\nny = 40\n[patterns]\nkind = \"bernoulli\"\n[min_patterns]\nk = [1]\nm_hi = 3\n{}",
        inputs("cameraman40.pgm")
    ));
    let dir = tempfile::tempdir().unwrap();
    cmd_min_patterns(&cfg, &text, dir.path()).unwrap();
    let row = &rows_by(&dir.path().join("min_patterns.csv"))[0];
    assert_eq!(row["m_min"], "3");
    assert_eq!(row["resolved"], "false");
}

#[test]
fn min_patterns_drop_with_a_second_sensor() {
    let (cfg, text) = config(&format!(
        "[scene]\nnx = 40\nny = 40\n[patterns]\nkind = \"bernoulli\"\n[min_patterns]\nk = [1, 2]\nssim = 0.9\npsnr_db = 0.0\nm_hi = 200\n{}",
        inputs("cameraman40.pgm")
    ));
    let dir = tempfile::tempdir().unwrap();
    cmd_min_patterns(&cfg, &text, dir.path()).unwrap();
    let rows = rows_by(&dir.path().join("min_patterns.csv"));
    let m: Vec<f64> = rows.iter().map(|r| num(r, "m_min")).collect();
    assert!(rows.iter().all(|r| r["resolved"] == "true"), "{rows:?}");
    assert!(m[1] < m[0], "{m:?}");
}
