//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion prints its own PASS/FAIL line; exits non-zero if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use unigeo::ablate::ablate;
use unigeo::config::RunConfig;
use unigeo::pipeline::{self, Prepared};
use unigeo_core::curve::CubicCurve;
use unigeo_core::datasets::{sample_swissroll, PointCloud};
use unigeo_core::decoder::{AffineMap, CircleMap};
use unigeo_core::linalg::{matmul, sym_eig, Matrix};
use unigeo_core::losses::{
    conspeed_of, l_geo, l_min, sample_jacobians, second_diff, total_loss_grad_with, total_loss_with, uniform_grid,
    CurveBatch, LossWeights,
};
use unigeo_core::ltsa::{ltsa_embed, LtsaConfig};
use unigeo_core::nn::{Activation, MlpModel};
use unigeo_core::oracle::{affine_fit, median_nn_distance, spearman};
use unigeo_core::rng::SplitMix64;

// Tolerances.
const MLP_GRAD_REL: f64 = 1e-5;
const MLP_GRAD_FLOOR: f64 = 1e-3;
const EIG_RECON_REL: f64 = 1e-8;
const EIG_ORTHO: f64 = 1e-10;
const FLAT_RESIDUAL_OF_DIAMETER: f64 = 1e-3;
const ROLL_RANK_CORR: f64 = 0.99;
const CONSPEED_HAND: (f64, f64) = (0.9798, 1e-4);
const SEMICIRCLE_TOL: f64 = 1e-3;
const GEO_CONSTANT_SPEED_MAX: f64 = 1e-6;
const GEO_QUADRATIC_MIN: f64 = 0.1;
const CUBIC_STENCIL_TOL: f64 = 1e-9;
const CURVE_GRAD_REL: f64 = 1e-4;
const SPHERE_LENGTH_RATIO: f64 = 1.10;
const SPHERE_CV: f64 = 0.10;
const SPHERE_TANGENTIAL: f64 = 0.15;
const ROLL_OFF_MANIFOLD_OF_MEDIAN: f64 = 2.0;
const ROLL_LENGTH_BAND: f64 = 0.10;

// Time budgets.
const BUDGET_GRAD: Duration = Duration::from_secs(30);
const BUDGET_EIG: Duration = Duration::from_secs(10);
const BUDGET_UNIT: Duration = Duration::from_secs(30);
const BUDGET_LTSA: Duration = Duration::from_secs(120);
const BUDGET_RUN: Duration = Duration::from_secs(15 * 60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn timed(budget: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{} [{:.1}s of {}s]", o.detail, took.as_secs_f64(), budget.as_secs());
    o.pass &= took <= budget;
    o
}

fn rand_matrix(rng: &mut SplitMix64, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.uniform(-1.0, 1.0))
}

fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// `Σ upstream ⊙ f(x)` in plain loops over the stored weights, so the
/// finite differences do not reuse the forward pass under test.
fn weighted_output(model: &MlpModel, x: &Matrix, up: &Matrix) -> f64 {
    let layers = model.layers();
    let mut total = 0.0;
    for r in 0..x.rows() {
        let mut h: Vec<f64> = x.row(r).to_vec();
        for (li, layer) in layers.iter().enumerate() {
            let mut next = layer.bias.clone();
            for (o, v) in next.iter_mut().enumerate() {
                for (i, hv) in h.iter().enumerate() {
                    *v += layer.weight[(o, i)] * hv;
                }
            }
            if li + 1 < layers.len() {
                for v in next.iter_mut() {
                    *v = match model.activation() {
                        Activation::Tanh => v.tanh(),
                        Activation::Softplus => v.max(0.0) + (-v.abs()).exp().ln_1p(),
                    };
                }
            }
            h = next;
        }
        total += h.iter().zip(up.row(r)).map(|(a, b)| a * b).sum::<f64>();
    }
    total
}

fn criterion_1() -> Outcome {
    let mut rng = SplitMix64::new(0xACCE_0001);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for case in 0..100 {
        let depth = 1 + rng.below(3);
        let sizes: Vec<usize> = (0..=depth).map(|_| 1 + rng.below(16)).collect();
        let act = if case % 2 == 0 { Activation::Tanh } else { Activation::Softplus };
        let model = MlpModel::new(&sizes, act, &mut rng).unwrap();
        let x = rand_matrix(&mut rng, 3, sizes[0]);
        let up = rand_matrix(&mut rng, 3, sizes[depth]);
        let g = model.backward(&x, &up).unwrap();
        let analytic = g.flatten();
        let p = model.flatten();
        let mut probe = model.clone();
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i] = p[i] + h;
            probe.set_flat(&q);
            let fp = weighted_output(&probe, &x, &up);
            q[i] = p[i] - h;
            probe.set_flat(&q);
            let fm = weighted_output(&probe, &x, &up);
            worst = worst.max(rel_err(analytic[i], (fp - fm) / (2.0 * h), MLP_GRAD_FLOOR));
        }
        let gx = g.input.expect("input gradient");
        for r in 0..x.rows() {
            for c in 0..x.cols() {
                let mut xp = x.clone();
                xp[(r, c)] += h;
                let mut xm = x.clone();
                xm[(r, c)] -= h;
                let fd = (weighted_output(&model, &xp, &up) - weighted_output(&model, &xm, &up)) / (2.0 * h);
                worst = worst.max(rel_err(gx[(r, c)], fd, MLP_GRAD_FLOOR));
            }
        }
    }
    outcome(
        worst < MLP_GRAD_REL,
        format!("100 MLPs, worst relative error {worst:.2e} (< {MLP_GRAD_REL:e})"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = SplitMix64::new(0xACCE_0002);
    let (mut worst_recon, mut worst_ortho) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let r = rand_matrix(&mut rng, 50, 50);
        let a = Matrix::from_fn(50, 50, |i, j| r[(i, j)] + r[(j, i)]);
        let eig = sym_eig(&a).unwrap();
        let v = &eig.vectors;
        let scaled = Matrix::from_fn(50, 50, |i, j| v[(i, j)] * eig.values[j]);
        let recon = matmul(&scaled, &v.transpose()).unwrap();
        worst_recon = worst_recon.max(recon.sub(&a).unwrap().frobenius_norm() / a.frobenius_norm());
        let vtv = matmul(&v.transpose(), v).unwrap();
        worst_ortho = worst_ortho.max(vtv.sub(&Matrix::identity(50)).unwrap().frobenius_norm());
    }
    outcome(
        worst_recon < EIG_RECON_REL && worst_ortho < EIG_ORTHO,
        format!("50x50 reconstruction {worst_recon:.1e} (< {EIG_RECON_REL:e}), orthonormality {worst_ortho:.1e} (< {EIG_ORTHO:e})"),
    )
}

fn rotated_rectangle(n: usize, seed: u64) -> (PointCloud, Matrix) {
    let mut rng = SplitMix64::new(seed);
    let uv = Matrix::from_fn(n, 2, |_, j| if j == 0 { 5.0 } else { 3.0 } * rng.next_f64());
    // rows of a rotation about the axis (1, 2, 2)/3 by 0.7 rad
    let (c, s) = (0.7f64.cos(), 0.7f64.sin());
    let k = [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
    let rot = |i: usize, j: usize| {
        let cross = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
        let delta = if i == j { 1.0 } else { 0.0 };
        c * delta + s * cross[i][j] + (1.0 - c) * k[i] * k[j]
    };
    let pts = Matrix::from_fn(n, 3, |i, j| -0.5 + rot(j, 0) * uv[(i, 0)] + rot(j, 1) * uv[(i, 1)]);
    (PointCloud::from_points(pts), uv)
}

fn criterion_3() -> Outcome {
    let (cloud, uv) = rotated_rectangle(500, 0xACCE_0003);
    let emb = ltsa_embed(&cloud, &LtsaConfig { k: 10, d: 2, ..Default::default() }).unwrap();
    let fit = affine_fit(&emb.coords, &uv).unwrap();
    let diameter = (25.0f64 + 9.0).sqrt();
    let flat = fit.mean_residual() / diameter;

    let roll = sample_swissroll(2000, Default::default(), 0xACCE_0003).unwrap();
    let emb = ltsa_embed(&roll, &LtsaConfig { k: 12, d: 2, ..Default::default() }).unwrap();
    let arc = roll.intrinsic.as_ref().unwrap().column(0);
    let rho = spearman(&emb.coords.column(0), &arc).unwrap().abs();
    outcome(
        flat < FLAT_RESIDUAL_OF_DIAMETER && rho > ROLL_RANK_CORR,
        format!("flat residual {flat:.1e} of diameter (< {FLAT_RESIDUAL_OF_DIAMETER:e}), roll |rank corr| {rho:.5} (> {ROLL_RANK_CORR})"),
    )
}

fn criterion_4() -> Outcome {
    let cs = conspeed_of(&[1.0, 1.0, 3.0]).unwrap();
    let ok_cs = (cs - CONSPEED_HAND.0).abs() < CONSPEED_HAND.1;

    let circle = CircleMap::default();
    let half = CubicCurve::chord(vec![0.0], vec![std::f64::consts::PI]).unwrap();
    let semi = l_min(&CurveBatch::evaluate(&circle, &half, &uniform_grid(100), 1e-3).unwrap());
    let ok_semi = (semi - std::f64::consts::PI).abs() < SEMICIRCLE_TOL;

    let arc = CubicCurve::chord(vec![0.3], vec![2.1]).unwrap();
    let geo_const = l_geo(&circle, &CurveBatch::evaluate(&circle, &arc, &uniform_grid(20), 1e-3).unwrap()).unwrap();
    // z(t) = z0 + Δ·t², same endpoints
    let quad = CubicCurve::new(vec![0.3], vec![2.1], vec![-1.8], vec![0.0]).unwrap();
    let geo_quad = l_geo(&circle, &CurveBatch::evaluate(&circle, &quad, &uniform_grid(20), 1e-3).unwrap()).unwrap();
    let ok_geo = geo_const < GEO_CONSTANT_SPEED_MAX && geo_quad > GEO_QUADRATIC_MIN;

    let mut rng = SplitMix64::new(0xACCE_0004);
    let id = AffineMap::identity(3);
    let mut stencil = 0.0f64;
    for _ in 0..20 {
        let v = |rng: &mut SplitMix64| (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect::<Vec<_>>();
        let c = CubicCurve::new(v(&mut rng), v(&mut rng), v(&mut rng), v(&mut rng)).unwrap();
        let t = rng.next_f64();
        let sd = second_diff(&id, &c, t, 1e-2).unwrap();
        // c'' = 2(b − a) − 6bt
        for k in 0..3 {
            let exact = 2.0 * (c.b[k] - c.a[k]) - 6.0 * c.b[k] * t;
            stencil = stencil.max((sd[k] - exact).abs());
        }
    }
    let ok_stencil = stencil < CUBIC_STENCIL_TOL;
    outcome(
        ok_cs && ok_semi && ok_geo && ok_stencil,
        format!(
            "conspeed {cs:.6}, semicircle {semi:.6}, geo arc {geo_const:.1e} / quadratic {geo_quad:.3}, cubic stencil {stencil:.1e}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = SplitMix64::new(0xACCE_0005);
    let (ts, dt, h) = (uniform_grid(10), 1e-3, 1e-5);
    let w = LossWeights::new(1.0, 0.1, 1.0).unwrap();
    let mut worst = 0.0f64;
    for case in 0..10 {
        let act = if case % 2 == 0 { Activation::Tanh } else { Activation::Softplus };
        let dec = MlpModel::new(&[2, 8, 8, 3], act, &mut rng).unwrap();
        let v = |rng: &mut SplitMix64, s: f64| (0..2).map(|_| rng.uniform(-s, s)).collect::<Vec<_>>();
        let c = CubicCurve::new(v(&mut rng, 1.0), v(&mut rng, 1.0), v(&mut rng, 0.5), v(&mut rng, 0.5)).unwrap();
        let batch = CurveBatch::evaluate(&dec, &c, &ts, dt).unwrap();
        let jac = sample_jacobians(&dec, &batch).unwrap();
        let (_, g) = total_loss_grad_with(&dec, &c, &ts, dt, &jac, &w).unwrap();
        let p = c.free_params();
        for i in 0..p.len() {
            let at = |delta: f64| {
                let mut q = p.clone();
                q[i] += delta;
                let mut cc = c.clone();
                cc.set_free_params(&q);
                let b = CurveBatch::evaluate(&dec, &cc, &ts, dt).unwrap();
                total_loss_with(&b, &jac, &w).unwrap().total
            };
            worst = worst.max(rel_err(g[i], (at(h) - at(-h)) / (2.0 * h), 1e-3));
        }
    }
    outcome(
        worst < CURVE_GRAD_REL,
        format!("10 decoders, worst relative error {worst:.2e} (< {CURVE_GRAD_REL:e})"),
    )
}

fn config(name: &str) -> RunConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    RunConfig::load(Some(&path)).unwrap()
}

fn loss_decreased(prep: &Prepared) -> bool {
    let h = &prep.ae.history;
    let tenth = (h.len() / 10).max(1);
    let mean = |s: &[unigeo_core::autoencoder::AeLossBreakdown]| s.iter().map(|b| b.total).sum::<f64>() / s.len() as f64;
    mean(&h[h.len() - tenth..]) < mean(&h[..tenth])
}

/// Report JSON of the full-loss curve for the semi-sphere config.
fn sphere_report_json(cfg: &RunConfig, prep: &Prepared) -> String {
    let curve = pipeline::fit_curve(&prep.ae.model, &prep.init, &cfg.curve_config().unwrap()).unwrap();
    let (rep, _) = pipeline::evaluate(&prep.ae.model, &curve.curve, Some(&prep.cloud.points), prep.oracle, cfg).unwrap();
    serde_json::to_string(&rep).unwrap()
}

fn criterion_6(first_report: &mut Option<String>) -> Outcome {
    let cfg = config("semisphere.json");
    let prep = pipeline::prepare(&cfg).unwrap();
    let rows = ablate(&prep, &cfg).unwrap();
    let length = |name: &str| rows.iter().find(|r| r.combo == name).unwrap().length;
    let total = rows.iter().find(|r| r.combo == "conspeed+geo+min").unwrap();
    let oracle = length("real");
    let ratio = total.length / oracle;
    let cv = total.uniformity_cv.unwrap();
    let tang = total.tangential_residual.unwrap();
    let ordered = total.length < length("conspeed+min") && length("conspeed+min") < length("linear");
    let decreased = loss_decreased(&prep);
    *first_report = Some(sphere_report_json(&cfg, &prep));
    let [i, j] = prep.endpoints.indices.unwrap();
    let pass = ratio <= SPHERE_LENGTH_RATIO && cv < SPHERE_CV && tang < SPHERE_TANGENTIAL && ordered && decreased;
    outcome(
        pass,
        format!(
            "rows {i}/{j}, length {:.5} vs great circle {oracle:.5} (ratio {ratio:.4} <= {SPHERE_LENGTH_RATIO}), cv {cv:.4} (< {SPHERE_CV}), tangential {tang:.4} (< {SPHERE_TANGENTIAL}), total {:.5} < conspeed+min {:.5} < linear {:.5}: {ordered}, ae loss decreased: {decreased}",
            total.length,
            total.length,
            length("conspeed+min"),
            length("linear"),
        ),
    )
}

fn criterion_7() -> Outcome {
    let cfg = config("swissroll.json");
    let full = pipeline::run(&cfg).unwrap();
    let median = median_nn_distance(&full.prepared.cloud.points).unwrap();
    let off = full.report.on_manifold_dist.unwrap();
    let ratio = full.report.length_ratio.unwrap();
    let decreased = loss_decreased(&full.prepared);
    let pass = off < ROLL_OFF_MANIFOLD_OF_MEDIAN * median && (ratio - 1.0).abs() <= ROLL_LENGTH_BAND && decreased;
    outcome(
        pass,
        format!(
            "off-manifold {off:.4} (< {ROLL_OFF_MANIFOLD_OF_MEDIAN} x median NN {median:.4}), length {:.3} vs intrinsic {:.3} (ratio {ratio:.4}, band ±{ROLL_LENGTH_BAND}), ae loss decreased: {decreased}",
            full.report.polyline_length,
            full.report.oracle_length.unwrap(),
        ),
    )
}

fn criterion_8(first_report: Option<String>) -> Outcome {
    let Some(first) = first_report else {
        return outcome(false, "criterion 6 produced no report".into());
    };
    let cfg = config("semisphere.json");
    let prep = pipeline::prepare(&cfg).unwrap();
    let second = sphere_report_json(&cfg, &prep);
    outcome(
        first == second,
        format!("repeated semi-sphere report identical ({} bytes): {}", first.len(), first == second),
    )
}

fn guarded(f: impl FnOnce() -> Outcome + std::panic::UnwindSafe) -> Outcome {
    std::panic::catch_unwind(f).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    })
}

fn main() -> ExitCode {
    let mut first = None;
    let results = [
        guarded(|| timed(BUDGET_GRAD, criterion_1)),
        guarded(|| timed(BUDGET_EIG, criterion_2)),
        guarded(|| timed(BUDGET_LTSA, criterion_3)),
        guarded(|| timed(BUDGET_UNIT, criterion_4)),
        guarded(|| timed(BUDGET_UNIT, criterion_5)),
        guarded(std::panic::AssertUnwindSafe(|| timed(BUDGET_RUN, || criterion_6(&mut first)))),
        guarded(|| timed(BUDGET_RUN, criterion_7)),
        guarded(std::panic::AssertUnwindSafe(|| timed(BUDGET_RUN, || criterion_8(first.take())))),
    ];
    let mut failed = 0;
    for (i, r) in results.iter().enumerate() {
        println!("criterion {}: {} | {}", i + 1, if r.pass { "PASS" } else { "FAIL" }, r.detail);
        failed += usize::from(!r.pass);
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
