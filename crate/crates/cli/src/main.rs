use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use unigeo::ablate::{ablate, write_rows};
use unigeo::checkpoint::{load_ae, save_ae};
use unigeo::config::{Endpoints, ManifoldKind, OracleKind, RunConfig};
use unigeo::csvio::{read_matrix, write_matrix};
use unigeo::pipeline::{self, ResolvedEndpoints};
use unigeo::report::{self, EvalDocument, StageDocument};
use unigeo::{plot, UsageError};
use unigeo_core::autoencoder::AeModel;
use unigeo_core::Matrix;

/// Geometry-regularized autoencoders and uniform-speed geodesic curves.
#[derive(Parser)]
#[command(name = "unigeo", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a synthetic point cloud.
    GenData(GenData),
    /// LTSA chart of a cloud.
    Embed(Embed),
    /// Train the chart-regularized autoencoder.
    TrainAe(TrainAe),
    /// Train a cubic latent curve between two points.
    TrainCurve(TrainCurve),
    /// Score a trained curve.
    Eval(Eval),
    /// Train the curve under each combination of loss terms.
    Ablate(Ablate),
    /// Every stage in one go, writing all artifacts to a directory.
    Run(Run),
}

#[derive(Args)]
struct ConfigArg {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig> {
        RunConfig::load(self.config.as_deref())
    }
}

#[derive(Args)]
struct GenData {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, value_enum)]
    manifold: Option<ManifoldKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Embed {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    cloud: PathBuf,
    /// Neighborhood size.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainAe {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    embedding: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct EndpointArgs {
    /// Two cloud row indices, e.g. `--endpoints 10,42`.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["from", "to"])]
    endpoints: Option<Vec<usize>>,
    /// First ambient endpoint, comma separated.
    #[arg(long, value_delimiter = ',', requires = "to", allow_negative_numbers = true)]
    from: Option<Vec<f64>>,
    /// Second ambient endpoint, comma separated.
    #[arg(long, value_delimiter = ',', requires = "from", allow_negative_numbers = true)]
    to: Option<Vec<f64>>,
}

impl EndpointArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(ix) = &self.endpoints {
            if ix.len() != 2 {
                return Err(UsageError("--endpoints takes exactly two indices".into()).into());
            }
            cfg.curve.endpoints = Endpoints::Indices([ix[0], ix[1]]);
        } else if let (Some(a), Some(b)) = (&self.from, &self.to) {
            cfg.curve.endpoints = Endpoints::Points([a.clone(), b.clone()]);
        }
        Ok(())
    }
}

#[derive(Args)]
struct TrainCurve {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    cloud: PathBuf,
    #[command(flatten)]
    ends: EndpointArgs,
    /// Loss weights `conspeed,geo,min`.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Curve JSON.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss-term CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct Eval {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    curve: PathBuf,
    #[arg(long)]
    cloud: PathBuf,
    #[command(flatten)]
    ends: EndpointArgs,
    #[arg(long, value_enum)]
    oracle: Option<OracleKind>,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Decoded curve samples as CSV.
    #[arg(long)]
    decoded: Option<PathBuf>,
    /// Also write a matplotlib script drawing the cloud and the curve.
    #[arg(long, requires = "decoded")]
    plot_script: Option<PathBuf>,
}

#[derive(Args)]
struct Ablate {
    #[command(flatten)]
    config: ConfigArg,
    /// Table CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Run {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    out_dir: PathBuf,
}

fn load_cloud(path: &Path) -> Result<Matrix> {
    read_matrix(path).with_context(|| format!("cannot load cloud {}", path.display()))
}

fn load_model_for(ck: &Path, cloud: &Matrix, cloud_path: &Path) -> Result<AeModel> {
    let model = load_ae(ck)?;
    if model.ambient_dim() != cloud.cols() {
        bail!(
            "checkpoint {} expects {}-D points but cloud {} is {}-D",
            ck.display(),
            model.ambient_dim(),
            cloud_path.display(),
            cloud.cols()
        );
    }
    Ok(model)
}

fn gen_data(a: &GenData) -> Result<()> {
    let mut cfg = a.config.load()?;
    if let Some(m) = a.manifold {
        cfg.data.manifold = m;
    }
    if let Some(n) = a.n {
        cfg.data.n = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let cloud = pipeline::generate(&cfg)?;
    write_matrix(&a.out, &cloud.points)?;
    println!(
        "wrote {} {:?} points (seed {}) to {}",
        cloud.len(),
        cfg.data.manifold,
        cfg.seed,
        a.out.display()
    );
    Ok(())
}

fn embed(a: &Embed) -> Result<()> {
    let mut cfg = a.config.load()?;
    if let Some(k) = a.k {
        cfg.ltsa.k = k;
    }
    let points = load_cloud(&a.cloud)?;
    let chart = pipeline::embed(&points, &cfg).with_context(|| format!("embedding {}", a.cloud.display()))?;
    write_matrix(&a.out, &chart)?;
    println!("wrote {}x{} embedding to {}", chart.rows(), chart.cols(), a.out.display());
    Ok(())
}

fn train_ae(a: &TrainAe) -> Result<()> {
    let cfg = a.config.load()?;
    let points = load_cloud(&a.cloud)?;
    let chart = read_matrix(&a.embedding).with_context(|| format!("cannot load embedding {}", a.embedding.display()))?;
    if chart.rows() != points.rows() {
        bail!(
            "embedding {} has {} rows but cloud {} has {}",
            a.embedding.display(),
            chart.rows(),
            a.cloud.display(),
            points.rows()
        );
    }
    if chart.cols() != cfg.ltsa.d {
        bail!(
            "embedding {} has {} columns but ltsa.d is {}",
            a.embedding.display(),
            chart.cols(),
            cfg.ltsa.d
        );
    }
    let out = pipeline::train_autoencoder(&points, &chart, &cfg)?;
    save_ae(&a.out, &out.model)?;
    if let Some(h) = &a.history {
        report::write_ae_history(h, &out.history)?;
    }
    println!("trained {} epochs, reconstruction rmse {:.6e}; checkpoint {}", out.history.len(), out.rmse, a.out.display());
    Ok(())
}

fn curve_cfg(cfg: &mut RunConfig, ends: &EndpointArgs, weights: Option<&Vec<f64>>) -> Result<()> {
    ends.apply(cfg)?;
    if let Some(w) = weights {
        if w.len() != 3 {
            return Err(UsageError("--weights takes three values: conspeed,geo,min".into()).into());
        }
        cfg.curve.weights.conspeed = w[0];
        cfg.curve.weights.geo = w[1];
        cfg.curve.weights.min = w[2];
    }
    cfg.validate()
}

fn train_curve(a: &TrainCurve) -> Result<()> {
    let mut cfg = a.config.load()?;
    curve_cfg(&mut cfg, &a.ends, a.weights.as_ref())?;
    let points = load_cloud(&a.cloud)?;
    let model = load_model_for(&a.checkpoint, &points, &a.cloud)?;
    let ends = pipeline::resolve_endpoints(&cfg.curve.endpoints, &cfg, &points)?;
    let init = pipeline::initial_curve(&model, &ends)?;
    let out = pipeline::fit_curve(&model, &init, &cfg.curve_config()?)?;
    report::save_curve(&a.out, &out.curve)?;
    if let Some(h) = &a.history {
        report::write_curve_history(h, &out.history)?;
    }
    let last = out.history.last().map_or(f64::NAN, |h| h.total);
    println!("trained curve{}, final loss {last:.6e}; wrote {}", describe(&ends), a.out.display());
    Ok(())
}

fn describe(ends: &ResolvedEndpoints) -> String {
    match ends.indices {
        Some([i, j]) => format!(" between rows {i} and {j}"),
        None => String::new(),
    }
}

fn eval(a: &Eval) -> Result<()> {
    let mut cfg = a.config.load()?;
    curve_cfg(&mut cfg, &a.ends, None)?;
    if let Some(o) = a.oracle {
        cfg.eval.oracle = o;
    }
    let points = load_cloud(&a.cloud)?;
    let model = load_model_for(&a.checkpoint, &points, &a.cloud)?;
    let curve = report::load_curve(&a.curve)?;
    if curve.dim() != model.latent_dim() {
        bail!(
            "curve {} is {}-D but checkpoint {} has a {}-D latent space",
            a.curve.display(),
            curve.dim(),
            a.checkpoint.display(),
            model.latent_dim()
        );
    }
    let ends = pipeline::resolve_endpoints(&cfg.curve.endpoints, &cfg, &points)?;
    let oracle = pipeline::oracle_length(cfg.eval.oracle, &cfg, &ends)?;
    let (rep, decoded) = pipeline::evaluate(&model, &curve, Some(&points), oracle, &cfg)?;
    let doc = EvalDocument {
        report: rep,
        endpoints: ends,
        inputs: report::hash_inputs(&[&a.checkpoint, &a.curve, &a.cloud])?,
        config: cfg,
    };
    report::write_json(&a.out, &doc)?;
    if let Some(d) = &a.decoded {
        write_matrix(d, &decoded)?;
        if let Some(s) = &a.plot_script {
            let png = d.with_extension("png");
            std::fs::write(s, plot::script(&a.cloud, d, &png)).with_context(|| format!("cannot write {}", s.display()))?;
        }
    }
    print_report(&doc.report);
    Ok(())
}

fn print_report(r: &unigeo_core::oracle::GeodesicReport) {
    print!("length {:.6}", r.polyline_length);
    if let (Some(o), Some(q)) = (r.oracle_length, r.length_ratio) {
        print!(" (oracle {o:.6}, ratio {q:.4})");
    }
    print!(", cv {:.4}, tangential {:.4}", r.uniformity_cv, r.tangential_residual);
    if let Some(d) = r.on_manifold_dist {
        print!(", off-manifold {d:.4}");
    }
    println!();
}

fn run_ablation(a: &Ablate) -> Result<()> {
    let cfg = a.config.load()?;
    let prep = pipeline::prepare(&cfg)?;
    let rows = ablate(&prep, &cfg)?;
    write_rows(&a.out, &rows)?;
    for r in &rows {
        println!("{:<18} {:.6}", r.combo, r.length);
    }
    Ok(())
}

fn run_all(a: &Run) -> Result<()> {
    let cfg = a.config.load()?;
    let dir = &a.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let full = pipeline::run(&cfg)?;
    let p = &full.prepared;
    let path = |name: &str| dir.join(name);
    write_matrix(&path("cloud.csv"), &p.cloud.points)?;
    write_matrix(&path("embedding.csv"), &p.chart)?;
    save_ae(&path("model.json"), &p.ae.model)?;
    report::write_ae_history(&path("ae_history.csv"), &p.ae.history)?;
    report::save_curve(&path("curve.json"), &full.curve.curve)?;
    report::write_curve_history(&path("curve_history.csv"), &full.curve.history)?;
    write_matrix(&path("decoded.csv"), &full.decoded)?;
    std::fs::write(
        path("plot.py"),
        plot::script(&path("cloud.csv"), &path("decoded.csv"), &path("curve.png")),
    )?;
    let doc = EvalDocument {
        report: full.report.clone(),
        endpoints: p.endpoints.clone(),
        inputs: report::hash_inputs(&[&path("cloud.csv"), &path("model.json"), &path("curve.json")])?,
        config: cfg.clone(),
    };
    report::write_json(&path("report.json"), &doc)?;
    let stage = StageDocument {
        stage: "autoencoder".into(),
        summary: [("reconstruction_rmse".to_string(), p.ae.rmse)].into(),
        inputs: report::hash_inputs(&[&path("cloud.csv"), &path("embedding.csv")])?,
        config: cfg,
    };
    report::write_json(&path("ae_report.json"), &stage)?;
    print_report(&full.report);
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::GenData(a) => gen_data(a),
        Cmd::Embed(a) => embed(a),
        Cmd::TrainAe(a) => train_ae(a),
        Cmd::TrainCurve(a) => train_curve(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Ablate(a) => run_ablation(a),
        Cmd::Run(a) => run_all(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.downcast_ref::<UsageError>().is_some()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
