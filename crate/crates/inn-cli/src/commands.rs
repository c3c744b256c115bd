use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use inn::constructor::{construct_f_nn, rate_study, ConstructedMap, GridDataset, RandomBiLipschitz, SineShear, TargetMap};
use inn::lifted::{construct_f_nn_lifted, LiftedMap};
use inn::neural::checkpoint;
use inn::neural::fnn::{train_fnn, Fnn};
use inn::neural::train::history_csv;
use inn::neural::{relative_errors, train, AdamConfig, Arch, CouplingInn, TrainConfig};
use inn::pca::{tail_bound_report, PcaBasis};
use inn::pde::{generate, PairDataset, SolveSpec};
use inn::pipeline::{ambient_errors, input_features, reduce, reduce_with, split_indices, InputFeatures, Reduced, SplitConfig};
use inn::verify::{self, Check, ProbeBox, VerifyOptions};

use crate::plot::{self, Chart, Series};
use crate::{usage, CliError, CliResult, Global};

fn print_json(v: &impl Serialize) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(v)?) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn write_json(path: &Path, v: &impl Serialize) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(v)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn require_file(p: &Path) -> CliResult<()> {
    if p.is_file() {
        Ok(())
    } else {
        usage(anyhow!("{} is not a readable file", p.display()))
    }
}

fn ensure_dir(p: &Path) -> CliResult<()> {
    fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    Ok(())
}

/// Input loaders report malformed files as usage errors.
fn load_input<T>(p: &Path, f: impl FnOnce(&Path) -> inn::Result<T>) -> CliResult<T> {
    require_file(p)?;
    f(p).map_err(|e| CliError::Usage(anyhow!("{}: {e}", p.display())))
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Synthetic {
    /// Shear with a sine perturbation, d = 2.
    Sine,
    /// Residual map `x + κ A tanh(W x + b)` with random Gaussian weights.
    Random,
}

fn target(kind: Synthetic, d: usize, seed: u64) -> CliResult<Box<dyn TargetMap>> {
    match kind {
        Synthetic::Sine if d != 2 => usage(anyhow!("the sine map is two-dimensional, got --d {d}")),
        Synthetic::Sine => Ok(Box::new(SineShear::new())),
        Synthetic::Random if d < 2 => usage(anyhow!("--d must be at least 2")),
        Synthetic::Random => Ok(Box::new(RandomBiLipschitz::new(d, seed))),
    }
}

// ---------------------------------------------------------------- construct

#[derive(Args, Debug)]
pub struct ConstructArgs {
    /// Grid data file `{"d","n","y"}` with `y` flattened row-major.
    #[arg(long, conflicts_with = "synthetic")]
    pub grid: Option<PathBuf>,
    /// Sample a built-in map on the grid instead of reading a file.
    #[arg(long, value_enum, requires = "n")]
    pub synthetic: Option<Synthetic>,
    /// Dimension for --synthetic.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Points per axis for --synthetic.
    #[arg(long)]
    pub n: Option<usize>,
    /// Interpolation tolerance; defaults to 1/n.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Append the per-coordinate `h^r` layer with this `r` in (0, 1).
    #[arg(long, conflicts_with = "lifted")]
    pub r: Option<f64>,
    /// Use the lifted construction, exact at the grid points.
    #[arg(long)]
    pub lifted: bool,
    /// Model output path (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the sampled grid (with --synthetic).
    #[arg(long, requires = "synthetic")]
    pub save_grid: Option<PathBuf>,
}

#[derive(Serialize)]
struct StageReport {
    name: String,
    layers: usize,
}

pub fn construct(g: &Global, a: ConstructArgs) -> CliResult<()> {
    let data = match (&a.grid, a.synthetic) {
        (Some(p), None) => load_input(p, GridDataset::load)?,
        (None, Some(kind)) => {
            let n = a.n.unwrap_or(0);
            let t = target(kind, a.d, g.seed)?;
            let data = GridDataset::from_fn(a.d, n, |x| t.eval(x)).map_err(|e| CliError::Usage(e.into()))?;
            if let Some(p) = &a.save_grid {
                data.save(p)?;
            }
            data
        }
        _ => return usage(anyhow!("give exactly one of --grid or --synthetic")),
    };
    if let Some(r) = a.r {
        if !(r > 0.0 && r < 1.0) {
            return usage(anyhow!("--r must lie in (0, 1), got {r}"));
        }
    }

    let report = if a.lifted {
        let map: LiftedMap = construct_f_nn_lifted(&data)?;
        let residual = map.interpolation_residual(&data)?;
        if let Some(p) = &a.out {
            map.save(p)?;
        }
        json!({
            "kind": "lifted",
            "d": map.d,
            "n": map.n,
            "delta": map.delta,
            "residual": residual,
            "layers": map.layer_count(),
            "stages": map.stages.iter().map(|s| StageReport { name: s.name.clone(), layers: s.layers.len() }).collect::<Vec<_>>(),
            "certificate": map.certificate,
        })
    } else {
        let eps = a.eps.unwrap_or(1.0 / data.n as f64);
        let mut map: ConstructedMap = construct_f_nn(&data, eps)?;
        let residual = map.interpolation_residual(&data)?;
        if let Some(r) = a.r {
            map = map.compose_with_hr(r)?;
        }
        if let Some(p) = &a.out {
            map.save(p)?;
        }
        json!({
            "kind": "constructed",
            "d": map.d,
            "n": map.n,
            "epsilon": map.epsilon,
            "residual": residual,
            "r": map.r(),
            "layers": map.layer_count(),
            "stages": map.stages.iter().map(|s| StageReport { name: s.name.clone(), layers: s.layers.len() }).collect::<Vec<_>>(),
            "certificate": map.certificate,
        })
    };
    print_json(&report)
}

// ---------------------------------------------------------------- rate-study

#[derive(Args, Debug)]
pub struct RateArgs {
    /// Target map.
    #[arg(long = "fn", value_enum, default_value = "sine")]
    pub func: Synthetic,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Increasing grid sizes.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    pub n_list: Vec<usize>,
    /// `ε = c_eps / n`.
    #[arg(long, default_value_t = 1.0)]
    pub c_eps: f64,
    /// Monte-Carlo points per error estimate.
    #[arg(long, default_value_t = 4000)]
    pub samples: usize,
    /// CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// SVG chart of errors and bounds against n.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

pub const RATE_CLI_HEADER: &str = "n,err_fwd,err_inv,bound_fwd,bound_inv,slope";

pub fn rate_study_cmd(g: &Global, a: RateArgs) -> CliResult<()> {
    let t = target(a.func, a.d, g.seed)?;
    if a.samples < 100 {
        return usage(anyhow!("--samples must be at least 100"));
    }
    let study = rate_study(t.as_ref(), &a.n_list, a.c_eps, a.samples, g.seed).map_err(|e| match e {
        inn::Error::Param(_) => CliError::Usage(e.into()),
        e => CliError::Runtime(e.into()),
    })?;
    let mut csv = String::from(RATE_CLI_HEADER);
    csv.push('\n');
    for r in &study.rows {
        csv.push_str(&format!("{},{:e},{:e},{:e},{:e},{:e}\n", r.n, r.err_fwd, r.err_inv, r.bound_fwd, r.bound_inv, study.slope_fwd));
    }
    match &a.out {
        Some(p) => {
            fs::write(p, &csv)?;
            eprintln!("slope_fwd {:.4} slope_inv {:.4} bound dominated: {}", study.slope_fwd, study.slope_inv, study.forward_dominated());
        }
        None => print!("{csv}"),
    }
    if let Some(p) = &a.plot {
        let pts = |f: fn(&inn::constructor::rate::RateRow) -> f64| study.rows.iter().map(|r| (r.n as f64, f(r))).collect();
        plot::write(
            p,
            &Chart { title: "Squared L2 error", x_label: "n", y_label: "error", log_x: true, log_y: true },
            &[
                Series { name: "err_fwd".into(), points: pts(|r| r.err_fwd) },
                Series { name: "bound_fwd".into(), points: pts(|r| r.bound_fwd) },
                Series { name: "err_inv".into(), points: pts(|r| r.err_inv) },
                Series { name: "bound_inv".into(), points: pts(|r| r.bound_inv) },
            ],
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------- pde-gen

#[derive(Args, Debug)]
pub struct PdeGenArgs {
    /// Number of samples.
    #[arg(long, default_value_t = 2000)]
    pub m: usize,
    /// Full-size dataset (M = 10000); overrides --m.
    #[arg(long)]
    pub full: bool,
    /// Cells per axis (h = 1/cells).
    #[arg(long, default_value_t = 50)]
    pub cells: usize,
    /// Redraw coefficients whose minimum on the grid is below this.
    #[arg(long, default_value_t = 1e-3)]
    pub u_min: f64,
    /// Manifest path; the binary records go next to it.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn pde_gen(g: &Global, a: PdeGenArgs) -> CliResult<()> {
    let m = if a.full { 10_000 } else { a.m };
    if m == 0 {
        return usage(anyhow!("--m must be positive"));
    }
    let spec = SolveSpec { u_min: a.u_min, ..SolveSpec::with_cells(a.cells) };
    spec.validate().map_err(|e| CliError::Usage(e.into()))?;
    let ds = generate(m, g.seed, &spec)?;
    ds.save(&a.out)?;
    print_json(&json!({
        "M": ds.len(),
        "d_in": ds.xi.ncols(),
        "d_out": ds.y.ncols(),
        "seed": ds.seed,
        "h": spec.h(),
        "rejections": ds.rejections,
        "out": a.out,
    }))
}

// ---------------------------------------------------------------- pca

#[derive(Args, Debug, Clone)]
pub struct SplitArgs {
    /// Reduced dimension on both sides.
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    /// Training samples, from the front of the dataset.
    #[arg(long, default_value_t = 100)]
    pub n_train: usize,
    /// Test samples, from the back.
    #[arg(long, default_value_t = 500)]
    pub n_test: usize,
    /// Fit the bases on every non-test sample instead of the training set.
    #[arg(long)]
    pub pool: bool,
    /// Network input: kl_weighted or raw.
    #[arg(long, default_value = "kl_weighted")]
    pub features: InputFeatures,
}

impl SplitArgs {
    fn config(&self) -> SplitConfig {
        SplitConfig { d: self.d, n_train: self.n_train, n_test: self.n_test, pca_on_pool: self.pool, features: self.features }
    }
}

#[derive(Args, Debug)]
pub struct PcaArgs {
    /// Dataset manifest from pde-gen.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Lipschitz constant of the forward map, for the bound report.
    #[arg(long, requires = "lip_f_inv")]
    pub lip_f: Option<f64>,
    /// Lipschitz constant of the inverse map.
    #[arg(long, requires = "lip_f")]
    pub lip_f_inv: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c_eps: f64,
}

#[derive(Serialize, Deserialize)]
struct SideReport {
    energy_fraction: f64,
    tail_sum: f64,
    train_reconstruction_mse: f64,
    eigvals: Vec<f64>,
    weights: Vec<f64>,
}

fn side_report(b: &PcaBasis, train: ndarray::ArrayView2<f64>) -> CliResult<SideReport> {
    Ok(SideReport {
        energy_fraction: b.energy_fraction(),
        tail_sum: b.tail_sum(),
        train_reconstruction_mse: b.reconstruction_mse(train)?,
        eigvals: b.eigvals.iter().take(b.d_u.max(20)).copied().collect(),
        weights: b.weight_vector()?,
    })
}

fn load_dataset(p: &Path) -> CliResult<PairDataset> {
    load_input(p, PairDataset::load)
}

fn reduce_checked(ds: &PairDataset, cfg: &SplitConfig) -> CliResult<Reduced> {
    split_indices(ds.len(), cfg).map_err(|e| CliError::Usage(e.into()))?;
    Ok(reduce(ds, cfg)?)
}

pub fn pca(_g: &Global, a: PcaArgs) -> CliResult<()> {
    let ds = load_dataset(&a.data)?;
    let cfg = a.split.config();
    let red = reduce_checked(&ds, &cfg)?;
    ensure_dir(&a.out_dir)?;
    red.basis_x.save(&a.out_dir.join("basis_x.json"))?;
    red.basis_y.save(&a.out_dir.join("basis_y.json"))?;
    write_json(&a.out_dir.join("weights.json"), &red.weights)?;

    let (train, _, _) = split_indices(ds.len(), &cfg)?;
    let x = input_features(ds.xi.view(), cfg.features).select(ndarray::Axis(0), &train);
    let y = ds.y.select(ndarray::Axis(0), &train);
    let bounds = match (a.lip_f, a.lip_f_inv) {
        (Some(l), Some(li)) => Some(tail_bound_report(&red.basis_x, &red.basis_y, l, li, a.c_eps)?),
        _ => None,
    };
    let report = json!({
        "split": cfg,
        "basis_samples": red.basis_x.sample_count,
        "x": side_report(&red.basis_x, x.view())?,
        "y": side_report(&red.basis_y, y.view())?,
        "bounds": bounds,
    });
    write_json(&a.out_dir.join("report.json"), &report)?;
    print_json(&report)
}

// ---------------------------------------------------------------- train

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Directory with basis_x.json / basis_y.json from `inn pca`; fitted here
    /// when absent.
    #[arg(long)]
    pub pca_dir: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Weight of the inverse-direction loss.
    #[arg(long, default_value_t = 1e-3)]
    pub c0: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 20_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 3)]
    pub blocks: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 3)]
    pub hidden_layers: usize,
    /// Exponent clamp of the coupling scale.
    #[arg(long, default_value_t = 5.0)]
    pub s_max: f64,
    /// Minibatch size; full batch when absent.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub record_every: usize,
    /// Stop after this many records without a new best e_g.
    #[arg(long)]
    pub early_stop: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// SVG chart of the error history.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

/// Contents of `run.json` in a training directory.
#[derive(Serialize, Deserialize)]
pub struct RunInfo {
    pub split: SplitConfig,
    pub arch: Arch,
    pub config: TrainConfig,
    pub steps: usize,
    pub best_fwd_step: usize,
    pub best_fwd_e_g: f64,
    pub best_inv_step: usize,
    pub best_inv_e_g: f64,
    pub inverse_semi_convergence: bool,
}

pub fn train_cmd(g: &Global, a: TrainArgs) -> CliResult<()> {
    let ds = load_dataset(&a.data)?;
    let cfg = a.split.config();
    let red = match &a.pca_dir {
        Some(dir) => {
            let bx = load_input(&dir.join("basis_x.json"), PcaBasis::load)?;
            let by = load_input(&dir.join("basis_y.json"), PcaBasis::load)?;
            let bx = bx.truncate(cfg.d).map_err(|e| CliError::Usage(e.into()))?;
            let by = by.truncate(cfg.d).map_err(|e| CliError::Usage(e.into()))?;
            split_indices(ds.len(), &cfg).map_err(|e| CliError::Usage(e.into()))?;
            reduce_with(&ds, &cfg, bx, by)?
        }
        None => reduce_checked(&ds, &cfg)?,
    };
    let arch = Arch { dim: cfg.d, hidden: a.hidden, hidden_layers: a.hidden_layers, blocks: a.blocks, s_max: a.s_max };
    arch.validate().map_err(|e| CliError::Usage(e.into()))?;
    let tc = TrainConfig {
        c0: a.c0,
        adam: AdamConfig { lr: a.lr, ..AdamConfig::default() },
        max_steps: a.steps,
        batch_size: a.batch,
        seed: g.seed,
        record_every: a.record_every,
        early_stop: a.early_stop,
    };
    tc.validate().map_err(|e| CliError::Usage(e.into()))?;
    ensure_dir(&a.out_dir)?;

    let model = CouplingInn::init(arch.clone(), g.seed)?;
    let out = train(model, &red.train, &red.test, &red.weights, &tc, |r| {
        if r.step % (tc.record_every * 20) == 0 {
            eprintln!("step {:>7} loss {:.4e} e_g fwd {:.4e} inv {:.4e}", r.step, r.loss, r.e_g_fwd, r.e_g_inv);
        }
    })?;

    let dir = &a.out_dir;
    red.basis_x.save(&dir.join("basis_x.json"))?;
    red.basis_y.save(&dir.join("basis_y.json"))?;
    checkpoint::save(&dir.join("best_fwd.json"), &out.best_fwd.model, Some(&tc), out.best_fwd.step)?;
    checkpoint::save(&dir.join("best_inv.json"), &out.best_inv.model, Some(&tc), out.best_inv.step)?;
    checkpoint::save(&dir.join("final.json"), &out.final_model, Some(&tc), out.steps)?;
    fs::write(dir.join("history.csv"), history_csv(&out.history))?;
    let info = RunInfo {
        split: cfg,
        arch,
        config: tc,
        steps: out.steps,
        best_fwd_step: out.best_fwd.step,
        best_fwd_e_g: out.best_fwd.e_g,
        best_inv_step: out.best_inv.step,
        best_inv_e_g: out.best_inv.e_g,
        inverse_semi_convergence: out.inverse_semi_convergence(1.02),
    };
    write_json(&dir.join("run.json"), &info)?;
    if let Some(p) = &a.plot {
        let s = |name: &str, f: fn(&inn::neural::Record) -> f64| Series {
            name: name.into(),
            points: out.history.iter().map(|r| (r.step as f64, f(r))).collect(),
        };
        plot::write(
            p,
            &Chart { title: "Relative errors", x_label: "step", y_label: "error", log_x: false, log_y: true },
            &[s("e_a fwd", |r| r.e_a_fwd), s("e_g fwd", |r| r.e_g_fwd), s("e_a inv", |r| r.e_a_inv), s("e_g inv", |r| r.e_g_inv)],
        )?;
    }
    print_json(&info)
}

// ---------------------------------------------------------------- eval

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Training directories written by `inn train`.
    #[arg(long = "run", required = true, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    /// Also train a fully connected baseline per direction.
    #[arg(long)]
    pub fnn: bool,
    #[arg(long, default_value_t = 20_000)]
    pub fnn_steps: usize,
    #[arg(long, default_value_t = 64)]
    pub fnn_hidden: usize,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct EvalRow {
    model: String,
    n_train: usize,
    e_a_fwd: f64,
    e_g_fwd: f64,
    e_a_inv: f64,
    e_g_inv: f64,
    /// Decoded errors on the full-size test data.
    ambient_fwd: Option<f64>,
    ambient_inv: Option<f64>,
}

pub fn eval(g: &Global, a: EvalArgs) -> CliResult<()> {
    let ds = load_dataset(&a.data)?;
    let mut rows = Vec::new();
    for run in &a.runs {
        let info: RunInfo = load_input(&run.join("run.json"), |p| Ok(serde_json::from_str(&fs::read_to_string(p)?)?))?;
        let bx = load_input(&run.join("basis_x.json"), PcaBasis::load)?;
        let by = load_input(&run.join("basis_y.json"), PcaBasis::load)?;
        split_indices(ds.len(), &info.split).map_err(|e| CliError::Usage(e.into()))?;
        let red = reduce_with(&ds, &info.split, bx, by)?;
        let (fwd_model, _) = load_input(&run.join("best_fwd.json"), checkpoint::load)?;
        let (inv_model, _) = load_input(&run.join("best_inv.json"), checkpoint::load)?;
        let af = relative_errors(&fwd_model, &red.train, &red.weights)?;
        let gf = relative_errors(&fwd_model, &red.test, &red.weights)?;
        let ai = relative_errors(&inv_model, &red.train, &red.weights)?;
        let gi = relative_errors(&inv_model, &red.test, &red.weights)?;
        let (_, test, _) = split_indices(ds.len(), &info.split)?;
        let x = input_features(ds.xi.view(), info.split.features).select(ndarray::Axis(0), &test);
        let y = ds.y.select(ndarray::Axis(0), &test);
        let amb_f = ambient_errors(&fwd_model, &red.basis_x, &red.basis_y, x.view(), y.view())?;
        let amb_i = ambient_errors(&inv_model, &red.basis_x, &red.basis_y, x.view(), y.view())?;
        rows.push(EvalRow {
            model: "INN".into(),
            n_train: info.split.n_train,
            e_a_fwd: af.fwd,
            e_g_fwd: gf.fwd,
            e_a_inv: ai.inv,
            e_g_inv: gi.inv,
            ambient_fwd: Some(amb_f.fwd),
            ambient_inv: Some(amb_i.inv),
        });
        if a.fnn {
            let adam = AdamConfig { lr: info.config.adam.lr, ..AdamConfig::default() };
            let dim = info.split.d;
            let every = info.config.record_every;
            let (_, hf) = train_fnn(
                Fnn::init(dim, a.fnn_hidden, g.seed),
                &red.train.u,
                &red.train.y,
                &red.test.u,
                &red.test.y,
                &red.weights.y,
                adam,
                a.fnn_steps,
                every,
            )?;
            let (_, hi) = train_fnn(
                Fnn::init(dim, a.fnn_hidden, g.seed ^ 1),
                &red.train.y,
                &red.train.u,
                &red.test.y,
                &red.test.u,
                &red.weights.u,
                adam,
                a.fnn_steps,
                every,
            )?;
            let best = |h: &[inn::neural::fnn::FnnRecord]| {
                *h.iter().min_by(|p, q| p.e_g.total_cmp(&q.e_g)).expect("history has the initial record")
            };
            let (bf, bi) = (best(&hf), best(&hi));
            rows.push(EvalRow {
                model: "FNN".into(),
                n_train: info.split.n_train,
                e_a_fwd: bf.e_a,
                e_g_fwd: bf.e_g,
                e_a_inv: bi.e_a,
                e_g_inv: bi.e_g,
                ambient_fwd: None,
                ambient_inv: None,
            });
        }
    }
    if a.json {
        return print_json(&rows);
    }
    println!("{:<6} {:>7} {:>11} {:>11} {:>11} {:>11}", "model", "|T_r|", "e_a fwd", "e_g fwd", "e_a inv", "e_g inv");
    for r in &rows {
        println!("{:<6} {:>7} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e}", r.model, r.n_train, r.e_a_fwd, r.e_g_fwd, r.e_a_inv, r.e_g_inv);
    }
    Ok(())
}

// ---------------------------------------------------------------- verify

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Constructed, lifted or coupling-INN model file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub probes: usize,
    #[arg(long, default_value_t = 10_000)]
    pub pairs: usize,
    /// Probe half-width for coupling models without --data.
    #[arg(long, default_value_t = 0.1)]
    pub spread: f64,
    /// Dataset for coupling models saved inside a training directory: probes
    /// then cover the encoded training data (widened by 10%).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, PartialEq, Eq)]
pub enum ModelKind {
    Constructed,
    Lifted,
    Coupling,
}

pub fn detect(path: &Path) -> CliResult<ModelKind> {
    require_file(path)?;
    let text = fs::read_to_string(path)?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(anyhow!("{}: {e}", path.display())))?;
    if v.get("format").and_then(|f| f.as_str()) == Some(checkpoint::FORMAT) {
        Ok(ModelKind::Coupling)
    } else if v.get("delta").is_some() {
        Ok(ModelKind::Lifted)
    } else if v.get("epsilon").is_some() {
        Ok(ModelKind::Constructed)
    } else {
        usage(anyhow!("{} is not a model file", path.display()))
    }
}

/// Encoded training-data boxes for a checkpoint inside a training directory.
fn data_boxes(data: &Path, model: &Path) -> CliResult<(ProbeBox, ProbeBox)> {
    let dir = model.parent().unwrap_or(Path::new("."));
    let info: RunInfo = load_input(&dir.join("run.json"), |p| Ok(serde_json::from_str(&fs::read_to_string(p)?)?))?;
    let bx = load_input(&dir.join("basis_x.json"), PcaBasis::load)?;
    let by = load_input(&dir.join("basis_y.json"), PcaBasis::load)?;
    let ds = load_dataset(data)?;
    split_indices(ds.len(), &info.split).map_err(|e| CliError::Usage(e.into()))?;
    let red = reduce_with(&ds, &info.split, bx, by)?;
    Ok((ProbeBox::around(red.train.u.view(), 0.1)?, ProbeBox::around(red.train.y.view(), 0.1)?))
}

pub fn verify(g: &Global, a: VerifyArgs) -> CliResult<()> {
    if a.probes == 0 || a.pairs == 0 || !(a.spread > 0.0) {
        return usage(anyhow!("--probes, --pairs and --spread must be positive"));
    }
    let opts = VerifyOptions { probes: a.probes, pairs: a.pairs, seed: g.seed };
    let kind = detect(&a.model)?;
    let checks: Vec<Check> = match kind {
        ModelKind::Constructed => verify::verify_constructed(&load_input(&a.model, ConstructedMap::load)?, &opts)?,
        ModelKind::Lifted => verify::verify_lifted(&load_input(&a.model, LiftedMap::load)?, &opts)?,
        ModelKind::Coupling => {
            let (m, _) = load_input(&a.model, checkpoint::load)?;
            let (u_box, y_box) = match &a.data {
                Some(p) => data_boxes(p, &a.model)?,
                None => (ProbeBox::cube(m.arch.dim, a.spread), ProbeBox::cube(m.arch.dim, a.spread)),
            };
            verify::verify_coupling(&m, &opts, &u_box, &y_box)?
        }
    };
    if a.json {
        print_json(&checks)?;
    } else {
        for c in &checks {
            println!("{c}");
        }
    }
    if verify::all_pass(&checks) {
        Ok(())
    } else {
        Err(CliError::Runtime(anyhow!("{} of {} checks failed", checks.iter().filter(|c| !c.pass).count(), checks.len())))
    }
}
