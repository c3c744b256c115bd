//! Python bindings. Vectors cross the boundary as lists of floats and
//! matrices as lists of rows.

use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use inn::constructor::{self, RandomBiLipschitz, SineShear, TargetMap};
use inn::neural::{self, Arch, TrainConfig};
use inn::pde::{self, SolveSpec};
use inn::pipeline::{self, SplitConfig};

/// `(n, err_fwd, err_inv, bound_fwd, bound_inv)`.
type RateRow = (usize, f64, f64, f64, f64);
/// `(best_fwd_step, best_fwd_e_g, best_inv_step, best_inv_e_g)`.
type TrainSummary = (usize, f64, usize, f64);

fn err(e: inn::Error) -> PyErr {
    match e {
        inn::Error::Io(e) => PyIOError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, cols), rows.concat()).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn target(name: &str, d: usize, seed: u64) -> PyResult<Box<dyn TargetMap>> {
    match name {
        "sine" => Ok(Box::new(SineShear::new())),
        "random" => Ok(Box::new(RandomBiLipschitz::new(d, seed))),
        _ => Err(PyValueError::new_err(format!("unknown target {name:?}, expected 'sine' or 'random'"))),
    }
}

#[pyclass(frozen, module = "inn_py")]
struct GridDataset(constructor::GridDataset);

#[pymethods]
impl GridDataset {
    #[new]
    fn new(d: usize, n: usize, y: Vec<Vec<f64>>) -> PyResult<Self> {
        constructor::GridDataset::new(d, n, y).map(Self).map_err(err)
    }

    /// Samples `name` ('sine' or 'random') on the uniform grid.
    #[staticmethod]
    #[pyo3(signature = (name, n, d = 2, seed = 0))]
    fn synthetic(name: &str, n: usize, d: usize, seed: u64) -> PyResult<Self> {
        let f = target(name, d, seed)?;
        constructor::GridDataset::from_fn(f.dim(), n, |x| f.eval(x)).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        constructor::GridDataset::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    #[getter]
    fn d(&self) -> usize {
        self.0.d
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn x(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.0.len() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.0.x(i))
    }

    #[getter]
    fn y(&self) -> Vec<Vec<f64>> {
        self.0.y.clone()
    }
}

#[pyclass(frozen, module = "inn_py")]
struct ConstructedMap(constructor::ConstructedMap);

#[pymethods]
impl ConstructedMap {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        constructor::ConstructedMap::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.forward(&x).map_err(err)
    }

    fn inverse(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.exact_inverse(&y).map_err(err)
    }

    fn residual(&self, data: &GridDataset) -> PyResult<f64> {
        self.0.interpolation_residual(&data.0).map_err(err)
    }

    #[getter]
    fn layer_count(&self) -> usize {
        self.0.layer_count()
    }

    #[getter]
    fn r(&self) -> Option<f64> {
        self.0.r()
    }

    /// Certificate as a JSON string.
    fn certificate_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0.certificate).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

#[pyclass(frozen, module = "inn_py")]
struct LiftedMap(inn::lifted::LiftedMap);

#[pymethods]
impl LiftedMap {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        inn::lifted::LiftedMap::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.forward(&x).map_err(err)
    }

    fn inverse(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.inverse(&y).map_err(err)
    }

    fn residual(&self, data: &GridDataset) -> PyResult<f64> {
        self.0.interpolation_residual(&data.0).map_err(err)
    }

    #[getter]
    fn layer_count(&self) -> usize {
        self.0.layer_count()
    }
}

/// Builds `F̃_nn` with accuracy `eps`, composed with `H^r` when `r` is given.
#[pyfunction]
#[pyo3(signature = (data, eps, r = None))]
fn construct(data: &GridDataset, eps: f64, r: Option<f64>) -> PyResult<ConstructedMap> {
    let m = constructor::construct_f_nn(&data.0, eps).map_err(err)?;
    let m = match r {
        Some(r) => m.compose_with_hr(r).map_err(err)?,
        None => m,
    };
    Ok(ConstructedMap(m))
}

#[pyfunction]
fn construct_lifted(data: &GridDataset) -> PyResult<LiftedMap> {
    inn::lifted::construct_f_nn_lifted(&data.0).map(LiftedMap).map_err(err)
}

/// Returns `(rows, slope_fwd)` with rows `(n, err_fwd, err_inv, bound_fwd, bound_inv)`.
#[pyfunction]
#[pyo3(signature = (name = "sine", n_list = vec![4, 8, 16, 32], c_eps = 1.0, samples = 4000, d = 2, seed = 0))]
fn rate_study(name: &str, n_list: Vec<usize>, c_eps: f64, samples: usize, d: usize, seed: u64) -> PyResult<(Vec<RateRow>, f64)> {
    let f = target(name, d, seed)?;
    let s = constructor::rate_study(f.as_ref(), &n_list, c_eps, samples, seed).map_err(err)?;
    let rows = s.rows.iter().map(|r| (r.n, r.err_fwd, r.err_inv, r.bound_fwd, r.bound_inv)).collect();
    Ok((rows, s.slope_fwd))
}

#[pyclass(frozen, module = "inn_py")]
struct PairDataset(pde::PairDataset);

#[pymethods]
impl PairDataset {
    #[staticmethod]
    #[pyo3(signature = (m, seed = 0, cells = 50))]
    fn generate(m: usize, seed: u64, cells: usize) -> PyResult<Self> {
        pde::generate(m, seed, &SolveSpec::with_cells(cells)).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        pde::PairDataset::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn xi(&self) -> Vec<Vec<f64>> {
        rows(&self.0.xi)
    }

    #[getter]
    fn y(&self) -> Vec<Vec<f64>> {
        rows(&self.0.y)
    }
}

/// Solves the diffusion problem for nodal coefficients `u` on a `cells`² grid.
/// Returns `(y, iterations, relative_residual)`.
#[pyfunction]
#[pyo3(signature = (u, cells = 50))]
fn solve(u: Vec<f64>, cells: usize) -> PyResult<(Vec<f64>, usize, f64)> {
    let s = pde::solve(&u, &SolveSpec::with_cells(cells)).map_err(err)?;
    Ok((s.y, s.iterations, s.rel_residual))
}

#[pyclass(frozen, module = "inn_py")]
struct PcaBasis(inn::pca::PcaBasis);

#[pymethods]
impl PcaBasis {
    /// Non-centered PCA of the rows of `samples`, keeping `d` directions.
    #[staticmethod]
    fn fit(samples: Vec<Vec<f64>>, d: usize) -> PyResult<Self> {
        inn::pca::PcaBasis::fit(matrix(samples)?.view(), d).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        inn::pca::PcaBasis::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    fn encode(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.encode(&u).map_err(err)
    }

    fn decode(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.decode(&v).map_err(err)
    }

    fn reconstruction_mse(&self, samples: Vec<Vec<f64>>) -> PyResult<f64> {
        self.0.reconstruction_mse(matrix(samples)?.view()).map_err(err)
    }

    #[getter]
    fn eigvals(&self) -> Vec<f64> {
        self.0.eigvals.clone()
    }

    #[getter]
    fn tail_sum(&self) -> f64 {
        self.0.tail_sum()
    }

    #[getter]
    fn energy_fraction(&self) -> f64 {
        self.0.energy_fraction()
    }
}

#[pyclass(frozen, module = "inn_py")]
struct CouplingInn(neural::CouplingInn);

#[pymethods]
impl CouplingInn {
    #[new]
    #[pyo3(signature = (seed = 0, dim = 10, hidden = 32, hidden_layers = 3, blocks = 3, s_max = 5.0))]
    fn new(seed: u64, dim: usize, hidden: usize, hidden_layers: usize, blocks: usize, s_max: f64) -> PyResult<Self> {
        let arch = Arch { dim, hidden, hidden_layers, blocks, s_max };
        neural::CouplingInn::init(arch, seed).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        neural::checkpoint::load(&path).map(|(m, _)| Self(m)).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        neural::checkpoint::save(&path, &self.0, None, 0).map_err(err)
    }

    fn forward(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.forward(&u).map_err(err)
    }

    fn inverse(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.inverse(&y).map_err(err)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.0.param_count()
    }
}

/// Reduces `data` with PCA and trains a coupling INN on the reduced pairs.
/// Returns `(best_forward_model, best_inverse_model, summary)` where the
/// summary holds the best steps and test errors.
#[pyfunction]
#[pyo3(signature = (data, d = 10, n_train = 100, n_test = 500, steps = 20000, c0 = 1e-3, lr = 1e-3, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    data: &PairDataset,
    d: usize,
    n_train: usize,
    n_test: usize,
    steps: usize,
    c0: f64,
    lr: f64,
    seed: u64,
) -> PyResult<(CouplingInn, CouplingInn, TrainSummary)> {
    let split = SplitConfig { d, n_train, n_test, ..SplitConfig::default() };
    let red = pipeline::reduce(&data.0, &split).map_err(err)?;
    let mut cfg = TrainConfig { max_steps: steps, seed, c0, ..TrainConfig::default() };
    cfg.adam.lr = lr;
    let arch = Arch { dim: d, ..Arch::default() };
    let out = py
        .detach(|| {
            let model = neural::CouplingInn::init(arch, seed)?;
            neural::train(model, &red.train, &red.test, &red.weights, &cfg, |_| {})
        })
        .map_err(err)?;
    let summary = (out.best_fwd.step, out.best_fwd.e_g, out.best_inv.step, out.best_inv.e_g);
    Ok((CouplingInn(out.best_fwd.model), CouplingInn(out.best_inv.model), summary))
}

#[pymodule]
fn inn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<GridDataset>()?;
    m.add_class::<ConstructedMap>()?;
    m.add_class::<LiftedMap>()?;
    m.add_class::<PairDataset>()?;
    m.add_class::<PcaBasis>()?;
    m.add_class::<CouplingInn>()?;
    m.add_function(wrap_pyfunction!(construct, m)?)?;
    m.add_function(wrap_pyfunction!(construct_lifted, m)?)?;
    m.add_function(wrap_pyfunction!(rate_study, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
