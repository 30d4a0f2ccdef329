use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::Value;

use dualmm::engine::Market as CoreMarket;
use dualmm::error::Error;
use dualmm::ledger::{parse_bundle, verify, MarketConfig, MarketState};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::SolverFailure { .. } => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

/// Serializes through Python's json module so nested reports arrive as dicts.
fn to_object<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_object(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn build(config: &str) -> PyResult<(MarketConfig, CoreMarket)> {
    let config = MarketConfig::from_json(config).map_err(to_py)?;
    let market = config.build().map_err(to_py)?;
    Ok((config, market))
}

/// A cost-function market maker. Stateless: every method takes the
/// outstanding quantity vector `q`.
#[pyclass(module = "dualmm_py", frozen)]
struct Market {
    inner: CoreMarket,
}

#[pymethods]
impl Market {
    /// Builds a market from a JSON config such as `{"kind": "lmsr", "n": 3, "b": 1.0}`.
    #[new]
    fn new(config: &str) -> PyResult<Self> {
        Ok(Market { inner: build(config)?.1 })
    }

    #[staticmethod]
    fn lmsr(n: usize, b: f64) -> PyResult<Self> {
        Ok(Market { inner: CoreMarket::lmsr(n, b).map_err(to_py)? })
    }

    #[staticmethod]
    fn sphere(lam: f64) -> PyResult<Self> {
        Ok(Market { inner: CoreMarket::sphere(lam).map_err(to_py)? })
    }

    #[staticmethod]
    fn pair_bet(n: usize, lam: f64) -> PyResult<Self> {
        Ok(Market { inner: CoreMarket::pair_bet(n, lam).map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (n, b, c, gamma=None, barrier="ratio"))]
    fn txncost(n: usize, b: f64, c: f64, gamma: Option<f64>, barrier: &str) -> PyResult<Self> {
        let ratio = match barrier {
            "ratio" => true,
            "log" => false,
            other => return Err(PyValueError::new_err(format!("unknown barrier {other:?}, expected \"ratio\" or \"log\""))),
        };
        Ok(Market { inner: CoreMarket::txncost(n, b, c, gamma, ratio).map_err(to_py)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn initial_price(&self) -> Vec<f64> {
        self.inner.initial_price().to_vec()
    }

    fn cost(&self, q: Vec<f64>) -> PyResult<f64> {
        self.inner.cost(&q).map_err(to_py)
    }

    fn price(&self, q: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.price(&q).map_err(to_py)
    }

    fn trade_cost(&self, q: Vec<f64>, r: Vec<f64>) -> PyResult<f64> {
        self.inner.trade_cost(&q, &r).map_err(to_py)
    }

    fn bid_ask_spread(&self, q: Vec<f64>, r: Vec<f64>) -> PyResult<f64> {
        self.inner.bid_ask_spread(&q, &r).map_err(to_py)
    }

    fn hessian(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        self.inner.hessian(&q).map_err(to_py)
    }

    fn depth(&self, q: Vec<f64>) -> PyResult<f64> {
        self.inner.depth(&q).map_err(to_py)
    }

    fn worst_case_depth(&self) -> f64 {
        self.inner.worst_case_depth()
    }

    fn hull_distance(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.hull_distance(&x).map_err(to_py)
    }

    /// Payout owed on `outcome` (an index, unit 3-vector or permutation).
    fn settle(&self, q: Vec<f64>, outcome: &Bound<'_, PyAny>) -> PyResult<f64> {
        let o = self.inner.payoff().parse_outcome(&from_object(outcome)?).map_err(to_py)?;
        self.inner.settle(&q, &o).map_err(to_py)
    }

    /// Runs the invariant battery and returns the report as a dict.
    fn verify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &verify(&self.inner, None))
    }

    fn __repr__(&self) -> String {
        format!("Market(dim={}, coverage={:?})", self.dim(), self.inner.coverage())
    }
}

/// A persisted market: quantities, cash collected and the trade log.
#[pyclass(module = "dualmm_py")]
struct Ledger {
    state: MarketState,
    market: CoreMarket,
}

#[pymethods]
impl Ledger {
    #[new]
    fn new(config: &str) -> PyResult<Self> {
        let (state, market) = MarketState::init(build(config)?.0).map_err(to_py)?;
        Ok(Ledger { state, market })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let state = MarketState::from_json(text).map_err(to_py)?;
        let market = state.market().map_err(to_py)?;
        Ok(Ledger { state, market })
    }

    fn to_json(&self) -> String {
        self.state.to_json()
    }

    #[getter]
    fn q(&self) -> Vec<f64> {
        self.state.q.clone()
    }

    #[getter]
    fn collected(&self) -> f64 {
        self.state.collected
    }

    fn market(&self) -> Market {
        Market { inner: self.market.clone() }
    }

    /// Buys a bundle: a list of quantities, or `[i, j, amount]` triples for pair bets.
    fn trade<'py>(&mut self, py: Python<'py>, bundle: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let parsed = parse_bundle(&self.market, &from_object(bundle)?).map_err(to_py)?;
        let quote = parsed.apply(&mut self.state, &self.market).map_err(to_py)?;
        to_object(py, &quote)
    }

    fn settle<'py>(&mut self, py: Python<'py>, outcome: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let o = self.market.payoff().parse_outcome(&from_object(outcome)?).map_err(to_py)?;
        let settlement = self.state.settle(&self.market, &o).map_err(to_py)?;
        to_object(py, &settlement)
    }

    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &self.state.report(&self.market).map_err(to_py)?)
    }

    fn verify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &verify(&self.market, Some(&self.state)))
    }
}

#[pymodule]
fn dualmm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Market>()?;
    m.add_class::<Ledger>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
