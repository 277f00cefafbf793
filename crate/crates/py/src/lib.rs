//! Python module `pyncw`: existence verdicts, Laplace transforms, zonal
//! polynomials, samplers and verification suites. Matrices are nested lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ncwishart::harness::{cmd_sample, cmd_verify, RunConfig, SampleTarget, Suite};
use ncwishart::measures::{self, MeasureSpec, NcwParams};
use ncwishart::symcore::SymMatrix;
use ncwishart::zonal::{self, Partition};

fn py_err(e: ncwishart::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn sym(rows: Vec<Vec<f64>>) -> PyResult<SymMatrix> {
    SymMatrix::from_rows(&rows).map_err(py_err)
}

fn rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    let d = m.dim();
    (0..d)
        .map(|i| (0..d).map(|j| m.get(i, j)).collect())
        .collect()
}

fn ncw_params(two_p: f64, w: Vec<Vec<f64>>, sigma: Option<Vec<Vec<f64>>>) -> PyResult<NcwParams> {
    let w = sym(w)?;
    let sigma = match sigma {
        Some(s) => sym(s)?,
        None => SymMatrix::identity(w.dim()),
    };
    NcwParams::new(two_p, w, sigma).map_err(py_err)
}

/// Does m(2p, k, d) exist? Returns `(exists, reason, citation)`.
#[pyfunction]
fn exists_m(two_p: f64, k: usize, d: usize) -> PyResult<(bool, String, String)> {
    let v = measures::exists_m(&MeasureSpec::new(two_p, k, d).map_err(py_err)?);
    Ok((v.exists, v.reason.as_str().to_string(), v.citation))
}

/// Does NCW(2p, w, sigma) exist? Returns `(exists, reason, citation)`.
#[pyfunction]
#[pyo3(signature = (two_p, w, sigma=None, tol=0.0))]
fn exists_ncw(
    two_p: f64,
    w: Vec<Vec<f64>>,
    sigma: Option<Vec<Vec<f64>>>,
    tol: f64,
) -> PyResult<(bool, String, String)> {
    let v = measures::exists_ncw(&ncw_params(two_p, w, sigma)?, tol).map_err(py_err)?;
    Ok((v.exists, v.reason.as_str().to_string(), v.citation))
}

/// `∫ e^{-tr(s x)} m(2p, k, d)(dx)`.
#[pyfunction]
fn laplace_m(two_p: f64, k: usize, s: Vec<Vec<f64>>) -> PyResult<f64> {
    let s = sym(s)?;
    let spec = MeasureSpec::new(two_p, k, s.dim()).map_err(py_err)?;
    measures::laplace_m(&s, &spec).map_err(py_err)
}

/// `E[e^{-tr(s X)}]` for `X ~ NCW(2p, w, sigma)`.
#[pyfunction]
#[pyo3(signature = (two_p, w, s, sigma=None))]
fn laplace_ncw(
    two_p: f64,
    w: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
    sigma: Option<Vec<Vec<f64>>>,
) -> PyResult<f64> {
    let params = ncw_params(two_p, w, sigma)?;
    measures::laplace_ncw(&sym(s)?, &params).map_err(py_err)
}

/// Zonal polynomial `C_kappa` at a spectrum.
#[pyfunction]
fn zonal_c(eigs: Vec<f64>, kappa: Vec<usize>) -> PyResult<f64> {
    let p = Partition::new(&kappa, eigs.len()).map_err(py_err)?;
    zonal::zonal_c(&eigs, &p).map_err(py_err)
}

/// Exact `C_kappa(I_d)` as a `"p/q"` string.
#[pyfunction]
fn zonal_c_identity(kappa: Vec<usize>, d: usize) -> PyResult<String> {
    let p = Partition::new(&kappa, d).map_err(py_err)?;
    Ok(zonal::c_kappa_identity(&p, d).map_err(py_err)?.to_string())
}

/// `n` draws as `(matrix, weight)` pairs; weight is `None` for NCW.
/// `target` is `"ncw"`, `"m"` or `"singular-r"`.
#[pyfunction]
#[pyo3(signature = (target, d, n, two_p=None, k=0, w=None, sigma=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn sample(
    target: &str,
    d: usize,
    n: u64,
    two_p: Option<f64>,
    k: usize,
    w: Option<Vec<Vec<f64>>>,
    sigma: Option<Vec<Vec<f64>>>,
    seed: u64,
) -> PyResult<Vec<(Vec<Vec<f64>>, Option<f64>)>> {
    let need_p = || two_p.ok_or_else(|| PyValueError::new_err("two_p is required"));
    let target = match target {
        "ncw" => {
            let w = w.unwrap_or_else(|| vec![vec![0.0; d]; d]);
            SampleTarget::Ncw(ncw_params(need_p()?, w, sigma)?)
        }
        "m" => SampleTarget::M(MeasureSpec::new(need_p()?, k, d).map_err(py_err)?),
        "singular-r" => SampleTarget::SingularR(d),
        other => return Err(PyValueError::new_err(format!("unknown target {other:?}"))),
    };
    let cfg = RunConfig {
        seed,
        ..Default::default()
    };
    let (_, draws) = cmd_sample(&target, n, &cfg).map_err(py_err)?;
    Ok(draws.iter().map(|(m, wt)| (rows(m), *wt)).collect())
}

/// Runs a verification suite and returns its JSON report.
#[pyfunction]
#[pyo3(signature = (suite="all", seed=0, trials=10_000))]
fn verify(py: Python<'_>, suite: &str, seed: u64, trials: u64) -> PyResult<String> {
    let suite = Suite::parse(suite)
        .ok_or_else(|| PyValueError::new_err(format!("unknown suite {suite:?}")))?;
    let cfg = RunConfig {
        seed,
        trials,
        ..Default::default()
    };
    let rep = py.detach(|| cmd_verify(suite, &cfg)).map_err(py_err)?;
    Ok(rep.to_json())
}

#[pymodule]
pub fn pyncw(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(exists_m, m)?)?;
    m.add_function(wrap_pyfunction!(exists_ncw, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_m, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_ncw, m)?)?;
    m.add_function(wrap_pyfunction!(zonal_c, m)?)?;
    m.add_function(wrap_pyfunction!(zonal_c_identity, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
