use pyo3::prelude::*;
use pyo3::types::PyModule;

fn with_module<F: FnOnce(&Bound<'_, PyModule>)>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "pyncw").unwrap();
        pyncw::pyncw(&m).unwrap();
        f(&m);
    });
}

#[test]
fn laplace_m122_at_2i() {
    with_module(|m| {
        let s = vec![vec![2.0, 0.0], vec![0.0, 2.0]];
        let v: f64 = m
            .getattr("laplace_m")
            .unwrap()
            .call1((1.0, 2usize, s))
            .unwrap()
            .extract()
            .unwrap();
        assert!((v - std::f64::consts::E / 2.0).abs() < 1e-14);
    });
}

#[test]
fn nonexistent_sampling_raises_value_error() {
    with_module(|m| {
        let py = m.py();
        let kwargs = pyo3::types::PyDict::new(py);
        kwargs.set_item("two_p", 1.0).unwrap();
        kwargs.set_item("k", 2usize).unwrap();
        let err = m
            .getattr("sample")
            .unwrap()
            .call(("m", 3usize, 5u64), Some(&kwargs))
            .unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}

#[test]
fn exact_identity_value() {
    with_module(|m| {
        let v: String = m
            .getattr("zonal_c_identity")
            .unwrap()
            .call1((vec![1usize, 1, 1], 3usize))
            .unwrap()
            .extract()
            .unwrap();
        assert_eq!(v, "2");
    });
}
