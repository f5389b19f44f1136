use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(pygofit::pygofit)(py);
        let locals = PyDict::new(py);
        locals.set_item("g", m).unwrap();
        f(py, &locals);
    });
}

fn eval(py: Python<'_>, locals: &Bound<'_, PyDict>, code: &str) -> f64 {
    let code = std::ffi::CString::new(code).unwrap();
    py.eval(&code, Some(locals), None).unwrap().extract().unwrap()
}

#[test]
fn statistics_are_exposed() {
    with_module(|py, l| {
        assert_eq!(eval(py, l, "g.edf([0.5])['d']"), 0.5);
        assert_eq!(eval(py, l, "g.region([0.5])[0]"), 1.5);
        assert!((eval(py, l, "g.neyman([0.5], 2)") - 1.25).abs() < 1e-12);
        assert_eq!(eval(py, l, "len(g.STATISTICS)"), 14.0);
    });
}

#[test]
fn calibrated_test_round_trip() {
    with_module(|py, l| {
        let p = eval(
            py,
            l,
            "g.Test('ad', 'uniform01', 3).run([0.1, 0.5, 0.9], g.Test('ad', 'uniform01', 3).calibrate(199, 4))['p_value']",
        );
        assert!((1.0 / 200.0..=1.0).contains(&p));
        let same = eval(
            py,
            l,
            "(lambda d: g.NullDistribution.from_text(d.to_text()).values == d.values)(g.Test('ks', 'exp(2)', 10).calibrate(50))",
        );
        assert_eq!(same, 1.0);
    });
}

#[test]
fn errors_become_value_errors() {
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(pygofit::pygofit)(py);
        let err = m.bind(py).getattr("Test").unwrap().call1(("nope", "uniform01", 5)).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        let err = m.bind(py).getattr("edf").unwrap().call1((vec![1.5f64],)).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");
    });
}
