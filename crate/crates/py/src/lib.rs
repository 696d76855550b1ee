//! Python bindings (placeholder while the core library is built).

use pyo3::prelude::*;

#[pymodule]
fn robustss_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
