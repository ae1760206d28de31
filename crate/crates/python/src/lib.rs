//! Python module `edgepress_py`: the command workflows plus a few image
//! primitives on raw 8-bit grayscale buffers.

use std::path::PathBuf;

use edgepress::codec::{self, Bitstream, CodecConfig};
use edgepress::edges::{canny as canny_edges, CannyConfig};
use edgepress::harness;
use edgepress::metrics::{self, RdPoint};
use edgepress::{Error, Image};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

create_exception!(edgepress_py, EdgepressError, PyException);
create_exception!(edgepress_py, RefusedError, EdgepressError);

/// Maps library errors onto Python exception types.
pub fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Config(_) | Error::Shape(_) | Error::Precondition(_) => PyValueError::new_err(msg),
        Error::Io(_) | Error::Ingest { .. } => PyOSError::new_err(msg),
        Error::Refused(_) => RefusedError::new_err(msg),
        _ => EdgepressError::new_err(msg),
    }
}

fn image(pixels: &[u8], height: usize, width: usize) -> PyResult<Image> {
    Image::from_u8(height, width, pixels).map_err(to_py)
}

fn point_dict<'py>(py: Python<'py>, p: &RdPoint) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("qf", p.qf)?;
    d.set_item("bpp", p.bpp)?;
    d.set_item("psnr", p.psnr)?;
    d.set_item("ssim", p.ssim)?;
    d.set_item("msssim", p.msssim)?;
    d.set_item("psnrb", p.psnrb)?;
    d.set_item("miou", p.miou)?;
    Ok(d)
}

/// Baseline JPEG bytes of a row-major 8-bit grayscale buffer.
#[pyfunction]
fn jpeg_encode<'py>(
    py: Python<'py>,
    pixels: &[u8],
    height: usize,
    width: usize,
    qf: u32,
) -> PyResult<Bound<'py, PyBytes>> {
    let cfg = CodecConfig::new(qf).map_err(to_py)?;
    let bs = codec::encode(&image(pixels, height, width)?, &cfg).map_err(to_py)?;
    Ok(PyBytes::new(py, bs.bytes()))
}

/// `(pixels, height, width)` of a baseline grayscale JPEG.
#[pyfunction]
fn jpeg_decode<'py>(py: Python<'py>, data: &[u8]) -> PyResult<(Bound<'py, PyBytes>, usize, usize)> {
    let img = codec::decode(&Bitstream::from_bytes(data.to_vec())).map_err(to_py)?;
    Ok((PyBytes::new(py, &img.to_u8()), img.height(), img.width()))
}

#[pyfunction]
fn psnr(a: &[u8], b: &[u8], height: usize, width: usize) -> PyResult<f64> {
    metrics::psnr(&image(a, height, width)?, &image(b, height, width)?).map_err(to_py)
}

#[pyfunction]
fn ssim(a: &[u8], b: &[u8], height: usize, width: usize) -> PyResult<f64> {
    metrics::ssim(&image(a, height, width)?, &image(b, height, width)?).map_err(to_py)
}

/// Binary Canny edge map as bytes of 0/1.
#[pyfunction]
#[pyo3(signature = (pixels, height, width, sigma=1.4, low=0.1, high=0.3))]
fn canny<'py>(
    py: Python<'py>,
    pixels: &[u8],
    height: usize,
    width: usize,
    sigma: f64,
    low: f64,
    high: f64,
) -> PyResult<Bound<'py, PyBytes>> {
    let cfg = CannyConfig { sigma, low, high };
    cfg.validate().map_err(to_py)?;
    let e = canny_edges(&image(pixels, height, width)?, &cfg).map_err(to_py)?;
    Ok(PyBytes::new(py, e.bits()))
}

/// Trains from a config file; returns the final checkpoint path.
#[pyfunction]
fn train(config: PathBuf) -> PyResult<String> {
    let leg = harness::cmd_train(&config).map_err(to_py)?;
    Ok(leg.checkpoint_path.display().to_string())
}

/// Writes `out_jpg` and its sidecar; returns the sidecar as a dict.
#[pyfunction]
fn compress<'py>(py: Python<'py>, checkpoint: PathBuf, image: PathBuf, out_jpg: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let s = harness::cmd_compress(&checkpoint, &image, &out_jpg).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mode", s.mode.to_string())?;
    d.set_item("qf", s.qf)?;
    d.set_item("original_dims", (s.original_dims[0], s.original_dims[1]))?;
    d.set_item("padded_dims", (s.padded_dims[0], s.padded_dims[1]))?;
    d.set_item("checkpoint_sha256", s.checkpoint_sha256)?;
    Ok(d)
}

/// Writes the reconstruction as PGM; returns its `(height, width)`.
#[pyfunction]
fn decompress(checkpoint: PathBuf, in_jpg: PathBuf, out_pgm: PathBuf) -> PyResult<(usize, usize)> {
    let img = harness::cmd_decompress(&checkpoint, &in_jpg, &out_pgm).map_err(to_py)?;
    Ok(img.dims())
}

/// Per-image CSV plus mean row; returns the mean as a dict.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, checkpoint: PathBuf, data: PathBuf, out_csv: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let e = harness::cmd_evaluate(&checkpoint, &data, &out_csv, &CannyConfig::default()).map_err(to_py)?;
    point_dict(py, &e.mean)
}

#[pyfunction]
fn bd<'py>(py: Python<'py>, reference_csv: PathBuf, test_csv: PathBuf, out_json: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let r = harness::cmd_bd(&reference_csv, &test_csv, &out_json).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("pair", r.pair)?;
    d.set_item("bd_psnr_db", r.bd_psnr_db)?;
    d.set_item("bd_rate_percent", r.bd_rate_percent)?;
    Ok(d)
}

#[pymodule]
pub fn edgepress_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EdgepressError", m.py().get_type::<EdgepressError>())?;
    m.add("RefusedError", m.py().get_type::<RefusedError>())?;
    m.add_function(wrap_pyfunction!(jpeg_encode, m)?)?;
    m.add_function(wrap_pyfunction!(jpeg_decode, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(canny, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(compress, m)?)?;
    m.add_function(wrap_pyfunction!(decompress, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(bd, m)?)?;
    Ok(())
}
