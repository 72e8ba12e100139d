//! Python bindings. Structured values cross the boundary as JSON strings with
//! the same schema as the CLI files; the camera and gripper are classes.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use graspgdi::harness::run_pipeline_with_k;
use graspgdi::{AxisMode, DepthImage, Error, GraspFile, KmeansParams, PipelineConfig, PointFamily, SceneSpec};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "CameraModel", from_py_object)]
#[derive(Clone)]
struct PyCamera {
    inner: graspgdi::CameraModel,
}

#[pymethods]
impl PyCamera {
    #[new]
    #[pyo3(signature = (fx=525.0, fy=525.0, cx=319.5, cy=239.5, camera_height=1.3, width=640, height=480))]
    fn new(fx: f64, fy: f64, cx: f64, cy: f64, camera_height: f64, width: usize, height: usize) -> PyResult<Self> {
        let inner = graspgdi::CameraModel { fx, fy, cx, cy, camera_height, width, height };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: graspgdi::CameraModel = serde_json::from_str(text).map_err(json_err)?;
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    #[getter]
    fn fx(&self) -> f64 {
        self.inner.fx
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    /// Pixel coordinates of a camera-frame point.
    fn project(&self, p: [f64; 3]) -> (f64, f64) {
        self.inner.project(p)
    }
}

#[pyclass(name = "GripperModel", from_py_object)]
#[derive(Clone)]
struct PyGripper {
    inner: graspgdi::GripperModel,
}

#[pymethods]
impl PyGripper {
    #[new]
    #[pyo3(signature = (max_opening=0.18, finger_thickness=0.02, side_clearance=0.02, opening_fraction=0.5))]
    fn new(max_opening: f64, finger_thickness: f64, side_clearance: f64, opening_fraction: f64) -> PyResult<Self> {
        let inner = graspgdi::GripperModel { max_opening, finger_thickness, side_clearance, opening_fraction };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn opening(&self) -> f64 {
        self.inner.opening()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }
}

fn camera_or_default(camera: Option<PyCamera>) -> graspgdi::CameraModel {
    camera.map(|c| c.inner).unwrap_or_default()
}

fn config_from(config_json: Option<&str>) -> PyResult<PipelineConfig> {
    let cfg: PipelineConfig = match config_json {
        Some(t) => serde_json::from_str(t).map_err(json_err)?,
        None => PipelineConfig::default(),
    };
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

/// Renders a scene JSON; returns `(width, height, depths)` with depths in
/// meters, row-major.
#[pyfunction]
#[pyo3(signature = (scene_json, camera=None))]
fn render(scene_json: &str, camera: Option<PyCamera>) -> PyResult<(usize, usize, Vec<f64>)> {
    let spec: SceneSpec = serde_json::from_str(scene_json).map_err(json_err)?;
    let (img, _) = graspgdi::render_scene(&spec, &camera_or_default(camera)).map_err(py_err)?;
    Ok((img.width(), img.height(), img.values().to_vec()))
}

/// Runs the full pipeline on a metric depth raster and returns the grasps
/// JSON written by `graspgdi plan`.
#[pyfunction]
#[pyo3(signature = (width, height, depths, camera=None, config_json=None, k=None))]
fn plan(
    width: usize,
    height: usize,
    depths: Vec<f64>,
    camera: Option<PyCamera>,
    config_json: Option<&str>,
    k: Option<usize>,
) -> PyResult<String> {
    let img = DepthImage::new(width, height, depths).map_err(py_err)?;
    let cfg = config_from(config_json)?;
    let result = run_pipeline_with_k(&img, &camera_or_default(camera), &cfg, k.unwrap_or(cfg.k)).map_err(py_err)?;
    serde_json::to_string(&GraspFile::from_result(&result)).map_err(json_err)
}

type KmeansOutput = (Vec<(f64, f64)>, Vec<usize>, f64);

/// Seeded k-means; returns `(centroids, assignment, inertia)`.
#[pyfunction]
#[pyo3(signature = (points, k, seed=0, max_iter=100, tol=1e-4, n_init=50))]
fn kmeans(
    points: Vec<(f64, f64)>,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
    n_init: usize,
) -> PyResult<KmeansOutput> {
    let c = graspgdi::kmeans(&points, &KmeansParams { k, seed, max_iter, tol, n_init }).map_err(py_err)?;
    Ok((c.centroids, c.assignment, c.inertia))
}

/// Major-axis angle of a point family; returns `(phi, degenerate)`.
#[pyfunction]
#[pyo3(signature = (points, mode="central_moment"))]
fn major_axis(points: Vec<(f64, f64)>, mode: &str) -> PyResult<(f64, bool)> {
    let mode: AxisMode = serde_json::from_value(serde_json::Value::String(mode.to_string())).map_err(json_err)?;
    let family = PointFamily { cluster_index: 0, points, source_poses: Vec::new() };
    let a = graspgdi::major_axis(&family, mode);
    Ok((a.phi, a.degenerate))
}

/// Simulated clutter clearing; returns the metrics row as JSON.
#[pyfunction]
#[pyo3(signature = (scene_json, config_json=None, camera=None, max_trial_factor=1.5))]
fn run_experiment(
    scene_json: &str,
    config_json: Option<&str>,
    camera: Option<PyCamera>,
    max_trial_factor: f64,
) -> PyResult<String> {
    let spec: SceneSpec = serde_json::from_str(scene_json).map_err(json_err)?;
    let cfg = config_from(config_json)?;
    let report = graspgdi::run_experiment(&spec, &cfg, &camera_or_default(camera), max_trial_factor).map_err(py_err)?;
    serde_json::to_string(&report.metrics).map_err(json_err)
}

/// Random non-overlapping clutter scene as JSON.
#[pyfunction]
#[pyo3(signature = (n_objects, seed=0))]
fn random_scene(n_objects: usize, seed: u64) -> PyResult<String> {
    let params = graspgdi::synthgen::ClutterParams { n_objects, ..Default::default() };
    let spec = graspgdi::random_scene(&params, seed).map_err(py_err)?;
    serde_json::to_string(&spec).map_err(json_err)
}

#[pymodule]
fn graspgdi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCamera>()?;
    m.add_class::<PyGripper>()?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(major_axis, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(random_scene, m)?)?;
    Ok(())
}
