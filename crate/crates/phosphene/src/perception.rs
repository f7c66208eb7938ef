//! Simplified axon-map perceptual model.
//!
//! Retinal ganglion somas sit at the percept-grid pixel centers; each sends a
//! straight axon toward the optic disc, sampled at `axon_segments` points.
//! Stimulating an electrode excites axon segments with a Gaussian falloff in
//! distance (scale `rho_um`) damped exponentially along the axon
//! (scale `lambda_um`):
//!
//! ```text
//! weight(segment j) = exp(-|a_j - e|^2 / (2 rho^2)) * exp(-t_j / lambda)
//! ```
//!
//! A pixel's brightness under a single electrode is the maximum segment
//! weight, which yields the columns of the sparse perception matrix. Under
//! multiple electrodes, currents add per segment *before* the maximum is
//! taken, so superposition fails exactly when several electrodes excite the
//! same axon at different segments; that is the nonlinear forward model used
//! for final evaluation.
//!
//! Large `rho` widens phosphenes, large `lambda` elongates them into comet
//! shapes pointing away from the optic disc.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub const DEFAULT_OPTIC_DISC_UM: [f64; 2] = [4000.0, 0.0];
pub const DEFAULT_AXON_SEGMENTS: usize = 300;
pub const DEFAULT_GRID_PX: usize = 28;
pub const DEFAULT_TAU: f64 = 0.05;

/// Electrode-segment pairs farther apart than `rho * sqrt(2 ln(1/EPS))` are
/// skipped during matrix generation and nonlinear evaluation; their Gaussian
/// factor is below EPS.
const CUTOFF_EPS: f64 = 1e-6;

/// Axon-map parameters of one simulated patient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatientParams {
    /// Current-spread decay constant in micrometers; controls percept size.
    pub rho_um: f64,
    /// Axonal decay constant in micrometers; controls percept elongation.
    pub lambda_um: f64,
    /// Retinal position of the optic disc (right eye default).
    pub optic_disc_um: [f64; 2],
    /// Number of sample points per axon, soma to optic disc inclusive.
    pub axon_segments: usize,
}

impl PatientParams {
    pub fn new(rho_um: f64, lambda_um: f64) -> Self {
        PatientParams {
            rho_um,
            lambda_um,
            optic_disc_um: DEFAULT_OPTIC_DISC_UM,
            axon_segments: DEFAULT_AXON_SEGMENTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_um > 0.0) || !self.rho_um.is_finite() {
            return Err(Error::Config(format!("rho_um must be positive, got {}", self.rho_um)));
        }
        if !(self.lambda_um > 0.0) || !self.lambda_um.is_finite() {
            return Err(Error::Config(format!(
                "lambda_um must be positive, got {}",
                self.lambda_um
            )));
        }
        if self.axon_segments < 2 {
            return Err(Error::Config(format!(
                "axon_segments must be at least 2, got {}",
                self.axon_segments
            )));
        }
        Ok(())
    }

    fn cutoff_radius(&self) -> f64 {
        self.rho_um * (2.0 * (1.0 / CUTOFF_EPS).ln()).sqrt()
    }
}

/// Rectangular electrode array; electrode `n` sits at row-major position
/// `(n / cols, n % cols)`, row 0 at the top (+y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImplantGrid {
    pub rows: usize,
    pub cols: usize,
    pub pitch_h_um: f64,
    pub pitch_v_um: f64,
    pub center_um: [f64; 2],
}

impl ImplantGrid {
    pub fn new(rows: usize, cols: usize, pitch_h_um: f64, pitch_v_um: f64) -> Self {
        ImplantGrid { rows, cols, pitch_h_um, pitch_v_um, center_um: [0.0, 0.0] }
    }

    pub fn electrode_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn electrode_position(&self, n: usize) -> [f64; 2] {
        let (r, c) = (n / self.cols, n % self.cols);
        [
            self.center_um[0] + (c as f64 - (self.cols as f64 - 1.0) / 2.0) * self.pitch_h_um,
            self.center_um[1] + ((self.rows as f64 - 1.0) / 2.0 - r as f64) * self.pitch_v_um,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config("implant must have at least one electrode".into()));
        }
        if !(self.pitch_h_um > 0.0) || !(self.pitch_v_um > 0.0) {
            return Err(Error::Config("electrode pitch must be positive".into()));
        }
        Ok(())
    }
}

/// Extent of the percept grid in retinal coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Pixel lattice the percept is simulated on. Pixels are cell-centered within
/// the extent, row-major with row 0 at the top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptGrid {
    pub width_px: usize,
    pub height_px: usize,
    pub extent: Extent,
}

impl PerceptGrid {
    /// Grid over the implant's bounding box (electrode-center span) expanded
    /// by `margin_um` on every side.
    pub fn covering(implant: &ImplantGrid, px: usize, margin_um: f64) -> Result<Self> {
        implant.validate()?;
        let half_w = (implant.cols as f64 - 1.0) / 2.0 * implant.pitch_h_um + margin_um;
        let half_h = (implant.rows as f64 - 1.0) / 2.0 * implant.pitch_v_um + margin_um;
        let grid = PerceptGrid {
            width_px: px,
            height_px: px,
            extent: Extent {
                x_min: implant.center_um[0] - half_w,
                x_max: implant.center_um[0] + half_w,
                y_min: implant.center_um[1] - half_h,
                y_max: implant.center_um[1] + half_h,
            },
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn pixel_count(&self) -> usize {
        self.width_px * self.height_px
    }

    pub fn pixel_center(&self, p: usize) -> [f64; 2] {
        let (r, c) = (p / self.width_px, p % self.width_px);
        let w = (self.extent.x_max - self.extent.x_min) / self.width_px as f64;
        let h = (self.extent.y_max - self.extent.y_min) / self.height_px as f64;
        [
            self.extent.x_min + (c as f64 + 0.5) * w,
            self.extent.y_max - (r as f64 + 0.5) * h,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::Config("percept grid must have at least one pixel".into()));
        }
        if !(self.extent.x_max > self.extent.x_min) || !(self.extent.y_max > self.extent.y_min) {
            return Err(Error::Config("percept grid extent is degenerate".into()));
        }
        Ok(())
    }
}

/// Normalized electrode amplitudes in `[0, 1]^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    amplitudes: Vec<f64>,
}

impl Stimulus {
    pub fn new(amplitudes: Vec<f64>) -> Result<Self> {
        for &a in &amplitudes {
            if !a.is_finite() || !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidValue(format!(
                    "stimulus amplitudes must lie in [0, 1], got {a}"
                )));
            }
        }
        Ok(Stimulus { amplitudes })
    }

    pub fn zeros(n: usize) -> Self {
        Stimulus { amplitudes: vec![0.0; n] }
    }

    pub fn one_hot(n: usize, len: usize) -> Result<Self> {
        if n >= len {
            return Err(Error::InvalidArgument(format!("electrode {n} out of range {len}")));
        }
        let mut amplitudes = vec![0.0; len];
        amplitudes[n] = 1.0;
        Ok(Stimulus { amplitudes })
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.amplitudes
    }
}

/// Simulated percept brightness in `[0, 1]^M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Percept {
    brightness: Vec<f64>,
}

impl Percept {
    pub fn new(brightness: Vec<f64>) -> Result<Self> {
        for &b in &brightness {
            if !b.is_finite() || !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidValue(format!(
                    "percept brightness must lie in [0, 1], got {b}"
                )));
            }
        }
        Ok(Percept { brightness })
    }

    pub fn len(&self) -> usize {
        self.brightness.len()
    }

    pub fn is_empty(&self) -> bool {
        self.brightness.is_empty()
    }

    pub fn brightness(&self) -> &[f64] {
        &self.brightness
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.brightness
    }
}

/// Per-segment weights of one (pixel, electrode) pair, exact formula with no
/// distance cutoff. Reference path for tests and calibration; the matrix
/// generator and nonlinear forward use the windowed evaluation below.
pub fn axon_weight(
    pixel_pos: [f64; 2],
    electrode_pos: [f64; 2],
    patient: &PatientParams,
) -> Vec<f64> {
    let s = patient.axon_segments;
    let dir = [
        patient.optic_disc_um[0] - pixel_pos[0],
        patient.optic_disc_um[1] - pixel_pos[1],
    ];
    let len = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
    let inv_two_rho2 = 1.0 / (2.0 * patient.rho_um * patient.rho_um);
    (0..s)
        .map(|j| {
            let frac = j as f64 / (s as f64 - 1.0);
            let ax = pixel_pos[0] + frac * dir[0];
            let ay = pixel_pos[1] + frac * dir[1];
            let t = frac * len;
            let d2 = (ax - electrode_pos[0]).powi(2) + (ay - electrode_pos[1]).powi(2);
            (-d2 * inv_two_rho2).exp() * (-t / patient.lambda_um).exp()
        })
        .collect()
}

/// Electrode lattice geometry in a form the windowed kernels can search.
struct Lattice {
    xs: Vec<f64>,
    ys: Vec<f64>,
    pitch_h: f64,
    pitch_v: f64,
}

impl Lattice {
    fn new(implant: &ImplantGrid) -> Self {
        let xs = (0..implant.cols)
            .map(|c| {
                implant.center_um[0]
                    + (c as f64 - (implant.cols as f64 - 1.0) / 2.0) * implant.pitch_h_um
            })
            .collect();
        let ys = (0..implant.rows)
            .map(|r| {
                implant.center_um[1]
                    + ((implant.rows as f64 - 1.0) / 2.0 - r as f64) * implant.pitch_v_um
            })
            .collect();
        Lattice { xs, ys, pitch_h: implant.pitch_h_um, pitch_v: implant.pitch_v_um }
    }

    /// Electrode rows with |ay - ys[r]| <= radius (ys is decreasing).
    fn row_window(&self, ay: f64, radius: f64) -> (usize, usize) {
        let top = self.ys[0];
        let lo = ((top - ay - radius) / self.pitch_v).ceil().max(0.0) as usize;
        let hi = ((top - ay + radius) / self.pitch_v).floor().min(self.ys.len() as f64 - 1.0);
        if hi < 0.0 {
            return (1, 0);
        }
        (lo, hi as usize)
    }

    /// Electrode columns with |ax - xs[c]| <= half (xs is increasing).
    fn col_window(&self, ax: f64, half: f64) -> (usize, usize) {
        let left = self.xs[0];
        let lo = ((ax - half - left) / self.pitch_h).ceil().max(0.0) as usize;
        let hi = ((ax + half - left) / self.pitch_h).floor().min(self.xs.len() as f64 - 1.0);
        if hi < 0.0 {
            return (1, 0);
        }
        (lo, hi as usize)
    }
}

/// Walks the axon of pixel `p` and hands every electrode row within the
/// cutoff radius of an axon segment to `visit` as
/// `(segment, ft, fx_offset, fx, c_lo, c_hi, fy, electrode_row)`. Both the
/// matrix generator and the nonlinear forward are built on this single scan
/// so their weights agree exactly.
#[allow(clippy::too_many_arguments)]
fn scan_axon(
    patient: &PatientParams,
    lattice: &Lattice,
    grid: &PerceptGrid,
    p: usize,
    mut visit: impl FnMut(usize, f64, usize, &[f64], usize, usize, f64, usize),
) {
    let soma = grid.pixel_center(p);
    let dir = [
        patient.optic_disc_um[0] - soma[0],
        patient.optic_disc_um[1] - soma[1],
    ];
    let len = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
    let segs = patient.axon_segments;
    let radius = patient.cutoff_radius();
    let r2 = radius * radius;
    let inv_two_rho2 = 1.0 / (2.0 * patient.rho_um * patient.rho_um);
    let inv_lambda = 1.0 / patient.lambda_um;

    let mut fx = Vec::with_capacity(lattice.xs.len());
    for j in 0..segs {
        let frac = j as f64 / (segs as f64 - 1.0);
        let ax = soma[0] + frac * dir[0];
        let ay = soma[1] + frac * dir[1];
        let (r_lo, r_hi) = lattice.row_window(ay, radius);
        if r_lo > r_hi {
            continue;
        }
        let (c_full_lo, c_full_hi) = lattice.col_window(ax, radius);
        if c_full_lo > c_full_hi {
            continue;
        }
        let ft = (-frac * len * inv_lambda).exp();
        fx.clear();
        for c in c_full_lo..=c_full_hi {
            let dx = ax - lattice.xs[c];
            fx.push((-dx * dx * inv_two_rho2).exp());
        }
        for r in r_lo..=r_hi {
            let dy = ay - lattice.ys[r];
            let rem = r2 - dy * dy;
            if rem < 0.0 {
                continue;
            }
            let half = rem.sqrt();
            let (c_lo, c_hi) = lattice.col_window(ax, half);
            if c_lo > c_hi {
                continue;
            }
            let fy = (-dy * dy * inv_two_rho2).exp();
            visit(j, ft, c_full_lo, &fx, c_lo, c_hi, fy, r);
        }
    }
}

/// One row of the perception matrix: for every electrode, the maximum segment
/// weight seen from pixel `p`. `scratch` must have one slot per electrode.
fn matrix_row(
    patient: &PatientParams,
    lattice: &Lattice,
    grid: &PerceptGrid,
    implant_cols: usize,
    p: usize,
    scratch: &mut [f64],
) -> (Vec<usize>, Vec<f64>) {
    scratch.fill(0.0);
    scan_axon(patient, lattice, grid, p, |_seg, ft, fx_lo, fx, c_lo, c_hi, fy, row| {
        let base = row * implant_cols;
        for c in c_lo..=c_hi {
            let w = (fx[c - fx_lo] * fy) * ft;
            let slot = &mut scratch[base + c];
            if w > *slot {
                *slot = w;
            }
        }
    });
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for (n, &w) in scratch.iter().enumerate() {
        if w > 0.0 {
            indices.push(n);
            values.push(w);
        }
    }
    (indices, values)
}

/// Generates the sparse perception matrix by simulating each electrode's
/// percept, then truncating entries below `tau` of the global maximum.
pub fn build_perception_matrix(
    patient: &PatientParams,
    implant: &ImplantGrid,
    grid: &PerceptGrid,
    tau: f64,
) -> Result<CsrMatrix> {
    patient.validate()?;
    implant.validate()?;
    grid.validate()?;
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!(
            "truncation fraction must lie in [0, 1], got {tau}"
        )));
    }
    let n = implant.electrode_count();
    let m = grid.pixel_count();
    let lattice = Lattice::new(implant);

    let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..m)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |scratch, p| matrix_row(patient, &lattice, grid, implant.cols, p, scratch),
        )
        .collect();

    let mut indptr = Vec::with_capacity(m + 1);
    indptr.push(0);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for (ri, vi) in &rows {
        indices.extend_from_slice(ri);
        values.extend_from_slice(vi);
        indptr.push(indices.len());
    }
    let full = CsrMatrix::from_parts(m, n, indptr, indices, values)?;
    full.truncate(tau)
}

/// Nonlinear forward model: per segment the electrode currents add, then the
/// brightest segment wins; clipped to [0, 1].
pub fn forward_nonlinear(
    s: &Stimulus,
    patient: &PatientParams,
    implant: &ImplantGrid,
    grid: &PerceptGrid,
) -> Result<Percept> {
    patient.validate()?;
    implant.validate()?;
    grid.validate()?;
    if s.len() != implant.electrode_count() {
        return Err(Error::DimensionMismatch {
            expected: implant.electrode_count(),
            got: s.len(),
            context: "stimulus length vs electrode count",
        });
    }
    let lattice = Lattice::new(implant);
    let amps = s.amplitudes();
    let cols = implant.cols;

    let brightness: Vec<f64> = (0..grid.pixel_count())
        .into_par_iter()
        .map(|p| {
            let mut best = 0.0f64;
            let mut acc = 0.0;
            let mut current_ft = f64::NAN;
            scan_axon(patient, &lattice, grid, p, |ft, fx_lo, fx, c_lo, c_hi, fy, row| {
                // segment boundary: ft changes once per segment
                if ft != current_ft || current_ft.is_nan() {
                    if !current_ft.is_nan() {
                        best = best.max(acc * current_ft);
                    }
                    acc = 0.0;
                    current_ft = ft;
                }
                let base = row as usize * cols;
                let mut inner = 0.0;
                for c in c_lo..=c_hi {
                    inner += amps[base + c] * fx[c - fx_lo];
                }
                acc += fy * inner;
            });
            if !current_ft.is_nan() {
                best = best.max(acc * current_ft);
            }
            crate::clip01(best)
        })
        .collect();
    Ok(Percept { brightness })
}

/// Linearized forward model for reporting: `clip01(P s)`. The solver consumes
/// the unclipped product directly.
pub fn forward_linear(p: &CsrMatrix, s: &Stimulus) -> Result<Percept> {
    let y = p.spmv(s.amplitudes())?;
    Ok(Percept { brightness: y.into_iter().map(crate::clip01).collect() })
}

/// Flat JSON document describing one patient/implant/grid configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiConfig {
    pub rho_um: f64,
    pub lambda_um: f64,
    #[serde(default = "default_optic_disc")]
    pub optic_disc_um: [f64; 2],
    #[serde(default = "default_axon_segments")]
    pub axon_segments: usize,
    pub rows: usize,
    pub cols: usize,
    pub pitch_h_um: f64,
    pub pitch_v_um: f64,
    #[serde(default)]
    pub center_um: [f64; 2],
    #[serde(default = "default_grid_px")]
    pub grid_px: usize,
    #[serde(default)]
    pub margin_um: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_optic_disc() -> [f64; 2] {
    DEFAULT_OPTIC_DISC_UM
}

fn default_axon_segments() -> usize {
    DEFAULT_AXON_SEGMENTS
}

fn default_grid_px() -> usize {
    DEFAULT_GRID_PX
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

impl PhiConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn patient(&self) -> PatientParams {
        PatientParams {
            rho_um: self.rho_um,
            lambda_um: self.lambda_um,
            optic_disc_um: self.optic_disc_um,
            axon_segments: self.axon_segments,
        }
    }

    pub fn implant(&self) -> ImplantGrid {
        ImplantGrid {
            rows: self.rows,
            cols: self.cols,
            pitch_h_um: self.pitch_h_um,
            pitch_v_um: self.pitch_v_um,
            center_um: self.center_um,
        }
    }

    pub fn grid(&self) -> Result<PerceptGrid> {
        PerceptGrid::covering(&self.implant(), self.grid_px, self.margin_um)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn p1() -> PatientParams {
        PatientParams::new(150.0, 100.0)
    }

    #[test]
    fn axon_weight_at_soma_is_one() {
        let w = axon_weight([0.0, 0.0], [0.0, 0.0], &p1());
        assert_eq!(w[0], 1.0);
    }

    #[test]
    fn axon_weight_at_rho_distance() {
        // electrode perpendicular to the axon at the soma: d = rho, t = 0
        let w = axon_weight([0.0, 0.0], [0.0, 150.0], &p1());
        assert!((w[0] - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn axon_weight_at_lambda_arc_length() {
        // soma at origin, optic disc on the +x axis 4000 um away; with 41
        // segments the arc step is 100 um, so segment 1 sits at t = lambda
        let mut patient = p1();
        patient.axon_segments = 41;
        let w = axon_weight([0.0, 0.0], [100.0, 0.0], &patient);
        assert!((w[1] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn electrode_on_pixel_center_gives_unit_column_max() {
        // 3x3 implant with a 3x3 grid whose extent is half a pitch wider than
        // the electrode span, so pixel centers coincide with electrodes
        let implant = ImplantGrid::new(3, 3, 400.0, 400.0);
        let grid = PerceptGrid {
            width_px: 3,
            height_px: 3,
            extent: Extent { x_min: -600.0, x_max: 600.0, y_min: -600.0, y_max: 600.0 },
        };
        let m = build_perception_matrix(&p1(), &implant, &grid, 0.0).unwrap();
        let dense = m.to_dense();
        for n in 0..9 {
            let col_max = (0..9).map(|p| dense[p * 9 + n]).fold(0.0, f64::max);
            assert!((col_max - 1.0).abs() < 1e-15, "column {n} max {col_max}");
        }
    }

    #[test]
    fn tiny_rho_gives_near_diagonal_matrix() {
        let patient = PatientParams::new(1.0, 100.0);
        let implant = ImplantGrid::new(4, 4, 400.0, 400.0);
        let grid = PerceptGrid::covering(&implant, 8, 0.0).unwrap();
        let m = build_perception_matrix(&patient, &implant, &grid, 0.05).unwrap();
        for r in 0..m.rows() {
            assert!(m.indptr()[r + 1] - m.indptr()[r] <= 2, "row {r} too dense");
        }
    }

    #[test]
    fn degenerate_geometry_rejected() {
        let implant = ImplantGrid::new(4, 4, 0.0, 400.0);
        assert!(PerceptGrid::covering(&implant, 8, 0.0).is_err());
        let good = ImplantGrid::new(4, 4, 400.0, 400.0);
        let grid = PerceptGrid::covering(&good, 8, 0.0).unwrap();
        assert!(build_perception_matrix(&p1(), &implant, &grid, 0.05).is_err());
        let empty = PerceptGrid {
            width_px: 0,
            height_px: 0,
            extent: Extent { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 },
        };
        assert!(build_perception_matrix(&p1(), &good, &empty, 0.05).is_err());
    }

    #[test]
    fn forward_nonlinear_zero_stimulus() {
        let implant = ImplantGrid::new(5, 5, 400.0, 400.0);
        let grid = PerceptGrid::covering(&implant, 10, 0.0).unwrap();
        let y = forward_nonlinear(&Stimulus::zeros(25), &p1(), &implant, &grid).unwrap();
        assert!(y.brightness().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_hot_matches_untruncated_column() {
        let patient = PatientParams::new(200.0, 400.0);
        let implant = ImplantGrid::new(6, 6, 300.0, 300.0);
        let grid = PerceptGrid::covering(&implant, 12, 0.0).unwrap();
        let m = build_perception_matrix(&patient, &implant, &grid, 0.0).unwrap();
        let dense = m.to_dense();
        for n in [0usize, 7, 17, 35] {
            let s = Stimulus::one_hot(n, 36).unwrap();
            let y = forward_nonlinear(&s, &patient, &implant, &grid).unwrap();
            for p in 0..grid.pixel_count() {
                let want = dense[p * 36 + n];
                let got = y.brightness()[p];
                assert!(
                    (got - want).abs() <= 1e-12,
                    "pixel {p} electrode {n}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn distant_electrodes_superpose() {
        // two electrodes far apart relative to rho excite disjoint axon
        // segments, so the nonlinear percept is the sum of the singles
        let patient = PatientParams::new(100.0, 100.0);
        let implant = ImplantGrid::new(1, 2, 3000.0, 3000.0);
        let grid = PerceptGrid {
            width_px: 16,
            height_px: 16,
            extent: Extent { x_min: -2000.0, x_max: 2000.0, y_min: -1000.0, y_max: 1000.0 },
        };
        let both = Stimulus::new(vec![1.0, 1.0]).unwrap();
        let y_both = forward_nonlinear(&both, &patient, &implant, &grid).unwrap();
        let y0 = forward_nonlinear(&Stimulus::one_hot(0, 2).unwrap(), &patient, &implant, &grid)
            .unwrap();
        let y1 = forward_nonlinear(&Stimulus::one_hot(1, 2).unwrap(), &patient, &implant, &grid)
            .unwrap();
        for p in 0..grid.pixel_count() {
            let sum = crate::clip01(y0.brightness()[p] + y1.brightness()[p]);
            assert!((y_both.brightness()[p] - sum).abs() < 1e-6);
        }
    }

    #[test]
    fn monotone_in_stimulus() {
        let patient = PatientParams::new(150.0, 400.0);
        let implant = ImplantGrid::new(4, 4, 300.0, 300.0);
        let grid = PerceptGrid::covering(&implant, 8, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let hi: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
            let lo: Vec<f64> = hi.iter().map(|&v| v * rng.gen::<f64>()).collect();
            let y_hi =
                forward_nonlinear(&Stimulus::new(hi).unwrap(), &patient, &implant, &grid).unwrap();
            let y_lo =
                forward_nonlinear(&Stimulus::new(lo).unwrap(), &patient, &implant, &grid).unwrap();
            for (a, b) in y_lo.brightness().iter().zip(y_hi.brightness()) {
                assert!(a <= b);
            }
        }
    }

    #[test]
    fn nonlinear_bracketed_by_pointwise_max_and_linear() {
        let patient = PatientParams::new(150.0, 600.0);
        let implant = ImplantGrid::new(4, 4, 300.0, 300.0);
        let grid = PerceptGrid::covering(&implant, 8, 0.0).unwrap();
        let m0 = build_perception_matrix(&patient, &implant, &grid, 0.0).unwrap();
        let dense = m0.to_dense();
        let n = implant.electrode_count();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 0.3).collect();
        let y = forward_nonlinear(&Stimulus::new(s.clone()).unwrap(), &patient, &implant, &grid)
            .unwrap();
        let lin = m0.spmv(&s).unwrap();
        for p in 0..grid.pixel_count() {
            let point_max = (0..n).map(|j| s[j] * dense[p * n + j]).fold(0.0, f64::max);
            let yp = y.brightness()[p];
            assert!(yp >= crate::clip01(point_max) - 1e-12);
            assert!(yp <= crate::clip01(lin[p]) + 1e-12);
        }
    }

    #[test]
    fn lambda_increases_nonlinearity() {
        // stimuli scaled so the linear percept peaks at 0.5: without the
        // scaling both models saturate at 1 and the gap collapses
        let implant = ImplantGrid::new(15, 15, 400.0, 400.0);
        let grid = PerceptGrid::covering(&implant, 28, 0.0).unwrap();
        let n = implant.electrode_count();
        let mut devs = [0.0f64; 2];
        for (slot, lambda) in [(0, 100.0), (1, 1500.0)] {
            let patient = PatientParams::new(150.0, lambda);
            let m0 = build_perception_matrix(&patient, &implant, &grid, 0.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut total = 0.0;
            for _ in 0..5 {
                let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
                let peak = m0.spmv(&raw).unwrap().iter().copied().fold(0.0, f64::max);
                let s: Vec<f64> = raw.iter().map(|v| v * 0.5 / peak).collect();
                let y = forward_nonlinear(&Stimulus::new(s.clone()).unwrap(), &patient, &implant, &grid)
                    .unwrap();
                let lin = m0.spmv(&s).unwrap();
                total += y
                    .brightness()
                    .iter()
                    .zip(&lin)
                    .map(|(a, b)| (a - crate::clip01(*b)).powi(2))
                    .sum::<f64>()
                    .sqrt();
            }
            devs[slot] = total / 5.0;
        }
        assert!(
            devs[1] > devs[0],
            "expected lambda=1500 to deviate more: {devs:?}"
        );
    }

    #[test]
    fn phi_config_defaults() {
        let cfg = PhiConfig::from_json(
            r#"{"rho_um":150,"lambda_um":100,"rows":15,"cols":15,"pitch_h_um":400,"pitch_v_um":400}"#,
        )
        .unwrap();
        assert_eq!(cfg.optic_disc_um, DEFAULT_OPTIC_DISC_UM);
        assert_eq!(cfg.axon_segments, 300);
        assert_eq!(cfg.grid_px, 28);
        assert_eq!(cfg.tau, 0.05);
        assert!(cfg.grid().is_ok());
    }
}
