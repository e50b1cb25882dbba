//! Vertical heat-flux diagnostics for the convection model, in physical
//! space.
//!
//! The nine mode amplitudes multiply fixed velocity/temperature field shapes
//! (trigonometric term lists over the periodic square cell `[0, 2π/κ)²` and
//! the slab `0 ≤ z ≤ 1`, κ = aπ). Those shapes are shipped as a data file —
//! see [`FieldShapes::locate`] — because they are part of the model's
//! physical reconstruction, not of its ODE form. With them, the local flux
//!
//! ```text
//!     H(x, t) = w(x, t) θ'(x, t) − ∂_z θ̄(x),
//! ```
//!
//! (`w` vertical velocity, `θ'` temperature anomaly about the time mean `θ̄`)
//! decomposes bilinearly over a resolved/unresolved split of the mode
//! amplitudes into `H = H_cc + H_cs + H_ss`, which [`rb9d_heat_flux`] returns
//! as space-averaged time series. Space averages reduce to a 5×4 Gram matrix
//! of shape products, so the cost per sample is independent of the grid; the
//! pointwise fields behind the identity are exposed by [`rb9d_flux_fields`].

use crate::defect::Trajectory;
use crate::error::{Error, Result};
use crate::C64;
use ndarray::{Array1, Array3};
use serde::Deserialize;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Name of the shapes data file.
pub const SHAPES_FILE: &str = "rb9d_field_shapes.toml";

// ---------------------------------------------------------------------------
// trigonometric term lists
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum TrigKind {
    One,
    Cos,
    Sin,
}

/// One separable factor: `1`, `cos(m·s)`, or `sin(m·s)` where `s` is `κx`,
/// `κy`, or `πz` depending on the axis the factor sits on.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TrigFactor {
    kind: TrigKind,
    mult: f64,
}

impl TrigFactor {
    fn parse(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "field-shapes",
            detail,
        };
        if text == "one" {
            return Ok(Self {
                kind: TrigKind::One,
                mult: 0.0,
            });
        }
        let (kind, rest) = if let Some(r) = text.strip_prefix("cos:") {
            (TrigKind::Cos, r)
        } else if let Some(r) = text.strip_prefix("sin:") {
            (TrigKind::Sin, r)
        } else {
            return Err(bad(format!(
                "factor '{text}' is not 'one', 'cos:<n>', or 'sin:<n>'"
            )));
        };
        let mult: f64 = rest
            .parse()
            .map_err(|_| bad(format!("factor '{text}' has a non-numeric multiple")))?;
        Ok(Self { kind, mult })
    }

    fn eval(&self, s: f64) -> f64 {
        match self.kind {
            TrigKind::One => 1.0,
            TrigKind::Cos => (self.mult * s).cos(),
            TrigKind::Sin => (self.mult * s).sin(),
        }
    }

    /// d/ds of the factor (chain-rule scale for the axis applied by caller).
    fn deriv(&self, s: f64) -> f64 {
        match self.kind {
            TrigKind::One => 0.0,
            TrigKind::Cos => -self.mult * (self.mult * s).sin(),
            TrigKind::Sin => self.mult * (self.mult * s).cos(),
        }
    }
}

/// One term `c · fx(κx) · fy(κy) · fz(πz)` of a field shape.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ShapeTerm {
    coef: f64,
    x: TrigFactor,
    y: TrigFactor,
    z: TrigFactor,
}

impl ShapeTerm {
    fn eval(&self, kx: f64, ky: f64, pz: f64) -> f64 {
        self.coef * self.x.eval(kx) * self.y.eval(ky) * self.z.eval(pz)
    }

    fn eval_dz(&self, kx: f64, ky: f64, pz: f64) -> f64 {
        // ∂/∂z = π · d/d(πz)
        self.coef * self.x.eval(kx) * self.y.eval(ky) * PI * self.z.deriv(pz)
    }
}

// ---------------------------------------------------------------------------
// shapes file
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct TermEntry {
    c: f64,
    x: String,
    y: String,
    z: String,
}

#[derive(Deserialize)]
struct ModeEntry {
    mode: usize,
    #[serde(default)]
    terms: Vec<TermEntry>,
}

#[derive(Deserialize)]
struct ShapesFile {
    a: f64,
    w: Vec<ModeEntry>,
    theta: Vec<ModeEntry>,
}

/// Vertical-velocity shapes of the five velocity modes and temperature
/// shapes of the four temperature modes, on the cell `[0, 2π/κ)² × [0, 1]`.
///
/// A purely horizontal (toroidal) velocity mode carries an empty `w` list —
/// it moves no heat vertically.
#[derive(Debug, Clone)]
pub struct FieldShapes {
    /// Horizontal wavenumber the shapes were derived at (κ = aπ).
    pub a: f64,
    w: [Vec<ShapeTerm>; 5],
    theta: [Vec<ShapeTerm>; 4],
}

impl FieldShapes {
    /// Parse a shapes file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::MissingFieldShapes(format!("cannot read {}: {e}", path.display()))
        })?;
        let file: ShapesFile = toml::from_str(&text).map_err(|e| Error::Format {
            what: "field-shapes",
            detail: e.to_string(),
        })?;
        if !(file.a > 0.0) {
            return Err(Error::Format {
                what: "field-shapes",
                detail: format!("wavenumber a = {} must be positive", file.a),
            });
        }
        let mut shapes = Self {
            a: file.a,
            w: Default::default(),
            theta: Default::default(),
        };
        let mut seen_w = [false; 5];
        for entry in &file.w {
            if !(1..=5).contains(&entry.mode) {
                return Err(Error::Format {
                    what: "field-shapes",
                    detail: format!("w mode {} out of range 1..=5", entry.mode),
                });
            }
            seen_w[entry.mode - 1] = true;
            shapes.w[entry.mode - 1] = parse_terms(&entry.terms)?;
        }
        let mut seen_t = [false; 4];
        for entry in &file.theta {
            if !(6..=9).contains(&entry.mode) {
                return Err(Error::Format {
                    what: "field-shapes",
                    detail: format!("theta mode {} out of range 6..=9", entry.mode),
                });
            }
            seen_t[entry.mode - 6] = true;
            shapes.theta[entry.mode - 6] = parse_terms(&entry.terms)?;
        }
        if let Some(i) = seen_w.iter().position(|s| !s) {
            return Err(Error::Format {
                what: "field-shapes",
                detail: format!("missing w entry for mode {}", i + 1),
            });
        }
        if let Some(i) = seen_t.iter().position(|s| !s) {
            return Err(Error::Format {
                what: "field-shapes",
                detail: format!("missing theta entry for mode {}", i + 6),
            });
        }
        Ok(shapes)
    }

    /// Find and parse the shapes file: `$PM_CLOSURE_DATA_DIR`, then `./data`,
    /// then the crate's own `data/` directory.
    pub fn locate() -> Result<Self> {
        let mut tried = Vec::new();
        let mut candidates: Vec<PathBuf> = Vec::new();
        if let Ok(dir) = std::env::var("PM_CLOSURE_DATA_DIR") {
            candidates.push(PathBuf::from(dir).join(SHAPES_FILE));
        }
        candidates.push(PathBuf::from("data").join(SHAPES_FILE));
        candidates.push(
            PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("data")
                .join(SHAPES_FILE),
        );
        for path in candidates {
            if path.is_file() {
                return Self::load(&path);
            }
            tried.push(path.display().to_string());
        }
        Err(Error::MissingFieldShapes(format!(
            "{SHAPES_FILE} not found (tried: {})",
            tried.join(", ")
        )))
    }

    /// Horizontal cell period `2π/κ`.
    pub fn cell_period(&self) -> f64 {
        2.0 / self.a
    }

    /// Vertical velocity shape of mode `i ∈ 1..=5` at `(x, y, z)`.
    pub fn eval_w(&self, i: usize, x: f64, y: f64, z: f64) -> f64 {
        let k = self.a * PI;
        self.w[i - 1]
            .iter()
            .map(|t| t.eval(k * x, k * y, PI * z))
            .sum()
    }

    /// Temperature shape of mode `n ∈ 6..=9`.
    pub fn eval_theta(&self, n: usize, x: f64, y: f64, z: f64) -> f64 {
        let k = self.a * PI;
        self.theta[n - 6]
            .iter()
            .map(|t| t.eval(k * x, k * y, PI * z))
            .sum()
    }

    /// `∂_z` of the temperature shape of mode `n ∈ 6..=9`.
    pub fn eval_theta_dz(&self, n: usize, x: f64, y: f64, z: f64) -> f64 {
        let k = self.a * PI;
        self.theta[n - 6]
            .iter()
            .map(|t| t.eval_dz(k * x, k * y, PI * z))
            .sum()
    }
}

fn parse_terms(entries: &[TermEntry]) -> Result<Vec<ShapeTerm>> {
    entries
        .iter()
        .map(|t| {
            Ok(ShapeTerm {
                coef: t.c,
                x: TrigFactor::parse(&t.x)?,
                y: TrigFactor::parse(&t.y)?,
                z: TrigFactor::parse(&t.z)?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// quadrature grid
// ---------------------------------------------------------------------------

/// Spatial quadrature: equispaced `nh × nh` horizontally (exact for the
/// trigonometric cell harmonics), Gauss–Legendre `nz` vertically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxGrid {
    pub nh: usize,
    pub nz: usize,
}

impl Default for FluxGrid {
    fn default() -> Self {
        Self { nh: 16, nz: 32 }
    }
}

impl FluxGrid {
    fn validate(&self) -> Result<()> {
        if self.nh < 4 || self.nz < 4 {
            return Err(Error::Config(format!(
                "flux grid too coarse: nh={}, nz={}",
                self.nh, self.nz
            )));
        }
        Ok(())
    }
}

/// Gauss–Legendre nodes/weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // p = P_n(x), dp = P_n'(x)
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        // recompute P_{n-1} at the converged node for the weight
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `z` nodes and *averaging* weights on `[0, 1]` (weights sum to 1).
fn z_rule(nz: usize) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(nz);
    (
        xs.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        ws.iter().map(|w| 0.5 * w).collect(),
    )
}

// ---------------------------------------------------------------------------
// flux computation
// ---------------------------------------------------------------------------

/// Space-averaged flux time series: total and its resolved/unresolved parts.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxSeries {
    pub t0: f64,
    pub dt: f64,
    pub h: Vec<f64>,
    pub h_cc: Vec<f64>,
    pub h_cs: Vec<f64>,
    pub h_ss: Vec<f64>,
}

impl FluxSeries {
    /// Time mean of the total space-averaged flux.
    pub fn mean_total(&self) -> f64 {
        self.h.iter().sum::<f64>() / self.h.len().max(1) as f64
    }
}

/// Volume-average Gram data of the shapes: `g[i][n] = ⟨W_{i+1} Θ_{n+6}⟩` and
/// `gz[n] = ⟨∂_z Θ_{n+6}⟩`.
struct ShapeGram {
    g: [[f64; 4]; 5],
    gz: [f64; 4],
}

fn shape_gram(shapes: &FieldShapes, grid: &FluxGrid) -> ShapeGram {
    let period = shapes.cell_period();
    let nh = grid.nh;
    let (zs, zw) = z_rule(grid.nz);
    let mut out = ShapeGram {
        g: [[0.0; 4]; 5],
        gz: [0.0; 4],
    };
    let hw = 1.0 / (nh * nh) as f64;
    for ix in 0..nh {
        let x = period * ix as f64 / nh as f64;
        for iy in 0..nh {
            let y = period * iy as f64 / nh as f64;
            for (iz, &z) in zs.iter().enumerate() {
                let wgt = hw * zw[iz];
                let wv: [f64; 5] = std::array::from_fn(|i| shapes.eval_w(i + 1, x, y, z));
                for n in 0..4 {
                    let th = shapes.eval_theta(n + 6, x, y, z);
                    for i in 0..5 {
                        out.g[i][n] += wgt * wv[i] * th;
                    }
                    out.gz[n] += wgt * shapes.eval_theta_dz(n + 6, x, y, z);
                }
            }
        }
    }
    out
}

fn real_state(traj: &Trajectory, k: usize) -> [f64; 9] {
    let s = traj.state(k);
    std::array::from_fn(|i| s[i].re)
}

fn mean_state(traj: &Trajectory) -> [f64; 9] {
    let mut m = [0.0; 9];
    for s in &traj.samples {
        for i in 0..9 {
            m[i] += s[i].re;
        }
    }
    let n = traj.samples.len() as f64;
    m.map(|v| v / n)
}

/// Space-averaged heat-flux series for a trajectory split into a resolved
/// (`c`) and an unresolved (`s`) contribution in the model's physical
/// coordinates. Temperature anomalies are taken about each part's own time
/// mean over the given window, so `H = H_cc + H_cs + H_ss` exactly.
pub fn rb9d_heat_flux(
    shapes: &FieldShapes,
    grid: &FluxGrid,
    traj_c: &Trajectory,
    traj_s: &Trajectory,
) -> Result<FluxSeries> {
    grid.validate()?;
    if traj_c.dim() != 9 || traj_s.dim() != 9 {
        return Err(Error::Config(format!(
            "heat flux needs 9-dimensional trajectories, got {} and {}",
            traj_c.dim(),
            traj_s.dim()
        )));
    }
    if traj_c.samples.len() != traj_s.samples.len() {
        return Err(Error::Config(format!(
            "resolved/unresolved trajectories disagree: {} vs {} samples",
            traj_c.samples.len(),
            traj_s.samples.len()
        )));
    }
    let gram = shape_gram(shapes, grid);
    let mc = mean_state(traj_c);
    let ms = mean_state(traj_s);
    // constant conduction corrections ⟨∂_z θ̄⟩ per part
    let bg_c: f64 = (0..4).map(|n| mc[n + 5] * gram.gz[n]).sum();
    let bg_s: f64 = (0..4).map(|n| ms[n + 5] * gram.gz[n]).sum();

    let count = traj_c.samples.len();
    let mut series = FluxSeries {
        t0: traj_c.time(0),
        dt: traj_c.dt,
        h: Vec::with_capacity(count),
        h_cc: Vec::with_capacity(count),
        h_cs: Vec::with_capacity(count),
        h_ss: Vec::with_capacity(count),
    };
    for k in 0..count {
        let sc = real_state(traj_c, k);
        let ss = real_state(traj_s, k);
        let mut cc = 0.0;
        let mut cs = 0.0;
        let mut ssx = 0.0;
        for i in 0..5 {
            for n in 0..4 {
                let g = gram.g[i][n];
                let tc = sc[n + 5] - mc[n + 5];
                let ts = ss[n + 5] - ms[n + 5];
                cc += g * sc[i] * tc;
                cs += g * (sc[i] * ts + ss[i] * tc);
                ssx += g * ss[i] * ts;
            }
        }
        series.h_cc.push(cc - bg_c);
        series.h_cs.push(cs);
        series.h_ss.push(ssx - bg_s);
        series.h.push(cc + cs + ssx - bg_c - bg_s);
    }
    Ok(series)
}

/// Pointwise flux fields of one sample pair, on the quadrature grid
/// (indexed `(ix, iy, iz)`): the decomposition identity
/// `H = H_cc + H_cs + H_ss` holds at every node.
pub struct FluxFields {
    pub h: Array3<f64>,
    pub h_cc: Array3<f64>,
    pub h_cs: Array3<f64>,
    pub h_ss: Array3<f64>,
}

pub fn rb9d_flux_fields(
    shapes: &FieldShapes,
    grid: &FluxGrid,
    state_c: &Array1<C64>,
    state_s: &Array1<C64>,
    mean_c: &Array1<C64>,
    mean_s: &Array1<C64>,
) -> Result<FluxFields> {
    grid.validate()?;
    for v in [state_c, state_s, mean_c, mean_s] {
        if v.len() != 9 {
            return Err(Error::Config(format!(
                "heat flux needs 9-dimensional states, got {}",
                v.len()
            )));
        }
    }
    let period = shapes.cell_period();
    let nh = grid.nh;
    let (zs, _) = z_rule(grid.nz);
    let dims = (nh, nh, grid.nz);
    let mut out = FluxFields {
        h: Array3::zeros(dims),
        h_cc: Array3::zeros(dims),
        h_cs: Array3::zeros(dims),
        h_ss: Array3::zeros(dims),
    };
    for ix in 0..nh {
        let x = period * ix as f64 / nh as f64;
        for iy in 0..nh {
            let y = period * iy as f64 / nh as f64;
            for (iz, &z) in zs.iter().enumerate() {
                let mut wc = 0.0;
                let mut ws = 0.0;
                for i in 0..5 {
                    let shape = shapes.eval_w(i + 1, x, y, z);
                    wc += state_c[i].re * shape;
                    ws += state_s[i].re * shape;
                }
                let mut tc = 0.0;
                let mut ts = 0.0;
                let mut dz_c = 0.0;
                let mut dz_s = 0.0;
                for n in 0..4 {
                    let shape = shapes.eval_theta(n + 6, x, y, z);
                    let dshape = shapes.eval_theta_dz(n + 6, x, y, z);
                    tc += (state_c[n + 5].re - mean_c[n + 5].re) * shape;
                    ts += (state_s[n + 5].re - mean_s[n + 5].re) * shape;
                    dz_c += mean_c[n + 5].re * dshape;
                    dz_s += mean_s[n + 5].re * dshape;
                }
                let idx = (ix, iy, iz);
                out.h_cc[idx] = wc * tc - dz_c;
                out.h_cs[idx] = wc * ts + ws * tc;
                out.h_ss[idx] = ws * ts - dz_s;
                out.h[idx] = (wc + ws) * (tc + ts) - dz_c - dz_s;
            }
        }
    }
    Ok(out)
}
