//! Brightness-constancy optical flow.
//!
//! Linearizing `I(x, y, t) = I(x + dx, y + dy, t + dt)` gives one constraint
//! per pixel, `Ix·vx + Iy·vy + It = 0`: a line in velocity space. Lucas-Kanade
//! intersects the lines of a window in the least-squares sense; Horn-Schunck
//! closes the aperture problem with a smoothness prior. Flow is in pixels per
//! frame interval; [`flow_to_ground_velocity`] turns it into metres per second
//! for a nadir camera.

use std::fmt::Write as _;

use nalgebra::{Matrix2, SymmetricEigen, Vector2};

use crate::error::{Error, Result};

/// Horn-Schunck works on 8-bit digital numbers so that the smoothness
/// weight has its conventional scale.
pub const HS_INTENSITY_SCALE: f64 = 255.0;

/// Default Lucas-Kanade window (pixels, odd).
pub const DEFAULT_LK_WINDOW: usize = 15;
pub const DEFAULT_HS_ALPHA: f64 = 1.0;
pub const DEFAULT_HS_ITERATIONS: usize = 200;

/// Aperture threshold per window pixel on the smaller structure-tensor eigenvalue.
pub const APERTURE_THRESHOLD_PER_PIXEL: f64 = 1e-6;

/// Grey-level image with intensities in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFrame {
    width: usize,
    height: usize,
    data: Vec<f64>,
    pub timestamp: f64,
}

impl ImageFrame {
    pub fn new(width: usize, height: usize, data: Vec<f64>, timestamp: f64) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(Error::invalid("image size", format!("{width}x{height}, need at least 3x3")));
        }
        if data.len() != width * height {
            return Err(Error::invalid(
                "image data",
                format!("{} samples for {width}x{height}", data.len()),
            ));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid("intensity", format!("{v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
            timestamp,
        })
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel; values are clamped to [0, 1].
    pub fn from_fn(
        width: usize,
        height: usize,
        timestamp: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self::new(width, height, data, timestamp)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Parses a binary 8-bit PGM (P5).
    pub fn from_pgm(bytes: &[u8], timestamp: f64) -> Result<Self> {
        let mut pos = 0;
        let mut header = Vec::with_capacity(4);
        while header.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::invalid("pgm", "truncated header"));
            }
            header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if header[0] != "P5" {
            return Err(Error::invalid("pgm", format!("magic {:?}, expected P5", header[0])));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::invalid("pgm", format!("bad header field {s:?}")))
        };
        let (width, height, maxval) = (parse(&header[1])?, parse(&header[2])?, parse(&header[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(Error::invalid("pgm", format!("maxval {maxval} is not 8-bit")));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let raster = bytes
            .get(pos..pos + width * height)
            .ok_or_else(|| Error::invalid("pgm", "truncated raster"))?;
        let data = raster.iter().map(|&b| f64::from(b) / maxval as f64).collect();
        Self::new(width, height, data, timestamp)
    }

    /// Encodes as binary 8-bit PGM (P5), rounding to the nearest level.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|v| (v * 255.0).round() as u8));
        out
    }
}

/// Spatial and temporal partial derivatives of a frame pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub ix: Vec<f64>,
    pub iy: Vec<f64>,
    pub it: Vec<f64>,
    /// Seconds between the two frames.
    pub dt: f64,
}

impl GradientField {
    #[inline]
    fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// (Ix, Iy, It) at a pixel.
    pub fn at(&self, x: usize, y: usize) -> Result<(f64, f64, f64)> {
        if x >= self.width || y >= self.height {
            return Err(Error::OutOfBounds(x, y));
        }
        let i = self.idx(x, y);
        Ok((self.ix[i], self.iy[i], self.it[i]))
    }
}

/// Flow in pixels per frame interval.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlowVector {
    pub vx: f64,
    pub vy: f64,
}

impl FlowVector {
    pub const fn new(vx: f64, vy: f64) -> Self {
        Self { vx, vy }
    }

    pub fn norm(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

impl std::ops::Add for FlowVector {
    type Output = FlowVector;

    fn add(self, o: FlowVector) -> FlowVector {
        FlowVector::new(self.vx + o.vx, self.vy + o.vy)
    }
}

impl std::ops::Mul<f64> for FlowVector {
    type Output = FlowVector;

    fn mul(self, k: f64) -> FlowVector {
        FlowVector::new(self.vx * k, self.vy * k)
    }
}

/// One cell of a flow field. Invalid cells carry no flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowCell {
    pub x: usize,
    pub y: usize,
    pub flow: Option<FlowVector>,
    /// Smaller eigenvalue of the local structure tensor.
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub stride: usize,
    pub cells: Vec<FlowCell>,
}

impl FlowField {
    pub fn valid(&self) -> impl Iterator<Item = (&FlowCell, FlowVector)> {
        self.cells.iter().filter_map(|c| c.flow.map(|f| (c, f)))
    }

    /// Mean of the valid vectors whose cell centres lie at least `margin`
    /// pixels from every border of a `width`x`height` image.
    pub fn mean_flow(&self, width: usize, height: usize, margin: usize) -> Option<FlowVector> {
        let mut sum = FlowVector::default();
        let mut n = 0usize;
        for (c, f) in self.valid() {
            if c.x >= margin && c.y >= margin && c.x + margin < width && c.y + margin < height {
                sum = sum + f;
                n += 1;
            }
        }
        (n > 0).then(|| sum * (1.0 / n as f64))
    }

    /// CSV with header `x,y,vx,vy,quality,valid`; invalid cells leave vx/vy empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,vx,vy,quality,valid\n");
        for c in &self.cells {
            match c.flow {
                Some(f) => writeln!(s, "{},{},{},{},{},1", c.x, c.y, f.vx, f.vy, c.quality),
                None => writeln!(s, "{},{},,,{},0", c.x, c.y, c.quality),
            }
            .expect("writing to a String cannot fail");
        }
        s
    }
}

/// Two-frame averaged central differences (one-sided at the borders) and the
/// frame difference.
pub fn compute_gradients(f0: &ImageFrame, f1: &ImageFrame) -> Result<GradientField> {
    if f0.width != f1.width || f0.height != f1.height {
        return Err(Error::DimensionMismatch(f0.width, f0.height, f1.width, f1.height));
    }
    let dt = f1.timestamp - f0.timestamp;
    if !(dt > 0.0) {
        return Err(Error::NonPositiveDt(dt));
    }
    let (w, h) = (f0.width, f0.height);
    let n = w * h;
    let mut ix = vec![0.0; n];
    let mut iy = vec![0.0; n];
    let mut it = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            ix[i] = 0.5 * (diff_x(f0, x, y) + diff_x(f1, x, y));
            iy[i] = 0.5 * (diff_y(f0, x, y) + diff_y(f1, x, y));
            it[i] = f1.data[i] - f0.data[i];
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        ix,
        iy,
        it,
        dt,
    })
}

fn diff_x(f: &ImageFrame, x: usize, y: usize) -> f64 {
    if x == 0 {
        f.at(1, y) - f.at(0, y)
    } else if x + 1 == f.width {
        f.at(x, y) - f.at(x - 1, y)
    } else {
        0.5 * (f.at(x + 1, y) - f.at(x - 1, y))
    }
}

fn diff_y(f: &ImageFrame, x: usize, y: usize) -> f64 {
    if y == 0 {
        f.at(x, 1) - f.at(x, 0)
    } else if y + 1 == f.height {
        f.at(x, y) - f.at(x, y - 1)
    } else {
        0.5 * (f.at(x, y + 1) - f.at(x, y - 1))
    }
}

/// `Ix·vx + Iy·vy + It` at one pixel.
pub fn constancy_residual(g: &GradientField, v: FlowVector, pixel: (usize, usize)) -> Result<f64> {
    let (ix, iy, it) = g.at(pixel.0, pixel.1)?;
    Ok(ix * v.vx + iy * v.vy + it)
}

/// Structure tensor and mismatch vector accumulated over a window.
#[derive(Debug, Clone, Copy)]
struct WindowSums {
    normal: Matrix2<f64>,
    rhs: Vector2<f64>,
    pixels: usize,
}

fn window_bounds(g: &GradientField, center: (usize, usize), window: usize) -> Result<(usize, usize, usize, usize)> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::invalid("window", format!("{window} must be odd and >= 3")));
    }
    let half = window / 2;
    let (cx, cy) = center;
    if cx < half || cy < half || cx + half >= g.width || cy + half >= g.height {
        return Err(Error::OutOfBounds(cx, cy));
    }
    Ok((cx - half, cx + half, cy - half, cy + half))
}

fn window_sums(g: &GradientField, center: (usize, usize), window: usize) -> Result<WindowSums> {
    let (x0, x1, y0, y1) = window_bounds(g, center, window)?;
    let (mut sxx, mut sxy, mut syy, mut sxt, mut syt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let i = g.idx(x, y);
            let (gx, gy, gt) = (g.ix[i], g.iy[i], g.it[i]);
            sxx += gx * gx;
            sxy += gx * gy;
            syy += gy * gy;
            sxt += gx * gt;
            syt += gy * gt;
        }
    }
    Ok(WindowSums {
        normal: Matrix2::new(sxx, sxy, sxy, syy),
        rhs: Vector2::new(-sxt, -syt),
        pixels: window * window,
    })
}

fn min_eigenvalue(m: &Matrix2<f64>) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.min()
}

/// Least-squares intersection of the constraint lines in a square window.
///
/// Returns the flow and the smaller eigenvalue of the 2x2 normal matrix.
pub fn lucas_kanade(g: &GradientField, center: (usize, usize), window: usize) -> Result<(FlowVector, f64)> {
    let sums = window_sums(g, center, window)?;
    let quality = min_eigenvalue(&sums.normal);
    let threshold = APERTURE_THRESHOLD_PER_PIXEL * sums.pixels as f64;
    if !(quality >= threshold) {
        return Err(Error::ApertureAmbiguity {
            min_eigenvalue: quality,
            threshold,
        });
    }
    let n = sums.normal;
    let det = n[(0, 0)] * n[(1, 1)] - n[(0, 1)] * n[(1, 0)];
    let vx = (n[(1, 1)] * sums.rhs.x - n[(0, 1)] * sums.rhs.y) / det;
    let vy = (n[(0, 0)] * sums.rhs.y - n[(1, 0)] * sums.rhs.x) / det;
    Ok((FlowVector::new(vx, vy), quality))
}

/// Gradient of `Σ_window (Ix·vx + Iy·vy + It)²` with respect to v.
pub fn windowed_residual_gradient(
    g: &GradientField,
    center: (usize, usize),
    window: usize,
    v: FlowVector,
) -> Result<Vector2<f64>> {
    let (x0, x1, y0, y1) = window_bounds(g, center, window)?;
    let mut grad = Vector2::zeros();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let i = g.idx(x, y);
            let r = g.ix[i] * v.vx + g.iy[i] * v.vy + g.it[i];
            grad += 2.0 * r * Vector2::new(g.ix[i], g.iy[i]);
        }
    }
    Ok(grad)
}

/// Lucas-Kanade on an evenly spaced `n`x`n` grid of window centres.
/// Windows hit by the aperture problem become invalid cells.
pub fn lucas_kanade_grid(g: &GradientField, n: usize, window: usize) -> Result<FlowField> {
    let half = window / 2;
    if g.width < window || g.height < window || n == 0 {
        return Err(Error::invalid("lk grid", format!("{n}x{n} windows of {window} px do not fit")));
    }
    let place = |k: usize, extent: usize| -> usize {
        let span = extent - 1 - 2 * half;
        if n == 1 {
            half + span / 2
        } else {
            half + (k * span) / (n - 1)
        }
    };
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (place(i, g.width), place(j, g.height));
            let cell = match lucas_kanade(g, (x, y), window) {
                Ok((flow, quality)) => FlowCell {
                    x,
                    y,
                    flow: Some(flow),
                    quality,
                },
                Err(Error::ApertureAmbiguity { min_eigenvalue, .. }) => FlowCell {
                    x,
                    y,
                    flow: None,
                    quality: min_eigenvalue,
                },
                Err(e) => return Err(e),
            };
            cells.push(cell);
        }
    }
    let stride = if n > 1 {
        (g.width - 1 - 2 * half) / (n - 1)
    } else {
        g.width
    };
    Ok(FlowField { stride, cells })
}

/// Dense Horn-Schunck result with the energy after every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct HornSchunckResult {
    pub field: FlowField,
    pub energy: Vec<f64>,
}

const HS_EDGE_WEIGHT: f64 = 1.0 / 6.0;
const HS_DIAGONAL_WEIGHT: f64 = 1.0 / 12.0;
const HS_NEIGHBOURS: [(isize, isize, f64); 8] = [
    (-1, 0, HS_EDGE_WEIGHT),
    (1, 0, HS_EDGE_WEIGHT),
    (0, -1, HS_EDGE_WEIGHT),
    (0, 1, HS_EDGE_WEIGHT),
    (-1, -1, HS_DIAGONAL_WEIGHT),
    (1, -1, HS_DIAGONAL_WEIGHT),
    (-1, 1, HS_DIAGONAL_WEIGHT),
    (1, 1, HS_DIAGONAL_WEIGHT),
];

/// Horn-Schunck dense flow by Jacobi iteration from the zero field.
///
/// Minimizes `Σ (Ix·u + Iy·v + It)² + α² Σ_pairs w_ij ((u_i - u_j)² + (v_i - v_j)²)`
/// over the 8-neighbourhood graph (edge weight 1/6, diagonal 1/12), with
/// intensities in 8-bit units. Each sweep solves every pixel's 2x2 block
/// exactly against the previous field, which never increases the energy.
pub fn horn_schunck(f0: &ImageFrame, f1: &ImageFrame, alpha: f64, iterations: usize) -> Result<HornSchunckResult> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("{alpha} must be positive")));
    }
    if iterations == 0 {
        return Err(Error::invalid("iterations", "must be at least 1"));
    }
    let g = compute_gradients(f0, f1)?;
    let (w, h) = (g.width, g.height);
    let n = w * h;
    let s = HS_INTENSITY_SCALE;
    let ix: Vec<f64> = g.ix.iter().map(|v| v * s).collect();
    let iy: Vec<f64> = g.iy.iter().map(|v| v * s).collect();
    let it: Vec<f64> = g.it.iter().map(|v| v * s).collect();
    let alpha2 = alpha * alpha;

    let neighbours = |x: usize, y: usize| {
        HS_NEIGHBOURS.iter().filter_map(move |&(dx, dy, wgt)| {
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h).then(|| (ny as usize * w + nx as usize, wgt))
        })
    };

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut next_u = vec![0.0; n];
    let mut next_v = vec![0.0; n];
    let mut energy = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let (mut su, mut sv, mut total) = (0.0, 0.0, 0.0);
                for (j, wgt) in neighbours(x, y) {
                    su += wgt * u[j];
                    sv += wgt * v[j];
                    total += wgt;
                }
                let (ubar, vbar) = (su / total, sv / total);
                let r = (ix[i] * ubar + iy[i] * vbar + it[i]) / (alpha2 * total + ix[i] * ix[i] + iy[i] * iy[i]);
                next_u[i] = ubar - ix[i] * r;
                next_v[i] = vbar - iy[i] * r;
            }
        }
        std::mem::swap(&mut u, &mut next_u);
        std::mem::swap(&mut v, &mut next_v);

        let mut e = 0.0;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let r = ix[i] * u[i] + iy[i] * v[i] + it[i];
                e += r * r;
                // each unordered pair once: forward half of the neighbourhood
                for &(dx, dy, wgt) in &HS_NEIGHBOURS[..] {
                    if (dy, dx) <= (0, 0) {
                        continue;
                    }
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    let (du, dv) = (u[i] - u[j], v[i] - v[j]);
                    e += alpha2 * wgt * (du * du + dv * dv);
                }
            }
        }
        energy.push(e);
    }

    let mut cells = Vec::with_capacity(n);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            cells.push(FlowCell {
                x,
                y,
                flow: Some(FlowVector::new(u[i], v[i])),
                quality: local_quality(&g, x, y),
            });
        }
    }
    Ok(HornSchunckResult {
        field: FlowField { stride: 1, cells },
        energy,
    })
}

/// Smaller structure-tensor eigenvalue over the clipped 3x3 neighbourhood.
fn local_quality(g: &GradientField, x: usize, y: usize) -> f64 {
    let mut m = Matrix2::zeros();
    for yy in y.saturating_sub(1)..=(y + 1).min(g.height - 1) {
        for xx in x.saturating_sub(1)..=(x + 1).min(g.width - 1) {
            let i = g.idx(xx, yy);
            m[(0, 0)] += g.ix[i] * g.ix[i];
            m[(0, 1)] += g.ix[i] * g.iy[i];
            m[(1, 1)] += g.iy[i] * g.iy[i];
        }
    }
    m[(1, 0)] = m[(0, 1)];
    min_eigenvalue(&m)
}

/// Nadir-pointing pinhole camera over flat ground.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub focal_px: f64,
    /// Principal point (pixels).
    pub cx: f64,
    pub cy: f64,
    /// Image size in pixels.
    pub width: usize,
    pub height: usize,
    /// Height above ground (m).
    pub height_agl: f64,
    /// Angle of the image x-axis counter-clockwise from east (degrees).
    #[serde(default)]
    pub heading: f64,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal_px > 0.0) {
            return Err(Error::invalid("focal_px", "must be positive"));
        }
        if !(self.height_agl > 0.0) {
            return Err(Error::invalid("height_agl", "must be positive"));
        }
        if self.width < 3 || self.height < 3 {
            return Err(Error::invalid("camera image size", "must be at least 3x3"));
        }
        if !self.heading.is_finite() || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::invalid("camera", "non-finite parameter"));
        }
        Ok(())
    }

    /// Ground sampling distance (m per pixel).
    pub fn metres_per_pixel(&self) -> f64 {
        self.height_agl / self.focal_px
    }

    /// East/north unit vectors of the image x and y axes. Image y points
    /// 90° clockwise from image x, as seen from above.
    pub fn axes(&self) -> ((f64, f64), (f64, f64)) {
        let (s, c) = self.heading.to_radians().sin_cos();
        ((c, s), (s, -c))
    }
}

/// Converts image flow into horizontal ground velocity (east, north) in m/s.
///
/// Ground texture moves opposite to the vehicle in the image.
pub fn flow_to_ground_velocity(v: FlowVector, cam: &CameraModel, dt: f64) -> Result<(f64, f64)> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveDt(dt));
    }
    let k = -cam.metres_per_pixel() / dt;
    let (along_x, along_y) = (v.vx * k, v.vy * k);
    let ((xe, xn), (ye, yn)) = cam.axes();
    Ok((along_x * xe + along_y * ye, along_x * xn + along_y * yn))
}
