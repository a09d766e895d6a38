//! Grid data for tactile observations and the geometry pipeline around it.
//!
//! Pixel `(i, j)` (row, column) sits at physical coordinates
//! `u = (j - (W-1)/2) * pitch`, `v = (i - (H-1)/2) * pitch` in millimeters,
//! i.e. the origin is the optical center of the sensing area.

pub mod container;
pub mod poisson;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use poisson::poisson_integrate;

/// Default sensing geometry: 320 x 240 pixels over 20 mm x 15 mm.
pub const DEFAULT_WIDTH: usize = 320;
pub const DEFAULT_HEIGHT: usize = 240;
pub const DEFAULT_PITCH: f64 = 0.0625;

/// Fractional pixel offsets below this are snapped to the grid node.
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub height_px: usize,
    pub width_px: usize,
    /// Millimeters per pixel.
    pub pixel_pitch: f64,
}

impl Default for GridGeometry {
    fn default() -> Self {
        GridGeometry {
            height_px: DEFAULT_HEIGHT,
            width_px: DEFAULT_WIDTH,
            pixel_pitch: DEFAULT_PITCH,
        }
    }
}

impl GridGeometry {
    pub fn new(height_px: usize, width_px: usize, pixel_pitch: f64) -> Result<Self> {
        let g = GridGeometry {
            height_px,
            width_px,
            pixel_pitch,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_pitch > 0.0 && self.pixel_pitch.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "pixel pitch must be positive, got {}",
                self.pixel_pitch
            )));
        }
        if self.height_px < 8 || self.width_px < 8 {
            return Err(Error::InvalidGeometry(format!(
                "grid must be at least 8x8, got {}x{}",
                self.height_px, self.width_px
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.height_px * self.width_px
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn center_col(&self) -> f64 {
        (self.width_px as f64 - 1.0) * 0.5
    }

    fn center_row(&self) -> f64 {
        (self.height_px as f64 - 1.0) * 0.5
    }

    /// Physical `(u, v)` of pixel `(row, col)`.
    pub fn pixel_to_mm(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (col as f64 - self.center_col()) * self.pixel_pitch,
            (row as f64 - self.center_row()) * self.pixel_pitch,
        )
    }

    /// Continuous `(row, col)` of physical `(u, v)`.
    pub fn mm_to_pixel(&self, u: f64, v: f64) -> (f64, f64) {
        (
            v / self.pixel_pitch + self.center_row(),
            u / self.pixel_pitch + self.center_col(),
        )
    }

    /// Physical extent `(u_min, u_max, v_min, v_max)` of the pixel centers.
    pub fn bounds_mm(&self) -> (f64, f64, f64, f64) {
        let (u0, v0) = self.pixel_to_mm(0, 0);
        let (u1, v1) = self.pixel_to_mm(self.height_px - 1, self.width_px - 1);
        (u0, u1, v0, v1)
    }
}

/// Row-major grid of per-pixel values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Grid {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} grid",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Grid { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Grid { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.cols + col]
    }

    #[inline]
    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut T {
        &mut self.data[row * self.cols + col]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    fn matches(&self, geom: &GridGeometry) -> bool {
        self.rows == geom.height_px && self.cols == geom.width_px
    }
}

/// Per-pixel surface gradients `(g_u, g_v)`.
pub type GradientMap = Grid<[f64; 2]>;
/// Per-pixel unit normals, `n ∝ (g_u, g_v, -1)`.
pub type NormalMap = Grid<Vector3<f64>>;
/// Per-pixel indentation height in millimeters.
pub type HeightMap = Grid<f64>;
pub type ContactMask = Grid<bool>;

#[inline]
pub fn gradient_to_normal(g: [f64; 2]) -> Vector3<f64> {
    let n = Vector3::new(g[0], g[1], -1.0);
    n / n.norm()
}

pub fn gradients_to_normals(g: &GradientMap) -> NormalMap {
    g.map(|&v| gradient_to_normal(v))
}

/// Thresholds the height map and strips the one-pixel rim with a 3x3 erosion.
pub fn contact_mask_from_height(z: &HeightMap, threshold: f64) -> ContactMask {
    let raw = z.map(|&h| h > threshold);
    erode3x3(&raw)
}

/// 3x3 binary erosion; pixels outside the grid count as false.
pub fn erode3x3(mask: &ContactMask) -> ContactMask {
    let (rows, cols) = mask.shape();
    Grid::from_fn(rows, cols, |i, j| {
        if i == 0 || j == 0 || i + 1 == rows || j + 1 == cols {
            return false;
        }
        (i - 1..=i + 1).all(|a| (j - 1..=j + 1).all(|b| *mask.get(a, b)))
    })
}

/// The warped coordinate left the sensing area.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutOfBounds;

impl std::fmt::Display for OutOfBounds {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("coordinate outside the sensing area")
    }
}

impl std::error::Error for OutOfBounds {}

/// Bilinear stencil at a physical coordinate.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub row: usize,
    pub col: usize,
    /// Fractional offsets toward `row + 1` / `col + 1`, in `[0, 1]`.
    pub fr: f64,
    pub fc: f64,
}

impl Stencil {
    #[inline]
    pub fn locate(geom: &GridGeometry, u: f64, v: f64) -> Result<Stencil, OutOfBounds> {
        let (r, c) = geom.mm_to_pixel(u, v);
        let (row, fr) = split(r, geom.height_px)?;
        let (col, fc) = split(c, geom.width_px)?;
        Ok(Stencil { row, col, fr, fc })
    }

    #[inline]
    fn weights(&self) -> [f64; 4] {
        let (fr, fc) = (self.fr, self.fc);
        [
            (1.0 - fr) * (1.0 - fc),
            (1.0 - fr) * fc,
            fr * (1.0 - fc),
            fr * fc,
        ]
    }

    #[inline]
    fn indices(&self, cols: usize) -> [usize; 4] {
        let base = self.row * cols + self.col;
        // Zero-weight neighbors may sit past the last row/column.
        let right = if self.fc > 0.0 { base + 1 } else { base };
        let down = if self.fr > 0.0 { cols } else { 0 };
        [base, right, base + down, right + down]
    }

    /// Plain bilinear blend of a vector field, without renormalization.
    #[inline]
    pub fn blend(&self, g: &Grid<Vector3<f64>>) -> Vector3<f64> {
        let w = self.weights();
        let idx = self.indices(g.cols);
        g.data[idx[0]] * w[0]
            + g.data[idx[1]] * w[1]
            + g.data[idx[2]] * w[2]
            + g.data[idx[3]] * w[3]
    }

    #[inline]
    fn exact(&self) -> bool {
        self.fr == 0.0 && self.fc == 0.0
    }
}

/// Splits a continuous index into `(floor, frac)` with snapping at nodes.
#[inline]
fn split(x: f64, n: usize) -> Result<(usize, f64), OutOfBounds> {
    let last = (n - 1) as f64;
    if !(x > -SNAP && x < last + SNAP) {
        return Err(OutOfBounds);
    }
    let x = x.clamp(0.0, last);
    let mut i = x.floor();
    let mut f = x - i;
    if f < SNAP {
        f = 0.0;
    } else if f > 1.0 - SNAP {
        i += 1.0;
        f = 0.0;
    }
    Ok((i as usize, f))
}

/// Bilinear evaluation in physical coordinates.
pub trait BilinearSample {
    type Output;

    fn sample_at(&self, s: &Stencil) -> Self::Output;

    fn sample_bilinear(
        &self,
        geom: &GridGeometry,
        u: f64,
        v: f64,
    ) -> Result<Self::Output, OutOfBounds> {
        Ok(self.sample_at(&Stencil::locate(geom, u, v)?))
    }
}

impl BilinearSample for HeightMap {
    type Output = f64;

    #[inline]
    fn sample_at(&self, s: &Stencil) -> f64 {
        if s.exact() {
            return *self.get(s.row, s.col);
        }
        let w = s.weights();
        let idx = s.indices(self.cols);
        w[0] * self.data[idx[0]]
            + w[1] * self.data[idx[1]]
            + w[2] * self.data[idx[2]]
            + w[3] * self.data[idx[3]]
    }
}

impl BilinearSample for NormalMap {
    type Output = Vector3<f64>;

    /// Interpolated normals are renormalized to unit length.
    #[inline]
    fn sample_at(&self, s: &Stencil) -> Vector3<f64> {
        if s.exact() {
            return *self.get(s.row, s.col);
        }
        let w = s.weights();
        let idx = s.indices(self.cols);
        let n = self.data[idx[0]] * w[0]
            + self.data[idx[1]] * w[1]
            + self.data[idx[2]] * w[2]
            + self.data[idx[3]] * w[3];
        n / n.norm()
    }
}

impl BilinearSample for ContactMask {
    type Output = bool;

    /// Conservative: true only when every neighbor with nonzero weight is true.
    #[inline]
    fn sample_at(&self, s: &Stencil) -> bool {
        let idx = s.indices(self.cols);
        idx.iter().all(|&k| self.data[k])
    }
}

/// One tactile observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileFrame {
    pub geometry: GridGeometry,
    pub gradients: GradientMap,
    pub normals: NormalMap,
    pub heights: HeightMap,
    pub mask: ContactMask,
    /// Seconds.
    pub timestamp: f64,
}

impl TactileFrame {
    /// Builds a frame, deriving normals from the gradients.
    pub fn new(
        geometry: GridGeometry,
        gradients: GradientMap,
        heights: HeightMap,
        mask: ContactMask,
        timestamp: f64,
    ) -> Result<Self> {
        geometry.validate()?;
        for (name, ok) in [
            ("gradients", gradients.matches(&geometry)),
            ("heights", heights.matches(&geometry)),
            ("mask", mask.matches(&geometry)),
        ] {
            if !ok {
                return Err(Error::ShapeMismatch(format!(
                    "{name} grid does not match {}x{} geometry",
                    geometry.height_px, geometry.width_px
                )));
            }
        }
        let finite = gradients
            .data()
            .iter()
            .all(|g| g[0].is_finite() && g[1].is_finite())
            && heights.data().iter().all(|h| h.is_finite());
        if !finite {
            return Err(Error::Format("non-finite gradient or height".into()));
        }
        let normals = gradients_to_normals(&gradients);
        Ok(TactileFrame {
            geometry,
            gradients,
            normals,
            heights,
            mask,
            timestamp,
        })
    }

    pub fn contact_pixels(&self) -> usize {
        self.mask.data().iter().filter(|&&m| m).count()
    }

    pub fn same_geometry(&self, other: &TactileFrame) -> Result<()> {
        if self.geometry != other.geometry {
            return Err(Error::ShapeMismatch(format!(
                "frames differ in geometry: {:?} vs {:?}",
                self.geometry, other.geometry
            )));
        }
        Ok(())
    }
}

/// Pools the frame by `factor` (2, 4 or 8); gradients and heights are
/// averaged, the mask keeps a block only if it is entirely in contact.
pub fn downsample_frame(f: &TactileFrame, factor: usize) -> Result<TactileFrame> {
    if !matches!(factor, 2 | 4 | 8) {
        return Err(Error::ShapeMismatch(format!(
            "downsample factor must be 2, 4 or 8, got {factor}"
        )));
    }
    let g = &f.geometry;
    if !g.height_px.is_multiple_of(factor) || !g.width_px.is_multiple_of(factor) {
        return Err(Error::ShapeMismatch(format!(
            "factor {factor} does not divide {}x{}",
            g.height_px, g.width_px
        )));
    }
    // Larger factors are repeated halvings, so pooling by 4 equals pooling by 2 twice.
    let mut out = halve(f)?;
    let mut k = 2;
    while k < factor {
        out = halve(&out)?;
        k *= 2;
    }
    Ok(out)
}

fn halve(f: &TactileFrame) -> Result<TactileFrame> {
    let (rows, cols) = (f.geometry.height_px / 2, f.geometry.width_px / 2);
    let geometry = GridGeometry::new(rows, cols, f.geometry.pixel_pitch * 2.0)?;
    let block = |i: usize, j: usize| {
        [
            (2 * i, 2 * j),
            (2 * i, 2 * j + 1),
            (2 * i + 1, 2 * j),
            (2 * i + 1, 2 * j + 1),
        ]
    };
    let gradients = Grid::from_fn(rows, cols, |i, j| {
        let mut s = [0.0; 2];
        for (a, b) in block(i, j) {
            let g = f.gradients.get(a, b);
            s[0] += g[0];
            s[1] += g[1];
        }
        [s[0] * 0.25, s[1] * 0.25]
    });
    let heights = Grid::from_fn(rows, cols, |i, j| {
        block(i, j)
            .iter()
            .map(|&(a, b)| *f.heights.get(a, b))
            .sum::<f64>()
            * 0.25
    });
    let mask = Grid::from_fn(rows, cols, |i, j| {
        block(i, j).iter().all(|&(a, b)| *f.mask.get(a, b))
    });
    TactileFrame::new(geometry, gradients, heights, mask, f.timestamp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> GridGeometry {
        GridGeometry::new(16, 24, 0.5).unwrap()
    }

    #[test]
    fn geometry_validation() {
        assert!(GridGeometry::new(7, 20, 0.1).is_err());
        assert!(GridGeometry::new(20, 20, 0.0).is_err());
        assert!(GridGeometry::new(20, 20, -1.0).is_err());
        assert!(GridGeometry::new(8, 8, 0.1).is_ok());
    }

    #[test]
    fn pixel_mm_roundtrip() {
        let g = geom();
        let (u, v) = g.pixel_to_mm(3, 17);
        let (r, c) = g.mm_to_pixel(u, v);
        assert!((r - 3.0).abs() < 1e-12 && (c - 17.0).abs() < 1e-12);
        let (u0, u1, v0, v1) = g.bounds_mm();
        assert_eq!(u0, -u1);
        assert_eq!(v0, -v1);
    }

    #[test]
    fn normals_from_gradients() {
        assert_eq!(gradient_to_normal([0.0, 0.0]), Vector3::new(0.0, 0.0, -1.0));
        let n = gradient_to_normal([1.0, 0.0]);
        let e = Vector3::new(1.0, 0.0, -1.0) / 2f64.sqrt();
        assert!((n - e).norm() < 1e-15);
        let n = gradient_to_normal([3.0, 4.0]);
        let e = Vector3::new(3.0, 4.0, -1.0) / 26f64.sqrt();
        assert!((n - e).norm() < 1e-15);
    }

    #[test]
    fn contact_mask_examples() {
        let z = Grid::filled(10, 10, 0.0);
        assert!(contact_mask_from_height(&z, 0.05)
            .data()
            .iter()
            .all(|&m| !m));

        let z = Grid::from_fn(10, 10, |i, j| {
            if (3..7).contains(&i) && (2..8).contains(&j) {
                1.0
            } else {
                0.0
            }
        });
        let m = contact_mask_from_height(&z, 0.05);
        let on: Vec<_> = (0..10)
            .flat_map(|i| (0..10).map(move |j| (i, j)))
            .filter(|&(i, j)| *m.get(i, j))
            .collect();
        // 4x6 block eroded to 2x4.
        assert_eq!(on.len(), 8);
        assert!(on
            .iter()
            .all(|&(i, j)| (4..6).contains(&i) && (3..7).contains(&j)));

        assert!(contact_mask_from_height(&z, 2.0).data().iter().all(|&m| !m));
    }

    #[test]
    fn sample_exact_nodes() {
        let g = geom();
        let h = Grid::from_fn(16, 24, |i, j| (i * 100 + j) as f64 * 0.37);
        for (i, j) in [(0, 0), (15, 23), (7, 11), (0, 23), (15, 0)] {
            let (u, v) = g.pixel_to_mm(i, j);
            assert_eq!(h.sample_bilinear(&g, u, v).unwrap(), *h.get(i, j));
        }
    }

    #[test]
    fn sample_midpoint_normal() {
        let g = geom();
        let a = Vector3::new(0.0, 0.0, -1.0);
        let b = Vector3::new(1.0, 0.0, -1.0) / 2f64.sqrt();
        let n = Grid::from_fn(16, 24, |_, j| if j <= 5 { a } else { b });
        let (u0, v0) = g.pixel_to_mm(4, 5);
        let s = n.sample_bilinear(&g, u0 + 0.25, v0).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-6);
        let e = (a + b).normalize();
        assert!((s - e).norm() < 1e-12);
    }

    #[test]
    fn sample_out_of_bounds() {
        let g = geom();
        let h = Grid::filled(16, 24, 1.0);
        let (u0, u1, v0, v1) = g.bounds_mm();
        assert_eq!(h.sample_bilinear(&g, u0 - 0.01, 0.0), Err(OutOfBounds));
        assert_eq!(h.sample_bilinear(&g, u1 + 0.01, 0.0), Err(OutOfBounds));
        assert_eq!(h.sample_bilinear(&g, 0.0, v0 - 0.01), Err(OutOfBounds));
        assert_eq!(h.sample_bilinear(&g, 0.0, v1 + 0.01), Err(OutOfBounds));
        assert!(h.sample_bilinear(&g, u1, v1).is_ok());
        assert_eq!(h.sample_bilinear(&g, f64::NAN, 0.0), Err(OutOfBounds));
    }

    #[test]
    fn mask_sampling_is_conservative() {
        let g = geom();
        let m = Grid::from_fn(16, 24, |_, j| j <= 5);
        let (u, v) = g.pixel_to_mm(4, 5);
        assert!(m.sample_bilinear(&g, u, v).unwrap());
        assert!(!m.sample_bilinear(&g, u + 0.01, v).unwrap());
        assert!(m.sample_bilinear(&g, u - 0.01, v).unwrap());
    }

    fn frame(rows: usize, cols: usize, grad: impl Fn(usize, usize) -> [f64; 2]) -> TactileFrame {
        let geometry = GridGeometry::new(rows, cols, 0.0625).unwrap();
        let gradients = Grid::from_fn(rows, cols, grad);
        let heights = Grid::from_fn(rows, cols, |i, j| (i + j) as f64 * 0.01);
        let mask = Grid::from_fn(rows, cols, |i, j| (i + j) % 2 == 0);
        TactileFrame::new(geometry, gradients, heights, mask, 1.5).unwrap()
    }

    #[test]
    fn downsample_examples() {
        let f = frame(240, 320, |_, _| [0.3, -0.2]);
        let d = downsample_frame(&f, 2).unwrap();
        assert_eq!((d.geometry.height_px, d.geometry.width_px), (120, 160));
        assert_eq!(d.geometry.pixel_pitch, 0.125);
        assert!(d.gradients.data().iter().all(|g| *g == [0.3, -0.2]));
        // Checkerboard mask never survives the all-true rule.
        assert!(d.mask.data().iter().all(|&m| !m));
        assert_eq!(d.timestamp, 1.5);

        assert!(matches!(
            downsample_frame(&f, 3),
            Err(Error::ShapeMismatch(_))
        ));
        let odd = frame(24, 20, |_, _| [0.0, 0.0]);
        assert!(matches!(
            downsample_frame(&odd, 8),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn frame_rejects_shape_mismatch() {
        let geometry = GridGeometry::new(10, 12, 0.1).unwrap();
        let r = TactileFrame::new(
            geometry,
            Grid::filled(10, 12, [0.0; 2]),
            Grid::filled(10, 11, 0.0),
            Grid::filled(10, 12, false),
            0.0,
        );
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
    }
}
