//! Deterministic SVG rendering: class-colored scatter maps and two-color
//! decision-surface panels.
//!
//! Scatter maps follow the purple/yellow convention (safe `-1` purple,
//! failed `+1` yellow); decision surfaces use red/blue markers (safe red,
//! failed blue) with solid training points and semi-transparent test points
//! over a two-color background split at the model's decision threshold.
//!
//! Every coordinate is formatted with fixed precision and documents contain
//! no timestamps or generated ids, so output bytes depend only on the inputs.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{ClassifierError, TrainedModel};
use crate::data::Label;

/// Scatter colors (safe purple / failed yellow).
const SCATTER_NEG_COLOR: &str = "#440154";
const SCATTER_POS_COLOR: &str = "#fde725";
/// Surface marker colors (safe red / failed blue).
const SURFACE_NEG_COLOR: &str = "#ff0000";
const SURFACE_POS_COLOR: &str = "#0000ff";
/// Surface background fills for the two predicted regions.
const SURFACE_NEG_BG: &str = "#ffcccc";
const SURFACE_POS_BG: &str = "#ccccff";
const TEST_MARKER_OPACITY: &str = "0.6";

#[derive(Debug, Error)]
pub enum VizError {
    #[error("surface resolution must be >= 2, got {0}")]
    BadResolution(usize),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Axis-aligned plot region in data coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl GridBounds {
    /// Smallest bounds covering `points`, expanded on every side by
    /// `margin` times the coordinate range. Degenerate ranges (no points or
    /// a single location) fall back to unit half-widths.
    pub fn covering(points: &ArrayView2<f64>, margin: f64) -> GridBounds {
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for row in points.rows() {
            x_min = x_min.min(row[0]);
            x_max = x_max.max(row[0]);
            y_min = y_min.min(row[1]);
            y_max = y_max.max(row[1]);
        }
        if !x_min.is_finite() {
            return GridBounds {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            };
        }
        let pad = |lo: f64, hi: f64| -> (f64, f64) {
            let range = hi - lo;
            if range > 0.0 {
                (lo - margin * range, hi + margin * range)
            } else {
                (lo - 1.0, hi + 1.0)
            }
        };
        let (x_min, x_max) = pad(x_min, x_max);
        let (y_min, y_max) = pad(y_min, y_max);
        GridBounds {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    fn x_range(&self) -> f64 {
        self.x_max - self.x_min
    }

    fn y_range(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// Model scores evaluated on a regular grid of cell centers.
#[derive(Debug, Clone)]
pub struct SurfaceGrid {
    pub bounds: GridBounds,
    pub resolution: usize,
    /// `resolution x resolution`, row-major; `scores[[r, c]]` is the score at
    /// the center of the cell in y-row `r` (bottom to top) and x-column `c`.
    pub scores: Array2<f64>,
}

/// Evaluates `model.predict_score` at every grid cell center.
pub fn decision_surface(
    model: &TrainedModel,
    bounds: GridBounds,
    resolution: usize,
) -> Result<SurfaceGrid, VizError> {
    if resolution < 2 {
        return Err(VizError::BadResolution(resolution));
    }
    if model.dim() != 2 {
        return Err(VizError::Classifier(ClassifierError::DimensionMismatch {
            expected: 2,
            got: model.dim(),
        }));
    }
    let dx = bounds.x_range() / resolution as f64;
    let dy = bounds.y_range() / resolution as f64;
    let mut points = Array2::zeros((resolution * resolution, 2));
    for r in 0..resolution {
        for c in 0..resolution {
            let i = r * resolution + c;
            points[[i, 0]] = bounds.x_min + (c as f64 + 0.5) * dx;
            points[[i, 1]] = bounds.y_min + (r as f64 + 0.5) * dy;
        }
    }
    let flat = model.predict_score(&points.view())?;
    let scores = Array2::from_shape_vec((resolution, resolution), flat)
        .expect("scores come back one per grid point");
    Ok(SurfaceGrid {
        bounds,
        resolution,
        scores,
    })
}

/// Document size and labeling shared by the plot builders.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub width: u32,
    pub height: u32,
    pub title: String,
    pub point_radius: f64,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            title: String::new(),
            point_radius: 3.0,
        }
    }
}

impl PlotStyle {
    pub fn titled(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Self::default()
        }
    }
}

const MARGIN_LEFT: f64 = 54.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 42.0;

fn f2(v: f64) -> String {
    format!("{v:.2}")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

struct PixelMap {
    bounds: GridBounds,
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
}

impl PixelMap {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.bounds.x_min) / self.bounds.x_range() * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.bounds.y_min) / self.bounds.y_range() * self.h
    }
}

fn svg_open(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"##,
        w = f2(width),
        h = f2(height),
    );
    let _ = writeln!(
        out,
        r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##,
        w = f2(width),
        h = f2(height),
    );
}

fn title_text(out: &mut String, cx: f64, y: f64, title: &str) {
    if !title.is_empty() {
        let _ = writeln!(
            out,
            r##"<text x="{x}" y="{y}" font-family="sans-serif" font-size="14" text-anchor="middle">{t}</text>"##,
            x = f2(cx),
            y = f2(y),
            t = xml_escape(title),
        );
    }
}

fn circle(out: &mut String, cx: f64, cy: f64, r: f64, fill: &str, extra: &str) {
    let _ = writeln!(
        out,
        r##"<circle cx="{x}" cy="{y}" r="{r}" fill="{fill}"{extra}/>"##,
        x = f2(cx),
        y = f2(cy),
        r = f2(r),
    );
}

/// Class-colored scatter plot of 2-D points with axes, ticks, legend, and
/// title. One marker per input row, in input order.
pub fn scatter_svg(points: &ArrayView2<f64>, labels: &[Label], style: &PlotStyle) -> String {
    assert_eq!(points.nrows(), labels.len(), "one label per point");
    let bounds = GridBounds::covering(points, 0.05);
    let map = PixelMap {
        bounds,
        x0: MARGIN_LEFT,
        y0: MARGIN_TOP,
        w: style.width as f64 - MARGIN_LEFT - MARGIN_RIGHT,
        h: style.height as f64 - MARGIN_TOP - MARGIN_BOTTOM,
    };
    let mut out = String::new();
    svg_open(&mut out, style.width as f64, style.height as f64);
    title_text(&mut out, style.width as f64 / 2.0, 20.0, &style.title);

    // Axis frame and ticks.
    let _ = writeln!(
        out,
        r##"<rect x="{x}" y="{y}" width="{w}" height="{h}" fill="none" stroke="#000000"/>"##,
        x = f2(map.x0),
        y = f2(map.y0),
        w = f2(map.w),
        h = f2(map.h),
    );
    const TICKS: usize = 5;
    for i in 0..TICKS {
        let frac = i as f64 / (TICKS - 1) as f64;
        let xv = bounds.x_min + frac * bounds.x_range();
        let px = map.px(xv);
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{y1}" x2="{x}" y2="{y2}" stroke="#000000"/>"##,
            x = f2(px),
            y1 = f2(map.y0 + map.h),
            y2 = f2(map.y0 + map.h + 4.0),
        );
        let _ = writeln!(
            out,
            r##"<text x="{x}" y="{y}" font-family="sans-serif" font-size="10" text-anchor="middle">{v}</text>"##,
            x = f2(px),
            y = f2(map.y0 + map.h + 16.0),
            v = f2(xv),
        );
        let yv = bounds.y_min + frac * bounds.y_range();
        let py = map.py(yv);
        let _ = writeln!(
            out,
            r##"<line x1="{x1}" y1="{y}" x2="{x2}" y2="{y}" stroke="#000000"/>"##,
            x1 = f2(map.x0 - 4.0),
            x2 = f2(map.x0),
            y = f2(py),
        );
        let _ = writeln!(
            out,
            r##"<text x="{x}" y="{y}" font-family="sans-serif" font-size="10" text-anchor="end">{v}</text>"##,
            x = f2(map.x0 - 6.0),
            y = f2(py + 3.0),
            v = f2(yv),
        );
    }

    for (row, label) in points.rows().into_iter().zip(labels) {
        let (fill, extra) = if label.is_positive() {
            (
                SCATTER_POS_COLOR,
                r##" stroke="#888888" stroke-width="0.5""##,
            )
        } else {
            (SCATTER_NEG_COLOR, "")
        };
        circle(
            &mut out,
            map.px(row[0]),
            map.py(row[1]),
            style.point_radius,
            fill,
            extra,
        );
    }

    // Legend, top-right corner of the plot area.
    let legend_x = map.x0 + map.w - 110.0;
    for (i, (color, text)) in [
        (SCATTER_NEG_COLOR, "safe (-1)"),
        (SCATTER_POS_COLOR, "failed (+1)"),
    ]
    .iter()
    .enumerate()
    {
        let y = map.y0 + 10.0 + i as f64 * 16.0;
        let _ = writeln!(
            out,
            r##"<rect x="{x}" y="{y}" width="10" height="10" fill="{color}" stroke="#888888" stroke-width="0.5"/>"##,
            x = f2(legend_x),
            y = f2(y),
        );
        let _ = writeln!(
            out,
            r##"<text x="{x}" y="{y}" font-family="sans-serif" font-size="11">{text}</text>"##,
            x = f2(legend_x + 14.0),
            y = f2(y + 9.0),
        );
    }

    out.push_str("</svg>\n");
    out
}

/// One decision-surface panel: a trained 2-D model's thresholded score grid
/// plus its training points (solid) and test points (semi-transparent).
pub struct SurfacePanel<'a> {
    pub title: String,
    pub grid: &'a SurfaceGrid,
    pub threshold: f64,
    pub train_points: ArrayView2<'a, f64>,
    pub train_labels: &'a [Label],
    pub test_points: ArrayView2<'a, f64>,
    pub test_labels: &'a [Label],
}

fn render_surface_panel(
    out: &mut String,
    panel: &SurfacePanel<'_>,
    origin_x: f64,
    origin_y: f64,
    panel_w: f64,
    panel_h: f64,
    point_radius: f64,
) {
    let map = PixelMap {
        bounds: panel.grid.bounds,
        x0: origin_x + 8.0,
        y0: origin_y + 24.0,
        w: panel_w - 16.0,
        h: panel_h - 34.0,
    };
    title_text(out, origin_x + panel_w / 2.0, origin_y + 16.0, &panel.title);

    // Two-color background, one rect per run of same-side cells in each row.
    let res = panel.grid.resolution;
    let dx = panel.grid.bounds.x_range() / res as f64;
    let dy = panel.grid.bounds.y_range() / res as f64;
    for r in 0..res {
        let y_hi = panel.grid.bounds.y_min + (r + 1) as f64 * dy;
        let py = map.py(y_hi);
        let cell_h = map.py(panel.grid.bounds.y_min + r as f64 * dy) - py;
        let mut c = 0;
        while c < res {
            let side = panel.grid.scores[[r, c]] >= panel.threshold;
            let mut end = c + 1;
            while end < res && (panel.grid.scores[[r, end]] >= panel.threshold) == side {
                end += 1;
            }
            let x_lo = panel.grid.bounds.x_min + c as f64 * dx;
            let x_hi = panel.grid.bounds.x_min + end as f64 * dx;
            let px = map.px(x_lo);
            let fill = if side { SURFACE_POS_BG } else { SURFACE_NEG_BG };
            let _ = writeln!(
                out,
                r##"<rect x="{x}" y="{y}" width="{w}" height="{h}" fill="{fill}"/>"##,
                x = f2(px),
                y = f2(py),
                w = f2(map.px(x_hi) - px),
                h = f2(cell_h),
            );
            c = end;
        }
    }

    let marker = |out: &mut String, x: f64, y: f64, label: &Label, test: bool| {
        let fill = if label.is_positive() {
            SURFACE_POS_COLOR
        } else {
            SURFACE_NEG_COLOR
        };
        let extra = if test {
            format!(r##" fill-opacity="{TEST_MARKER_OPACITY}""##)
        } else {
            r##" stroke="#333333" stroke-width="0.5""##.to_string()
        };
        circle(out, map.px(x), map.py(y), point_radius, fill, &extra);
    };
    for (row, label) in panel
        .train_points
        .rows()
        .into_iter()
        .zip(panel.train_labels)
    {
        marker(out, row[0], row[1], label, false);
    }
    for (row, label) in panel.test_points.rows().into_iter().zip(panel.test_labels) {
        marker(out, row[0], row[1], label, true);
    }

    let _ = writeln!(
        out,
        r##"<rect x="{x}" y="{y}" width="{w}" height="{h}" fill="none" stroke="#000000"/>"##,
        x = f2(map.x0),
        y = f2(map.y0),
        w = f2(map.w),
        h = f2(map.h),
    );
}

/// Single decision-surface plot.
pub fn surface_svg(panel: &SurfacePanel<'_>, style: &PlotStyle) -> String {
    let mut out = String::new();
    svg_open(&mut out, style.width as f64, style.height as f64);
    render_surface_panel(
        &mut out,
        panel,
        0.0,
        0.0,
        style.width as f64,
        style.height as f64,
        style.point_radius,
    );
    out.push_str("</svg>\n");
    out
}

/// Grid of decision-surface panels (used for the per-option classifier
/// comparison figures), laid out `columns` wide in input order.
pub fn surface_panels_svg(
    panels: &[SurfacePanel<'_>],
    columns: usize,
    panel_width: u32,
    panel_height: u32,
    point_radius: f64,
) -> String {
    let columns = columns.max(1);
    let rows = panels.len().div_ceil(columns);
    let width = (columns * panel_width as usize) as f64;
    let height = (rows * panel_height as usize) as f64;
    let mut out = String::new();
    svg_open(&mut out, width, height);
    for (i, panel) in panels.iter().enumerate() {
        let (row, col) = (i / columns, i % columns);
        render_surface_panel(
            &mut out,
            panel,
            (col * panel_width as usize) as f64,
            (row * panel_height as usize) as f64,
            panel_width as f64,
            panel_height as f64,
            point_radius,
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{fit, ClassifierSpec, KnnParams};
    use crate::data::Dataset;
    use ndarray::array;

    fn knn_model() -> TrainedModel {
        let samples = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let labels = vec![Label::Neg, Label::Pos, Label::Pos];
        let ds = Dataset::new(samples, labels, None).unwrap();
        fit(&ClassifierSpec::Knn(KnnParams { k: 3 }), &ds).unwrap()
    }

    #[test]
    fn surface_evaluates_resolution_squared_cells() {
        let model = knn_model();
        let bounds = GridBounds {
            x_min: -1.0,
            x_max: 2.0,
            y_min: -1.0,
            y_max: 2.0,
        };
        let grid = decision_surface(&model, bounds, 2).unwrap();
        assert_eq!(grid.scores.len(), 4);
        let grid = decision_surface(&model, bounds, 7).unwrap();
        assert_eq!(grid.scores.len(), 49);
    }

    #[test]
    fn surface_cell_scores_match_direct_queries() {
        let model = knn_model();
        let bounds = GridBounds {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        };
        let grid = decision_surface(&model, bounds, 4).unwrap();
        // Cell (0, 0) center is (0.125, 0.125); with k = 3 the score is the
        // global positive fraction, 2/3.
        let direct = model.predict_score(&array![[0.125, 0.125]].view()).unwrap()[0];
        assert_eq!(grid.scores[[0, 0]], direct);
        assert_eq!(direct, 2.0 / 3.0);
    }

    #[test]
    fn surface_rejects_non_2d_models() {
        let samples = array![[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]];
        let ds = Dataset::new(samples, vec![Label::Neg, Label::Pos], None).unwrap();
        let model = fit(&ClassifierSpec::Knn(KnnParams { k: 1 }), &ds).unwrap();
        let bounds = GridBounds {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        };
        assert!(matches!(
            decision_surface(&model, bounds, 4),
            Err(VizError::Classifier(
                ClassifierError::DimensionMismatch { .. }
            ))
        ));
        assert!(matches!(
            decision_surface(&knn_model(), bounds, 1),
            Err(VizError::BadResolution(1))
        ));
    }

    #[test]
    fn empty_scatter_is_still_valid_svg() {
        let points = Array2::<f64>::zeros((0, 2));
        let svg = scatter_svg(&points.view(), &[], &PlotStyle::titled("empty"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 0);
        assert!(svg.contains("empty"));
    }

    #[test]
    fn scatter_emits_one_marker_per_point_and_legend() {
        let points = array![[0.0, 0.0], [1.0, 1.0]];
        let labels = [Label::Neg, Label::Pos];
        let svg = scatter_svg(&points.view(), &labels, &PlotStyle::default());
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("safe (-1)"));
        assert!(svg.contains("failed (+1)"));
        assert!(svg.contains(SCATTER_NEG_COLOR));
        assert!(svg.contains(SCATTER_POS_COLOR));
    }

    #[test]
    fn scatter_bytes_are_deterministic() {
        let points = array![[0.25, -1.5], [2.0, 3.0], [0.5, 0.5]];
        let labels = [Label::Neg, Label::Pos, Label::Neg];
        let style = PlotStyle::titled("t-SNE map");
        let a = scatter_svg(&points.view(), &labels, &style);
        let b = scatter_svg(&points.view(), &labels, &style);
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_surface_renders_single_background_run_per_row() {
        let grid = SurfaceGrid {
            bounds: GridBounds {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            },
            resolution: 4,
            scores: Array2::from_elem((4, 4), 0.9),
        };
        let empty = Array2::<f64>::zeros((0, 2));
        let panel = SurfacePanel {
            title: "uniform".into(),
            grid: &grid,
            threshold: 0.5,
            train_points: empty.view(),
            train_labels: &[],
            test_points: empty.view(),
            test_labels: &[],
        };
        let svg = surface_svg(&panel, &PlotStyle::default());
        // One run per row plus the white canvas and the border.
        assert_eq!(svg.matches("<rect").count(), 4 + 2);
        assert_eq!(svg.matches(SURFACE_NEG_BG).count(), 0);
        assert_eq!(svg.matches("<circle").count(), 0);
    }

    #[test]
    fn panel_grid_renders_all_panels() {
        let grid = SurfaceGrid {
            bounds: GridBounds {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            },
            resolution: 2,
            scores: array![[0.1, 0.9], [0.9, 0.1]],
        };
        let train = array![[0.2, 0.2]];
        let train_labels = [Label::Neg];
        let test = array![[0.8, 0.8]];
        let test_labels = [Label::Pos];
        let panels: Vec<SurfacePanel<'_>> = (0..6)
            .map(|i| SurfacePanel {
                title: format!("panel {i}"),
                grid: &grid,
                threshold: 0.5,
                train_points: train.view(),
                train_labels: &train_labels,
                test_points: test.view(),
                test_labels: &test_labels,
            })
            .collect();
        let svg = surface_panels_svg(&panels, 3, 320, 260, 3.0);
        for i in 0..6 {
            assert!(svg.contains(&format!("panel {i}")));
        }
        // Two markers per panel, one solid and one semi-transparent.
        assert_eq!(svg.matches("<circle").count(), 12);
        assert_eq!(svg.matches("fill-opacity").count(), 6);
    }
}
