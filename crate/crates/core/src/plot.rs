//! Training-curve images. The bitmap backend is built without a font
//! engine, so plots carry frame, gridlines and series but no text:
//! training in blue, validation in red, one x gridline per epoch (every
//! fifth epoch beyond 30).

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::model::EpochRecord;

const WIDTH: u32 = 800;
const HEIGHT: u32 = 480;
const TRAIN: RGBColor = RGBColor(31, 119, 180);
const VAL: RGBColor = RGBColor(214, 39, 40);
const GRID: RGBColor = RGBColor(220, 220, 220);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotPaths {
    pub accuracy: PathBuf,
    pub loss: PathBuf,
}

pub fn plot_file_names(run_id: &str) -> (String, String) {
    (format!("{run_id}_accuracy.png"), format!("{run_id}_loss.png"))
}

/// Writes `{run_id}_accuracy.png` and `{run_id}_loss.png` into `out_dir`.
pub fn plot_history(records: &[EpochRecord], run_id: &str, out_dir: &Path) -> Result<PlotPaths> {
    if records.is_empty() {
        return Err(Error::Argument("cannot plot an empty history".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (acc_name, loss_name) = plot_file_names(run_id);
    let paths = PlotPaths {
        accuracy: out_dir.join(acc_name),
        loss: out_dir.join(loss_name),
    };
    let series = |f: fn(&EpochRecord) -> f64| records.iter().map(|r| (r.epoch as f64, f(r))).collect::<Vec<_>>();
    render(
        &paths.accuracy,
        &series(|r| r.train_accuracy),
        &series(|r| r.val_accuracy),
        1.0,
    )?;
    let max_loss = records
        .iter()
        .flat_map(|r| [r.train_loss, r.val_loss])
        .fold(0.0f64, f64::max);
    let top = if max_loss > 0.0 { max_loss * 1.05 } else { 1.0 };
    render(&paths.loss, &series(|r| r.train_loss), &series(|r| r.val_loss), top)?;
    Ok(paths)
}

fn render(path: &Path, train: &[(f64, f64)], val: &[(f64, f64)], y_max: f64) -> Result<()> {
    let first = train[0].0;
    let last = train[train.len() - 1].0;
    let buf = draw(train, val, first, last, y_max).map_err(|e| Error::Training(format!("plotting {}: {e}", path.display())))?;
    let img = image::RgbImage::from_raw(WIDTH, HEIGHT, buf).expect("buffer matches plot size");
    let mut png = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    crate::fsutil::write_atomic(path, &png)
}

type DrawResult<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn draw(train: &[(f64, f64)], val: &[(f64, f64)], first: f64, last: f64, y_max: f64) -> DrawResult<Vec<u8>> {
    let mut buf = vec![0u8; (WIDTH * HEIGHT * 3) as usize];
    {
        let root = BitMapBackend::with_buffer(&mut buf, (WIDTH, HEIGHT)).into_drawing_area();
        root.fill(&WHITE)?;
        let (x0, x1) = if last > first { (first, last) } else { (first - 0.5, first + 0.5) };
        let mut chart = ChartBuilder::on(&root).margin(24).build_cartesian_2d(x0..x1, 0.0..y_max)?;

        let step = if last - first > 30.0 { 5.0 } else { 1.0 };
        let mut e = first;
        while e <= last + 1e-9 {
            chart.draw_series(LineSeries::new([(e, 0.0), (e, y_max)], GRID))?;
            e += step;
        }
        for k in 0..=10 {
            let y = y_max * k as f64 / 10.0;
            chart.draw_series(LineSeries::new([(x0, y), (x1, y)], GRID))?;
        }
        chart.draw_series(LineSeries::new([(x0, 0.0), (x1, 0.0), (x1, y_max), (x0, y_max), (x0, 0.0)], BLACK))?;

        for (pts, color) in [(train, TRAIN), (val, VAL)] {
            chart.draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))?;
            chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))?;
        }
        root.present()?;
    }
    Ok(buf)
}
