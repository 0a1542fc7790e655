use anyhow::{bail, Context, Result};
use gaugebeam::checks::log_slope;
use std::path::{Path, PathBuf};

fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let index: Vec<usize> = names
        .iter()
        .map(|n| headers.iter().position(|h| h == *n).with_context(|| format!("{} has no column {n:?}", path.display())))
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for record in reader.records() {
        let record = record?;
        for (c, &i) in cols.iter_mut().zip(&index) {
            c.push(record[i].parse::<f64>().with_context(|| format!("bad number in {}", path.display()))?);
        }
    }
    Ok(cols)
}

fn loglog_script(csv: &str, x: &str, y: &str, ylabel: &str, slope: f64, png: &str) -> String {
    format!(
        r#"import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open("{csv}") as f:
    rows = list(csv.DictReader(f))
x = [float(r["{x}"]) for r in rows]
y = [float(r["{y}"]) for r in rows]
slope = {slope:.6}
fig, ax = plt.subplots()
ax.loglog(x, y, "o-", label="measured")
ax.loglog(x, [y[0] * (v / x[0]) ** slope for v in x], "--", label=f"fit, slope {{slope:.3f}}")
ax.annotate(f"slope = {{slope:.3f}}", xy=(0.05, 0.05), xycoords="axes fraction")
ax.set_xlabel("s")
ax.set_ylabel("{ylabel}")
ax.legend()
fig.tight_layout()
fig.savefig("{png}", dpi=150)
"#
    )
}

fn heatmap_script(csv: &str, png: &str) -> String {
    format!(
        r#"import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

data = np.genfromtxt("{csv}", delimiter=",", names=True)
xs, ys = np.unique(data["x1"]), np.unique(data["x2"])
ix, iy = np.searchsorted(xs, data["x1"]), np.searchsorted(ys, data["x2"])
keep = data["inside"] != 0

def image(column):
    img = np.full((len(ys), len(xs)), np.nan)
    img[iy[keep], ix[keep]] = data[column][keep]
    return img

truth, recovered = image("truth"), image("recovered")
extent = (xs[0], xs[-1], ys[0], ys[-1])
fig, axes = plt.subplots(1, 3, figsize=(12, 4))
for ax, img, title in zip(axes, (truth, recovered, np.abs(recovered - truth)), ("truth", "recovered", "difference")):
    im = ax.imshow(img, origin="lower", extent=extent)
    ax.set_title(title)
    fig.colorbar(im, ax=ax)
fig.tight_layout()
fig.savefig("{png}", dpi=150)
"#
    )
}

/// Writes plotting scripts for the recognised tables in `dir`; returns the
/// scripts written, none when no table is present.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let mut written = Vec::new();
    let mut emit = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    let residual = dir.join("beam_residual.csv");
    if residual.is_file() {
        let cols = read_columns(&residual, &["s", "residual"])?;
        let slope = log_slope(&cols[0], &cols[1]);
        emit("plot_residual.py", loglog_script("beam_residual.csv", "s", "residual", "residual / norm", slope, "residual.png"))?;
    }
    let spc = dir.join("spc.csv");
    if spc.is_file() {
        let cols = read_columns(&spc, &["s", "relative_error"])?;
        let slope = log_slope(&cols[0], &cols[1]);
        emit("plot_spc_error.py", loglog_script("spc.csv", "s", "relative_error", "relative error", slope, "spc_error.png"))?;
    }
    if dir.join("art_recovered.csv").is_file() {
        emit("plot_recovery.py", heatmap_script("art_recovered.csv", "recovery.png"))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_directory_is_a_no_op() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plots(dir.path()).unwrap().is_empty());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn residual_table_gives_fitted_slope() {
        let dir = tempfile::tempdir().unwrap();
        let rows: String = [32.0f64, 64.0, 128.0].iter().map(|s| format!("{s},{},0,1\n", 3.0 * s.powf(-1.5))).collect();
        std::fs::write(dir.path().join("beam_residual.csv"), format!("s,residual,residual_coarse_y,norm\n{rows}")).unwrap();
        let written = emit_plots(dir.path()).unwrap();
        assert_eq!(written.len(), 1);
        let script = std::fs::read_to_string(&written[0]).unwrap();
        assert!(script.contains("slope = -1.5"), "{script}");
        assert!(script.contains("loglog"));
    }

    #[test]
    fn recovery_table_gives_heatmap() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("art_recovered.csv"), "x1,x2,inside,recovered,truth\n0,0,1,1,1\n").unwrap();
        let written = emit_plots(dir.path()).unwrap();
        assert!(std::fs::read_to_string(&written[0]).unwrap().contains("imshow"));
    }
}
