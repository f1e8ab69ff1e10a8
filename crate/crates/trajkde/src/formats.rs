//! Plain-text file formats. Every file starts with a `# trajkde <kind>` line
//! of `key=value` fields; further lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use trajkde_core::energy::{FeasibilityMask, Grid};
use trajkde_core::forecast::{Forecast, ForecastStep, StepEstimate};
use trajkde_core::hdr::HdrRegion;
use trajkde_core::kde::DensityEstimate;
use trajkde_core::metrics::EvalReport;
use trajkde_core::{Bandwidth, Kernel, Metric, Point, Trajectory};

use crate::error::{CliError, Result};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn join(xs: &[f64], sep: &str) -> String {
    xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(sep)
}

fn data(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| data(format!("cannot parse {what} from {s:?}")))
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',').map(|v| parse_f64(v, what)).collect()
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| CliError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Parsed `# trajkde <kind> k=v ...` header.
struct Header {
    fields: BTreeMap<String, String>,
}

impl Header {
    fn parse(line: Option<&str>, kind: &str) -> Result<Self> {
        let line = line.ok_or_else(|| data(format!("empty {kind} file")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some("#")
            || parts.next() != Some("trajkde")
            || parts.next() != Some(kind)
        {
            return Err(data(format!("missing '# trajkde {kind}' header")));
        }
        let mut fields = BTreeMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| data(format!("malformed header field {p:?}")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        Ok(Self { fields })
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| data(format!("header field {key} is missing")))
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.get(key)?
            .parse()
            .map_err(|_| data(format!("header field {key} is not a count")))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(self.get(key)?, key)
    }
}

fn body(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn metric_field(metric: Metric) -> String {
    match metric {
        Metric::Euclidean => "metric=euclidean".into(),
        Metric::Haversine { radius } => format!("metric=haversine radius={radius}"),
    }
}

/// `# trajkde trajectory dim=d metric=... columns=t,...` then `t,x_1,...,x_d` rows.
/// Geographic files use `(t, lat, lon)` in degrees.
pub fn format_trajectory(traj: &Trajectory, metric: Metric) -> String {
    let columns = match metric {
        Metric::Haversine { .. } => "t,lat,lon".to_string(),
        Metric::Euclidean => std::iter::once("t".to_string())
            .chain((1..=traj.dim()).map(|j| format!("x{j}")))
            .collect::<Vec<_>>()
            .join(","),
    };
    let mut out = format!(
        "# trajkde trajectory dim={} {} columns={columns}\n",
        traj.dim(),
        metric_field(metric)
    );
    for (t, p) in traj.iter() {
        let _ = writeln!(out, "{},{}", num(t), join(p, ","));
    }
    out
}

pub fn parse_trajectory(text: &str) -> Result<(Trajectory, Metric)> {
    let header = Header::parse(text.lines().next(), "trajectory")?;
    let dim = header.usize("dim")?;
    let metric = match header.get("metric")? {
        "euclidean" => Metric::Euclidean,
        "haversine" => Metric::haversine(header.f64("radius")?)?,
        other => return Err(data(format!("unknown metric {other:?}"))),
    };
    let mut rows = Vec::new();
    for (line_no, line) in body(text) {
        let vals = parse_list(line, "trajectory value")?;
        if vals.len() != dim + 1 {
            return Err(data(format!(
                "line {line_no}: expected {} columns, found {}",
                dim + 1,
                vals.len()
            )));
        }
        rows.push((vals[0], vals[1..].to_vec()));
    }
    if rows.is_empty() {
        return Err(data("trajectory file has no rows"));
    }
    let traj = Trajectory::from_rows(rows)?;
    metric.validate_dim(traj.dim())?;
    Ok((traj, metric))
}

pub fn read_trajectory(path: &Path) -> Result<(Trajectory, Metric)> {
    parse_trajectory(&read_text(path)?).map_err(|e| match e {
        CliError::Data(m) => data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Header, `lower=`, `upper=` and `cells=` lines, then cells in row-major
/// order (last axis fastest), `cells[d-1]` space-separated 0/1 flags per line.
pub fn format_mask(mask: &FeasibilityMask) -> String {
    let g = mask.grid();
    let cells: Vec<String> = g.cells().iter().map(|c| c.to_string()).collect();
    let mut out = format!(
        "# trajkde mask dim={}\nlower={}\nupper={}\ncells={}\n",
        g.dim(),
        join(g.lower(), ","),
        join(g.upper(), ","),
        cells.join(",")
    );
    let row = g.cells()[g.dim() - 1];
    for chunk in mask.cells().chunks(row) {
        let line: Vec<&str> = chunk.iter().map(|&b| if b { "1" } else { "0" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_mask(text: &str) -> Result<FeasibilityMask> {
    let header = Header::parse(text.lines().next(), "mask")?;
    let dim = header.usize("dim")?;
    let mut lower = None;
    let mut upper = None;
    let mut cells: Option<Vec<usize>> = None;
    let mut flags = Vec::new();
    for (line_no, line) in body(text) {
        if let Some(v) = line.strip_prefix("lower=") {
            lower = Some(parse_list(v, "mask lower bound")?);
        } else if let Some(v) = line.strip_prefix("upper=") {
            upper = Some(parse_list(v, "mask upper bound")?);
        } else if let Some(v) = line.strip_prefix("cells=") {
            cells = Some(
                v.split(',')
                    .map(|c| {
                        c.trim()
                            .parse()
                            .map_err(|_| data(format!("bad cell count {c:?}")))
                    })
                    .collect::<Result<_>>()?,
            );
        } else {
            for tok in line.split_whitespace() {
                flags.push(match tok {
                    "0" => false,
                    "1" => true,
                    _ => {
                        return Err(data(format!(
                            "line {line_no}: mask flag {tok:?} is not 0 or 1"
                        )))
                    }
                });
            }
        }
    }
    let (lower, upper, cells) = match (lower, upper, cells) {
        (Some(l), Some(u), Some(c)) => (l, u, c),
        _ => return Err(data("mask needs lower=, upper= and cells= lines")),
    };
    if lower.len() != dim {
        return Err(data(format!(
            "mask bounds have dimension {}, header says {dim}",
            lower.len()
        )));
    }
    let grid = Grid::new(lower, upper, cells)?;
    Ok(FeasibilityMask::new(grid, flags)?)
}

pub fn read_mask(path: &Path) -> Result<FeasibilityMask> {
    parse_mask(&read_text(path)?)
}

/// Everything needed to rebuild per-step densities from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastFile {
    pub dim: usize,
    pub alpha: f64,
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
    pub origin: f64,
    pub rows: Vec<ForecastRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRow {
    pub offset: usize,
    pub time: f64,
    /// `(prediction, c_alpha, support_count)`.
    pub estimate: Option<(Vec<f64>, f64, usize)>,
}

/// Rows `i t_i p_1 ... p_d c_alpha support_count`, or `i t_i absent`.
pub fn format_forecast(
    f: &Forecast,
    cfg: &trajkde_core::forecast::ForecastConfig,
    origin: f64,
) -> String {
    let dim = cfg.bandwidth.dim();
    let mut out = format!(
        "# trajkde forecast dim={dim} alpha={} kernel={} bandwidth={} origin={} matches={}\n",
        num(cfg.alpha),
        cfg.kernel.name(),
        join(cfg.bandwidth.values(), ","),
        num(origin),
        f.matches.len()
    );
    let coords: Vec<String> = (1..=dim).map(|j| format!("p{j}")).collect();
    let _ = writeln!(out, "# i t {} c_alpha support_count", coords.join(" "));
    for s in &f.steps {
        match &s.estimate {
            Some(e) => {
                let _ = writeln!(
                    out,
                    "{} {} {} {} {}",
                    s.offset,
                    num(s.time),
                    join(&e.prediction, " "),
                    num(e.region.threshold()),
                    e.support_count
                );
            }
            None => {
                let _ = writeln!(out, "{} {} absent", s.offset, num(s.time));
            }
        }
    }
    out
}

pub fn parse_forecast(text: &str) -> Result<ForecastFile> {
    let header = Header::parse(text.lines().next(), "forecast")?;
    let dim = header.usize("dim")?;
    let bandwidth = Bandwidth::new(parse_list(header.get("bandwidth")?, "bandwidth")?)?;
    let mut rows = Vec::new();
    for (line_no, line) in body(text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(data(format!("line {line_no}: truncated forecast row")));
        }
        let offset = toks[0]
            .parse()
            .map_err(|_| data(format!("line {line_no}: bad step index")))?;
        let time = parse_f64(toks[1], "step time")?;
        let estimate = if toks[2] == "absent" {
            None
        } else {
            if toks.len() != dim + 4 {
                return Err(data(format!("line {line_no}: expected {} fields", dim + 4)));
            }
            let p = toks[2..2 + dim]
                .iter()
                .map(|t| parse_f64(t, "prediction"))
                .collect::<Result<Vec<_>>>()?;
            let c = parse_f64(toks[2 + dim], "c_alpha")?;
            let n = toks[3 + dim]
                .parse()
                .map_err(|_| data(format!("line {line_no}: bad support count")))?;
            Some((p, c, n))
        };
        rows.push(ForecastRow {
            offset,
            time,
            estimate,
        });
    }
    Ok(ForecastFile {
        dim,
        alpha: header.f64("alpha")?,
        kernel: Kernel::from_name(header.get("kernel")?)?,
        bandwidth,
        origin: header.f64("origin")?,
        rows,
    })
}

/// Rows `i c_1 ... c_d`: the kernel centers of every present step.
pub fn format_support(f: &Forecast, dim: usize) -> String {
    let mut out = format!("# trajkde support dim={dim}\n");
    for (s, e) in f.present() {
        for c in e.density().centers() {
            let _ = writeln!(out, "{} {}", s.offset, join(c, " "));
        }
    }
    out
}

pub fn parse_support(text: &str) -> Result<BTreeMap<usize, Vec<Point>>> {
    let header = Header::parse(text.lines().next(), "support")?;
    let dim = header.usize("dim")?;
    let mut map: BTreeMap<usize, Vec<Point>> = BTreeMap::new();
    for (line_no, line) in body(text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != dim + 1 {
            return Err(data(format!("line {line_no}: expected {} fields", dim + 1)));
        }
        let i = toks[0]
            .parse()
            .map_err(|_| data(format!("line {line_no}: bad step index")))?;
        let c = toks[1..]
            .iter()
            .map(|t| parse_f64(t, "support point"))
            .collect::<Result<Vec<_>>>()?;
        map.entry(i).or_default().push(Point::new(c)?);
    }
    Ok(map)
}

impl ForecastFile {
    /// Rebuilds the steps, with regions at the stored thresholds.
    pub fn to_steps(&self, support: &BTreeMap<usize, Vec<Point>>) -> Result<Vec<ForecastStep>> {
        self.rows
            .iter()
            .map(|r| {
                let estimate = match &r.estimate {
                    None => None,
                    Some((p, c, n)) => {
                        let centers = support.get(&r.offset).cloned().ok_or_else(|| {
                            data(format!("no support points for step {}", r.offset))
                        })?;
                        if centers.len() != *n {
                            return Err(data(format!(
                                "step {}: support_count {n} but {} support points",
                                r.offset,
                                centers.len()
                            )));
                        }
                        let density = Arc::new(DensityEstimate::build(
                            centers,
                            self.bandwidth.clone(),
                            self.kernel,
                        )?);
                        Some(StepEstimate {
                            prediction: Point::new(p.clone())?,
                            region: HdrRegion::with_threshold(density, self.alpha, *c),
                            support_count: *n,
                        })
                    }
                };
                Ok(ForecastStep {
                    offset: r.offset,
                    time: r.time,
                    estimate,
                })
            })
            .collect()
    }
}

/// Rows `x_1 ... x_d density` over every cell center.
pub fn format_density_grid(density: &DensityEstimate, grid: &Grid, step: usize) -> Result<String> {
    let mut out = format!("# trajkde density step={step} dim={}\n", grid.dim());
    for c in grid.centers() {
        let _ = writeln!(out, "{} {}", join(&c, " "), num(density.evaluate(&c)?));
    }
    Ok(out)
}

/// Rows `x_1 ... x_d in_region`.
pub fn format_hdr_grid(region: &HdrRegion, grid: &Grid, step: usize) -> Result<String> {
    let inside = region.membership(grid)?;
    let mut out = format!(
        "# trajkde hdr step={step} dim={} alpha={} threshold={}\n",
        grid.dim(),
        num(region.alpha()),
        num(region.threshold())
    );
    for (c, b) in grid.centers().zip(inside) {
        let _ = writeln!(out, "{} {}", join(&c, " "), u8::from(b));
    }
    Ok(out)
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn format_eval_summary(r: &EvalReport) -> String {
    let apes: Vec<String> = r.steps.iter().filter_map(|s| s.ape).map(num).collect();
    let acf: Vec<String> = r
        .acf
        .iter()
        .map(|a| format!("{}:{}:{}", a.lag, num(a.value), u8::from(a.significant)))
        .collect();
    let mut out = String::from("# trajkde eval\n");
    let _ = writeln!(out, "steps = {}", r.steps.len());
    let _ = writeln!(out, "evaluated_steps = {}", apes.len());
    let _ = writeln!(out, "mean_ape = {}", opt(r.mean_ape));
    let _ = writeln!(out, "std_ape = {}", opt(r.std_ape));
    let _ = writeln!(out, "pct_hdr = {}", opt(r.pct_hdr));
    let _ = writeln!(
        out,
        "integrated_error_slope = {}",
        opt(r.integrated_error_slope)
    );
    let _ = writeln!(out, "slope_fit_r2 = {}", opt(r.slope_fit_r2));
    let _ = writeln!(out, "ape = {}", apes.join(","));
    let _ = writeln!(out, "acf = {}", acf.join(","));
    out
}

/// Columns `i,t,ape,in_hdr,nearest_dist`; unavailable values are empty.
pub fn format_eval_steps(r: &EvalReport) -> String {
    let mut out = String::from("i,t,ape,in_hdr,nearest_dist\n");
    for s in &r.steps {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.offset,
            num(s.time),
            opt(s.ape),
            s.in_hdr
                .map(|b| u8::from(b).to_string())
                .unwrap_or_default(),
            opt(s.nearest_dist)
        );
    }
    out
}
