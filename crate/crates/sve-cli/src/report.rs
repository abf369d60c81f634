//! Report bundle emission: CSV exports, SVG plots, and `summary.txt`.
//!
//! The summary lists exactly the files the writer produced, so a reader can
//! trust every referenced path to exist.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::{boundary_terms_name, controller_name, Scenario};
use crate::svg;
use sve_control::kernels::ResidualReport;
use sve_control::{
    write_trace_csv, KernelSolution, ObserverGains, Regime, RunOutput, Spectrum, TraceRecord,
};

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Subcritical => "subcritical",
        Regime::Supercritical => "supercritical",
    }
}

/// Largest magnitude of a trace quantity together with the time after which
/// it stays below 1% of that maximum (`None` if it never settles).
pub fn settle_metrics(
    trace: &[TraceRecord],
    value: impl Fn(&TraceRecord) -> f64,
) -> (f64, Option<f64>) {
    let max = trace.iter().map(|r| value(r).abs()).fold(0.0f64, f64::max);
    if max == 0.0 {
        return (0.0, Some(0.0));
    }
    let threshold = 0.01 * max;
    let mut last_above = None;
    for (i, r) in trace.iter().enumerate() {
        if value(r).abs() >= threshold {
            last_above = Some(i);
        }
    }
    match last_above {
        None => (max, Some(trace[0].t)),
        Some(i) if i + 1 < trace.len() => (max, Some(trace[i + 1].t)),
        Some(_) => (max, None),
    }
}

fn state_norm(r: &TraceRecord) -> f64 {
    (r.norm_u1 * r.norm_u1 + r.norm_u2 * r.norm_u2 + r.norm_w * r.norm_w).sqrt()
}

fn fmt_settle(s: Option<f64>) -> String {
    match s {
        Some(t) => format!("t = {t:.3}"),
        None => "not within the horizon".into(),
    }
}

pub struct SimulationReport {
    pub summary_path: PathBuf,
    /// Paths relative to the report directory, in the order written.
    pub files: Vec<String>,
}

fn write_file(
    dir: &Path,
    rel: &str,
    contents: &[u8],
    files: &mut Vec<String>,
) -> io::Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    files.push(rel.to_string());
    Ok(())
}

fn eigen_block(sp: &Spectrum, out: Option<&RunOutput>, froude: f64) -> String {
    let [l1, l2, l3] = sp.lambda;
    let mut s = format!(
        "flow:\n  lambda1 = {l1:.6}\n  lambda2 = {l2:.6}\n  lambda3 = {l3:.6}\n  froude = {froude:.6}\n  regime = {}\n",
        regime_name(sp.regime)
    );
    if let Some(o) = out {
        s.push_str(&format!(
            "  transport speeds: mu = {:.6}, gamma1 = {:.6}, gamma2 = {:.6}\n",
            o.char_coeffs.mu, o.char_coeffs.gamma1, o.char_coeffs.gamma2
        ));
    }
    s
}

fn kernel_block(label: &str, sol: &KernelSolution) -> String {
    format!(
        "  {label}: {} sweeps, final change {:.3e}, sup norm {:.6}\n",
        sol.iterations,
        sol.change_history.last().copied().unwrap_or(0.0),
        sol.field.sup_norm()
    )
}

/// Writes the full bundle for one simulation run and returns the file list.
pub fn write_simulation_report(
    out_dir: &Path,
    scenario: &Scenario,
    froude: f64,
    out: &RunOutput,
) -> io::Result<SimulationReport> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();

    let mut trace_buf = Vec::new();
    write_trace_csv(&out.trace, &mut trace_buf)?;
    write_file(out_dir, "trace.csv", &trace_buf, &mut files)?;

    for (k, snap) in out.snapshots.iter().enumerate() {
        let mut buf = Vec::new();
        snap.write_csv(&mut buf)?;
        write_file(out_dir, &format!("snapshots/snapshot_{k:02}.csv"), &buf, &mut files)?;
    }

    if let Some(sol) = &out.controller_kernels {
        let mut buf = Vec::new();
        sol.field.write_csv(&mut buf)?;
        write_file(out_dir, "kernels.csv", &buf, &mut files)?;
    }
    if let Some(sol) = &out.observer_kernels {
        let mut buf = Vec::new();
        sol.field.write_csv(&mut buf)?;
        write_file(out_dir, "observer_kernels.csv", &buf, &mut files)?;
    }
    if let Some(g) = &out.gains {
        let mut buf = Vec::new();
        g.write_csv(&mut buf)?;
        write_file(out_dir, "gains.csv", &buf, &mut files)?;
    }

    // Plots.
    let tseries = |f: &dyn Fn(&TraceRecord) -> f64| -> Vec<(f64, f64)> {
        out.trace.iter().map(|r| (r.t, f(r))).collect()
    };
    let control = svg::line_chart(
        &format!("{}: boundary control U(t)", scenario.name),
        "t",
        "U",
        &[("U", tseries(&|r| r.u))],
    );
    write_file(out_dir, "plots/control.svg", control.as_bytes(), &mut files)?;
    let output = svg::line_chart(
        &format!("{}: measured output y(t)", scenario.name),
        "t",
        "y",
        &[("y", tseries(&|r| r.y))],
    );
    write_file(out_dir, "plots/output.svg", output.as_bytes(), &mut files)?;
    let norms = svg::line_chart(
        &format!("{}: L2 norms", scenario.name),
        "t",
        "L2 norm",
        &[
            ("u1", tseries(&|r| r.norm_u1)),
            ("u2", tseries(&|r| r.norm_u2)),
            ("w", tseries(&|r| r.norm_w)),
        ],
    );
    write_file(out_dir, "plots/norms.svg", norms.as_bytes(), &mut files)?;
    if out.trace[0].v1.is_some() {
        let mut series: Vec<(&str, Vec<(f64, f64)>)> =
            vec![("V1", tseries(&|r| r.v1.unwrap_or(0.0)))];
        if out.trace[0].v2.is_some() {
            series.push(("V2", tseries(&|r| r.v2.unwrap_or(0.0))));
        }
        let lyap = svg::line_chart(
            &format!("{}: Lyapunov functionals", scenario.name),
            "t",
            "value",
            &series,
        );
        write_file(out_dir, "plots/lyapunov.svg", lyap.as_bytes(), &mut files)?;
    }
    if out.trace[0].obs_err.is_some() {
        let err = svg::line_chart(
            &format!("{}: observer error", scenario.name),
            "t",
            "L2 error",
            &[("error", tseries(&|r| r.obs_err.unwrap_or(0.0)))],
        );
        write_file(out_dir, "plots/observer_error.svg", err.as_bytes(), &mut files)?;
    }
    let cells = out.heat.u1.first().map(Vec::len).unwrap_or(0);
    let xs: Vec<f64> = (0..cells).map(|j| (j as f64 + 0.5) * out.dx).collect();
    for (name, rows) in [("u1", &out.heat.u1), ("u2", &out.heat.u2), ("w", &out.heat.w)] {
        let map = svg::heatmap(
            &format!("{}: {name}(t, x)", scenario.name),
            &xs,
            &out.heat.times,
            rows,
        );
        write_file(out_dir, &format!("plots/heat_{name}.svg"), map.as_bytes(), &mut files)?;
    }

    // Summary.
    let first = &out.trace[0];
    let last = out.trace.last().unwrap();
    let (n0, n1) = (state_norm(first), state_norm(last));
    let (max_u, settle_u) = settle_metrics(&out.trace, |r| r.u);
    let (max_y, settle_y) = settle_metrics(&out.trace, |r| r.y);

    let mut s = String::new();
    s.push_str(&format!("scenario: {}\n", scenario.name));
    s.push_str(&format!(
        "controller: {} (boundary terms: {})\n",
        controller_name(scenario.controller),
        boundary_terms_name(scenario.boundary_terms)
    ));
    s.push_str(&format!(
        "grid: {} cells, cfl {}, t_final {}, dt {:.6e}, steps {}\n",
        scenario.cells, scenario.cfl, scenario.t_final, out.dt, out.steps
    ));
    s.push_str(&format!(
        "kernel grid: n = {}, tol = {:.1e}\n\n",
        scenario.kernel_n, scenario.kernel_tol
    ));
    s.push_str(&eigen_block(&out.spectrum, Some(out), froude));
    if out.controller_kernels.is_some() || out.observer_kernels.is_some() {
        s.push_str("\nkernels:\n");
        if let Some(sol) = &out.controller_kernels {
            s.push_str(&kernel_block("controller", sol));
        }
        if let Some(sol) = &out.observer_kernels {
            s.push_str(&kernel_block("observer", sol));
        }
    }
    s.push_str("\nclosed loop:\n");
    s.push_str(&format!("  initial L2 norm = {n0:.6e}\n"));
    s.push_str(&format!("  final L2 norm   = {n1:.6e}\n"));
    s.push_str(&format!("  decay ratio     = {:.6e}\n", n1 / n0));
    s.push_str(&format!(
        "  max |U| = {max_u:.6e}; |U| below 1% of max from {}\n",
        fmt_settle(settle_u)
    ));
    s.push_str(&format!(
        "  max |y| = {max_y:.6e}; |y| below 1% of max from {}\n",
        fmt_settle(settle_y)
    ));
    if let (Some(e0), Some(e1)) = (first.obs_err, last.obs_err) {
        s.push_str(&format!(
            "  observer error: initial {e0:.6e}, final {e1:.6e}, ratio {:.6e}\n",
            e1 / e0
        ));
    }
    if let (Some(a), Some(b)) = (first.v1, last.v1) {
        s.push_str(&format!("  V1: {a:.6e} -> {b:.6e}\n"));
    }
    if let (Some(a), Some(b)) = (first.v2, last.v2) {
        s.push_str(&format!("  V2: {a:.6e} -> {b:.6e}\n"));
    }
    s.push_str("\nfiles:\n");
    for f in &files {
        s.push_str(&format!("  {f}\n"));
    }
    let summary_path = out_dir.join("summary.txt");
    fs::write(&summary_path, s.as_bytes())?;
    files.push("summary.txt".into());
    Ok(SimulationReport {
        summary_path,
        files,
    })
}

/// Text printed by the eigenstructure command.
pub fn eigen_text(scenario: &Scenario, sp: &Spectrum, froude: f64, sediment_a: f64) -> String {
    let [l1, l2, l3] = sp.lambda;
    let (g, h, v) = (scenario.g, scenario.hstar, scenario.vstar);
    let p = v * v - g * h - g * sediment_a * v * v;
    let q = g * sediment_a * v * v * v;
    let vieta_sum = (l1 + l2 + l3 - 2.0 * v).abs() / (2.0 * v).abs();
    let vieta_pair = (l1 * l2 + l1 * l3 + l2 * l3 - p).abs() / p.abs().max(1e-300);
    let vieta_prod = (l1 * l2 * l3 + q).abs() / q.abs().max(1e-300);
    format!(
        "scenario: {}\n{}  vieta residuals: sum {vieta_sum:.3e}, pairs {vieta_pair:.3e}, product {vieta_prod:.3e}\n",
        scenario.name,
        eigen_block(sp, None, froude)
    )
}

pub struct KernelReport {
    pub files: Vec<String>,
    pub text: String,
}

/// Writes kernel CSVs and plots, returning a convergence/residual summary.
pub fn write_kernel_report(
    out_dir: &Path,
    scenario: &Scenario,
    controller: &KernelSolution,
    controller_residual: &ResidualReport,
    observer: Option<(&KernelSolution, &ResidualReport, &ObserverGains)>,
) -> io::Result<KernelReport> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();

    let mut buf = Vec::new();
    controller.field.write_csv(&mut buf)?;
    write_file(out_dir, "kernels.csv", &buf, &mut files)?;

    // Boundary row k_m(1, xi): the weights the feedback law integrates
    // against.
    let grid = controller.field.grid;
    let row_series = |m: usize| -> Vec<(f64, f64)> {
        (0..grid.n)
            .map(|j| (grid.x(j), controller.field.interp(m, 1.0, grid.x(j))))
            .collect()
    };
    let row_plot = svg::line_chart(
        &format!("{}: control kernels at x = 1", scenario.name),
        "xi",
        "k(1, xi)",
        &[
            ("k1", row_series(0)),
            ("k2", row_series(1)),
            ("k3", row_series(2)),
        ],
    );
    write_file(out_dir, "plots/kernel_row.svg", row_plot.as_bytes(), &mut files)?;

    let mut text = format!(
        "scenario: {}\nkernels:\n{}  controller residual: interior {:.3e}, boundary {:.3e}\n",
        scenario.name,
        kernel_block("controller", controller),
        controller_residual.max_interior(),
        controller_residual.max_boundary()
    );

    if let Some((sol, res, gains)) = observer {
        let mut obuf = Vec::new();
        sol.field.write_csv(&mut obuf)?;
        write_file(out_dir, "observer_kernels.csv", &obuf, &mut files)?;
        let mut gbuf = Vec::new();
        gains.write_csv(&mut gbuf)?;
        write_file(out_dir, "gains.csv", &gbuf, &mut files)?;
        let series: Vec<(&str, Vec<(f64, f64)>)> = [
            ("p1", &gains.p1),
            ("p2", &gains.p2),
            ("p3", &gains.p3),
        ]
        .into_iter()
        .map(|(label, p)| {
            (
                label,
                gains.x.iter().zip(p).map(|(&x, &v)| (x, v)).collect::<Vec<_>>(),
            )
        })
        .collect();
        let gains_plot = svg::line_chart(
            &format!("{}: observer output-injection gains", scenario.name),
            "x",
            "p(x)",
            &series,
        );
        write_file(out_dir, "plots/gains.svg", gains_plot.as_bytes(), &mut files)?;
        text.push_str(&format!(
            "{}  observer residual: interior {:.3e}, boundary {:.3e}\n",
            kernel_block("observer", sol),
            res.max_interior(),
            res.max_boundary()
        ));
    }

    text.push_str("files:\n");
    for f in &files {
        text.push_str(&format!("  {f}\n"));
    }
    Ok(KernelReport { files, text })
}
