use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use gnss_rfi::calibration::{calibrate_stream, MetricPoint};
use gnss_rfi::evaluation::{confusion, stream_span, window_slice, EvalReport, PositiveSet, Window, WindowReport};
use gnss_rfi::ingest::stream::{read_epoch_file, write_epoch_stream};
use gnss_rfi::ingest::EpochStream;
use gnss_rfi::io::{
    check_binding, load_model, load_regions, read_classified_labels, read_metric_file, read_truth_file, save_model,
    save_optimizer_report, save_regions, write_classified_csv, write_density_csv, write_metric_csv, write_text,
    write_truth_csv, DensityRow, OptimizerReportFile,
};
use gnss_rfi::nominal::{cell_of, fit_nominal, recenter, Cell, ElevationBin};
use gnss_rfi::pipeline::detector_for_model;
use gnss_rfi::regions::{classify_stream, Label};
use gnss_rfi::simulator::{render, to_records, ScenarioScript};
use log::{info, warn};

use crate::config::ToolConfig;
use crate::failure::Failure;
use crate::{Cli, Command, Positive};

const SIM_SIGNAL: &str = "gps_l1ca";

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let (cfg, cfg_path) = ToolConfig::resolve(cli.config.as_deref())?;
    if let Some(p) = &cfg_path {
        info!("config {}", p.display());
    }
    let ctx = Ctx { cli, cfg };
    match &cli.command {
        Command::Ingest { inputs, signal } => ctx.ingest(inputs, signal),
        Command::FitNominal {
            input,
            elevation,
            elevation_width,
            sats,
            recenter,
        } => ctx.fit(input, *elevation, *elevation_width, sats, recenter.as_deref()),
        Command::OptimizeThreshold {
            model,
            report,
            target_fpr,
            rollouts,
            proposal_scale,
            no_quantize,
        } => {
            let mut f = ctx.cfg.falsification;
            if let Some(t) = target_fpr {
                f.target_fpr = *t;
            }
            if let Some(m) = rollouts {
                f.rollouts = *m;
            }
            if let Some(s) = proposal_scale {
                f.proposal_scale = *s;
            }
            if *no_quantize {
                f.quantize = false;
            }
            f.seed = ctx.seed(f.seed)?;
            ctx.optimize(model, report.as_deref(), f)
        }
        Command::Classify { input, model, regions } => ctx.classify(input, model, regions),
        Command::Simulate {
            scenario,
            truth,
            metrics,
        } => ctx.simulate(scenario, truth.as_deref(), metrics.as_deref()),
        Command::Evaluate {
            classified,
            truth,
            windows,
            positive,
        } => ctx.evaluate(classified, truth, windows, *positive),
        Command::PlotData { input, model, regions } => ctx.plot(input, model.as_deref(), regions.as_deref()),
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    cfg: ToolConfig,
}

impl Ctx<'_> {
    fn out(&self) -> Result<&Path, Failure> {
        self.cli
            .out
            .as_deref()
            .ok_or_else(|| Failure::input("--out is required"))
    }

    fn seed(&self, fallback: u64) -> Result<u64, Failure> {
        match (self.cli.seed, self.cli.strict) {
            (Some(s), _) => Ok(s),
            (None, true) => Err(Failure::input("--seed is required in --strict mode")),
            (None, false) => Ok(fallback),
        }
    }

    /// Refuse to touch any output until all of them are known to be free.
    fn claim(&self, paths: &[&Path]) -> Result<(), Failure> {
        if self.cli.force {
            return Ok(());
        }
        match paths.iter().find(|p| p.exists()) {
            Some(p) => Err(Failure::OutputExists(p.to_path_buf())),
            None => Ok(()),
        }
    }

    fn ingest(&self, inputs: &[PathBuf], signal: &str) -> Result<(), Failure> {
        let out = self.out()?;
        let weights_ok = self.cfg.calibration.weights_for(signal);
        if let Err(e) = weights_ok {
            return Err(Failure::input(e.to_string()));
        }
        self.claim(&[out])?;
        let mut stream = EpochStream::default();
        let mut violations = 0;
        for path in inputs {
            let s = read_epoch_file(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
            for v in &s.violations {
                warn!("{}: {v}", path.display());
            }
            for w in &s.warnings {
                warn!("{}: {w}", path.display());
            }
            violations += s.violations.len();
            stream.extend(s);
        }
        if violations > 0 {
            eprintln!("{violations} schema violations");
            if self.cli.strict {
                return Err(Failure::data(format!("{violations} schema violations in --strict mode")));
            }
        }
        let cal = calibrate_stream(&stream, &self.cfg.calibration, signal).map_err(Failure::data)?;
        for (t, e) in &cal.rejected {
            warn!("spectrum at t={t} rejected: {e}");
        }
        eprintln!(
            "{} points, {} unpaired epochs, {} saturated spectra, {} rejected spectra",
            cal.points.len(),
            cal.unpaired,
            cal.saturated,
            cal.rejected.len()
        );
        write_csv(out, |w| write_metric_csv(w, &cal.points))
    }

    fn fit(
        &self,
        input: &Path,
        elevation: Option<f64>,
        width: f64,
        sats: &[String],
        local: Option<&Path>,
    ) -> Result<(), Failure> {
        let out = self.out()?;
        let points = read_metric_file(input)?;
        let local = local.map(read_metric_file).transpose()?;
        self.claim(&[out])?;
        let bin = elevation.map_or(ElevationBin::all(), |c| ElevationBin::around(c, width));
        let sats: BTreeSet<String> = sats.iter().cloned().collect();
        let mut model = fit_nominal(&points, bin, &sats).map_err(Failure::data)?;
        if let Some(local) = local {
            let (moved, off) = recenter(&model, &local).map_err(Failure::data)?;
            eprintln!(
                "site offset {:+.3} dB rx_power, {:+.3} dB-Hz cn0",
                off.d_rx_power, off.d_cn0
            );
            model = moved;
        }
        model.metadata.created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        model.metadata.tool_version = env!("CARGO_PKG_VERSION").to_string();
        eprintln!(
            "mean ({:.3}, {:.3}), sd ({:.3}, {:.3}), rho {:.3}, {} points",
            model.mean[0],
            model.mean[1],
            model.std_devs().0,
            model.std_devs().1,
            model.correlation(),
            model.metadata.n_points
        );
        save_model(out, &model)?;
        Ok(())
    }

    fn optimize(
        &self,
        model_path: &Path,
        report: Option<&Path>,
        fcfg: gnss_rfi::threshold::FalsificationConfig,
    ) -> Result<(), Failure> {
        let out = self.out()?;
        let report = report.map_or_else(|| out.with_extension("report.toml"), Path::to_path_buf);
        let model = load_model(model_path)?;
        fcfg.validate().map_err(|e| Failure::input(e.to_string()))?;
        self.claim(&[out, &report])?;
        let det = detector_for_model(model, &fcfg, &self.cfg.simplex, &self.cfg.regions).map_err(Failure::data)?;
        let r = &det.report;
        eprintln!(
            "semi-axes ({:.3}, {:.3}) rotation {:.3} rad, area {:.3}, p_hat {:.3e} +/- {:.1e}, {} iterations",
            r.ellipse.semi_axes[0],
            r.ellipse.semi_axes[1],
            r.ellipse.rotation,
            r.area,
            r.achieved_fpr.p_hat,
            r.achieved_fpr.std_err,
            r.iterations
        );
        save_regions(out, &det.regions)?;
        save_optimizer_report(
            &report,
            &OptimizerReportFile {
                model_hash: det.regions.model_hash.clone(),
                falsification: fcfg,
                simplex: self.cfg.simplex,
                result: det.report.clone(),
            },
        )?;
        Ok(())
    }

    fn classify(&self, input: &Path, model: &Path, regions: &Path) -> Result<(), Failure> {
        let out = self.out()?;
        let model = load_model(model)?;
        let regions = load_regions(regions)?;
        check_binding(&regions, &model)?;
        let points = read_metric_file(input)?;
        self.claim(&[out])?;
        let s = classify_stream(&points, &regions);
        let summary: Vec<String> = s.counts.iter().map(|(l, n)| format!("{l} {n}")).collect();
        eprintln!("{}", summary.join(", "));
        write_csv(out, |w| write_classified_csv(w, &s.points))
    }

    fn simulate(&self, scenario: &Path, truth: Option<&Path>, metrics: Option<&Path>) -> Result<(), Failure> {
        let out = self.out()?;
        let truth = truth.map_or_else(|| out.with_extension("truth.csv"), Path::to_path_buf);
        let text = std::fs::read_to_string(scenario)
            .map_err(|e| Failure::input(format!("cannot read {}: {e}", scenario.display())))?;
        let script = ScenarioScript::from_toml(&text).map_err(|e| Failure::input(format!("{}: {e}", scenario.display())))?;
        let seed = self.seed(0)?;
        let weights = self
            .cfg
            .calibration
            .weights_for(SIM_SIGNAL)
            .map_err(|e| Failure::input(e.to_string()))?;
        let mut outputs = vec![out, truth.as_path()];
        outputs.extend(metrics);
        self.claim(&outputs)?;

        let stream = render(&script, seed).map_err(Failure::data)?;
        let records = to_records(&stream, &self.cfg.calibration, weights).map_err(Failure::data)?;
        let f = File::create(out).map_err(|e| Failure::write_to(out, e))?;
        write_epoch_stream(BufWriter::new(f), &records).map_err(|e| Failure::write_to(out, e))?;
        // one truth row per epoch
        let rows: Vec<(f64, Label)> = stream
            .points
            .iter()
            .zip(&stream.truth)
            .map(|(p, t)| (p.timestamp, *t))
            .collect();
        write_csv(&truth, |w| write_truth_csv(w, &rows))?;
        if let Some(m) = metrics {
            write_csv(m, |w| write_metric_csv(w, &stream.points))?;
        }
        eprintln!("{} epochs, seed {seed}", stream.points.len());
        Ok(())
    }

    fn evaluate(&self, classified: &Path, truth: &Path, windows: &[String], positive: Positive) -> Result<(), Failure> {
        let out = self.out()?;
        let mut pred = read_classified_labels(classified)?;
        let truth_rows = read_truth_file(truth)?;
        let windows: Vec<Window> = windows.iter().map(|w| parse_window(w)).collect::<Result<_, _>>()?;
        self.claim(&[out])?;

        let by_time: HashMap<u64, Label> = truth_rows.iter().map(|(t, l)| (t.to_bits(), *l)).collect();
        pred.sort_by(|a, b| a.0.total_cmp(&b.0));
        let missing = pred.iter().filter(|(t, _)| !by_time.contains_key(&t.to_bits())).count();
        if missing > 0 {
            return Err(Failure::data(format!("{missing} classified rows have no truth label")));
        }
        let times: Vec<f64> = pred.iter().map(|p| p.0).collect();
        let labels: Vec<Label> = pred.iter().map(|p| p.1).collect();
        let truth: Vec<Label> = times.iter().map(|t| by_time[&t.to_bits()]).collect();
        let positive = match positive {
            Positive::Rfi => PositiveSet::rfi(),
            Positive::Spoofing => PositiveSet::spoofing(),
        };
        let windows = if windows.is_empty() {
            let (t0, t1) = stream_span(&times);
            vec![Window::new("all", t0, t1)]
        } else {
            windows
        };
        let slices = window_slice(&times, &labels, &truth, &windows).map_err(Failure::data)?;
        let mut report = EvalReport::default();
        for s in slices {
            let m = confusion(&s.pred, &s.truth, &positive).map_err(Failure::data)?;
            report.windows.push(WindowReport::new(s.name, &positive, m));
        }
        let text = if out.extension().is_some_and(|e| e == "toml") {
            toml::to_string(&report).map_err(Failure::data)?
        } else {
            report.to_csv()
        };
        eprint!("{}", report.to_csv());
        write_text(out, &text)?;
        Ok(())
    }

    fn plot(&self, input: &Path, model: Option<&Path>, regions: Option<&Path>) -> Result<(), Failure> {
        let out = self.out()?;
        let points = read_metric_file(input)?;
        let model = model.map(load_model).transpose()?;
        let regions = regions.map(load_regions).transpose()?;
        if let (Some(m), Some(r)) = (&model, &regions) {
            check_binding(r, m)?;
        }
        self.claim(&[out])?;
        let rows = density_rows(&points, model.as_ref(), regions.as_ref());
        let lost = points.iter().filter(|p| p.cn0.is_none()).count();
        if lost > 0 {
            eprintln!("{lost} signal-loss points have no cell and are left out");
        }
        write_csv(out, |w| write_density_csv(w, &rows))
    }
}

fn density_rows(
    points: &[MetricPoint],
    model: Option<&gnss_rfi::NominalModel>,
    regions: Option<&gnss_rfi::RegionMap>,
) -> Vec<DensityRow> {
    let mut counts: BTreeMap<(i64, i64), u64> = BTreeMap::new();
    for p in points {
        if let Some(c) = p.cn0 {
            let cell = cell_of(p.rx_power, c);
            *counts.entry((cell.i, cell.j)).or_default() += 1;
        }
    }
    if let Some(m) = model {
        for g in &m.grid {
            counts.entry((g.i, g.j)).or_default();
        }
    }
    let total: u64 = counts.values().sum();
    counts
        .into_iter()
        .map(|((i, j), count)| {
            let cell = Cell { i, j };
            let (x, y) = cell.center();
            DensityRow {
                i,
                j,
                count,
                fraction: if total == 0 { 0.0 } else { count as f64 / total as f64 },
                model_mass: model.map(|m| m.mass_at(cell)),
                label: regions.map(|r| r.label(x, Some(y))),
            }
        })
        .collect()
}

fn parse_window(s: &str) -> Result<Window, Failure> {
    let bad = || Failure::input(format!("window {s:?}: expected NAME:T0:T1"));
    let mut parts = s.rsplitn(3, ':');
    let t1 = parts.next().and_then(|v| v.parse::<f64>().ok()).ok_or_else(bad)?;
    let t0 = parts.next().and_then(|v| v.parse::<f64>().ok()).ok_or_else(bad)?;
    let name = parts.next().filter(|n| !n.is_empty()).ok_or_else(bad)?;
    Ok(Window::new(name, t0, t1))
}

fn write_csv(path: &Path, f: impl FnOnce(BufWriter<File>) -> csv::Result<()>) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| Failure::write_to(path, e))?;
    f(BufWriter::new(file)).map_err(|e| Failure::write_to(path, e))
}
