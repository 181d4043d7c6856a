use std::fs;
use std::path::Path;

use chrono::Duration;
use serde_json::json;
use spillcast_core::artifact::Artifact;
use spillcast_core::carrycap::{KMethod, KSeries};
use spillcast_core::epimodel::ModelError;
use spillcast_core::eval::{score_run, ScoreReport};
use spillcast_core::ingest::{load_cases, load_weather, parse_config, Config, WeatherSeries};
use spillcast_core::onset::OnsetPdf;
use spillcast_core::pipeline::{
    bayes_predictions, calibrate, estimate_on_observed, fit_onset_model, fit_severity_model,
    nb_predictions, predict_onset, predict_severity, scored_weeks, simulate_years, year_start,
    Mode,
};
use spillcast_core::severity::PriorChoice;
use spillcast_core::trend::{trend_report, RunSetup, TrendResult};

use crate::error::CliError;
use crate::manifest::Recorder;
use crate::models::{OnsetModel, SeverityModel, ONSET_KIND, SEVERITY_KIND};
use crate::{
    Cli, Command, EstimateArgs, EvaluateArgs, FitArgs, ForecastArgs, KArg, ModeArg, ModelArg,
    PredictOnsetArgs, PredictSeverityArgs, PriorArg, SeverityOptions, SimulateArgs, TrendArgs,
};

impl From<KArg> for KMethod {
    fn from(k: KArg) -> Self {
        match k {
            KArg::Csv => KMethod::Csv,
            KArg::Mean => KMethod::Mean,
            KArg::Ar => KMethod::Ar,
            KArg::Plane => KMethod::Plane,
        }
    }
}

impl From<PriorArg> for PriorChoice {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Uniform => PriorChoice::Uniform,
            PriorArg::Gaussian => PriorChoice::Gaussian,
            PriorArg::Band => PriorChoice::Band,
        }
    }
}

/// Loaded config, its source text and the run recorder.
struct Context {
    cfg: Config,
    rec: Recorder,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::FitOnset(_) => "fit-onset",
        Command::PredictOnset(_) => "predict-onset",
        Command::FitSeverity(_) => "fit-severity",
        Command::EstimateSeverity(_) => "estimate-severity",
        Command::PredictSeverity(_) => "predict-severity",
        Command::Evaluate(_) => "evaluate",
        Command::Trend(_) => "trend",
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let text = match &cli.config {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::input(format!(
                    "config file not found: {}",
                    path.display()
                )));
            }
            fs::read_to_string(path)?
        }
        None => String::new(),
    };
    let cfg = parse_config(&text)?;
    fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", cli.out.display())))?;
    let rec = Recorder::new(
        command_name(&cli.command),
        &cli.out,
        cli.config.as_deref(),
        &text,
        cli.seed,
    );
    let mut ctx = Context { cfg, rec };
    match &cli.command {
        Command::Simulate(a) => simulate(&mut ctx, a)?,
        Command::FitOnset(a) => fit_onset(&mut ctx, a)?,
        Command::PredictOnset(a) => predict_onset_cmd(&mut ctx, a)?,
        Command::FitSeverity(a) => fit_severity(&mut ctx, a)?,
        Command::EstimateSeverity(a) => estimate_severity_cmd(&mut ctx, a)?,
        Command::PredictSeverity(a) => predict_severity_cmd(&mut ctx, a)?,
        Command::Evaluate(a) => evaluate(&mut ctx, a)?,
        Command::Trend(a) => trend(&mut ctx, a)?,
    }
    ctx.rec.finish()?;
    Ok(())
}

fn weather(ctx: &mut Context, path: &Path) -> Result<WeatherSeries, CliError> {
    let w = load_weather(path)?;
    ctx.rec.input(path)?;
    Ok(w)
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn json_bytes(value: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialise");
    s.push('\n');
    s.into_bytes()
}

fn load_artifact(ctx: &mut Context, path: &Path, kind: &str) -> Result<Artifact, CliError> {
    if !path.exists() {
        return Err(CliError::input(format!(
            "model file not found: {}",
            path.display()
        )));
    }
    let text = fs::read_to_string(path)?;
    ctx.rec.input(path)?;
    Ok(Artifact::from_text(&text, kind)?)
}

fn onset_model(ctx: &mut Context, path: &Path) -> Result<OnsetModel, CliError> {
    let a = load_artifact(ctx, path, ONSET_KIND)?;
    Ok(OnsetModel::from_artifact(&a)?)
}

fn severity_model(ctx: &mut Context, path: &Path) -> Result<SeverityModel, CliError> {
    let a = load_artifact(ctx, path, SEVERITY_KIND)?;
    Ok(SeverityModel::from_artifact(&a)?)
}

fn mode(ctx: &Context, f: &ForecastArgs) -> Result<Mode, CliError> {
    match f.mode {
        ModeArg::Long => Ok(Mode::LongTerm),
        ModeArg::Short => Ok(Mode::ShortTerm {
            lead: f.lead.unwrap_or(ctx.cfg.forecast.short_lead),
        }),
    }
}

fn simulate(ctx: &mut Context, a: &SimulateArgs) -> Result<(), CliError> {
    let w = weather(ctx, &a.weather)?;
    let k = match a.k {
        KArg::Csv => {
            let path = a
                .k_file
                .as_deref()
                .ok_or_else(|| CliError::input("--k csv requires --k-file"))?;
            if !path.exists() {
                return Err(CliError::input(format!(
                    "K file not found: {}",
                    path.display()
                )));
            }
            let ks = KSeries::parse_csv(&fs::read_to_string(path)?)?;
            ctx.rec.input(path)?;
            if ks.dates != w.dates() {
                return Err(CliError::input(format!(
                    "LengthMismatch: {} (K dates do not line up with weather dates)",
                    ModelError::LengthMismatch {
                        weather: w.len(),
                        k: ks.len(),
                    }
                )));
            }
            ks.values
        }
        method => {
            let path = a.cases.as_deref().ok_or_else(|| {
                CliError::input("--k mean|ar|plane requires --cases for calibration")
            })?;
            let cases = load_cases(path)?;
            ctx.rec.input(path)?;
            let cal = calibrate(&ctx.cfg, &w, &cases, method.into())?;
            cal.predictor.predict(&w)?
        }
    };
    let traj = simulate_years(&ctx.cfg, &w, &k)?;
    ctx.rec
        .output("trajectory.csv", &csv_bytes(|b| traj.write_csv(b))?)?;
    let used = KSeries::new(w.dates(), k);
    ctx.rec
        .output("k.csv", &csv_bytes(|b| used.write_csv(b))?)?;
    Ok(())
}

fn fit_onset(ctx: &mut Context, a: &FitArgs) -> Result<(), CliError> {
    let w = weather(ctx, &a.weather)?;
    let cases = load_cases(&a.cases)?;
    ctx.rec.input(&a.cases)?;
    let method = a.k.map(KMethod::from).unwrap_or(ctx.cfg.forecast.k_method);
    let fit = fit_onset_model(&ctx.cfg, &w, &cases, method)?;
    let model = OnsetModel {
        samples: fit.samples.clone(),
        bandwidth: fit.pdf.kde.bandwidth(),
        levels: fit.pdf.levels.clone(),
        resolution: ctx.cfg.kde.onset_resolution,
        transform: fit.pdf.transform,
        k_history: fit.calibration.history.clone(),
        k_predictor: fit.calibration.predictor.clone(),
    };
    ctx.rec
        .output("onset-model.txt", model.to_artifact().to_text().as_bytes())?;
    ctx.rec
        .output("onset-grid.csv", &csv_bytes(|b| fit.pdf.write_grid_csv(b))?)?;
    let hist = &fit.calibration.history;
    ctx.rec
        .output("k-history.csv", &csv_bytes(|b| hist.write_csv(b))?)?;
    let summary = json!({
        "samples": fit.samples.len(),
        "years_without_cases": fit.years_without_cases,
        "bandwidth": [model.bandwidth.0, model.bandwidth.1],
        "contour_levels": fit.pdf.levels,
        "thresholds": fit.pdf.thresholds,
        "k_method": method.to_string(),
    });
    ctx.rec.output("fit-onset.json", &json_bytes(&summary))?;
    Ok(())
}

fn predict_onset_cmd(ctx: &mut Context, a: &PredictOnsetArgs) -> Result<(), CliError> {
    let model = onset_model(ctx, &a.model)?;
    let pdf = model.pdf()?;
    let w = weather(ctx, &a.forecast.weather)?;
    let mode = mode(ctx, &a.forecast)?;
    let risk = predict_onset(
        &ctx.cfg,
        &pdf,
        &w,
        &model.k_predictor,
        a.forecast.year,
        mode,
    )?;
    ctx.rec
        .output("risk.csv", &csv_bytes(|b| risk.write_csv(b))?)?;
    Ok(())
}

fn fit_severity(ctx: &mut Context, a: &FitArgs) -> Result<(), CliError> {
    let w = weather(ctx, &a.weather)?;
    let cases = load_cases(&a.cases)?;
    ctx.rec.input(&a.cases)?;
    let method = a.k.map(KMethod::from).unwrap_or(ctx.cfg.forecast.k_method);
    let fit = fit_severity_model(&ctx.cfg, &w, &cases, method)?;
    let model = SeverityModel {
        samples: fit.samples.clone(),
        bandwidth: fit.surface.bandwidth,
        resolution: ctx.cfg.kde.severity_resolution,
        feature: ctx.cfg.forecast.weather_feature,
        k_history: fit.calibration.history.clone(),
        k_predictor: fit.calibration.predictor.clone(),
    };
    ctx.rec.output(
        "severity-model.txt",
        model.to_artifact().to_text().as_bytes(),
    )?;
    ctx.rec.output(
        "rate-surface.csv",
        &csv_bytes(|b| fit.surface.write_csv(b))?,
    )?;
    let hist = &fit.calibration.history;
    ctx.rec
        .output("k-history.csv", &csv_bytes(|b| hist.write_csv(b))?)?;
    Ok(())
}

/// Severity model, rate surface, prior choice and optional onset gate.
struct SeverityInputs {
    model: SeverityModel,
    surface: spillcast_core::severity::RateSurface,
    prior: PriorChoice,
    gate: Option<OnsetPdf>,
}

fn severity_inputs(
    ctx: &mut Context,
    model: &Path,
    prior: Option<PriorArg>,
    onset: Option<&Path>,
) -> Result<SeverityInputs, CliError> {
    let model = severity_model(ctx, model)?;
    // The surface is rebuilt under the model's own feature weights.
    ctx.cfg.forecast.weather_feature = model.feature;
    let surface = model.surface()?;
    let gate = match onset {
        Some(p) => Some(onset_model(ctx, p)?.pdf()?),
        None if ctx.cfg.forecast.onset_gate => {
            return Err(CliError::input(
                "onset_gate is enabled but no --onset-model was given",
            ))
        }
        None => None,
    };
    Ok(SeverityInputs {
        model,
        surface,
        prior: prior.map(Into::into).unwrap_or(ctx.cfg.forecast.prior),
        gate,
    })
}

fn from_options(ctx: &mut Context, o: &SeverityOptions) -> Result<SeverityInputs, CliError> {
    severity_inputs(ctx, &o.model, o.prior, o.onset_model.as_deref())
}

fn estimate_severity_cmd(ctx: &mut Context, a: &EstimateArgs) -> Result<(), CliError> {
    let s = from_options(ctx, &a.severity)?;
    let mut w = weather(ctx, &a.weather)?;
    if let Some(year) = a.year {
        w = w.year(year);
        if w.is_empty() {
            return Err(CliError::input(format!("no weather for {year}")));
        }
    }
    let out = estimate_on_observed(
        &ctx.cfg,
        &s.surface,
        &w,
        &s.model.k_predictor,
        s.prior,
        s.gate.as_ref(),
    )?;
    ctx.rec
        .output("severity.csv", &csv_bytes(|b| out.write_csv(b))?)?;
    Ok(())
}

fn predict_severity_cmd(ctx: &mut Context, a: &PredictSeverityArgs) -> Result<(), CliError> {
    let s = from_options(ctx, &a.severity)?;
    let w = weather(ctx, &a.forecast.weather)?;
    let mode = mode(ctx, &a.forecast)?;
    let mut out = predict_severity(
        &ctx.cfg,
        &s.surface,
        &w,
        &s.model.k_predictor,
        a.forecast.year,
        mode,
        s.prior,
        s.gate.as_ref(),
    )?;
    if let Some(start) = a.start {
        for (d, x) in out.dates.iter().zip(out.predicted.iter_mut()) {
            if *d < start {
                *x = 0;
            }
        }
    }
    ctx.rec
        .output("severity.csv", &csv_bytes(|b| out.write_csv(b))?)?;
    Ok(())
}

fn totals(r: &ScoreReport) -> serde_json::Value {
    json!({ "weeks": r.weeks.len(), "ts": r.ts, "zs": r.zs, "nzs": r.nzs })
}

fn evaluate(ctx: &mut Context, a: &EvaluateArgs) -> Result<(), CliError> {
    let cases = load_cases(&a.cases)?;
    ctx.rec.input(&a.cases)?;
    let start = year_start(a.forecast.year);
    let span: Vec<_> = (0..ctx.cfg.forecast.long_lead as i64)
        .map(|i| start + Duration::days(i))
        .collect();
    let weeks = scored_weeks(&cases, &span);
    if weeks.is_empty() {
        return Err(CliError::input(format!(
            "no case weeks fall in {}",
            a.forecast.year
        )));
    }
    let floor = ctx.cfg.score.floor;
    let mut reports: Vec<(&str, ScoreReport)> = Vec::new();
    if matches!(a.model, ModelArg::Bayes | ModelArg::Both) {
        let path = a
            .severity_model
            .as_deref()
            .ok_or_else(|| CliError::input("--model bayes requires --severity-model"))?;
        let s = severity_inputs(ctx, path, a.prior, a.onset_model.as_deref())?;
        let w = weather(ctx, &a.forecast.weather)?;
        let mode = mode(ctx, &a.forecast)?;
        let sev = predict_severity(
            &ctx.cfg,
            &s.surface,
            &w,
            &s.model.k_predictor,
            a.forecast.year,
            mode,
            s.prior,
            s.gate.as_ref(),
        )?;
        let preds = bayes_predictions(&ctx.cfg, &sev, &weeks)?;
        reports.push(("bayes", score_run(&preds, &weeks, floor)?));
    }
    if matches!(a.model, ModelArg::Nb | ModelArg::Both) {
        let preds = nb_predictions(&ctx.cfg, &cases, &weeks)?;
        reports.push(("nb", score_run(&preds, &weeks, floor)?));
    }
    let mut csv = String::from("week,observed,model,prob_observed,score\n");
    for i in 0..weeks.len() {
        for (name, r) in &reports {
            let s = &r.weeks[i];
            csv.push_str(&format!(
                "{},{},{name},{},{}\n",
                s.week, s.observed, s.prob_observed, s.score
            ));
        }
    }
    ctx.rec.output("scores.csv", csv.as_bytes())?;
    let mut summary = serde_json::Map::new();
    for (name, r) in &reports {
        summary.insert(name.to_string(), totals(r));
    }
    summary.insert(
        "note".into(),
        json!("bayes point forecasts are widened by a discretised Gaussian before scoring"),
    );
    ctx.rec.output(
        "scores.json",
        &json_bytes(&serde_json::Value::Object(summary)),
    )?;
    Ok(())
}

fn trend_json(t: &TrendResult) -> serde_json::Value {
    json!({
        "slope": t.slope,
        "intercept": t.intercept,
        "slope_se": t.slope_se,
        "p_value": t.p_value,
        "ks_p_value": t.ks_p_value,
        "residuals": t.residuals,
    })
}

fn trend(ctx: &mut Context, a: &TrendArgs) -> Result<(), CliError> {
    let model = onset_model(ctx, &a.model)?;
    let pdf = model.pdf()?;
    let w = weather(ctx, &a.weather)?;
    let years: Vec<i32> = (a.years.0..=a.years.1).collect();
    let init = ctx.cfg.init.state();
    let setup = RunSetup {
        params: &ctx.cfg.params,
        init: &init,
        steps_per_day: ctx.cfg.steps_per_day,
    };
    let report = trend_report(&w, &years, &pdf, setup, &model.k_predictor)?;
    ctx.rec
        .output("trend.csv", &csv_bytes(|b| report.write_csv(b))?)?;
    let rows: Vec<_> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "year": r.year,
                "r_year": r.r_year,
                "r_relative": r.r_relative,
                "high": r.counts.high,
                "risky": r.counts.risky,
                "low": r.counts.low,
                "green": r.counts.green,
            })
        })
        .collect();
    let summary = json!({
        "r_year": trend_json(&report.r_year),
        "r_relative": trend_json(&report.r_relative),
        "years": rows,
    });
    ctx.rec.output("trend.json", &json_bytes(&summary))?;
    Ok(())
}
