//! Computations behind the subcommands, free of file handling so they can be
//! called directly.

use serde::Serialize;

use qipf_core::bandwidth::{cross_validate, CrossValidation};
use qipf_core::decomposition::default_orders;
use qipf_core::metrics::ReportMeta;
use qipf_core::network::{ensemble_scores, mc_dropout_scores, population_std};
use qipf_core::signal::sine_period;
use qipf_core::{
    calibrate_energies, corrupt, decompose, downsample, silverman, BandwidthConfig, CorruptionKind,
    CorruptionSpec, Dataset, Error, EvalReport, GridSpec, KernelField, ModeSpectrum,
    PredictionSet, QipfScorer, Result, RowMatrix, SigmaPolicy, Split, ToyModel,
};

use crate::args::{Calibration, Method, QipfArgs};

/// A scorer together with how its width was chosen.
#[derive(Debug, Clone)]
pub struct QipfFit {
    pub scorer: QipfScorer,
    pub bandwidth: BandwidthConfig,
    pub cross_validation: Option<CrossValidation>,
    pub inducing_rows: usize,
    /// Set when a single training prediction left Silverman's rule undefined
    /// and the unit base width was used.
    pub unit_base_width: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub inducing_rows: usize,
    pub silverman_sigma: f64,
    pub unit_base_width: bool,
    pub chosen_factor: f64,
    pub sigma: f64,
    pub factor_grid: Vec<f64>,
    pub cross_validation_roc_auc: Option<Vec<Option<f64>>>,
    pub cross_validation_fallback: Option<bool>,
    pub energies: qipf_core::Energies,
}

impl QipfFit {
    pub fn summary(&self) -> FitSummary {
        FitSummary {
            inducing_rows: self.inducing_rows,
            silverman_sigma: self.bandwidth.silverman_sigma,
            unit_base_width: self.unit_base_width,
            chosen_factor: self.bandwidth.chosen_factor,
            sigma: self.bandwidth.sigma(),
            factor_grid: self.bandwidth.factor_grid.clone(),
            cross_validation_roc_auc: self.cross_validation.as_ref().map(|c| c.roc_auc.clone()),
            cross_validation_fallback: self.cross_validation.as_ref().map(|c| c.fallback),
            energies: self.scorer.energies().clone(),
        }
    }
}

/// Downsamples the training predictions, picks the width and calibrates the
/// energies on the resulting inducing set. A single prediction has no spread
/// to measure, so it gets base width 1 and no cross-validation.
pub fn fit_qipf(train: &PredictionSet, opts: &QipfArgs) -> Result<QipfFit> {
    if opts.modes == 0 {
        return Err(Error::InvalidParameter("--modes must be at least 1".into()));
    }
    if opts.downsample_n == 0 {
        return Err(Error::InvalidParameter("--downsample-n must be at least 1".into()));
    }
    let target = opts.downsample_n.min(train.len());
    let inducing = downsample(train, target, opts.seed)?;
    let unit_base_width = inducing.len() == 1;
    let base = if unit_base_width { 1.0 } else { silverman(inducing.logits())? };
    let mut bandwidth = BandwidthConfig::new(base, opts.seed);
    bandwidth.orders = default_orders(opts.modes);
    bandwidth.validation_fraction = opts.val_frac;
    let cross_validation = match opts.sigma_factor {
        SigmaPolicy::Auto if unit_base_width => {
            bandwidth.factor_grid = vec![1.0];
            None
        }
        SigmaPolicy::Auto => {
            bandwidth.factor_grid = opts.factor_grid()?;
            let cv = cross_validate(&inducing, &bandwidth)?;
            bandwidth.chosen_factor = cv.chosen_factor;
            Some(cv)
        }
        SigmaPolicy::Factor(f) => {
            bandwidth.factor_grid = vec![f];
            bandwidth.chosen_factor = f;
            None
        }
    };
    let scorer = QipfScorer::fit(inducing.logits().clone(), bandwidth.sigma(), &bandwidth.orders)?;
    Ok(QipfFit {
        scorer,
        bandwidth,
        cross_validation,
        inducing_rows: target,
        unit_base_width,
    })
}

/// Field values of the sine demo on one grid.
#[derive(Debug, Clone)]
pub struct SineTable {
    pub sigma: f64,
    pub x: Vec<f64>,
    pub ipf: Vec<f64>,
    pub spectrum: ModeSpectrum,
}

pub fn sine_table(
    sigma: f64,
    modes: usize,
    grid: &GridSpec,
    samples: usize,
    calibration: Calibration,
) -> Result<SineTable> {
    let field = KernelField::new(sine_period(samples)?, sigma)?;
    let x = grid.points();
    let queries = RowMatrix::from_flat(x.clone(), 1)?;
    let energies = match calibration {
        Calibration::Inducing => calibrate_energies(&field, field.points(), modes)?,
        Calibration::Grid => calibrate_energies(&field, &queries, modes)?,
    };
    let ipf = field.local_batch(&queries)?.iter().map(|l| l.value).collect();
    let spectrum = decompose(&queries, &field, &energies)?;
    Ok(SineTable {
        sigma,
        x,
        ipf,
        spectrum,
    })
}

/// Model predictions on the test split after corrupting it.
pub fn corrupted_test(dataset: &Dataset, kind: CorruptionKind, severity: u8) -> Result<RowMatrix> {
    let (features, _) = dataset.part(Split::Test);
    if features.is_empty() {
        return Err(Error::InvalidParameter("dataset has no test split".into()));
    }
    corrupt(&features, CorruptionSpec::new(kind, severity)?)
}

pub fn check_model(model: &ToyModel, dataset: &Dataset) -> Result<()> {
    if model.input_dim() != dataset.input_dim() {
        return Err(Error::Shape {
            expected: model.input_dim(),
            found: dataset.input_dim(),
        });
    }
    if model.classes() != dataset.classes {
        return Err(Error::Shape {
            expected: model.classes(),
            found: dataset.classes,
        });
    }
    Ok(())
}

pub fn check_ensemble(members: &[ToyModel]) -> Result<()> {
    if members.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "the ensemble method needs at least two members, got {}",
            members.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub corruption: CorruptionKind,
    pub severities: Vec<u8>,
    pub methods: Vec<Method>,
    pub qipf: QipfArgs,
    pub mc_rate: f64,
    pub mc_runs: usize,
    pub bins: usize,
}

/// One method evaluated at one severity.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub method: Method,
    pub severity: u8,
    pub accuracy: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub fit: Option<QipfFit>,
    pub rows: Vec<SweepRow>,
}

/// Corrupts the test split at every severity and evaluates every method on
/// the errors of `model`. Rows come out method-major, then by severity.
pub fn run_sweep(
    dataset: &Dataset,
    model: &ToyModel,
    members: &[ToyModel],
    settings: &SweepSettings,
) -> Result<SweepOutcome> {
    check_model(model, dataset)?;
    if settings.methods.is_empty() || settings.severities.is_empty() {
        return Err(Error::InvalidParameter("nothing to sweep: no methods or severities".into()));
    }
    if settings.methods.contains(&Method::Ensemble) {
        check_ensemble(members)?;
        for m in members {
            check_model(m, dataset)?;
        }
    }
    for &s in &settings.severities {
        CorruptionSpec::new(settings.corruption, s)?;
    }

    let fit = if settings.methods.contains(&Method::Qipf) {
        let (train_x, train_y) = dataset.part(Split::Train);
        Some(fit_qipf(&model.predict_raw(&train_x, &train_y)?, &settings.qipf)?)
    } else {
        None
    };

    let (_, test_labels) = dataset.part(Split::Test);
    let mut per_severity = Vec::new();
    for &severity in &settings.severities {
        let features = corrupted_test(dataset, settings.corruption, severity)?;
        let preds = model.predict_raw(&features, &test_labels)?;
        per_severity.push((severity, features, preds));
    }

    let mut rows = Vec::new();
    for &method in &settings.methods {
        for (severity, features, preds) in &per_severity {
            let scores = match method {
                Method::Qipf => fit
                    .as_ref()
                    .expect("fitted when requested")
                    .scorer
                    .scores(preds.logits())?,
                Method::McDropout => mc_dropout_scores(
                    model,
                    features,
                    settings.mc_rate,
                    settings.mc_runs,
                    settings.qipf.seed,
                )?,
                Method::Ensemble => ensemble_scores(members, features)?,
            };
            let meta = ReportMeta {
                method: method.name().into(),
                corruption: Some(settings.corruption.name().into()),
                severity: Some(*severity),
                seed: Some(settings.qipf.seed),
            };
            let report = EvalReport::evaluate(&scores, &preds.errors(), settings.bins, meta)?;
            rows.push(SweepRow {
                method,
                severity: *severity,
                accuracy: preds.accuracy(),
                report,
            });
        }
    }
    Ok(SweepOutcome { fit, rows })
}

/// Mean and population std of the defined values, `None` when none are.
pub fn mean_std(values: impl IntoIterator<Item = Option<f64>>) -> Option<(f64, f64)> {
    let defined: Vec<f64> = values.into_iter().flatten().collect();
    if defined.is_empty() {
        return None;
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    Some((mean, population_std(&defined)))
}

/// Per-method summary across severities.
#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub method: Method,
    pub roc_auc: Option<(f64, f64)>,
    pub pr_auc: Option<(f64, f64)>,
    pub point_biserial: Option<(f64, f64)>,
}

pub fn summary_table(rows: &[SweepRow], methods: &[Method]) -> Vec<TableRow> {
    methods
        .iter()
        .map(|&method| {
            let mine: Vec<&EvalReport> = rows
                .iter()
                .filter(|r| r.method == method)
                .map(|r| &r.report)
                .collect();
            TableRow {
                method,
                roc_auc: mean_std(mine.iter().map(|r| r.roc_auc)),
                pr_auc: mean_std(mine.iter().map(|r| r.pr_auc)),
                point_biserial: mean_std(mine.iter().map(|r| r.point_biserial)),
            }
        })
        .collect()
}
