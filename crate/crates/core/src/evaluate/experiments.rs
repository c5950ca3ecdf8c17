use rand::Rng;

use crate::baselines::{pca_fit, LassoConfig, LassoDesign};
use crate::datagen::{
    build_training_set, classical_dataset, family_of_label, sample_rng, LabelSet, LabeledDataset, Provenance, Sample,
};
use crate::error::{Error, Result};
use crate::evaluate::classifier::{fit_classifier, stratified_split, ClassifierReport, TEST_FRACTION};
use crate::evaluate::metrics::{parameter_error, sparsity_ratio};
use crate::evaluate::report::Stat;
use crate::evaluate::report::{MetricsReport, SampleRecord};
use crate::exec::Exec;
use crate::model::loss::{normalized_recon_loss, unnormalized_recon_loss};
use crate::model::train::mean_objective;
use crate::model::{encode_batch, predict_coefficients, train, EncoderConfig, EpochRecord, ModelParams, TrainConfig, TrainState};
use crate::phasefield::{ClassicalSystem, CoefficientMatrix, Family, Lattice, MonomialDictionary, PolynomialSystem, VectorField};
use crate::simulate::{add_gaussian, integrate, mask_zeros, perturb_parameters, trajectory_field, Dynamics, Method, NoiseKind};

/// A way of turning fields into coefficient estimates.
#[derive(Clone, Copy, Debug)]
pub enum Reconstructor<'a> {
    Model(&'a ModelParams),
    Lasso(&'a LassoDesign, LassoConfig),
}

impl Reconstructor<'_> {
    pub fn dictionary(&self) -> MonomialDictionary {
        match self {
            Reconstructor::Model(p) => p.config.dictionary(),
            Reconstructor::Lasso(d, _) => d.dictionary().clone(),
        }
    }

    pub fn coefficients(&self, fields: &[&VectorField], exec: Exec) -> Result<Vec<CoefficientMatrix>> {
        match self {
            Reconstructor::Model(p) => predict_coefficients(p, fields, exec),
            Reconstructor::Lasso(d, cfg) => {
                Ok(d.fit_many(fields, cfg, exec)?.into_iter().map(|f| f.coefficients).collect())
            }
        }
    }
}

/// Report group of a sample: family name for benchmark systems, the label
/// for other labelled sets.
pub fn group_of(sample: &Sample, label_set: LabelSet) -> String {
    match &sample.provenance {
        Provenance::Classical(sys) => sys.family().name().to_string(),
        Provenance::Polynomial if label_set == LabelSet::Unlabeled => "polynomial".to_string(),
        _ => match label_set {
            LabelSet::Classical | LabelSet::Classical3d => family_of_label(sample.label)
                .map_or_else(|| format!("label {}", sample.label), |f| f.name().to_string()),
            LabelSet::Unlabeled => "polynomial".to_string(),
            _ => format!("label {}", sample.label),
        },
    }
}

fn record(
    index: usize,
    group: &str,
    method: &str,
    est: &CoefficientMatrix,
    truth_xi: Option<&CoefficientMatrix>,
    truth: &VectorField,
    dict: &MonomialDictionary,
    eps: f64,
) -> Result<SampleRecord> {
    let recon = PolynomialSystem::new(dict.clone(), est.clone())?.eval_on_lattice(truth.lattice())?;
    Ok(SampleRecord {
        index,
        group: group.to_string(),
        method: method.to_string(),
        param_error: truth_xi.map(|t| parameter_error(est, t)).transpose()?,
        norm_recon: normalized_recon_loss(truth, &recon, eps)?,
        unnorm_recon: unnormalized_recon_loss(truth, &recon)?,
        sparsity: truth_xi.and_then(|t| sparsity_ratio(est, t)),
    })
}

/// Parameter and reconstruction errors of every method on every sample,
/// grouped by family.
pub fn recon_table(
    methods: &[(&str, Reconstructor)],
    data: &LabeledDataset,
    eps: f64,
    config_hash: &str,
    exec: Exec,
) -> Result<MetricsReport> {
    let fields = data.fields();
    let mut records = Vec::new();
    for (name, method) in methods {
        let dict = method.dictionary();
        let est = method.coefficients(&fields, exec)?;
        let rows = exec.try_map(data.len(), |i| {
            let s = &data.samples[i];
            record(i, &group_of(s, data.label_set), name, &est[i], s.coefficients.as_ref(), &s.field, &dict, eps)
        })?;
        records.extend(rows);
    }
    Ok(MetricsReport::new("recon-table", config_hash, records))
}

/// The dynamics behind a sample, when known.
fn dynamics_of(sample: &Sample, dict: &MonomialDictionary) -> Option<Box<dyn Dynamics>> {
    match &sample.provenance {
        Provenance::Classical(sys) => Some(Box::new(sys.clone()) as Box<dyn Dynamics>),
        _ => sample
            .coefficients
            .as_ref()
            .and_then(|xi| PolynomialSystem::new(dict.clone(), xi.clone()).ok())
            .map(|s| Box::new(s) as Box<dyn Dynamics>),
    }
}

/// Corrupted copy of `sample`'s field, or `None` when the corruption needs
/// information the sample lacks. Magnitude zero returns the field itself.
pub fn corrupt(
    sample: &Sample,
    kind: NoiseKind,
    magnitude: f64,
    dict: &MonomialDictionary,
    rng: &mut impl Rng,
    exec: Exec,
) -> Result<Option<VectorField>> {
    if !kind.valid_magnitude(magnitude) {
        return Err(Error::Config(format!("{} noise magnitude {magnitude} out of range", kind.name())));
    }
    let field = &sample.field;
    Ok(match kind {
        NoiseKind::Gaussian => Some(add_gaussian(field, magnitude, rng)?),
        NoiseKind::Mask => Some(mask_zeros(field, magnitude, rng)?),
        NoiseKind::Trajectory => match dynamics_of(sample, dict) {
            Some(d) => Some(trajectory_field(d.as_ref(), magnitude as usize, field.lattice(), rng, exec)?),
            None => None,
        },
        NoiseKind::Parameter => match &sample.coefficients {
            _ if magnitude == 0.0 => Some(field.clone()),
            Some(xi) => {
                let noisy = perturb_parameters(xi, magnitude, rng)?;
                Some(PolynomialSystem::new(dict.clone(), noisy)?.eval_on_lattice(field.lattice())?)
            }
            None => None,
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRow {
    pub magnitude: f64,
    /// Normalized error against the clean field, per method in input order.
    pub errors: Vec<Stat>,
    /// Samples the corruption could not be applied to.
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSweep {
    pub kind: NoiseKind,
    pub methods: Vec<String>,
    pub rows: Vec<NoiseRow>,
}

/// Reconstruction error against the uncorrupted field at each magnitude.
/// Sample `i` draws its noise from stream `i` of `seed` at every magnitude.
pub fn noise_sweep(
    methods: &[(&str, Reconstructor)],
    data: &LabeledDataset,
    kind: NoiseKind,
    grid: &[f64],
    seed: u64,
    eps: f64,
    exec: Exec,
) -> Result<NoiseSweep> {
    let dict = data.dictionary();
    let mut rows = Vec::with_capacity(grid.len());
    for &m in grid {
        let corrupted = exec.try_map(data.len(), |i| {
            let mut rng = sample_rng(seed, i);
            corrupt(&data.samples[i], kind, m, &dict, &mut rng, Exec::Sequential)
        })?;
        let kept: Vec<usize> = (0..data.len()).filter(|&i| corrupted[i].is_some()).collect();
        let inputs: Vec<&VectorField> = kept.iter().map(|&i| corrupted[i].as_ref().expect("kept")).collect();
        let mut errors = Vec::with_capacity(methods.len());
        for (_, method) in methods {
            let mdict = method.dictionary();
            let est = method.coefficients(&inputs, exec)?;
            let errs = exec.try_map(kept.len(), |k| {
                let truth = &data.samples[kept[k]].field;
                let recon = PolynomialSystem::new(mdict.clone(), est[k].clone())?.eval_on_lattice(truth.lattice())?;
                normalized_recon_loss(truth, &recon, eps)
            })?;
            errors.push(Stat::of(&errs));
        }
        rows.push(NoiseRow { magnitude: m, errors, skipped: data.len() - kept.len() });
    }
    Ok(NoiseSweep { kind, methods: methods.iter().map(|(n, _)| n.to_string()).collect(), rows })
}

/// 20 log-spaced sparsity weights on `[1e-3, 1e-1]`.
pub fn beta_grid() -> Vec<f64> {
    (0..20).map(|i| 10f64.powf(-3.0 + 2.0 * i as f64 / 19.0)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparsityPoint {
    pub beta: f64,
    pub sigma: f64,
    /// Parameter error against the unperturbed coefficients.
    pub p: Stat,
    /// `|Xi_recon|_1 / |Xi_perturbed|_1`.
    pub s: Stat,
    /// Samples without coefficients or with a zero perturbed norm.
    pub excluded: usize,
}

/// P and S for one model on coefficient-perturbed versions of `data`.
pub fn sparsity_point(
    params: &ModelParams,
    beta: f64,
    data: &LabeledDataset,
    sigma: f64,
    seed: u64,
    exec: Exec,
) -> Result<SparsityPoint> {
    let dict = data.dictionary();
    let prepared = exec.try_map(data.len(), |i| {
        let s = &data.samples[i];
        let Some(xi) = &s.coefficients else { return Ok(None) };
        let mut rng = sample_rng(seed, i);
        let pert = perturb_parameters(xi, sigma, &mut rng)?;
        let field = if sigma == 0.0 {
            s.field.clone()
        } else {
            PolynomialSystem::new(dict.clone(), pert.clone())?.eval_on_lattice(s.field.lattice())?
        };
        Ok::<_, Error>(Some((xi.clone(), pert, field)))
    })?;
    let used: Vec<&(CoefficientMatrix, CoefficientMatrix, VectorField)> = prepared.iter().flatten().collect();
    let fields: Vec<&VectorField> = used.iter().map(|u| &u.2).collect();
    let est = predict_coefficients(params, &fields, exec)?;
    let mut p = Vec::with_capacity(used.len());
    let mut s = Vec::with_capacity(used.len());
    for (u, e) in used.iter().zip(&est) {
        p.push(parameter_error(e, &u.0)?);
        if let Some(r) = sparsity_ratio(e, &u.1) {
            s.push(r);
        }
    }
    let excluded = data.len() - s.len();
    Ok(SparsityPoint { beta, sigma, p: Stat::of(&p), s: Stat::of(&s), excluded })
}

/// [`sparsity_point`] for a model per sparsity weight.
pub fn sparsity_sweep(
    models: &[(f64, &ModelParams)],
    data: &LabeledDataset,
    sigma: f64,
    seed: u64,
    exec: Exec,
) -> Result<Vec<SparsityPoint>> {
    models.iter().map(|&(b, m)| sparsity_point(m, b, data, sigma, seed, exec)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomoclinicConfig {
    pub xi_values: Vec<f64>,
    pub initial_conditions: usize,
    pub radius: f64,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for HomoclinicConfig {
    fn default() -> Self {
        let (lo, hi) = (-1.2, crate::phasefield::HOMOCLINIC_THRESHOLD);
        HomoclinicConfig {
            xi_values: (0..20).map(|i| lo + (hi - lo) * i as f64 / 19.0).collect(),
            initial_conditions: 1000,
            radius: 0.1,
            dt: 0.01,
            steps: 500,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomoclinicReport {
    pub xi_values: Vec<f64>,
    pub methods: Vec<String>,
    /// `curves[m][k][t]`: mean deviation of method `m` at parameter `k`
    /// after `t` steps.
    pub curves: Vec<Vec<Vec<f64>>>,
    /// Deviation averaged over parameters and time, per method.
    pub time_averaged: Vec<f64>,
}

/// Mean distance between true and reconstructed trajectories started on a
/// circle around the origin, for each homoclinic parameter and method.
pub fn homoclinic_divergence(
    methods: &[(&str, &ModelParams)],
    lattice: &Lattice,
    cfg: &HomoclinicConfig,
    exec: Exec,
) -> Result<HomoclinicReport> {
    let systems: Vec<ClassicalSystem> = cfg
        .xi_values
        .iter()
        .map(|&x| ClassicalSystem::new(Family::Homoclinic, vec![x]))
        .collect::<Result<_>>()?;
    let fields: Vec<VectorField> = systems.iter().map(|s| s.field(lattice)).collect::<Result<_>>()?;
    let refs: Vec<&VectorField> = fields.iter().collect();
    let mut rng = sample_rng(cfg.seed, 0);
    let starts: Vec<[f64; 2]> = (0..cfg.initial_conditions)
        .map(|_| {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            [cfg.radius * a.cos(), cfg.radius * a.sin()]
        })
        .collect();
    let truth: Vec<Vec<_>> = systems
        .iter()
        .map(|s| {
            exec.try_map(starts.len(), |i| integrate(s, &starts[i], cfg.dt, cfg.steps, Method::Rk4, Some(lattice)))
        })
        .collect::<Result<_>>()?;
    let mut curves = Vec::with_capacity(methods.len());
    let mut time_averaged = Vec::with_capacity(methods.len());
    for (_, params) in methods {
        let dict = params.config.dictionary();
        let est = predict_coefficients(params, &refs, exec)?;
        let mut per_xi = Vec::with_capacity(systems.len());
        for (k, xi) in est.into_iter().enumerate() {
            let recon = PolynomialSystem::new(dict.clone(), xi)?;
            let dev = exec.try_map(starts.len(), |i| {
                let r = integrate(&recon, &starts[i], cfg.dt, cfg.steps, Method::Rk4, Some(lattice))?;
                let t = &truth[k][i];
                Ok::<_, Error>(
                    (0..=cfg.steps)
                        .map(|s| {
                            let (a, b) = (t.state_or_last(s), r.state_or_last(s));
                            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
                        })
                        .collect::<Vec<f64>>(),
                )
            })?;
            let n = dev.len() as f64;
            per_xi.push((0..=cfg.steps).map(|s| dev.iter().map(|d| d[s]).sum::<f64>() / n).collect::<Vec<_>>());
        }
        let total: f64 = per_xi.iter().flatten().sum();
        time_averaged.push(total / (per_xi.len() * (cfg.steps + 1)) as f64);
        curves.push(per_xi);
    }
    Ok(HomoclinicReport {
        xi_values: cfg.xi_values.clone(),
        methods: methods.iter().map(|(n, _)| n.to_string()).collect(),
        curves,
        time_averaged,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LandscapeReport {
    pub fixed_points: Vec<[f64; 2]>,
    /// Per-point losses in lattice order.
    pub normalized: Vec<f64>,
    pub unnormalized: Vec<f64>,
    pub normalized_peak: usize,
    pub unnormalized_peak: usize,
    /// Chebyshev distance in cells from each peak to the nearest fixed point.
    pub normalized_distance: usize,
    pub unnormalized_distance: usize,
}

/// Per-point losses of a perturbed saddle-node field `(a - x1^2, -x2)`
/// against the clean one. The perturbation is Gaussian with standard
/// deviation `sigma_rel` times the clean field's component spread.
pub fn landscape_check(lattice: &Lattice, a: f64, sigma_rel: f64, seed: u64, eps: f64) -> Result<LandscapeReport> {
    if lattice.q() != 2 {
        return Err(Error::UnsupportedDimension(lattice.q()));
    }
    if !(a > 0.0) {
        return Err(Error::Config(format!("saddle-node parameter {a} has no fixed points")));
    }
    let clean: Vec<f64> = (0..lattice.num_points())
        .flat_map(|i| {
            let x = lattice.point(i);
            [a - x[0] * x[0], -x[1]]
        })
        .collect();
    let clean = VectorField::new(lattice.clone(), clean)?;
    let noisy = add_gaussian(&clean, sigma_rel, &mut sample_rng(seed, 0))?;
    let per_point = |denom: &dyn Fn(f64) -> f64| -> Vec<f64> {
        clean
            .velocities()
            .chunks_exact(2)
            .zip(noisy.velocities().chunks_exact(2))
            .map(|(t, r)| ((t[0] - r[0]).hypot(t[1] - r[1])) / denom(t[0].hypot(t[1])))
            .collect()
    };
    let normalized = per_point(&|s| s + eps);
    let unnormalized = per_point(&|_| 1.0);
    let argmax = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
    let fixed_points = vec![[a.sqrt(), 0.0], [-a.sqrt(), 0.0]];
    let distance = |flat: usize| {
        let idx = lattice.axis_indices(flat);
        fixed_points
            .iter()
            .map(|fp| {
                (0..2)
                    .map(|ax| {
                        let nearest = (0..lattice.n())
                            .min_by(|&i, &j| {
                                (lattice.coordinate(ax, i) - fp[ax]).abs().total_cmp(&(lattice.coordinate(ax, j) - fp[ax]).abs())
                            })
                            .expect("n >= 2");
                        idx[ax].abs_diff(nearest)
                    })
                    .max()
                    .expect("two axes")
            })
            .min()
            .expect("two fixed points")
    };
    let (np, up) = (argmax(&normalized), argmax(&unnormalized));
    Ok(LandscapeReport {
        normalized_distance: distance(np),
        unnormalized_distance: distance(up),
        fixed_points,
        normalized,
        unnormalized,
        normalized_peak: np,
        unnormalized_peak: up,
    })
}

/// A feature set for classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Embedding,
    Parameters,
    Pca,
}

impl Representation {
    pub const ALL: [Representation; 3] = [Representation::Embedding, Representation::Parameters, Representation::Pca];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Embedding => "embedding",
            Representation::Parameters => "parameters",
            Representation::Pca => "pca",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationBenchmark {
    pub rows: Vec<(Representation, ClassifierReport)>,
    pub feature_dims: Vec<usize>,
}

impl ClassificationBenchmark {
    pub fn report(&self, r: Representation) -> Option<&ClassifierReport> {
        self.rows.iter().find(|(k, _)| *k == r).map(|(_, v)| v)
    }
}

/// Features of every sample for one representation. PCA is fitted on the
/// training part of the split [`fit_classifier`] will use with `seed`.
pub fn features(
    rep: Representation,
    params: &ModelParams,
    data: &LabeledDataset,
    seed: u64,
    exec: Exec,
) -> Result<Vec<Vec<f64>>> {
    let fields = data.fields();
    match rep {
        Representation::Embedding => encode_batch(params, &fields, exec),
        Representation::Parameters => data
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.coefficients
                    .as_ref()
                    .map(|xi| xi.values().to_vec())
                    .ok_or_else(|| Error::Precondition(format!("sample {i} has no coefficients")))
            })
            .collect(),
        Representation::Pca => {
            let (train, _) = stratified_split(&data.labels(), TEST_FRACTION, seed);
            let train_fields: Vec<&VectorField> = train.iter().map(|&i| fields[i]).collect();
            let basis = pca_fit(&train_fields, params.config.embed_dim)?;
            fields.iter().map(|f| basis.transform(f)).collect()
        }
    }
}

/// Identical classifier protocol on each representation of `data`.
pub fn classification_benchmark(
    params: &ModelParams,
    data: &LabeledDataset,
    representations: &[Representation],
    lambdas: &[f64],
    seed: u64,
    exec: Exec,
) -> Result<ClassificationBenchmark> {
    let labels = data.labels();
    let mut rows = Vec::with_capacity(representations.len());
    let mut feature_dims = Vec::with_capacity(representations.len());
    for &rep in representations {
        let x = features(rep, params, data, seed, exec)?;
        feature_dims.push(x.first().map_or(0, Vec::len));
        rows.push((rep, fit_classifier(&x, &labels, lambdas, seed, exec)?));
    }
    Ok(ClassificationBenchmark { rows, feature_dims })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolutionRow {
    pub n: usize,
    /// Mean normalized loss on the simple-oscillator test set.
    pub test_loss: f64,
    /// First epoch whose mean train loss is at or below the threshold.
    pub epochs_to_threshold: Option<usize>,
    pub history: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolutionConfig {
    pub resolutions: Vec<usize>,
    pub train_count: usize,
    pub test_count: usize,
    pub threshold: f64,
    pub train: TrainConfig,
    pub data_seed: u64,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        ResolutionConfig {
            resolutions: vec![32, 64, 128],
            train_count: 200,
            test_count: 50,
            threshold: 0.9,
            train: TrainConfig { epochs: 10, ..Default::default() },
            data_seed: 0,
        }
    }
}

/// One model per resolution, each trained on the same systems sampled on
/// its own lattice and scored on simple oscillators.
pub fn resolution_study(cfg: &ResolutionConfig, exec: Exec) -> Result<Vec<ResolutionRow>> {
    let mut rows = Vec::with_capacity(cfg.resolutions.len());
    for &n in &cfg.resolutions {
        let lattice = Lattice::centered(2, n)?;
        let encoder = EncoderConfig::standard(2, n);
        encoder.validate()?;
        let mut rng = sample_rng(cfg.data_seed, 0);
        let train_set = build_training_set(&mut rng, cfg.train_count, &lattice, encoder.degree, exec)?;
        let test_set = classical_dataset(
            &mut rng,
            &[(Family::SimpleOscillator, cfg.test_count)],
            &lattice,
            encoder.degree,
            exec,
        )?;
        let mut state = TrainState::initialize(encoder, cfg.train.clone())?;
        train(&mut state, &train_set, None, exec, |_| Ok(()))?;
        let test_loss = mean_objective(&state.params, &test_set, &TrainConfig { beta: 0.0, ..cfg.train.clone() }, exec)?;
        let epochs_to_threshold = state.history.iter().find(|r| r.train_loss <= cfg.threshold).map(|r| r.epoch);
        rows.push(ResolutionRow { n, test_loss, epochs_to_threshold, history: state.history });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_grid_endpoints() {
        let g = beta_grid();
        assert_eq!(g.len(), 20);
        assert!((g[0] - 1e-3).abs() < 1e-18);
        assert!((g[19] - 1e-1).abs() < 1e-15);
    }

    #[test]
    fn homoclinic_grid_spans_the_interval() {
        let c = HomoclinicConfig::default();
        assert_eq!(c.xi_values.len(), 20);
        assert_eq!(c.xi_values[0], -1.2);
        assert!((c.xi_values[19] - crate::phasefield::HOMOCLINIC_THRESHOLD).abs() < 1e-15);
    }
}
