use std::fs;
use std::path::{Path, PathBuf};

use flowembed::baselines::LassoDesign;
use flowembed::datagen::{
    build_training_set, classical_dataset, conservativity_dataset, incompressibility_dataset,
    sample_linear_stability_dataset, sample_rng, ClassTask, LabeledDataset, Sample,
};
use flowembed::evaluate::{
    classification_benchmark, config_hash, homoclinic_divergence, lambda_grid, landscape_check, noise_sweep,
    parameter_error, recon_table, resolution_study, sparsity_sweep, MetricsReport, Reconstructor, Representation,
    Stat,
};
use flowembed::io::{
    format_float, read_checkpoint, read_dataset, write_atomic, write_checkpoint, write_dataset, write_embeddings,
    write_history, write_sidecar, write_table, Embeddings, SidecarRow, Table,
};
use flowembed::model::loss::{normalized_recon_loss, unnormalized_recon_loss};
use flowembed::model::{encode_batch, predict_coefficients, train, ModelParams, TrainState};
use flowembed::phasefield::{CoefficientMatrix, Lattice, MonomialDictionary, PolynomialSystem};
use flowembed::{Error, Exec, Result};

use crate::config::RunConfig;

pub struct Context {
    pub config: RunConfig,
    pub output: PathBuf,
    pub exec: Exec,
}

impl Context {
    fn prepare(&self) -> Result<()> {
        fs::create_dir_all(&self.output)?;
        write_atomic(&self.output.join("config.txt"), self.config.echo().as_bytes())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.output.join(name)
    }

    fn lattice(&self) -> Result<Lattice> {
        Lattice::centered(self.config.q, self.config.n)
    }
}

fn f(v: f64) -> String {
    format_float(Some(v))
}

fn stat_cells(s: &Stat) -> [String; 2] {
    [f(s.mean), f(s.std)]
}

fn check_shape(what: &str, ds: &LabeledDataset, q: usize, n: usize) -> Result<()> {
    if ds.lattice.q() != q || ds.lattice.n() != n {
        return Err(Error::Dimension(format!(
            "{what} has q = {}, n = {} but the configuration expects q = {q}, n = {n}",
            ds.lattice.q(),
            ds.lattice.n()
        )));
    }
    Ok(())
}

fn check_model(params: &ModelParams, ds: &LabeledDataset) -> Result<()> {
    check_shape("dataset", ds, params.config.q, params.config.n)?;
    if ds.degree != params.config.degree {
        return Err(Error::Dimension(format!(
            "dataset degree {} differs from the checkpoint's {}",
            ds.degree, params.config.degree
        )));
    }
    Ok(())
}

/// Samples the dataset named by `generator`.
pub fn generate_dataset(cfg: &RunConfig, exec: Exec) -> Result<LabeledDataset> {
    let lattice = Lattice::centered(cfg.q, cfg.n)?;
    let mut rng = sample_rng(cfg.seed, 0);
    let mut ds = match cfg.generator.as_str() {
        "train-polynomial" => build_training_set(&mut rng, cfg.count, &lattice, cfg.degree, exec)?,
        "classical" => classical_dataset(&mut rng, &cfg.families, &lattice, cfg.degree, exec)?,
        "conservative" => {
            conservativity_dataset(&mut rng, cfg.per_class.unwrap_or(500), &lattice, cfg.degree, exec)?
        }
        "incompressible" => {
            incompressibility_dataset(&mut rng, cfg.per_class.unwrap_or(500), &lattice, cfg.degree, exec)?
        }
        "linear-stability" => {
            sample_linear_stability_dataset(&mut rng, cfg.per_class.unwrap_or(200), &lattice, cfg.degree, exec)?
        }
        other => return Err(Error::Config(format!("unknown generator {other:?}"))),
    };
    ds.seed = cfg.seed;
    Ok(ds)
}

pub fn generate(ctx: &Context) -> Result<()> {
    ctx.prepare()?;
    let ds = generate_dataset(&ctx.config, ctx.exec)?;
    let path = ctx.path("dataset.p2vd");
    write_dataset(&path, &ds)?;
    println!("wrote {} samples to {}", ds.len(), path.display());
    for (label, count) in ds.histogram() {
        println!("label {label}: {count}");
    }
    Ok(())
}

pub fn train_cmd(ctx: &Context, dataset: &Path, resume: Option<&Path>) -> Result<()> {
    ctx.prepare()?;
    let cfg = &ctx.config;
    let data = read_dataset(dataset)?;
    check_shape("dataset", &data, cfg.q, cfg.n)?;
    let mut state = match resume {
        Some(p) => {
            let mut s = read_checkpoint(p)?;
            if s.params.config != cfg.encoder() {
                return Err(Error::Config("checkpoint architecture differs from the configuration".into()));
            }
            s.config.epochs = cfg.train.epochs;
            s
        }
        None => TrainState::initialize(cfg.encoder(), cfg.train_config())?,
    };
    let (train_set, val_set) = data.split_off_validation(state.config.val_fraction)?;
    let interval = cfg.save_interval;
    let result = train(&mut state, &train_set, Some(&val_set), ctx.exec, |s| {
        let last = s.history.last().expect("epoch recorded");
        let val = last.val_loss.map_or_else(|| "-".to_string(), f);
        eprintln!("epoch {} train {} val {val}", last.epoch, f(last.train_loss));
        write_history(&ctx.path("history.csv"), &s.history)?;
        if s.epoch % interval == 0 {
            write_checkpoint(&ctx.path(&format!("checkpoint-{:04}.p2vc", s.epoch)), s)?;
        }
        Ok(())
    });
    if let Err(e @ Error::NonFiniteLoss { .. }) = result {
        write_checkpoint(&ctx.path("checkpoint-partial.p2vc"), &state)?;
        return Err(e);
    }
    result?;
    write_history(&ctx.path("history.csv"), &state.history)?;
    write_checkpoint(&ctx.path("checkpoint.p2vc"), &state)?;
    println!("trained {} epochs; checkpoint at {}", state.epoch, ctx.path("checkpoint.p2vc").display());
    Ok(())
}

pub fn embed(ctx: &Context, checkpoint: &Path, dataset: &Path) -> Result<()> {
    ctx.prepare()?;
    let params = read_checkpoint(checkpoint)?.params;
    let data = read_dataset(dataset)?;
    check_model(&params, &data)?;
    let rows = encode_batch(&params, &data.fields(), ctx.exec)?;
    let e = Embeddings { dim: params.config.embed_dim, rows };
    write_embeddings(&ctx.path("embeddings.p2ve"), &e)?;
    println!("wrote {} embeddings of dimension {}", e.rows.len(), e.dim);
    Ok(())
}

/// Writes the reconstructed fields and their per-sample errors.
fn write_reconstruction(
    ctx: &Context,
    data: &LabeledDataset,
    dict: &MonomialDictionary,
    estimates: Vec<CoefficientMatrix>,
    eps: f64,
) -> Result<()> {
    let rows = ctx.exec.try_map(data.len(), |i| {
        let s = &data.samples[i];
        let recon = PolynomialSystem::new(dict.clone(), estimates[i].clone())?.eval_on_lattice(&data.lattice)?;
        let row = SidecarRow {
            index: i,
            param_error: s.coefficients.as_ref().map(|t| parameter_error(&estimates[i], t)).transpose()?,
            norm_recon_error: normalized_recon_loss(&s.field, &recon, eps)?,
            unnorm_recon_error: unnormalized_recon_loss(&s.field, &recon)?,
        };
        Ok::<_, Error>((row, recon))
    })?;
    let mut samples = Vec::with_capacity(data.len());
    let mut sidecar = Vec::with_capacity(data.len());
    for ((row, field), (s, xi)) in rows.into_iter().zip(data.samples.iter().zip(estimates)) {
        sidecar.push(row);
        samples.push(Sample { field, coefficients: Some(xi), label: s.label, provenance: s.provenance.clone() });
    }
    let out = LabeledDataset::new(data.lattice.clone(), data.degree, data.label_set, data.seed, samples)?;
    write_dataset(&ctx.path("reconstruction.p2vd"), &out)?;
    write_sidecar(&ctx.path("errors.csv"), &sidecar)?;
    let mean = sidecar.iter().map(|r| r.norm_recon_error).sum::<f64>() / sidecar.len().max(1) as f64;
    println!("reconstructed {} samples; mean normalized error {}", sidecar.len(), f(mean));
    Ok(())
}

pub fn reconstruct(ctx: &Context, checkpoint: &Path, dataset: &Path) -> Result<()> {
    ctx.prepare()?;
    let state = read_checkpoint(checkpoint)?;
    let data = read_dataset(dataset)?;
    check_model(&state.params, &data)?;
    let est = predict_coefficients(&state.params, &data.fields(), ctx.exec)?;
    write_reconstruction(ctx, &data, &state.params.config.dictionary(), est, state.config.eps)
}

pub fn lasso(ctx: &Context, dataset: &Path) -> Result<()> {
    ctx.prepare()?;
    let data = read_dataset(dataset)?;
    let cfg = ctx.config.lasso;
    let design = LassoDesign::new(data.dictionary(), data.lattice.clone())?;
    let fits = design.fit_many(&data.fields(), &cfg, ctx.exec)?;
    let unconverged = fits.iter().filter(|f| !f.converged).count();
    if unconverged > 0 {
        eprintln!("warning: {unconverged} fits hit the sweep limit");
    }
    let est = fits.into_iter().map(|f| f.coefficients).collect();
    write_reconstruction(ctx, &data, &data.dictionary(), est, ctx.config.train.eps)
}

pub struct EvalInputs<'a> {
    pub checkpoints: &'a [PathBuf],
    pub baseline: Option<&'a Path>,
    pub dataset: Option<&'a Path>,
}

fn first_checkpoint(inputs: &EvalInputs) -> Result<TrainState> {
    let p = inputs.checkpoints.first().ok_or_else(|| Error::Config("this experiment needs --checkpoint".into()))?;
    read_checkpoint(p)
}

/// The dataset given on the command line, else one sampled from `cfg`
/// with the generator overridden.
fn eval_dataset(ctx: &Context, inputs: &EvalInputs, generator: &str) -> Result<LabeledDataset> {
    match inputs.dataset {
        Some(p) => read_dataset(p),
        None => {
            let cfg = RunConfig { generator: generator.into(), ..ctx.config.clone() };
            generate_dataset(&cfg, ctx.exec)
        }
    }
}

fn report_tables(report: &MetricsReport) -> Result<(Table, Table)> {
    let mut summary = Table::new([
        "method",
        "group",
        "count",
        "param_error_mean",
        "param_error_std",
        "norm_recon_mean",
        "norm_recon_std",
        "unnorm_recon_mean",
        "unnorm_recon_std",
        "sparsity_mean",
        "sparsity_std",
    ]);
    for s in &report.summaries {
        let mut row = vec![s.method.clone(), s.group.clone(), s.count.to_string()];
        for st in [&s.param_error, &s.norm_recon, &s.unnorm_recon, &s.sparsity] {
            if st.count == 0 {
                row.extend([String::new(), String::new()]);
            } else {
                row.extend(stat_cells(st));
            }
        }
        summary.push(row)?;
    }
    let mut records = Table::new(["index", "group", "method", "param_error", "norm_recon", "unnorm_recon", "sparsity"]);
    for r in &report.records {
        records.push(vec![
            r.index.to_string(),
            r.group.clone(),
            r.method.clone(),
            format_float(r.param_error),
            f(r.norm_recon),
            f(r.unnorm_recon),
            format_float(r.sparsity),
        ])?;
    }
    Ok((summary, records))
}

pub fn eval(ctx: &Context, experiment: &str, inputs: &EvalInputs) -> Result<()> {
    ctx.prepare()?;
    let cfg = &ctx.config;
    let hash = config_hash(&cfg.echo());
    let exec = ctx.exec;
    match experiment {
        "recon-table" | "noise-sweep" => {
            let state = first_checkpoint(inputs)?;
            let data = eval_dataset(ctx, inputs, "classical")?;
            check_model(&state.params, &data)?;
            let design = LassoDesign::new(data.dictionary(), data.lattice.clone())?;
            let methods = [
                ("flowembed", Reconstructor::Model(&state.params)),
                ("lasso", Reconstructor::Lasso(&design, cfg.lasso)),
            ];
            if experiment == "recon-table" {
                let report = recon_table(&methods, &data, state.config.eps, &hash, exec)?;
                let (summary, records) = report_tables(&report)?;
                write_table(&ctx.path("recon-table.csv"), &summary)?;
                write_table(&ctx.path("recon-records.csv"), &records)?;
                print!("{}", summary.to_csv());
            } else {
                for &kind in &cfg.noise_kinds {
                    let sweep = noise_sweep(&methods, &data, kind, &kind.grid(), cfg.seed, state.config.eps, exec)?;
                    let mut t = Table::new([
                        "magnitude",
                        "flowembed_error",
                        "flowembed_std",
                        "lasso_error",
                        "lasso_std",
                        "skipped",
                    ]);
                    for row in &sweep.rows {
                        let mut cells = vec![f(row.magnitude)];
                        for e in &row.errors {
                            cells.extend(stat_cells(e));
                        }
                        cells.push(row.skipped.to_string());
                        t.push(cells)?;
                    }
                    write_table(&ctx.path(&format!("noise-{}.csv", kind.name())), &t)?;
                    println!("{}: {} magnitudes", kind.name(), sweep.rows.len());
                }
            }
        }
        "sparsity-sweep" => {
            if inputs.checkpoints.is_empty() {
                return Err(Error::Config("sparsity-sweep needs one --checkpoint per sparsity weight".into()));
            }
            let states = inputs.checkpoints.iter().map(|p| read_checkpoint(p)).collect::<Result<Vec<_>>>()?;
            let data = eval_dataset(ctx, inputs, "train-polynomial")?;
            for s in &states {
                check_model(&s.params, &data)?;
            }
            let models: Vec<(f64, &ModelParams)> = states.iter().map(|s| (s.config.beta, &s.params)).collect();
            let mut t = Table::new(["beta", "sigma", "p_mean", "p_std", "s_mean", "s_std", "excluded"]);
            for sigma in [0.0, cfg.sigma_param] {
                for pt in sparsity_sweep(&models, &data, sigma, cfg.seed, exec)? {
                    let mut cells = vec![f(pt.beta), f(pt.sigma)];
                    cells.extend(stat_cells(&pt.p));
                    cells.extend(stat_cells(&pt.s));
                    cells.push(pt.excluded.to_string());
                    t.push(cells)?;
                }
            }
            write_table(&ctx.path("sparsity-sweep.csv"), &t)?;
            print!("{}", t.to_csv());
        }
        "homoclinic" => {
            let state = first_checkpoint(inputs)?;
            let baseline = inputs.baseline.map(read_checkpoint).transpose()?;
            let lattice = ctx.lattice()?;
            let mut methods = vec![("normalized", &state.params)];
            if let Some(b) = &baseline {
                methods.push(("unnormalized", &b.params));
            }
            let report = homoclinic_divergence(&methods, &lattice, &cfg.homoclinic(), exec)?;
            let mut summary = Table::new(["method", "time_averaged_deviation"]);
            let mut curves = Table::new(["method", "xi", "step", "deviation"]);
            for (m, name) in report.methods.iter().enumerate() {
                summary.push(vec![name.clone(), f(report.time_averaged[m])])?;
                for (k, &xi) in report.xi_values.iter().enumerate() {
                    for (step, &d) in report.curves[m][k].iter().enumerate() {
                        curves.push(vec![name.clone(), f(xi), step.to_string(), f(d)])?;
                    }
                }
            }
            let land = landscape_check(&lattice, cfg.landscape_a, cfg.landscape_sigma, cfg.seed, state.config.eps)?;
            let mut lt = Table::new(["loss", "peak_cell", "cells_to_fixed_point"]);
            lt.push(vec!["normalized".into(), land.normalized_peak.to_string(), land.normalized_distance.to_string()])?;
            lt.push(vec![
                "unnormalized".into(),
                land.unnormalized_peak.to_string(),
                land.unnormalized_distance.to_string(),
            ])?;
            write_table(&ctx.path("homoclinic-summary.csv"), &summary)?;
            write_table(&ctx.path("homoclinic-curves.csv"), &curves)?;
            write_table(&ctx.path("landscape.csv"), &lt)?;
            print!("{}{}", summary.to_csv(), lt.to_csv());
        }
        "classify" => {
            let state = first_checkpoint(inputs)?;
            let task = ClassTask::from_name(&cfg.task).ok_or_else(|| Error::Config(format!("unknown task {:?}", cfg.task)))?;
            let generator = match task {
                ClassTask::Conservativity => "conservative",
                ClassTask::Incompressibility => "incompressible",
                ClassTask::LinearStability => "linear-stability",
                ClassTask::ClassicalId => "classical",
            };
            let data = eval_dataset(ctx, inputs, generator)?;
            check_model(&state.params, &data)?;
            if data.label_set != task.label_set() {
                return Err(Error::Config(format!("dataset labels are {:?}, task needs {:?}", data.label_set, task.label_set())));
            }
            let mut reps = vec![Representation::Embedding, Representation::Pca];
            if data.samples.iter().all(|s| s.coefficients.is_some()) {
                reps.insert(1, Representation::Parameters);
            }
            let bench = classification_benchmark(&state.params, &data, &reps, &lambda_grid(), cfg.seed, exec)?;
            let mut t = Table::new(["representation", "dims", "lambda", "train_macro_f1", "test_macro_f1", "test_f1_std"]);
            for ((rep, r), dims) in bench.rows.iter().zip(&bench.feature_dims) {
                t.push(vec![
                    rep.name().into(),
                    dims.to_string(),
                    f(r.model.lambda),
                    f(r.train_f1.macro_f1),
                    f(r.test_f1.macro_f1),
                    f(r.test_f1.std),
                ])?;
            }
            write_table(&ctx.path(&format!("classify-{}.csv", task.name())), &t)?;
            print!("{}", t.to_csv());
        }
        "resolution" => {
            let rows = resolution_study(&cfg.resolution(), exec)?;
            let mut t = Table::new(["n", "test_loss", "epochs_to_threshold"]);
            for r in &rows {
                t.push(vec![r.n.to_string(), f(r.test_loss), r.epochs_to_threshold.map_or_else(String::new, |e| e.to_string())])?;
            }
            write_table(&ctx.path("resolution.csv"), &t)?;
            print!("{}", t.to_csv());
        }
        other => return Err(Error::Config(format!("unknown experiment {other:?}"))),
    }
    Ok(())
}
