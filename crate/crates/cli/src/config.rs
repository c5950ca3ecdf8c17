//! `key = value` run configuration covering every tunable of the pipeline.

use std::fmt::Display;
use std::str::FromStr;

use flowembed::baselines::LassoConfig;
use flowembed::evaluate::{HomoclinicConfig, ResolutionConfig};
use flowembed::model::{loss_kind_from_name, loss_kind_name, EncoderConfig, TrainConfig};
use flowembed::phasefield::Family;
use flowembed::simulate::NoiseKind;
use flowembed::Error;

pub const GENERATORS: [&str; 5] = ["train-polynomial", "classical", "conservative", "incompressible", "linear-stability"];
pub const EXPERIMENTS: [&str; 6] = ["recon-table", "noise-sweep", "sparsity-sweep", "homoclinic", "classify", "resolution"];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub q: usize,
    pub n: usize,
    pub degree: u32,

    pub generator: String,
    pub count: usize,
    /// `None` picks the generator's default.
    pub per_class: Option<usize>,
    pub families: Vec<(Family, usize)>,

    pub conv_layers: usize,
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// `None` picks 100 for planar and 256 for spatial systems.
    pub embed_dim: Option<usize>,
    pub hidden: usize,
    pub dropout: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,

    pub train: TrainConfig,
    pub save_interval: usize,

    pub lasso: LassoConfig,

    pub experiment: String,
    pub task: String,
    pub noise_kinds: Vec<NoiseKind>,
    pub sigma_param: f64,
    pub homoclinic_ics: usize,
    pub homoclinic_steps: usize,
    pub homoclinic_dt: f64,
    pub landscape_a: f64,
    pub landscape_sigma: f64,
    pub resolution_train_count: usize,
    pub resolution_test_count: usize,
    pub resolution_epochs: usize,
    pub resolution_threshold: f64,
}

pub fn default_families() -> Vec<(Family, usize)> {
    use Family::*;
    vec![
        (SaddleNode, 1),
        (Pitchfork, 1),
        (Transcritical, 1),
        (SimpleOscillator, 1),
        (LotkaVolterra, 1),
        (Homoclinic, 1),
        (VanDerPol, 1),
        (Selkov, 2),
        (FitzHughNagumo, 4),
    ]
}

impl Default for RunConfig {
    fn default() -> Self {
        let enc = EncoderConfig::standard(2, 64);
        let homo = HomoclinicConfig::default();
        let res = ResolutionConfig::default();
        RunConfig {
            seed: 0,
            q: 2,
            n: 64,
            degree: enc.degree,
            generator: "train-polynomial".into(),
            count: 10_000,
            per_class: None,
            families: default_families(),
            conv_layers: enc.conv_layers,
            channels: enc.channels,
            kernel: enc.kernel,
            stride: enc.stride,
            embed_dim: None,
            hidden: enc.hidden,
            dropout: enc.dropout,
            bn_momentum: enc.bn_momentum,
            bn_eps: enc.bn_eps,
            train: TrainConfig::default(),
            save_interval: 10,
            lasso: LassoConfig::default(),
            experiment: "recon-table".into(),
            task: "linear-stability".into(),
            noise_kinds: NoiseKind::ALL.to_vec(),
            sigma_param: 0.1,
            homoclinic_ics: homo.initial_conditions,
            homoclinic_steps: homo.steps,
            homoclinic_dt: homo.dt,
            landscape_a: 0.25,
            landscape_sigma: 0.1,
            resolution_train_count: res.train_count,
            resolution_test_count: res.test_count,
            resolution_epochs: res.train.epochs,
            resolution_threshold: res.threshold,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, Error> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn auto<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, Error> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn show_auto<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), T::to_string)
}

fn one_of(key: &str, value: &str, allowed: &[&str]) -> Result<String, Error> {
    if allowed.contains(&value) {
        Ok(value.to_string())
    } else {
        Err(Error::Config(format!("{key}: {value:?} is not one of {}", allowed.join(", "))))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), Error> {
        let t = &mut self.train;
        match key {
            "seed" => self.seed = parse(key, v)?,
            "q" => self.q = parse(key, v)?,
            "n" => self.n = parse(key, v)?,
            "degree" => self.degree = parse(key, v)?,
            "generator" => self.generator = one_of(key, v, &GENERATORS)?,
            "count" => self.count = parse(key, v)?,
            "per_class" => self.per_class = auto(key, v)?,
            "families" => self.families = parse_families(v)?,
            "conv_layers" => self.conv_layers = parse(key, v)?,
            "channels" => self.channels = parse(key, v)?,
            "kernel" => self.kernel = parse(key, v)?,
            "stride" => self.stride = parse(key, v)?,
            "embed_dim" => self.embed_dim = auto(key, v)?,
            "hidden" => self.hidden = parse(key, v)?,
            "dropout" => self.dropout = parse(key, v)?,
            "bn_momentum" => self.bn_momentum = parse(key, v)?,
            "bn_eps" => self.bn_eps = parse(key, v)?,
            "lr" => t.lr = parse(key, v)?,
            "adam_beta1" => t.adam_beta1 = parse(key, v)?,
            "adam_beta2" => t.adam_beta2 = parse(key, v)?,
            "adam_eps" => t.adam_eps = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "beta" => t.beta = parse(key, v)?,
            "eps" => t.eps = parse(key, v)?,
            "loss" => {
                t.loss = loss_kind_from_name(v)
                    .ok_or_else(|| Error::Config(format!("loss: {v:?} is not one of pointwise, global, none")))?
            }
            "val_fraction" => t.val_fraction = parse(key, v)?,
            "save_interval" => self.save_interval = parse(key, v)?,
            "lasso_beta" => self.lasso.beta = parse(key, v)?,
            "lasso_max_sweeps" => self.lasso.max_sweeps = parse(key, v)?,
            "lasso_tol" => self.lasso.tol = parse(key, v)?,
            "experiment" => self.experiment = one_of(key, v, &EXPERIMENTS)?,
            "task" => self.task = one_of(key, v, &["conservativity", "incompressibility", "linear-stability", "classical-id"])?,
            "noise_kinds" => {
                self.noise_kinds = v
                    .split(',')
                    .map(|s| {
                        NoiseKind::from_name(s.trim()).ok_or_else(|| Error::Config(format!("unknown noise kind {s:?}")))
                    })
                    .collect::<Result<_, _>>()?
            }
            "sigma_param" => self.sigma_param = parse(key, v)?,
            "homoclinic_ics" => self.homoclinic_ics = parse(key, v)?,
            "homoclinic_steps" => self.homoclinic_steps = parse(key, v)?,
            "homoclinic_dt" => self.homoclinic_dt = parse(key, v)?,
            "landscape_a" => self.landscape_a = parse(key, v)?,
            "landscape_sigma" => self.landscape_sigma = parse(key, v)?,
            "resolution_train_count" => self.resolution_train_count = parse(key, v)?,
            "resolution_test_count" => self.resolution_test_count = parse(key, v)?,
            "resolution_epochs" => self.resolution_epochs = parse(key, v)?,
            "resolution_threshold" => self.resolution_threshold = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its resolved value, in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let families = self.families.iter().map(|(f, c)| format!("{}:{c}", f.name())).collect::<Vec<_>>().join(",");
        let kinds = self.noise_kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(",");
        vec![
            ("seed", self.seed.to_string()),
            ("q", self.q.to_string()),
            ("n", self.n.to_string()),
            ("degree", self.degree.to_string()),
            ("generator", self.generator.clone()),
            ("count", self.count.to_string()),
            ("per_class", show_auto(&self.per_class)),
            ("families", families),
            ("conv_layers", self.conv_layers.to_string()),
            ("channels", self.channels.to_string()),
            ("kernel", self.kernel.to_string()),
            ("stride", self.stride.to_string()),
            ("embed_dim", show_auto(&self.embed_dim)),
            ("hidden", self.hidden.to_string()),
            ("dropout", self.dropout.to_string()),
            ("bn_momentum", self.bn_momentum.to_string()),
            ("bn_eps", self.bn_eps.to_string()),
            ("lr", t.lr.to_string()),
            ("adam_beta1", t.adam_beta1.to_string()),
            ("adam_beta2", t.adam_beta2.to_string()),
            ("adam_eps", t.adam_eps.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("beta", t.beta.to_string()),
            ("eps", t.eps.to_string()),
            ("loss", loss_kind_name(t.loss).to_string()),
            ("val_fraction", t.val_fraction.to_string()),
            ("save_interval", self.save_interval.to_string()),
            ("lasso_beta", self.lasso.beta.to_string()),
            ("lasso_max_sweeps", self.lasso.max_sweeps.to_string()),
            ("lasso_tol", self.lasso.tol.to_string()),
            ("experiment", self.experiment.clone()),
            ("task", self.task.clone()),
            ("noise_kinds", kinds),
            ("sigma_param", self.sigma_param.to_string()),
            ("homoclinic_ics", self.homoclinic_ics.to_string()),
            ("homoclinic_steps", self.homoclinic_steps.to_string()),
            ("homoclinic_dt", self.homoclinic_dt.to_string()),
            ("landscape_a", self.landscape_a.to_string()),
            ("landscape_sigma", self.landscape_sigma.to_string()),
            ("resolution_train_count", self.resolution_train_count.to_string()),
            ("resolution_test_count", self.resolution_test_count.to_string()),
            ("resolution_epochs", self.resolution_epochs.to_string()),
            ("resolution_threshold", self.resolution_threshold.to_string()),
        ]
    }

    /// The resolved configuration as parseable text.
    pub fn echo(&self) -> String {
        let mut out = String::from("# resolved configuration\n");
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.encoder().validate()?;
        self.train.validate()?;
        self.lasso.validate()?;
        if self.save_interval == 0 {
            return Err(Error::Config("save_interval must be positive".into()));
        }
        Ok(())
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            q: self.q,
            n: self.n,
            conv_layers: self.conv_layers,
            channels: self.channels,
            kernel: self.kernel,
            stride: self.stride,
            embed_dim: self.embed_dim.unwrap_or(if self.q == 3 { 256 } else { 100 }),
            hidden: self.hidden,
            dropout: self.dropout,
            degree: self.degree,
            bn_momentum: self.bn_momentum,
            bn_eps: self.bn_eps,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    pub fn homoclinic(&self) -> HomoclinicConfig {
        HomoclinicConfig {
            initial_conditions: self.homoclinic_ics,
            steps: self.homoclinic_steps,
            dt: self.homoclinic_dt,
            seed: self.seed,
            ..HomoclinicConfig::default()
        }
    }

    pub fn resolution(&self) -> ResolutionConfig {
        ResolutionConfig {
            train_count: self.resolution_train_count,
            test_count: self.resolution_test_count,
            threshold: self.resolution_threshold,
            train: TrainConfig { epochs: self.resolution_epochs, ..self.train_config() },
            data_seed: self.seed,
            ..ResolutionConfig::default()
        }
    }
}

fn parse_families(v: &str) -> Result<Vec<(Family, usize)>, Error> {
    v.split(',')
        .map(|item| {
            let (name, count) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("families: expected name:count, got {item:?}")))?;
            let family =
                Family::from_name(name.trim()).ok_or_else(|| Error::Config(format!("unknown family {name:?}")))?;
            Ok((family, parse("families", count.trim())?))
        })
        .collect()
}
