//! Benchmark fixtures.

use graft_core::data::synth::{generate, SynthConfig};
use graft_core::data::{PolicyDecay, WindowConfig, WindowSample};
use graft_core::model::{init_params, ModelConfig, SourceSwitch};
use graft_core::pipeline::{boundaries_by_fraction, prepare, DataSettings, Dataset, Prepared};
use graft_core::stanhop::StanhopConfig;
use graft_core::{ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn scores(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
}

pub fn matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    let data = scores(rows * cols, seed).into_iter().map(|v| v / 3.0).collect();
    Tensor::new(&[rows, cols], data).expect("shape matches data")
}

pub struct ModelFixture {
    pub cfg: ModelConfig,
    pub store: ParamStore,
    pub prepared: Prepared,
}

impl ModelFixture {
    /// A small synthetic region with an untrained model.
    pub fn new(d_model: usize, switch: SourceSwitch) -> Self {
        let synth = SynthConfig { days: 90, ..SynthConfig::default() };
        let ds = generate(&synth).expect("synth generates");
        let (first, last) = (ds.panel.days[0], *ds.panel.days.last().expect("non-empty panel"));
        let settings = DataSettings {
            window: WindowConfig::default(),
            boundaries: boundaries_by_fraction(first, last, 0.6, 0.2).expect("valid fractions"),
            text_dim: synth.embed_dim,
            decay: PolicyDecay::default(),
        };
        let (data, _) =
            Dataset::from_documents(vec![ds.panel], &ds.documents, Some(ds.covariates), &settings.decay, synth.embed_dim)
                .expect("documents map to the panel");
        let cfg = ModelConfig {
            backbone: StanhopConfig { d_model, d_ff: 2 * d_model, dropout: 0.0, ..StanhopConfig::default() },
            channels: 1 + data.covariate_count(),
            text_dim: synth.embed_dim,
            switch,
            ..ModelConfig::default()
        };
        let store = init_params(&cfg, 0).expect("valid config");
        let prepared = prepare(&data, &settings).expect("synth has training windows");
        Self { cfg, store, prepared }
    }

    pub fn sample(&self) -> &WindowSample {
        &self.prepared.splits.train[0]
    }
}
