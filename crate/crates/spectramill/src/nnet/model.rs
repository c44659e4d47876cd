//! Multi-pathway 1D U-Net models.
//!
//! Each input channel is processed by its own U-Net pathway built from
//! residual blocks; the pathway outputs are concatenated and fused by a
//! single 1x1 convolution. In the hybrid variant, levels whose kernel is 1
//! skip the pooling/upsampling and the skip connection: they act as pure
//! channel mixers at the current resolution.
//!
//! Parameters live in one flat arena in construction order; layer structs
//! hold indices into it. That ordering is the checkpoint wire order.

use super::act::{sigmoid, Activation};
use super::layers::{
    bn_backward, bn_forward_eval, bn_forward_train, conv1d_backward, conv1d_forward,
    dropout_backward, dropout_forward, droppath_backward, droppath_forward, maxpool_backward,
    maxpool_forward, upsample_backward, upsample_forward, BnCache,
};
use super::tensor::Tensor;
use crate::synthgen::Task;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub task: Task,
    pub kernels: Vec<usize>,
    pub filters: Vec<usize>,
    pub activation: Activation,
    /// Skip connections and up/down sampling are omitted at levels whose
    /// kernel is 1.
    pub hybrid: bool,
    pub input_channels: usize,
    pub output_channels: usize,
    pub dropout_rate: f64,
    pub drop_path_rate: f64,
    pub l1: f64,
    pub l2: f64,
}

impl ModelSpec {
    /// The four published architectures.
    pub fn for_task(task: Task) -> Self {
        let (kernels, filters, activation, hybrid): (Vec<usize>, Vec<usize>, _, _) = match task {
            Task::Denoiser => (vec![3, 5, 7, 9], vec![17, 19, 21, 23], Activation::Swish, false),
            Task::BaselineRemover => (
                vec![5, 7, 9, 11, 11, 15],
                vec![20, 22, 24, 26, 22, 28],
                Activation::Mish,
                false,
            ),
            Task::PeakLocator => (
                vec![15, 1, 15, 1, 1, 15, 1, 4],
                vec![20, 20, 6, 20, 10, 17, 18, 14],
                Activation::Gelu,
                true,
            ),
            Task::PeakFitter => (
                vec![15, 1, 15, 1, 1, 15, 1, 4],
                vec![24, 20, 8, 20, 10, 20, 18, 16],
                Activation::Swish,
                true,
            ),
        };
        ModelSpec {
            task,
            kernels,
            filters,
            activation,
            hybrid,
            input_channels: task.input_channels(),
            output_channels: task.output_channels(),
            dropout_rate: 0.1,
            drop_path_rate: 0.05,
            l1: 1e-6,
            l2: 1e-5,
        }
    }

    /// The locator's output is a per-point probability.
    pub fn sigmoid_output(&self) -> bool {
        self.task == Task::PeakLocator
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() || self.kernels.len() != self.filters.len() {
            return Err(Error::Config(format!(
                "kernel list ({}) and filter list ({}) must be equal-length and non-empty",
                self.kernels.len(),
                self.filters.len()
            )));
        }
        for &k in &self.kernels {
            if !(k % 2 == 1 || k == 4) {
                return Err(Error::Config(format!(
                    "kernel {k} unsupported: same-padding is defined for odd kernels and 4"
                )));
            }
        }
        if self.filters.iter().any(|f| *f == 0) {
            return Err(Error::Config("zero filter count".to_string()));
        }
        if self.input_channels == 0 || self.output_channels == 0 {
            return Err(Error::Config("channel counts must be positive".to_string()));
        }
        for (name, r) in [("dropout", self.dropout_rate), ("drop-path", self.drop_path_rate)] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("{name} rate {r} outside [0, 1)")));
            }
        }
        if self.l1 < 0.0 || self.l2 < 0.0 {
            return Err(Error::Config("negative regularization".to_string()));
        }
        if self.hybrid && self.kernels.iter().all(|k| *k == 1) {
            return Err(Error::Config(
                "hybrid model needs at least one sampled (kernel > 1) level".to_string(),
            ));
        }
        Ok(())
    }
}

/// One named weight array. `trainable: false` marks state the optimizer
/// must skip (batch-norm running statistics). Values are always kept
/// exactly representable in f32 so checkpoints round-trip bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
    pub trainable: bool,
}

#[derive(Debug, Clone, Copy)]
struct ConvDef {
    w: usize,
    b: usize,
    in_ch: usize,
    out_ch: usize,
    k: usize,
}

#[derive(Debug, Clone, Copy)]
struct BnDef {
    gamma: usize,
    beta: usize,
    mean: usize,
    var: usize,
}

#[derive(Debug, Clone, Copy)]
struct BlockDef {
    conv1: ConvDef,
    bn1: BnDef,
    conv2: ConvDef,
    bn2: BnDef,
    shortcut: Option<ConvDef>,
}

#[derive(Debug, Clone, Copy)]
struct LevelDef {
    a: BlockDef,
    b: BlockDef,
    sampled: bool,
    filters: usize,
}

#[derive(Debug, Clone)]
struct PathwayDef {
    levels: Vec<LevelDef>,
    bottleneck: BlockDef,
    /// Decoder blocks in application order (deepest level first).
    dec: Vec<LevelDef>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: Vec<Param>,
    pathways: Vec<PathwayDef>,
    fusion: ConvDef,
}

/// Round to the nearest f32 and back; all persisted state lives on this
/// grid so saving as 32-bit floats is lossless.
#[inline]
pub fn f32_grid(v: f64) -> f64 {
    (v as f32) as f64
}

struct Builder {
    params: Vec<Param>,
    rng: ChaCha8Rng,
}

impl Builder {
    fn conv(&mut self, name: &str, in_ch: usize, out_ch: usize, k: usize) -> ConvDef {
        // He-uniform initialization over the fan-in.
        let limit = (6.0 / (in_ch * k) as f64).sqrt();
        let w: Vec<f64> = (0..out_ch * in_ch * k)
            .map(|_| f32_grid(self.rng.random_range(-limit..limit)))
            .collect();
        let wid = self.push(format!("{name}.w"), w, true);
        let bid = self.push(format!("{name}.b"), vec![0.0; out_ch], true);
        ConvDef { w: wid, b: bid, in_ch, out_ch, k }
    }

    fn bn(&mut self, name: &str, ch: usize) -> BnDef {
        let gamma = self.push(format!("{name}.gamma"), vec![1.0; ch], true);
        let beta = self.push(format!("{name}.beta"), vec![0.0; ch], true);
        let mean = self.push(format!("{name}.running_mean"), vec![0.0; ch], false);
        let var = self.push(format!("{name}.running_var"), vec![1.0; ch], false);
        BnDef { gamma, beta, mean, var }
    }

    fn block(&mut self, name: &str, in_ch: usize, out_ch: usize, k: usize) -> BlockDef {
        let conv1 = self.conv(&format!("{name}.conv1"), in_ch, out_ch, k);
        let bn1 = self.bn(&format!("{name}.bn1"), out_ch);
        let conv2 = self.conv(&format!("{name}.conv2"), out_ch, out_ch, k);
        let bn2 = self.bn(&format!("{name}.bn2"), out_ch);
        let shortcut = if in_ch != out_ch {
            Some(self.conv(&format!("{name}.shortcut"), in_ch, out_ch, 1))
        } else {
            None
        };
        BlockDef { conv1, bn1, conv2, bn2, shortcut }
    }

    fn push(&mut self, name: String, values: Vec<f64>, trainable: bool) -> usize {
        let grad = vec![0.0; values.len()];
        self.params.push(Param { name, values, grad, trainable });
        self.params.len() - 1
    }
}

pub fn build_model(spec: &ModelSpec, seed: u64) -> Result<Model> {
    spec.validate()?;
    let mut b = Builder { params: Vec::new(), rng: ChaCha8Rng::seed_from_u64(seed) };
    let n = spec.kernels.len();
    let mut pathways = Vec::with_capacity(spec.input_channels);
    for p in 0..spec.input_channels {
        let mut levels = Vec::with_capacity(n);
        let mut ch = 1usize;
        for i in 0..n {
            let (k, f) = (spec.kernels[i], spec.filters[i]);
            let sampled = !spec.hybrid || k != 1;
            let a = b.block(&format!("p{p}.enc{i}.a"), ch, f, k);
            let bb = b.block(&format!("p{p}.enc{i}.b"), f, f, k);
            levels.push(LevelDef { a, b: bb, sampled, filters: f });
            ch = f;
        }
        let k_last = spec.kernels[n - 1];
        let bottleneck = b.block(&format!("p{p}.mid"), ch, ch, k_last);
        let mut dec = Vec::with_capacity(n);
        for i in (0..n).rev() {
            let (k, f) = (spec.kernels[i], spec.filters[i]);
            let sampled = levels[i].sampled;
            let in_ch = if sampled { ch + spec.filters[i] } else { ch };
            let a = b.block(&format!("p{p}.dec{i}.a"), in_ch, f, k);
            let bb = b.block(&format!("p{p}.dec{i}.b"), f, f, k);
            dec.push(LevelDef { a, b: bb, sampled, filters: f });
            ch = f;
        }
        pathways.push(PathwayDef { levels, bottleneck, dec });
    }
    let fusion_in = spec.input_channels * spec.filters[0];
    let fusion = b.conv("fusion", fusion_in, spec.output_channels, 1);
    Ok(Model { spec: spec.clone(), params: b.params, pathways, fusion })
}

fn two_mut(params: &mut [Param], i: usize, j: usize) -> (&mut Param, &mut Param) {
    assert!(i < j);
    let (lo, hi) = params.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

pub struct BlockCache {
    x: Tensor,
    bn1: BnCache,
    bn1_out: Tensor,
    drop_mask: Vec<f64>,
    conv2_in: Tensor,
    bn2: BnCache,
    dp_gates: Vec<f64>,
    pre_act: Tensor,
}

struct DecCache {
    /// (length before upsample, channels of the upsampled part) when the
    /// level resamples.
    up: Option<(usize, usize)>,
    a: BlockCache,
    b: BlockCache,
}

struct PathwayCache {
    enc: Vec<(BlockCache, BlockCache)>,
    pools: Vec<Option<(Vec<usize>, usize)>>,
    bottleneck: BlockCache,
    dec: Vec<DecCache>,
}

pub struct ForwardCache {
    pathways: Vec<PathwayCache>,
    fusion_in: Tensor,
    fusion_pre: Option<Tensor>,
}

fn block_forward_train(
    params: &mut [Param],
    def: &BlockDef,
    spec: &ModelSpec,
    x: Tensor,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor, BlockCache)> {
    let act = spec.activation;
    let c1 = conv1d_forward(
        &x,
        &params[def.conv1.w].values,
        &params[def.conv1.b].values,
        def.conv1.in_ch,
        def.conv1.out_ch,
        def.conv1.k,
    );
    let (gamma1, beta1) =
        (params[def.bn1.gamma].values.clone(), params[def.bn1.beta].values.clone());
    let (m1, v1) = two_mut(params, def.bn1.mean, def.bn1.var);
    let (bn1_out, bn1) =
        bn_forward_train(&c1, &gamma1, &beta1, &mut m1.values, &mut v1.values, BN_MOMENTUM, BN_EPS)?;
    let mut a1 = bn1_out.clone();
    for v in &mut a1.data {
        *v = act.apply(*v);
    }
    let (d1, drop_mask) = dropout_forward(&a1, spec.dropout_rate, rng);
    let c2 = conv1d_forward(
        &d1,
        &params[def.conv2.w].values,
        &params[def.conv2.b].values,
        def.conv2.in_ch,
        def.conv2.out_ch,
        def.conv2.k,
    );
    let (gamma2, beta2) =
        (params[def.bn2.gamma].values.clone(), params[def.bn2.beta].values.clone());
    let (m2, v2) = two_mut(params, def.bn2.mean, def.bn2.var);
    let (n2, bn2) =
        bn_forward_train(&c2, &gamma2, &beta2, &mut m2.values, &mut v2.values, BN_MOMENTUM, BN_EPS)?;
    let (main, dp_gates) = droppath_forward(&n2, spec.drop_path_rate, rng);
    let mut pre = match &def.shortcut {
        Some(sc) => conv1d_forward(
            &x,
            &params[sc.w].values,
            &params[sc.b].values,
            sc.in_ch,
            sc.out_ch,
            sc.k,
        ),
        None => x.clone(),
    };
    for (p, m) in pre.data.iter_mut().zip(&main.data) {
        *p += m;
    }
    let mut y = pre.clone();
    for v in &mut y.data {
        *v = act.apply(*v);
    }
    Ok((y, BlockCache { x, bn1, bn1_out, drop_mask, conv2_in: d1, bn2, dp_gates, pre_act: pre }))
}

fn block_forward_eval(params: &[Param], def: &BlockDef, spec: &ModelSpec, x: &Tensor) -> Tensor {
    let act = spec.activation;
    let c1 = conv1d_forward(
        x,
        &params[def.conv1.w].values,
        &params[def.conv1.b].values,
        def.conv1.in_ch,
        def.conv1.out_ch,
        def.conv1.k,
    );
    let mut a1 = bn_forward_eval(
        &c1,
        &params[def.bn1.gamma].values,
        &params[def.bn1.beta].values,
        &params[def.bn1.mean].values,
        &params[def.bn1.var].values,
        BN_EPS,
    );
    for v in &mut a1.data {
        *v = act.apply(*v);
    }
    let c2 = conv1d_forward(
        &a1,
        &params[def.conv2.w].values,
        &params[def.conv2.b].values,
        def.conv2.in_ch,
        def.conv2.out_ch,
        def.conv2.k,
    );
    let main = bn_forward_eval(
        &c2,
        &params[def.bn2.gamma].values,
        &params[def.bn2.beta].values,
        &params[def.bn2.mean].values,
        &params[def.bn2.var].values,
        BN_EPS,
    );
    let mut pre = match &def.shortcut {
        Some(sc) => conv1d_forward(
            x,
            &params[sc.w].values,
            &params[sc.b].values,
            sc.in_ch,
            sc.out_ch,
            sc.k,
        ),
        None => x.clone(),
    };
    for (p, m) in pre.data.iter_mut().zip(&main.data) {
        *p += m;
    }
    for v in &mut pre.data {
        *v = act.apply(*v);
    }
    pre
}

/// Returns the gradient with respect to the block input and accumulates
/// parameter gradients into the arena.
fn block_backward(params: &mut [Param], def: &BlockDef, spec: &ModelSpec, cache: &BlockCache, dy: &Tensor) -> Tensor {
    let act = spec.activation;
    let mut dpre = dy.clone();
    for (d, p) in dpre.data.iter_mut().zip(&cache.pre_act.data) {
        *d *= act.derivative(*p);
    }
    // Main branch.
    let dn2 = droppath_backward(&dpre, &cache.dp_gates);
    let (dc2, dgamma2, dbeta2) = bn_backward(&dn2, &cache.bn2, &params[def.bn2.gamma].values);
    accumulate(params, def.bn2.gamma, &dgamma2);
    accumulate(params, def.bn2.beta, &dbeta2);
    let (dd1, dw2, db2) = conv1d_backward(
        &dc2,
        &cache.conv2_in,
        &params[def.conv2.w].values,
        def.conv2.in_ch,
        def.conv2.out_ch,
        def.conv2.k,
    );
    accumulate(params, def.conv2.w, &dw2);
    accumulate(params, def.conv2.b, &db2);
    let da1 = dropout_backward(&dd1, &cache.drop_mask);
    let mut dn1 = da1;
    for (d, p) in dn1.data.iter_mut().zip(&cache.bn1_out.data) {
        *d *= act.derivative(*p);
    }
    let (dc1, dgamma1, dbeta1) = bn_backward(&dn1, &cache.bn1, &params[def.bn1.gamma].values);
    accumulate(params, def.bn1.gamma, &dgamma1);
    accumulate(params, def.bn1.beta, &dbeta1);
    let (mut dx, dw1, db1) = conv1d_backward(
        &dc1,
        &cache.x,
        &params[def.conv1.w].values,
        def.conv1.in_ch,
        def.conv1.out_ch,
        def.conv1.k,
    );
    accumulate(params, def.conv1.w, &dw1);
    accumulate(params, def.conv1.b, &db1);
    // Shortcut branch: dpre flows through it unchanged by the activation.
    match &def.shortcut {
        Some(sc) => {
            let (dxs, dws, dbs) = conv1d_backward(
                &dpre,
                &cache.x,
                &params[sc.w].values,
                sc.in_ch,
                sc.out_ch,
                sc.k,
            );
            accumulate(params, sc.w, &dws);
            accumulate(params, sc.b, &dbs);
            for (a, b) in dx.data.iter_mut().zip(&dxs.data) {
                *a += b;
            }
        }
        None => {
            for (a, b) in dx.data.iter_mut().zip(&dpre.data) {
                *a += b;
            }
        }
    }
    dx
}

fn accumulate(params: &mut [Param], id: usize, g: &[f64]) {
    for (a, b) in params[id].grad.iter_mut().zip(g) {
        *a += b;
    }
}

impl Model {
    pub fn trainable_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.values.len())
            .sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.ch != self.spec.input_channels {
            return Err(Error::Shape {
                expected: format!("{} input channels", self.spec.input_channels),
                got: format!("{}", x.ch),
            });
        }
        Ok(())
    }

    fn pathway_slice(&self, x: &Tensor, p: usize) -> Tensor {
        let mut s = Tensor::zeros(x.batch, 1, x.len);
        for bi in 0..x.batch {
            s.channel_mut(bi, 0).copy_from_slice(x.channel(bi, p));
        }
        s
    }

    /// Deterministic inference pass using running batch-norm statistics.
    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut outs = Vec::with_capacity(self.pathways.len());
        for (p, path) in self.pathways.iter().enumerate() {
            let mut t = self.pathway_slice(x, p);
            let mut skips: Vec<Option<(Tensor, usize)>> = Vec::with_capacity(path.levels.len());
            for level in &path.levels {
                t = block_forward_eval(&self.params, &level.a, &self.spec, &t);
                t = block_forward_eval(&self.params, &level.b, &self.spec, &t);
                if level.sampled {
                    let pre_len = t.len;
                    let (pooled, _) = maxpool_forward(&t);
                    skips.push(Some((t, pre_len)));
                    t = pooled;
                } else {
                    skips.push(None);
                }
            }
            t = block_forward_eval(&self.params, &path.bottleneck, &self.spec, &t);
            for (d, level) in path.dec.iter().enumerate() {
                let i = path.levels.len() - 1 - d;
                if level.sampled {
                    let (skip, pre_len) = skips[i].take().expect("sampled level saved a skip");
                    let up = upsample_forward(&t, pre_len);
                    t = Tensor::concat(&up, &skip)?;
                }
                t = block_forward_eval(&self.params, &level.a, &self.spec, &t);
                t = block_forward_eval(&self.params, &level.b, &self.spec, &t);
            }
            outs.push(t);
        }
        let mut fused_in = outs.remove(0);
        for o in outs {
            fused_in = Tensor::concat(&fused_in, &o)?;
        }
        let mut y = conv1d_forward(
            &fused_in,
            &self.params[self.fusion.w].values,
            &self.params[self.fusion.b].values,
            self.fusion.in_ch,
            self.fusion.out_ch,
            self.fusion.k,
        );
        if self.spec.sigmoid_output() {
            for v in &mut y.data {
                *v = sigmoid(*v);
            }
        }
        Ok(y)
    }

    /// Training pass: batch statistics, dropout and drop-path active,
    /// running statistics updated. The cache feeds `backward`.
    pub fn forward_train(&mut self, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<(Tensor, ForwardCache)> {
        self.check_input(x)?;
        let spec = self.spec.clone();
        let pathway_defs = self.pathways.clone();
        let mut caches = Vec::with_capacity(pathway_defs.len());
        let mut outs = Vec::with_capacity(pathway_defs.len());
        for (p, path) in pathway_defs.iter().enumerate() {
            let mut t = self.pathway_slice(x, p);
            let mut enc = Vec::with_capacity(path.levels.len());
            let mut pools = Vec::with_capacity(path.levels.len());
            let mut skips: Vec<Option<Tensor>> = Vec::with_capacity(path.levels.len());
            for level in &path.levels {
                let (t1, ca) = block_forward_train(&mut self.params, &level.a, &spec, t, rng)?;
                let (t2, cb) = block_forward_train(&mut self.params, &level.b, &spec, t1, rng)?;
                enc.push((ca, cb));
                if level.sampled {
                    let pre_len = t2.len;
                    let (pooled, argmax) = maxpool_forward(&t2);
                    pools.push(Some((argmax, pre_len)));
                    skips.push(Some(t2));
                    t = pooled;
                } else {
                    pools.push(None);
                    skips.push(None);
                    t = t2;
                }
            }
            let (tb, cmid) = block_forward_train(&mut self.params, &path.bottleneck, &spec, t, rng)?;
            t = tb;
            let mut dec = Vec::with_capacity(path.dec.len());
            for (d, level) in path.dec.iter().enumerate() {
                let i = path.levels.len() - 1 - d;
                let up = if level.sampled {
                    let skip = skips[i].take().expect("sampled level saved a skip");
                    let pre_up = t.len;
                    let upd = upsample_forward(&t, skip.len);
                    let up_ch = upd.ch;
                    t = Tensor::concat(&upd, &skip)?;
                    Some((pre_up, up_ch))
                } else {
                    None
                };
                let (t1, ca) = block_forward_train(&mut self.params, &level.a, &spec, t, rng)?;
                let (t2, cb) = block_forward_train(&mut self.params, &level.b, &spec, t1, rng)?;
                t = t2;
                dec.push(DecCache { up, a: ca, b: cb });
            }
            caches.push(PathwayCache { enc, pools, bottleneck: cmid, dec });
            outs.push(t);
        }
        let mut fused_in = outs.remove(0);
        for o in outs {
            fused_in = Tensor::concat(&fused_in, &o)?;
        }
        let mut y = conv1d_forward(
            &fused_in,
            &self.params[self.fusion.w].values,
            &self.params[self.fusion.b].values,
            self.fusion.in_ch,
            self.fusion.out_ch,
            self.fusion.k,
        );
        let fusion_pre = if spec.sigmoid_output() {
            let pre = y.clone();
            for v in &mut y.data {
                *v = sigmoid(*v);
            }
            Some(pre)
        } else {
            None
        };
        Ok((y, ForwardCache { pathways: caches, fusion_in: fused_in, fusion_pre }))
    }

    /// Accumulates parameter gradients for `dy` (gradient of the objective
    /// with respect to the model output) and returns the input gradient.
    pub fn backward(&mut self, cache: &ForwardCache, dy: &Tensor) -> Result<Tensor> {
        let spec = self.spec.clone();
        let pathway_defs = self.pathways.clone();
        let mut d = dy.clone();
        if let Some(pre) = &cache.fusion_pre {
            for (g, p) in d.data.iter_mut().zip(&pre.data) {
                let s = sigmoid(*p);
                *g *= s * (1.0 - s);
            }
        }
        let (dfin, dwf, dbf) = conv1d_backward(
            &d,
            &cache.fusion_in,
            &self.params[self.fusion.w].values,
            self.fusion.in_ch,
            self.fusion.out_ch,
            self.fusion.k,
        );
        accumulate(&mut self.params, self.fusion.w, &dwf);
        accumulate(&mut self.params, self.fusion.b, &dbf);

        let mut dx_total = Tensor::zeros(dy.batch, spec.input_channels, cache.fusion_in.len);
        let mut offset = 0usize;
        for (p, path) in pathway_defs.iter().enumerate() {
            let pc = &cache.pathways[p];
            let f0 = path.dec.last().map(|l| l.filters).unwrap_or(1);
            // Carve this pathway's slice out of the fused gradient.
            let mut dt = Tensor::zeros(dfin.batch, f0, dfin.len);
            for bi in 0..dfin.batch {
                for c in 0..f0 {
                    dt.channel_mut(bi, c).copy_from_slice(dfin.channel(bi, offset + c));
                }
            }
            offset += f0;

            let mut skip_grads: Vec<Option<Tensor>> = vec![None; path.levels.len()];
            for (d_idx, level) in path.dec.iter().enumerate().rev() {
                let i = path.levels.len() - 1 - d_idx;
                let dc = &pc.dec[d_idx];
                dt = block_backward(&mut self.params, &level.b, &spec, &dc.b, &dt);
                dt = block_backward(&mut self.params, &level.a, &spec, &dc.a, &dt);
                if let Some((pre_up, up_ch)) = dc.up {
                    let (dup, dskip) = dt.split(up_ch);
                    skip_grads[i] = Some(dskip);
                    dt = upsample_backward(&dup, pre_up);
                }
            }
            dt = block_backward(&mut self.params, &path.bottleneck, &spec, &pc.bottleneck, &dt);
            for (i, level) in path.levels.iter().enumerate().rev() {
                if let Some((argmax, pre_len)) = &pc.pools[i] {
                    let mut dpre = maxpool_backward(&dt, argmax, *pre_len);
                    if let Some(ds) = &skip_grads[i] {
                        for (a, b) in dpre.data.iter_mut().zip(&ds.data) {
                            *a += b;
                        }
                    }
                    dt = dpre;
                }
                let (ca, cb) = &pc.enc[i];
                dt = block_backward(&mut self.params, &level.b, &spec, cb, &dt);
                dt = block_backward(&mut self.params, &level.a, &spec, ca, &dt);
            }
            for bi in 0..dt.batch {
                dx_total.channel_mut(bi, p).copy_from_slice(dt.channel(bi, 0));
            }
        }
        Ok(dx_total)
    }

    /// L1 + L2 penalty over trainable parameters, and its gradient
    /// accumulated into the arena.
    pub fn regularization(&mut self, accumulate_grads: bool) -> f64 {
        let (l1, l2) = (self.spec.l1, self.spec.l2);
        if l1 == 0.0 && l2 == 0.0 {
            return 0.0;
        }
        let mut penalty = 0.0;
        for p in &mut self.params {
            if !p.trainable {
                continue;
            }
            for (i, w) in p.values.iter().enumerate() {
                penalty += l1 * w.abs() + l2 * w * w;
                if accumulate_grads {
                    p.grad[i] += l1 * w.signum() + 2.0 * l2 * w;
                }
            }
        }
        penalty
    }
}
