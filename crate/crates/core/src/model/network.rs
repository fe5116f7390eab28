use rayon::prelude::*;

use crate::attention::{
    apply_value, binder, frequency_self_and_mixed, full_dct_attention, fuse_and_concat, partial_dct_attention,
    spatial_self_and_mixed, temporal_attention, ChannelTransformParams, DctAttentionParams, Init, MixedBlockParams,
    TemporalParams,
};
use crate::error::{Error, Result};
use crate::numerics::{Gradients, ParamId, ParamStore, Rng, Tape, Tensor, Var};
use crate::spectral::{FrequencyOperatorConfig, SpectralBasis};

use super::{ModelConfig, Variant};

/// Per-block weights.
#[derive(Clone, Debug)]
pub struct BlockParams<T> {
    pub mixed: MixedBlockParams<T>,
    /// One entry per group for the partial/full DCT variants, empty otherwise.
    pub dct: Vec<DctAttentionParams<T>>,
    pub temporal: Option<(TemporalParams<T>, ChannelTransformParams<T>)>,
}

/// All model weights.
#[derive(Clone, Debug)]
pub struct ModelParams<T> {
    /// `[C_in×C]`, bias-free.
    pub embed_w: T,
    /// `[J×C]`, or `[J×C×F]` with a per-frame table.
    pub pos: T,
    pub blocks: Vec<BlockParams<T>>,
    /// `[C×classes]`, `[classes]`.
    pub head_w: T,
    pub head_b: T,
}

impl<T> BlockParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> BlockParams<U> {
        BlockParams {
            mixed: self.mixed.map(&mut f),
            dct: self.dct.iter().map(|p| p.map(&mut f)).collect(),
            temporal: self.temporal.as_ref().map(|(t, c)| (t.map(&mut f), c.map(&mut f))),
        }
    }
}

impl<T> ModelParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> ModelParams<U> {
        ModelParams {
            embed_w: f(&self.embed_w),
            pos: f(&self.pos),
            blocks: self.blocks.iter().map(|b| b.map(&mut f)).collect(),
            head_w: f(&self.head_w),
            head_b: f(&self.head_b),
        }
    }
}

/// Attention maps of one block for one sample.
#[derive(Clone, Debug)]
pub struct BlockMaps<T> {
    /// Mixed spatial maps `[J×J]` per group.
    pub spatial: Vec<T>,
    /// Restored frequency maps `[F×J×J]` per group (empty without the frequency branch).
    pub frequency: Vec<T>,
    /// Fused per-frame maps `[F×J×J]` per group.
    pub fused: Vec<T>,
    /// Frame attention `[F×F]` of the temporal block.
    pub temporal: Option<T>,
}

/// Logits plus the per-block maps recorded during a pass.
pub struct Trace {
    pub logits: Var,
    pub blocks: Vec<BlockMaps<Var>>,
}

/// Embedding, `depth` mixed blocks each followed by a temporal block, pooling and a linear head.
#[derive(Clone, Debug)]
pub struct FreqMixFormer {
    config: ModelConfig,
    store: ParamStore,
    params: ModelParams<ParamId>,
    basis: SpectralBasis,
    fo: Option<FrequencyOperatorConfig>,
}

fn in_block(err: Error, where_: &str) -> Error {
    match err {
        Error::NonFinite(op) => Error::NonFinite(format!("{op} ({where_})")),
        other => other,
    }
}

/// Splits `x[J×C×F]` into `n` contiguous channel groups.
pub fn partition(tape: &Tape, x: Var, n: usize) -> Result<Vec<Var>> {
    let shape = tape.shape(x);
    check_partition(&shape, n)?;
    let width = shape[1] / n;
    (0..n).map(|i| tape.slice_axis(x, 1, i * width, width)).collect()
}

/// Eager counterpart of [`partition`].
pub fn partition_tensor(x: &Tensor, n: usize) -> Result<Vec<Tensor>> {
    check_partition(x.shape(), n)?;
    let width = x.shape()[1] / n;
    (0..n).map(|i| x.slice_axis(1, i * width, width)).collect()
}

fn check_partition(shape: &[usize], n: usize) -> Result<()> {
    if shape.len() != 3 {
        return Err(Error::invalid(format!("partition expects J×C×F, got {shape:?}")));
    }
    if n < 2 {
        return Err(Error::invalid(format!("mixed attention needs at least 2 groups, got {n}")));
    }
    if !shape[1].is_multiple_of(n) {
        return Err(Error::invalid(format!("{} channels cannot be split into {n} groups", shape[1])));
    }
    Ok(())
}

/// Exact scalar parameter count of a model built from `config`.
pub fn parameter_count(config: &ModelConfig) -> usize {
    let (j, c, f, n) = (config.joints, config.channels, config.frames, config.groups);
    let (w, d) = (config.group_width(), config.qk_width());
    let qk = 2 * (w * d + d);
    let mut block = n * qk + c * c + c;
    match config.variant {
        Variant::Standard if config.fab => block += n * qk,
        Variant::Standard => {}
        Variant::PartialDct | Variant::FullDct => block += n * (2 * w * d + w * w),
    }
    if config.tab {
        let d_t = c;
        let hidden = (c / config.reduction).max(1);
        block += 4 * d_t + c * c;
        block += 2 * c * hidden + hidden + c + 2 * (3 * c * c + c) + 3 * c * c + c;
    }
    let pos = if config.pos_per_frame { j * c * f } else { j * c };
    config.in_channels * c + pos + config.depth * block + c * config.num_classes + config.num_classes
}

impl FreqMixFormer {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = Rng::new(seed);
        let (j, c, f) = (config.joints, config.channels, config.frames);
        let mut init = Init {
            store: &mut store,
            rng: &mut rng,
            prefix: "embed".into(),
        };
        let embed_w = init.weight("w", &[config.in_channels, c], config.in_channels, c)?;
        let pos = if config.pos_per_frame {
            init.weight("pos", &[j, c, f], j, c)?
        } else {
            init.weight("pos", &[j, c], j, c)?
        };
        let mut blocks = Vec::with_capacity(config.depth);
        for b in 0..config.depth {
            init.prefix = format!("block{b}");
            let with_fab = config.fab && config.variant == Variant::Standard;
            let mixed = MixedBlockParams::init(&mut init, c, config.groups, config.qk_width(), with_fab)?;
            let dct = match config.variant {
                Variant::Standard => Vec::new(),
                _ => (0..config.groups)
                    .map(|g| DctAttentionParams::init(&mut init, &format!("dct.{g}"), config.group_width(), config.qk_width()))
                    .collect::<Result<_>>()?,
            };
            let temporal = if config.tab {
                Some((
                    TemporalParams::init(&mut init, c, c)?,
                    ChannelTransformParams::init(&mut init, c, config.reduction)?,
                ))
            } else {
                None
            };
            blocks.push(BlockParams { mixed, dct, temporal });
        }
        init.prefix = "head".into();
        let head_w = init.weight("w", &[c, config.num_classes], c, config.num_classes)?;
        let head_b = init.zeros("b", &[config.num_classes])?;
        let basis = SpectralBasis::new(f)?;
        let fo = config.frequency_operator()?;
        Ok(Self {
            config,
            store,
            params: ModelParams {
                embed_w,
                pos,
                blocks,
                head_w,
                head_b,
            },
            basis,
            fo,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn params(&self) -> &ModelParams<ParamId> {
        &self.params
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn parameter_count(&self) -> usize {
        self.store.numel()
    }

    /// Zeroes every block's output projections so each block reduces to its residual path.
    pub fn zero_block_outputs(&mut self) {
        let mut ids = Vec::new();
        for b in &self.params.blocks {
            ids.extend([b.mixed.w_v, b.mixed.b_v]);
            ids.extend(b.dct.iter().map(|d| d.w_v));
            if let Some((t, _)) = &b.temporal {
                ids.push(t.w_v);
            }
        }
        for id in ids {
            self.store.get_mut(id).value.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn check_sample(&self, shape: &[usize]) -> Result<()> {
        let want = [self.config.joints, self.config.in_channels, self.config.frames];
        if shape != want {
            return Err(Error::shape("sample", shape, &want));
        }
        Ok(())
    }

    /// Binds all weights onto `tape`.
    pub fn bind(&self, tape: &Tape) -> ModelParams<Var> {
        self.params.map(binder(tape, &self.store))
    }

    /// `x[J×C_in×F] → [J×C×F]`: per-frame coordinate lift plus the positional table.
    pub fn embed_on(&self, tape: &Tape, p: &ModelParams<Var>, x: Var) -> Result<Var> {
        self.check_sample(&tape.shape(x))?;
        let lifted = tape.contract_axis(x, 1, p.embed_w)?;
        let pos = if self.config.pos_per_frame {
            p.pos
        } else {
            tape.broadcast_axis(p.pos, 2, self.config.frames)?
        };
        tape.add(lifted, pos).map_err(|e| in_block(e, "embedding"))
    }

    /// Eager embedding of one sample.
    pub fn embed(&self, x: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let p = self.bind(&tape);
        let xv = tape.constant(x.clone());
        let out = self.embed_on(&tape, &p, xv)?;
        Ok(tape.value(out))
    }

    fn block_on(&self, tape: &Tape, p: &BlockParams<Var>, h: Var) -> Result<(Var, BlockMaps<Var>)> {
        let cfg = &self.config;
        let groups = partition(tape, h, cfg.groups)?;
        let spatial = spatial_self_and_mixed(tape, &groups, &p.mixed.spatial)?;
        let frequency = if p.mixed.frequency.is_empty() {
            Vec::new()
        } else {
            frequency_self_and_mixed(tape, &groups, &p.mixed.frequency, &self.basis, self.fo.as_ref())?.restored
        };
        let mf = (!frequency.is_empty()).then_some(&frequency[..]);
        let fused = fuse_and_concat(tape, mf, &spatial.mixed, cfg.frames)?;
        let mut att = apply_value(tape, &fused, h, p.mixed.w_v, p.mixed.b_v)?;
        if !p.dct.is_empty() {
            let outs = groups
                .iter()
                .zip(&p.dct)
                .map(|(&g, dp)| match cfg.variant {
                    Variant::FullDct => full_dct_attention(tape, g, dp, &self.basis),
                    _ => partial_dct_attention(tape, g, dp, &self.basis),
                })
                .collect::<Result<Vec<_>>>()?;
            let dct = tape.concat(&outs, 1)?;
            att = tape.add(att, dct)?;
        }
        let mut h = tape.add(h, att)?;
        let mut temporal = None;
        if let Some((tp, ct)) = &p.temporal {
            // the stored value weight is used as W/F: the block sums over all F
            // frames, and this keeps its scale and step size independent of F
            let tp = TemporalParams {
                w_v: tape.scale(tp.w_v, 1.0 / cfg.frames as f64)?,
                ..tp.clone()
            };
            let t = temporal_attention(tape, h, &tp, ct)?;
            h = tape.add(h, t.output)?;
            temporal = Some(t.attention);
        }

        Ok((
            h,
            BlockMaps {
                spatial: spatial.mixed,
                frequency,
                fused: fused.groups,
                temporal,
            },
        ))
    }

    /// One sample through the whole network on `tape`.
    pub fn trace_on(&self, tape: &Tape, p: &ModelParams<Var>, x: Var) -> Result<Trace> {
        let mut h = self.embed_on(tape, p, x)?;
        let mut blocks = Vec::with_capacity(p.blocks.len());
        for (b, bp) in p.blocks.iter().enumerate() {
            let (next, maps) = self.block_on(tape, bp, h).map_err(|e| in_block(e, &format!("block {b}")))?;
            h = next;
            blocks.push(maps);
        }
        let head = || -> Result<Var> {
            let pooled = tape.mean_axis(h, 2)?;
            let pooled = tape.mean_axis(pooled, 0)?;
            tape.linear(pooled, p.head_w, p.head_b)
        };
        let logits = head().map_err(|e| in_block(e, "head"))?;
        Ok(Trace { logits, blocks })
    }

    /// Logits `[classes]` of one sample.
    pub fn logits_on(&self, tape: &Tape, p: &ModelParams<Var>, x: Var) -> Result<Var> {
        Ok(self.trace_on(tape, p, x)?.logits)
    }

    /// Logits of a single sample `[J×C_in×F]`.
    pub fn forward_sample(&self, x: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let p = self.bind(&tape);
        let xv = tape.constant(x.clone());
        let logits = self.logits_on(&tape, &p, xv)?;
        Ok(tape.value(logits))
    }

    /// `batch[B×J×C_in×F] → [B×classes]`; samples are evaluated in parallel.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        let s = batch.shape();
        if s.len() != 4 {
            return Err(Error::invalid(format!("batch must be B×J×C_in×F, got {s:?}")));
        }
        self.check_sample(&s[1..])?;
        let per = s[1..].iter().product::<usize>();
        let rows = batch
            .data()
            .par_chunks(per)
            .map(|chunk| self.forward_sample(&Tensor::new(s[1..].to_vec(), chunk.to_vec())?))
            .collect::<Result<Vec<_>>>()?;
        let k = self.config.num_classes;
        let data = rows.iter().flat_map(|r| r.data().iter().copied()).collect();
        Tensor::new(vec![s[0], k], data)
    }

    /// Cross-entropy loss of one sample, its logits and the parameter gradients.
    pub fn loss_and_gradients(&self, x: &Tensor, label: usize) -> Result<(f64, Tensor, Gradients)> {
        let tape = Tape::new();
        let p = self.bind(&tape);
        let xv = tape.constant(x.clone());
        let logits = self.logits_on(&tape, &p, xv)?;
        let loss = tape.cross_entropy(logits, label)?;
        let value = tape.item(loss);
        let logits = tape.value(logits);
        Ok((value, logits, tape.backward(loss)?))
    }

    /// Cross-entropy loss of one sample without gradients.
    pub fn loss(&self, x: &Tensor, label: usize) -> Result<f64> {
        let tape = Tape::new();
        let p = self.bind(&tape);
        let xv = tape.constant(x.clone());
        let logits = self.logits_on(&tape, &p, xv)?;
        let loss = tape.cross_entropy(logits, label)?;
        Ok(tape.item(loss))
    }

    /// Evaluated attention maps of every block for one sample.
    pub fn attention_maps(&self, x: &Tensor) -> Result<Vec<BlockMaps<Tensor>>> {
        let tape = Tape::new();
        let p = self.bind(&tape);
        let xv = tape.constant(x.clone());
        let trace = self.trace_on(&tape, &p, xv)?;
        let ev = |vs: &[Var]| vs.iter().map(|&v| tape.value(v)).collect::<Vec<_>>();
        Ok(trace
            .blocks
            .iter()
            .map(|b| BlockMaps {
                spatial: ev(&b.spatial),
                frequency: ev(&b.frequency),
                fused: ev(&b.fused),
                temporal: b.temporal.map(|t| tape.value(t)),
            })
            .collect())
    }
}
