use super::*;
use crate::attention::{frequency_self_and_mixed, spatial_self_and_mixed, temporal_attention, QkProjection};
use crate::error::Result;
use crate::numerics::{ParamId, Rng, Tape, Tensor, Var};

fn sample(rng: &mut Rng, cfg: &ModelConfig) -> Tensor {
    rng.uniform_tensor(&[cfg.joints, cfg.in_channels, cfg.frames], -1.0, 1.0)
}

#[test]
fn partition_widths_and_round_trip() {
    let mut rng = Rng::new(0);
    let x = rng.uniform_tensor(&[3, 8, 4], -1.0, 1.0);
    let parts = partition_tensor(&x, 4).unwrap();
    assert_eq!(parts.len(), 4);
    assert!(parts.iter().all(|p| p.shape() == [3, 2, 4]));
    let refs: Vec<&Tensor> = parts.iter().collect();
    assert_eq!(Tensor::concat(&refs, 1).unwrap(), x);
    assert_eq!(parts[1].get(&[2, 0, 3]), x.get(&[2, 2, 3]));
    assert!(partition_tensor(&x, 1).is_err());
    assert!(partition_tensor(&x, 3).is_err());
}

#[test]
fn embedding_is_linear_plus_positional() {
    let cfg = ModelConfig::tiny();
    let mut model = FreqMixFormer::new(cfg.clone(), 1).unwrap();
    let zero = Tensor::zeros(&[cfg.joints, cfg.in_channels, cfg.frames]);
    let pos = model.store().value(model.params().pos).clone();
    let out = model.embed(&zero).unwrap();
    for f in 0..cfg.frames {
        assert_eq!(out.slice_axis(2, f, 1).unwrap().reshape(&[cfg.joints, cfg.channels]).unwrap(), pos);
    }
    let pos_id = model.params().pos;
    model.store_mut().get_mut(pos_id).value = Tensor::zeros(&[cfg.joints, cfg.channels]);
    assert!(model.embed(&zero).unwrap().data().iter().all(|&v| v == 0.0));

    let mut rng = Rng::new(2);
    let x = sample(&mut rng, &cfg);
    let w = model.store().value(model.params().embed_w).clone();
    let got = model.embed(&x).unwrap();
    let oracle = Tensor::from_fn(&[cfg.joints, cfg.channels, cfg.frames], |ix| {
        (0..cfg.in_channels).map(|k| x.get(&[ix[0], k, ix[2]]) * w.get(&[k, ix[1]])).sum()
    });
    assert!(got.max_abs_diff(&oracle) < 1e-14);
    assert!(model.embed(&Tensor::zeros(&[cfg.joints, 2, cfg.frames])).is_err());
}

#[test]
fn per_frame_positional_table() {
    let cfg = ModelConfig {
        pos_per_frame: true,
        ..ModelConfig::tiny()
    };
    let model = FreqMixFormer::new(cfg.clone(), 1).unwrap();
    let zero = Tensor::zeros(&[cfg.joints, cfg.in_channels, cfg.frames]);
    assert_eq!(&model.embed(&zero).unwrap(), model.store().value(model.params().pos));
    assert_eq!(model.parameter_count(), parameter_count(&cfg));
}

#[test]
fn parameter_count_matches_store_for_every_layout() {
    for variant in [Variant::Standard, Variant::PartialDct, Variant::FullDct] {
        for (fab, fo, tab) in [(true, true, true), (false, false, true), (true, false, false), (false, false, false)] {
            let cfg = ModelConfig {
                variant,
                fab,
                fo,
                tab,
                ..ModelConfig::tiny()
            };
            let model = FreqMixFormer::new(cfg.clone(), 0).unwrap();
            let brute: usize = model.store().iter().map(|(_, p)| p.value.len()).sum();
            assert_eq!(parameter_count(&cfg), brute, "{cfg:?}");
        }
    }
}

#[test]
fn parameter_count_grows_with_groups() {
    let counts: Vec<usize> = (2..=6)
        .map(|n| {
            parameter_count(&ModelConfig {
                groups: n,
                ..ModelConfig::full_scale()
            })
        })
        .collect();
    assert!(counts.windows(2).all(|w| w[0] < w[1]), "{counts:?}");
}

#[test]
fn forward_shape_and_identical_rows() {
    let cfg = ModelConfig::tiny();
    let model = FreqMixFormer::new(cfg.clone(), 3).unwrap();
    let mut rng = Rng::new(4);
    let a = sample(&mut rng, &cfg);
    let b = sample(&mut rng, &cfg);
    let batch = Tensor::concat(
        &[&a.broadcast_axis(0, 1).unwrap(), &b.broadcast_axis(0, 1).unwrap(), &a.broadcast_axis(0, 1).unwrap()],
        0,
    )
    .unwrap();
    let logits = model.forward(&batch).unwrap();
    assert_eq!(logits.shape(), [3, cfg.num_classes]);
    let row = |i| logits.slice_axis(0, i, 1).unwrap();
    assert_eq!(row(0), row(2));
    assert_ne!(row(0), row(1));
    assert!(model.forward(&a).is_err());
}

#[test]
fn construction_is_deterministic() {
    let cfg = ModelConfig::tiny();
    let a = FreqMixFormer::new(cfg.clone(), 9).unwrap();
    let b = FreqMixFormer::new(cfg.clone(), 9).unwrap();
    let c = FreqMixFormer::new(cfg, 10).unwrap();
    let values = |m: &FreqMixFormer| m.store().iter().map(|(_, p)| p.value.clone()).collect::<Vec<_>>();
    assert_eq!(values(&a), values(&b));
    assert_ne!(values(&a), values(&c));
}

fn eval(f: impl FnOnce(&Tape) -> Result<Var>) -> Tensor {
    let tape = Tape::new();
    let v = f(&tape).unwrap();
    tape.value(v)
}

fn qk_consts(tape: &Tape, model: &FreqMixFormer, p: &QkProjection<ParamId>) -> QkProjection<Var> {
    p.map(|id| tape.constant(model.store().value(*id).clone()))
}

#[test]
fn tiny_forward_matches_staged_composition() {
    let cfg = ModelConfig::tiny();
    let model = FreqMixFormer::new(cfg.clone(), 11).unwrap();
    let mut rng = Rng::new(12);
    // perturb zero-initialised biases so every term is exercised
    let mut model = model;
    let ids: Vec<ParamId> = model.store().iter().map(|(id, _)| id).collect();
    for id in ids {
        let p = model.store_mut().get_mut(id);
        if p.name.contains(".b") || p.name.ends_with(".b") {
            let noise = rng.uniform_tensor(p.value.shape(), -0.3, 0.3);
            p.value = noise;
        }
    }
    let x = sample(&mut rng, &cfg);
    let val = |id: ParamId| model.store().value(id).clone();
    let (j, c, f, n) = (cfg.joints, cfg.channels, cfg.frames, cfg.groups);
    let p = model.params();

    // embedding
    let ew = val(p.embed_w);
    let pos = val(p.pos);
    let h0 = Tensor::from_fn(&[j, c, f], |ix| {
        pos.get(&[ix[0], ix[1]]) + (0..cfg.in_channels).map(|k| x.get(&[ix[0], k, ix[2]]) * ew.get(&[k, ix[1]])).sum::<f64>()
    });
    let bp = &p.blocks[0];
    let groups = partition_tensor(&h0, n).unwrap();
    let consts = |tape: &Tape| groups.iter().map(|g| tape.constant(g.clone())).collect::<Vec<_>>();

    // spatial and frequency branches, each evaluated on its own
    let ms: Vec<Tensor> = (0..n)
        .map(|i| {
            eval(|t| {
                let proj: Vec<_> = bp.mixed.spatial.iter().map(|q| qk_consts(t, &model, q)).collect();
                Ok(spatial_self_and_mixed(t, &consts(t), &proj)?.mixed[i])
            })
        })
        .collect();
    let fo = cfg.frequency_operator().unwrap();
    let mf: Vec<Tensor> = (0..n)
        .map(|i| {
            eval(|t| {
                let proj: Vec<_> = bp.mixed.frequency.iter().map(|q| qk_consts(t, &model, q)).collect();
                Ok(frequency_self_and_mixed(t, &consts(t), &proj, model.basis(), fo.as_ref())?.restored[i])
            })
        })
        .collect();

    // fusion, value path, residual
    let (wv, bv) = (val(bp.mixed.w_v), val(bp.mixed.b_v));
    let v = Tensor::from_fn(&[j, c, f], |ix| {
        bv.get(&[ix[1]]) + (0..c).map(|k| h0.get(&[ix[0], k, ix[2]]) * wv.get(&[k, ix[1]])).sum::<f64>()
    });
    let width = c / n;
    let h1 = Tensor::from_fn(&[j, c, f], |ix| {
        let g = ix[1] / width;
        let mixed: f64 = (0..j)
            .map(|a| (mf[g].get(&[ix[2], ix[0], a]) + ms[g].get(&[ix[0], a])) * v.get(&[a, ix[1], ix[2]]))
            .sum();
        h0.get(ix) + mixed
    });

    // temporal block with residual; the stored value weight is used as W/F
    let (tp, ct) = bp.temporal.as_ref().unwrap();
    let t_out = eval(|t| {
        let bind = |id: &ParamId| {
            let v = model.store().value(*id);
            t.constant(if *id == tp.w_v { v.scale(1.0 / f as f64) } else { v.clone() })
        };
        let h = t.constant(h1.clone());
        Ok(temporal_attention(t, h, &tp.map(bind), &ct.map(bind))?.output)
    });
    let h2 = h1.add(&t_out).unwrap();

    // pooling and head
    let (hw, hb) = (val(p.head_w), val(p.head_b));
    let pooled: Vec<f64> = (0..c)
        .map(|cc| {
            let mut s = 0.0;
            for jj in 0..j {
                for ff in 0..f {
                    s += h2.get(&[jj, cc, ff]);
                }
            }
            s / (j * f) as f64
        })
        .collect();
    let logits: Vec<f64> = (0..cfg.num_classes)
        .map(|k| hb.get(&[k]) + (0..c).map(|cc| pooled[cc] * hw.get(&[cc, k])).sum::<f64>())
        .collect();

    let got = model.forward_sample(&x).unwrap();
    for k in 0..cfg.num_classes {
        assert!((got.get(&[k]) - logits[k]).abs() < 1e-10, "class {k}: {} vs {}", got.get(&[k]), logits[k]);
    }
}

#[test]
fn zeroed_block_outputs_leave_embedding_and_head() {
    for variant in [Variant::Standard, Variant::PartialDct, Variant::FullDct] {
        let cfg = ModelConfig {
            variant,
            depth: 2,
            ..ModelConfig::tiny()
        };
        let mut model = FreqMixFormer::new(cfg.clone(), 13).unwrap();
        model.zero_block_outputs();
        let x = sample(&mut Rng::new(14), &cfg);
        let h = model.embed(&x).unwrap();
        let pooled = h.mean_axis(2).unwrap().mean_axis(0).unwrap();
        let hw = model.store().value(model.params().head_w);
        let hb = model.store().value(model.params().head_b);
        let expected = Tensor::from_fn(&[cfg.num_classes], |ix| {
            hb.get(ix) + (0..cfg.channels).map(|cc| pooled.get(&[cc]) * hw.get(&[cc, ix[0]])).sum::<f64>()
        });
        assert!(model.forward_sample(&x).unwrap().max_abs_diff(&expected) < 1e-12, "{variant}");
    }
}

#[test]
fn attention_maps_have_documented_shapes() {
    let cfg = ModelConfig::tiny();
    let model = FreqMixFormer::new(cfg.clone(), 15).unwrap();
    let x = sample(&mut Rng::new(16), &cfg);
    let maps = model.attention_maps(&x).unwrap();
    assert_eq!(maps.len(), cfg.depth);
    let b = &maps[0];
    assert_eq!(b.spatial.len(), cfg.groups);
    assert!(b.spatial.iter().all(|m| m.shape() == [cfg.joints, cfg.joints]));
    assert!(b.frequency.iter().all(|m| m.shape() == [cfg.frames, cfg.joints, cfg.joints]));
    assert!(b.fused.iter().all(|m| m.shape() == [cfg.frames, cfg.joints, cfg.joints]));
    assert_eq!(b.temporal.as_ref().unwrap().shape(), [cfg.frames, cfg.frames]);
}

#[test]
fn non_finite_activation_names_the_block() {
    let cfg = ModelConfig {
        depth: 2,
        ..ModelConfig::tiny()
    };
    let mut model = FreqMixFormer::new(cfg.clone(), 17).unwrap();
    let id = model.store().id("block1.tab.value.w").unwrap();
    model.store_mut().get_mut(id).value.data_mut()[0] = f64::MAX;
    let x = sample(&mut Rng::new(18), &cfg).scale(1e3);
    let err = model.forward_sample(&x).unwrap_err();
    assert!(err.to_string().contains("block 1"), "{err}");
}

#[test]
fn ablations_change_logits() {
    let base = ModelConfig::tiny();
    let x = sample(&mut Rng::new(19), &base);
    let full = FreqMixFormer::new(base.clone(), 20).unwrap().forward_sample(&x).unwrap();
    let no_fo = FreqMixFormer::new(ModelConfig { fo: false, ..base.clone() }, 20)
        .unwrap()
        .forward_sample(&x)
        .unwrap();
    assert!(full.max_abs_diff(&no_fo) > 1e-9);
}
