use stylecurve_core::enhancer::KnotLayout;
use stylecurve_nn::model::{decode_weights, encode_weights, load_weights, save_weights};
use stylecurve_nn::{
    fixup_init, CurveEncoderConfig, Error, Graph, MappingConfig, ModelConfig, Pipeline,
    StyleEncoderConfig, Tensor, TrunkConfig,
};

#[test]
fn sum_of_weights_has_unit_gradient() {
    let mut g = Graph::new();
    let w = g
        .param(Tensor::new(vec![2, 3], vec![0.5, -1.0, 2.0, 3.0, 0.0, 7.0]).unwrap())
        .unwrap();
    let s = g.sum(w).unwrap();
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.get(w).unwrap(), &Tensor::full(&[2, 3], 1.0));
}

#[test]
fn non_scalar_root_is_rejected() {
    let mut g = Graph::new();
    let w = g.param(Tensor::zeros(&[3])).unwrap();
    let r = g.relu(w).unwrap();
    assert!(matches!(g.backward(r), Err(Error::InvalidInput(_))));
}

#[test]
fn second_backward_errors_until_reset() {
    let mut g = Graph::new();
    let w = g
        .param(Tensor::new(vec![2], vec![1.0, -2.0]).unwrap())
        .unwrap();
    let r = g.relu(w).unwrap();
    let s = g.sum(r).unwrap();
    let first = g.backward(s).unwrap().get(w).cloned().unwrap();
    assert!(matches!(g.backward(s), Err(Error::InvalidInput(_))));
    g.reset_backward();
    // recomputed, not accumulated onto the first result
    assert_eq!(g.backward(s).unwrap().get(w).unwrap(), &first);
    assert_eq!(first.data(), &[1.0, 0.0]);
}

#[test]
fn unused_parameters_get_zero_gradient() {
    let cfg = MappingConfig {
        latent_dim: 3,
        hidden: vec![4],
        code_channels: vec![2],
    };
    let w = fixup_init(&ModelConfig::Mapping(cfg), 0).unwrap();
    let mut g = Graph::new();
    let p = w.bind(&mut g, true).unwrap();
    let extra = g.param(Tensor::full(&[2], 3.0)).unwrap();
    let s = g.sum(extra).unwrap();
    let grads = g.backward(s).unwrap();
    for t in p.gradients(&g, &grads) {
        assert!(t.data().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn inputs_must_be_finite() {
    let mut g = Graph::new();
    assert!(g
        .input(Tensor::new(vec![1], vec![f64::NAN]).unwrap())
        .is_err());
    assert!(g
        .param(Tensor::new(vec![1], vec![f64::INFINITY]).unwrap())
        .is_err());
}

fn small_pipeline(seed: u64) -> Pipeline {
    let trunk = |widths: Vec<usize>| TrunkConfig {
        input_size: 16,
        stem_width: 4,
        stage_widths: widths,
        blocks_per_stage: 1,
    };
    Pipeline::init(
        StyleEncoderConfig {
            trunk: trunk(vec![4, 6]),
            styles: 3,
            scale: 30.0,
        },
        MappingConfig {
            latent_dim: 6,
            hidden: vec![8],
            code_channels: vec![4, 5],
        },
        CurveEncoderConfig {
            trunk: trunk(vec![4, 5]),
            knot_counts: KnotLayout::uniform(5, 3).unwrap().counts().to_vec(),
            depth: 8,
        },
        seed,
    )
    .unwrap()
}

#[test]
fn weights_file_round_trip() {
    let p = small_pipeline(4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    p.save(&path).unwrap();
    let back = Pipeline::load(&path).unwrap();
    // stored as f32: the reloaded values are the f32-rounded originals
    for (a, b) in [
        (p.style(), back.style()),
        (p.mapping(), back.mapping()),
        (p.encoder(), back.encoder()),
    ] {
        assert_eq!(a.config(), b.config());
        for ((na, ta), (nb, tb)) in a.tensors().iter().zip(b.tensors()) {
            assert_eq!(na, nb);
            assert_eq!(ta.shape(), tb.shape());
            for (x, y) in ta.data().iter().zip(tb.data()) {
                assert_eq!((*x as f32) as f64, *y);
            }
        }
    }
    // a second save is byte-identical
    assert_eq!(back.to_bytes().unwrap(), std::fs::read(&path).unwrap());
    assert_eq!(Pipeline::load(&path).unwrap(), back);

    let models = load_weights(&path).unwrap();
    assert_eq!(models.len(), 3);
    save_weights(dir.path().join("one.bin"), &[&models[1]]).unwrap();
    let one = load_weights(dir.path().join("one.bin")).unwrap();
    assert_eq!(one, vec![models[1].clone()]);
    assert!(Pipeline::from_models(one).is_err());
    assert_eq!(
        decode_weights(&encode_weights(&[&models[0]]).unwrap()).unwrap()[0],
        models[0]
    );
}

#[test]
fn header_starts_with_magic_and_length() {
    let p = small_pipeline(1);
    let bytes = p.to_bytes().unwrap();
    assert_eq!(&bytes[..8], b"STARENH1");
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header: serde_json::Value = serde_json::from_slice(&bytes[16..16 + len]).unwrap();
    assert_eq!(header["models"].as_array().unwrap().len(), 3);
    assert_eq!(header["models"][0]["config"]["kind"], "style_encoder");
    assert_eq!(header["models"][0]["tensors"][0]["name"], "stem.w");
    let values: usize = [p.style(), p.mapping(), p.encoder()]
        .iter()
        .map(|m| m.parameter_count())
        .sum();
    assert_eq!(bytes.len(), 16 + len + 4 * values);
}

#[test]
fn pipeline_rejects_inconsistent_parts() {
    let a = small_pipeline(1);
    let wrong_map = fixup_init(
        &ModelConfig::Mapping(MappingConfig {
            latent_dim: 6,
            hidden: vec![8],
            code_channels: vec![4, 6],
        }),
        0,
    )
    .unwrap();
    assert!(Pipeline::new(a.style().clone(), wrong_map, a.encoder().clone()).is_err());
    assert!(Pipeline::new(
        a.mapping().clone(),
        a.mapping().clone(),
        a.encoder().clone()
    )
    .is_err());
}
