use cxr_model::{
    encode_image, forward_lm, project, BundleConfig, FreezeFlags, LmConfig, ModelBundle,
    ModelError, VisionConfig,
};
use cxr_tensor::{finite_diff_check, Graph};
use cxr_text::{Vocab, SEP};

fn tiny_vocab() -> Vocab {
    let corpus = vec![
        "the lungs are clear . no acute cardiopulmonary abnormality .".to_string(),
        "small left pleural effusion . the heart size is within normal limits .".to_string(),
    ];
    Vocab::build(&corpus, 64).unwrap()
}

fn tiny_bundle(seed: u64) -> ModelBundle {
    let vocab = tiny_vocab();
    let config = BundleConfig {
        vision: VisionConfig { image_side: 16, patch_size: 4, d_model: 16, n_layers: 1, n_heads: 2 },
        projector: cxr_model::ProjectorConfig { d_in: 16, d_hidden: 16, d_out: 16 },
        lm: LmConfig {
            vocab_size: vocab.len(),
            d_model: 16,
            n_layers: 1,
            n_heads: 2,
            max_context: 64,
        },
    };
    ModelBundle::init(config, vocab, seed).unwrap()
}

#[test]
fn encode_image_patch_count() {
    let bundle = tiny_bundle(1);
    let mut g = Graph::new();
    let bound = bundle.bind_inference(&mut g);
    let pixels = vec![0.25; 16 * 16];
    let out = encode_image(&mut g, &bound.vision, &bundle.config.vision, &pixels).unwrap();
    assert_eq!(g.shape(out), &[16, 16]);
}

#[test]
fn encode_image_is_deterministic_for_equal_inputs() {
    let bundle = tiny_bundle(2);
    let run = |pixels: &[f64]| {
        let mut g = Graph::new();
        let bound = bundle.bind_inference(&mut g);
        let out = encode_image(&mut g, &bound.vision, &bundle.config.vision, pixels).unwrap();
        g.data(out).to_vec()
    };
    let zero_a = run(&vec![0.0; 256]);
    let zero_b = run(&vec![0.0; 256]);
    assert!(zero_a.iter().zip(&zero_b).all(|(x, y)| x.to_bits() == y.to_bits()));

    let img: Vec<f64> = (0..256).map(|i| (i % 7) as f64 / 7.0).collect();
    let a = run(&img);
    let b = run(&img);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn encode_image_rejects_bad_inputs() {
    let bundle = tiny_bundle(3);
    let mut g = Graph::new();
    let bound = bundle.bind_inference(&mut g);
    let short = vec![0.0; 100];
    assert!(matches!(
        encode_image(&mut g, &bound.vision, &bundle.config.vision, &short),
        Err(ModelError::BadImageShape(_))
    ));
    let out_of_range = vec![1.5; 256];
    assert!(matches!(
        encode_image(&mut g, &bound.vision, &bundle.config.vision, &out_of_range),
        Err(ModelError::BadImageShape(_))
    ));
}

#[test]
fn project_is_per_token() {
    let bundle = tiny_bundle(4);
    let rows = 3;
    let data: Vec<f64> = (0..rows * 16).map(|i| (i as f64) * 0.01 - 0.2).collect();
    let run = |data: &[f64]| {
        let mut g = Graph::new();
        let bound = bundle.bind_inference(&mut g);
        let x = g.constant(data.to_vec(), vec![rows, 16]).unwrap();
        let y = project(&mut g, &bound.projector, x).unwrap();
        g.data(y).to_vec()
    };
    let base = run(&data);
    // Swap rows 0 and 2 of the input; outputs must swap identically.
    let mut swapped = data.clone();
    for j in 0..16 {
        swapped.swap(j, 2 * 16 + j);
    }
    let out = run(&swapped);
    for j in 0..16 {
        assert_eq!(base[j].to_bits(), out[2 * 16 + j].to_bits());
        assert_eq!(base[2 * 16 + j].to_bits(), out[j].to_bits());
    }
}

#[test]
fn project_with_zero_weights_yields_bias_rows() {
    let mut bundle = tiny_bundle(5);
    for p in [&mut bundle.projector.fc1.w, &mut bundle.projector.fc2.w] {
        p.data.iter_mut().for_each(|v| *v = 0.0);
    }
    bundle.projector.fc1.b.data.iter_mut().for_each(|v| *v = 0.0);
    let bias: Vec<f64> = (0..16).map(|i| i as f64 * 0.1).collect();
    bundle.projector.fc2.b.data = bias.clone();

    let mut g = Graph::new();
    let bound = bundle.bind_inference(&mut g);
    let x = g.constant(vec![0.7; 2 * 16], vec![2, 16]).unwrap();
    let y = project(&mut g, &bound.projector, x).unwrap();
    for r in 0..2 {
        for j in 0..16 {
            assert_eq!(g.data(y)[r * 16 + j], bias[j]);
        }
    }
}

#[test]
fn project_gradient_matches_finite_differences() {
    let bundle = tiny_bundle(6);
    let x: Vec<f64> = (0..2 * 16).map(|i| ((i * 13 + 5) % 17) as f64 * 0.05 - 0.4).collect();
    let err = finite_diff_check(
        |g, x| {
            let mut bundle = bundle.clone();
            bundle.freeze = FreezeFlags::all();
            let bound = bundle.bind_inference(g);
            let y = project(g, &bound.projector, x).expect("projector shapes are valid");
            Ok(g.l2_norm_sq(y))
        },
        &x,
        &[2, 16],
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "projector gradient error {err}");
}

fn logits_for(bundle: &ModelBundle, targets: &[u32]) -> Vec<f64> {
    let mut g = Graph::new();
    let bound = bundle.bind_inference(&mut g);
    let pixels: Vec<f64> = (0..256).map(|i| ((i * 31 + 7) % 11) as f64 / 11.0).collect();
    let prefix = bundle.build_prefix(&mut g, &bound, &pixels, "describe the findings").unwrap();
    let logits = forward_lm(&mut g, &bound.lm, &bundle.config.lm, prefix, targets).unwrap();
    g.data(logits).to_vec()
}

#[test]
fn forward_lm_is_causal_at_the_last_token() {
    let bundle = tiny_bundle(7);
    let targets: Vec<u32> = bundle.vocab.encode("the lungs are clear .");
    let base = logits_for(&bundle, &targets);
    let mut perturbed = targets.clone();
    let last = perturbed.len() - 1;
    perturbed[last] = SEP;
    let changed = logits_for(&bundle, &perturbed);
    let vocab = bundle.config.lm.vocab_size;
    // All logit rows are unchanged: row t only sees targets before t.
    for t in 0..targets.len() {
        for j in 0..vocab {
            assert_eq!(base[t * vocab + j].to_bits(), changed[t * vocab + j].to_bits());
        }
    }
}

#[test]
fn lm_logits_before_t_ignore_tokens_at_or_after_t() {
    let bundle = tiny_bundle(8);
    let targets: Vec<u32> = bundle.vocab.encode("small left pleural effusion .");
    let base = logits_for(&bundle, &targets);
    let vocab = bundle.config.lm.vocab_size;
    for t in 1..targets.len() {
        let mut perturbed = targets.clone();
        for id in perturbed.iter_mut().skip(t) {
            *id = SEP;
        }
        let changed = logits_for(&bundle, &perturbed);
        // Rows 0..=t predict targets[0..=t] from strictly earlier context.
        for row in 0..=t {
            for j in 0..vocab {
                assert_eq!(
                    base[row * vocab + j].to_bits(),
                    changed[row * vocab + j].to_bits(),
                    "row {row} changed after perturbing position {t}"
                );
            }
        }
    }
}

#[test]
fn text_only_prefix_runs_the_lm_without_visual_tokens() {
    let bundle = tiny_bundle(9);
    let mut g = Graph::new();
    let bound = bundle.bind_inference(&mut g);
    let instr: Vec<usize> =
        bundle.vocab.encode("the heart size is").iter().map(|&i| i as usize).collect();
    let prefix = g.embedding_lookup(bound.lm.embed, &instr).unwrap();
    let targets = bundle.vocab.encode("within normal limits .");
    let logits = forward_lm(&mut g, &bound.lm, &bundle.config.lm, prefix, &targets).unwrap();
    assert_eq!(g.shape(logits), &[targets.len(), bundle.config.lm.vocab_size]);
}

#[test]
fn forward_lm_rejects_context_overflow() {
    let bundle = tiny_bundle(10);
    let mut g = Graph::new();
    let bound = bundle.bind_inference(&mut g);
    let pixels: Vec<f64> = (0..256).map(|i| ((i * 31 + 7) % 11) as f64 / 11.0).collect();
    let prefix = bundle.build_prefix(&mut g, &bound, &pixels, "describe the findings").unwrap();
    let targets = vec![SEP; 64];
    assert!(matches!(
        forward_lm(&mut g, &bound.lm, &bundle.config.lm, prefix, &targets),
        Err(ModelError::ContextOverflow { .. })
    ));
}

#[test]
fn generate_respects_token_cap_and_determinism() {
    let bundle = tiny_bundle(11);
    let pixels: Vec<f64> = (0..256).map(|i| ((i * 3) % 9) as f64 / 9.0).collect();
    let one = bundle.generate_ids(&pixels, "describe", 1).unwrap();
    assert_eq!(one.len(), 1, "one decode step emits one token for this seed");
    let a = bundle.generate(&pixels, "describe", 16).unwrap();
    let b = bundle.generate(&pixels, "describe", 16).unwrap();
    assert_eq!(a, b);
    assert!(matches!(
        bundle.generate(&pixels, "describe", 0),
        Err(ModelError::InvalidArgument(_))
    ));
}

#[test]
fn default_config_is_under_desk_scale_budget() {
    let vocab = tiny_vocab();
    let config = BundleConfig::toy(vocab.len());
    let bundle = ModelBundle::init(config, vocab, 0).unwrap();
    let n = bundle.param_count();
    assert!(n < 5_000_000, "parameter count {n}");
    assert!(n > 100_000, "suspiciously small bundle: {n}");
}

#[test]
fn frozen_components_bind_without_gradients() {
    let mut bundle = tiny_bundle(12);
    bundle.freeze = FreezeFlags::projector_only();
    let mut g = Graph::new();
    let bound = bundle.bind(&mut g);
    bound.vision.for_each(&mut |&v| assert!(!g.value(v).requires_grad));
    bound.lm.for_each(&mut |&v| assert!(!g.value(v).requires_grad));
    bound.projector.for_each(&mut |&v| assert!(g.value(v).requires_grad));
}
