use cxr_model::{checkpoint, BundleConfig, FreezeFlags, LmConfig, ModelBundle, VisionConfig};
use cxr_text::Vocab;

fn sample_bundle() -> ModelBundle {
    let corpus = vec!["small left pleural effusion . the lungs are clear .".to_string()];
    let vocab = Vocab::build(&corpus, 32).unwrap();
    let config = BundleConfig {
        vision: VisionConfig { image_side: 16, patch_size: 8, d_model: 8, n_layers: 1, n_heads: 2 },
        projector: cxr_model::ProjectorConfig { d_in: 8, d_hidden: 8, d_out: 8 },
        lm: LmConfig { vocab_size: vocab.len(), d_model: 8, n_layers: 1, n_heads: 2, max_context: 32 },
    };
    let mut bundle = ModelBundle::init(config, vocab, 99).unwrap();
    bundle.freeze = FreezeFlags::projector_only();
    bundle
}

#[test]
fn round_trip_is_bit_exact() {
    let bundle = sample_bundle();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bundle.ckpt");
    checkpoint::save(&bundle, &path).unwrap();
    let loaded = checkpoint::load(&path).unwrap();

    assert_eq!(loaded.config, bundle.config);
    assert_eq!(loaded.freeze, bundle.freeze);
    assert_eq!(loaded.vocab.to_text(), bundle.vocab.to_text());

    let mut original = Vec::new();
    bundle.for_each_param(&mut |p| original.push((p.name.clone(), p.data.clone())));
    let mut restored = Vec::new();
    loaded.for_each_param(&mut |p| restored.push((p.name.clone(), p.data.clone())));
    assert_eq!(original.len(), restored.len());
    for ((name_a, data_a), (name_b, data_b)) in original.iter().zip(&restored) {
        assert_eq!(name_a, name_b);
        assert!(data_a.iter().zip(data_b).all(|(x, y)| x.to_bits() == y.to_bits()), "{name_a}");
    }

    // Save-load-save produces identical bytes.
    let path2 = dir.path().join("bundle2.ckpt");
    checkpoint::save(&loaded, &path2).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

#[test]
fn rejects_corrupt_files() {
    let bundle = sample_bundle();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bundle.ckpt");
    checkpoint::save(&bundle, &path).unwrap();

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    let bad = dir.path().join("bad_magic.ckpt");
    std::fs::write(&bad, &bytes).unwrap();
    assert!(checkpoint::load(&bad).is_err());

    let mut truncated = std::fs::read(&path).unwrap();
    truncated.truncate(truncated.len() - 9);
    let short = dir.path().join("short.ckpt");
    std::fs::write(&short, &truncated).unwrap();
    assert!(checkpoint::load(&short).is_err());
}
