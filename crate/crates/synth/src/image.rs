//! Procedural 32x32 images with one documented visual motif per finding.
//!
//! Geometry conventions:
//! - `left` is columns 0..16, `right` is the mirror across the vertical
//!   midline (column c maps to 31 - c);
//! - background noise is generated for the left half and mirrored, and all
//!   central structures are symmetric, so a left-sided and a right-sided
//!   motif with the same seed produce exact mirror images;
//! - motifs are additive intensity changes scaled by severity, clamped to
//!   [0, 1] at the end.
//!
//! Motif map (canonical left-side coordinates, `rows x cols`):
//! - Enlarged Cardiomediastinum: widened bright central band, rows 6..26,
//!   cols 10..22
//! - Cardiomegaly: bright ellipse over the lower mediastinum
//! - Lung Lesion: small bright disc centred at (3, 6)
//! - Lung Opacity: solid rectangle rows 12..18, cols 4..12
//! - Edema: grid-wide additive haze
//! - Consolidation: dense block rows 18..24, cols 3..11
//! - Pneumonia: checkerboard texture rows 4..10, cols 4..12
//! - Atelectasis: thin horizontal band rows 24..27, cols 2..14
//! - Pneumothorax: darkened lateral strip rows 4..20, cols 0..3
//! - Pleural Effusion: bright basal wedge rows 27..32, cols 1..13
//! - Pleural Other: bright lateral stripe rows 22..30, cols 0..2
//! - Fracture: bright rib line at row 11, cols 2..13, broken at cols 7..8
//! - Support Devices: bright vertical wire cols 9..10, rows 8..24 plus a
//!   small box at rows 22..25

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Result, SynthError};
use crate::findings::{has_conflict, Finding, FindingSpec, Laterality};

pub const IMAGE_SIDE: usize = 32;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

const BASE: f64 = 0.10;
const NOISE_AMP: f64 = 0.03;

/// Additive contributions of one finding's motif in canonical (left-side)
/// coordinates.
fn motif_cells(finding: Finding, amp: f64) -> Vec<(usize, usize, f64)> {
    let mut cells = Vec::new();
    match finding {
        Finding::NoFinding => {}
        Finding::EnlargedCardiomediastinum => {
            for r in 6..26 {
                for c in 10..22 {
                    cells.push((r, c, 0.22 * amp));
                }
            }
        }
        Finding::Cardiomegaly => {
            for r in 14..30 {
                for c in 8..24 {
                    let dr = (r as f64 - 22.0) / 8.0;
                    let dc = (c as f64 - 15.5) / 8.0;
                    if dr * dr + dc * dc <= 1.0 {
                        cells.push((r, c, 0.25 * amp));
                    }
                }
            }
        }
        Finding::LungLesion => {
            for r in 0..7 {
                for c in 3..10 {
                    let dr = r as f64 - 3.0;
                    let dc = c as f64 - 6.0;
                    if dr * dr + dc * dc <= 6.5 {
                        cells.push((r, c, 0.5 * amp));
                    }
                }
            }
        }
        Finding::LungOpacity => {
            for r in 12..18 {
                for c in 4..12 {
                    cells.push((r, c, 0.22 * amp));
                }
            }
        }
        Finding::Edema => {
            for r in 0..IMAGE_SIDE {
                for c in 0..IMAGE_SIDE {
                    cells.push((r, c, 0.16 * amp));
                }
            }
        }
        Finding::Consolidation => {
            for r in 18..24 {
                for c in 3..11 {
                    cells.push((r, c, 0.35 * amp));
                }
            }
        }
        Finding::Pneumonia => {
            for r in 4..10 {
                for c in 4..12 {
                    if (r + c) % 2 == 0 {
                        cells.push((r, c, 0.40 * amp));
                    }
                }
            }
        }
        Finding::Atelectasis => {
            for r in 24..27 {
                for c in 2..14 {
                    cells.push((r, c, 0.35 * amp));
                }
            }
        }
        Finding::Pneumothorax => {
            for r in 4..20 {
                for c in 0..3 {
                    cells.push((r, c, -0.09 * amp));
                }
            }
        }
        Finding::PleuralEffusion => {
            // Wedge deepening toward the base.
            for r in 27..IMAGE_SIDE {
                let depth = (r - 26) as f64 / 5.0;
                for c in 1..13 {
                    cells.push((r, c, 0.40 * amp * depth));
                }
            }
        }
        Finding::PleuralOther => {
            for r in 22..30 {
                for c in 0..2 {
                    cells.push((r, c, 0.35 * amp));
                }
            }
        }
        Finding::Fracture => {
            for c in 2..13 {
                if !(7..9).contains(&c) {
                    cells.push((11, c, 0.45 * amp));
                }
            }
        }
        Finding::SupportDevices => {
            for r in 8..24 {
                cells.push((r, 9, 0.40 * amp));
            }
            for r in 22..25 {
                for c in 7..10 {
                    cells.push((r, c, 0.40 * amp));
                }
            }
        }
    }
    cells
}

fn apply_motif(img: &mut [f64], spec: &FindingSpec) {
    let amp = spec.severity.scale();
    let cells = motif_cells(spec.finding, amp);
    let (draw_left, draw_right) = if spec.finding.is_lateral() {
        match spec.laterality {
            Laterality::Left => (true, false),
            Laterality::Right => (false, true),
            Laterality::Bilateral | Laterality::None => (true, true),
        }
    } else {
        // Central motifs are authored symmetric; draw once.
        (true, false)
    };
    for &(r, c, v) in &cells {
        if draw_left {
            img[r * IMAGE_SIDE + c] += v;
        }
        if draw_right {
            img[r * IMAGE_SIDE + (IMAGE_SIDE - 1 - c)] += v;
        }
    }
}

/// Render the planted findings to pixels in [0, 1]. Deterministic in
/// `(findings, seed)`.
pub fn render_image(findings: &[FindingSpec], seed: u64) -> Result<Vec<f64>> {
    if has_conflict(findings) {
        return Err(SynthError::ConflictingFindings);
    }

    let mut img = vec![BASE; IMAGE_PIXELS];

    // Mirror-symmetric background noise.
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for r in 0..IMAGE_SIDE {
        for c in 0..IMAGE_SIDE / 2 {
            let n = rng.gen_range(-NOISE_AMP..NOISE_AMP);
            img[r * IMAGE_SIDE + c] += n;
            img[r * IMAGE_SIDE + (IMAGE_SIDE - 1 - c)] += n;
        }
    }

    // Mediastinal band, symmetric about the midline.
    for r in 0..IMAGE_SIDE {
        for c in 13..19 {
            img[r * IMAGE_SIDE + c] += 0.15;
        }
    }

    for spec in findings {
        apply_motif(&mut img, spec);
    }

    for v in &mut img {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(img)
}

/// Pure-motif template for one finding (background cancels exactly).
pub fn motif_template(finding: Finding, laterality: Laterality) -> Vec<f64> {
    let spec = FindingSpec::new(
        finding,
        if finding.is_lateral() { laterality } else { Laterality::None },
        crate::findings::Severity::Large,
    );
    let mut img = vec![0.0; IMAGE_PIXELS];
    apply_motif(&mut img, &spec);
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::findings::Severity;

    #[test]
    fn rendering_is_deterministic() {
        let normal = [FindingSpec::normal()];
        let a = render_image(&normal, 7).unwrap();
        let b = render_image(&normal, 7).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = render_image(&normal, 8).unwrap();
        assert!(a != c, "different seeds give different noise");
    }

    #[test]
    fn laterality_flips_are_exact_mirrors() {
        let left = render_image(
            &[FindingSpec::new(Finding::PleuralEffusion, Laterality::Left, Severity::Moderate)],
            21,
        )
        .unwrap();
        let right = render_image(
            &[FindingSpec::new(Finding::PleuralEffusion, Laterality::Right, Severity::Moderate)],
            21,
        )
        .unwrap();
        for r in 0..IMAGE_SIDE {
            for c in 0..IMAGE_SIDE {
                let mirrored = right[r * IMAGE_SIDE + (IMAGE_SIDE - 1 - c)];
                assert_eq!(left[r * IMAGE_SIDE + c].to_bits(), mirrored.to_bits());
            }
        }
    }

    #[test]
    fn edema_raises_mean_intensity_over_paired_seeds() {
        for seed in 0..50u64 {
            let normal = render_image(&[FindingSpec::normal()], seed).unwrap();
            let edema = render_image(
                &[FindingSpec::new(Finding::Edema, Laterality::None, Severity::Small)],
                seed,
            )
            .unwrap();
            let mean = |img: &[f64]| img.iter().sum::<f64>() / img.len() as f64;
            assert!(mean(&edema) > mean(&normal), "seed {seed}");
        }
    }

    #[test]
    fn no_finding_conflicts_are_rejected() {
        let specs = [
            FindingSpec::normal(),
            FindingSpec::new(Finding::Edema, Laterality::None, Severity::Small),
        ];
        assert!(matches!(render_image(&specs, 0), Err(SynthError::ConflictingFindings)));
    }

    #[test]
    fn pixels_stay_in_unit_range() {
        let specs = [
            FindingSpec::new(Finding::Edema, Laterality::None, Severity::Large),
            FindingSpec::new(Finding::PleuralEffusion, Laterality::Bilateral, Severity::Large),
            FindingSpec::new(Finding::Consolidation, Laterality::Bilateral, Severity::Large),
        ];
        let img = render_image(&specs, 3).unwrap();
        assert!(img.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
