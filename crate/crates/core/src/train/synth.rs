//! Synthetic natives and Gaussian-noise decoys.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::{distance, kabsch_rmsd, Atom, Structure, Vec3, CARBON, NITROGEN, OXYGEN};

const BOND: f64 = 1.5;
const MIN_NONBONDED: f64 = 3.0;

/// Adds i.i.d. `N(0, sigma²)` noise to every coordinate, `count_per_sigma`
/// times per sigma. Labels are the superposed RMSD to `native`.
pub fn synth_decoys(
    native: &Structure,
    sigmas: &[f64],
    count_per_sigma: usize,
    seed: u64,
) -> Result<Vec<(Structure, f64)>> {
    if native.len() < 3 {
        return Err(Error::DegenerateStructure { atoms: native.len() });
    }
    if let Some(bad) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::Domain(format!("sigma must be positive, got {bad}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(sigmas.len() * count_per_sigma);
    for (si, &sigma) in sigmas.iter().enumerate() {
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
        for k in 0..count_per_sigma {
            let atoms = native
                .atoms
                .iter()
                .map(|a| Atom {
                    element: a.element,
                    position: [
                        a.position[0] + noise.sample(&mut rng),
                        a.position[1] + noise.sample(&mut rng),
                        a.position[2] + noise.sample(&mut rng),
                    ],
                })
                .collect();
            let decoy = Structure::new(format!("{}_s{si}_{k}", native.id), atoms)?;
            let label = kabsch_rmsd(native, &decoy)?;
            out.push((decoy, label));
        }
    }
    Ok(out)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v: Vec3 = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Self-avoiding chain with 1.5 Å bonds, bond angles between 110° and 120°,
/// at least 3 Å between atoms three or more bonds apart, and random C/N/O
/// elements. Restarts from scratch when growth gets stuck.
pub fn folded_chain(n_atoms: usize, seed: u64) -> Result<Structure> {
    if n_atoms < 3 {
        return Err(Error::DegenerateStructure { atoms: n_atoms });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'restart: loop {
        let mut pos: Vec<Vec3> = vec![[0.0; 3], [BOND, 0.0, 0.0]];
        while pos.len() < n_atoms {
            let (prev, last) = (pos[pos.len() - 2], pos[pos.len() - 1]);
            let back = [
                (prev[0] - last[0]) / BOND,
                (prev[1] - last[1]) / BOND,
                (prev[2] - last[2]) / BOND,
            ];
            let mut placed = false;
            for _ in 0..200 {
                let theta = rng.random_range(110f64..120f64).to_radians();
                // Direction at `theta` from `back`, with a random azimuth.
                let r = random_unit(&mut rng);
                let along = r[0] * back[0] + r[1] * back[1] + r[2] * back[2];
                let perp = [r[0] - along * back[0], r[1] - along * back[1], r[2] - along * back[2]];
                let pn = (perp[0] * perp[0] + perp[1] * perp[1] + perp[2] * perp[2]).sqrt();
                if pn < 1e-6 {
                    continue;
                }
                let (c, s) = (theta.cos(), theta.sin());
                let dir: Vec3 = std::array::from_fn(|k| c * back[k] + s * perp[k] / pn);
                let cand: Vec3 = std::array::from_fn(|k| last[k] + BOND * dir[k]);
                let clear = pos[..pos.len() - 2]
                    .iter()
                    .all(|p| distance(p, &cand) >= MIN_NONBONDED);
                if clear {
                    pos.push(cand);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'restart;
            }
        }
        let atoms = pos
            .into_iter()
            .map(|position| Atom {
                element: [CARBON, NITROGEN, OXYGEN][rng.random_range(0..3)],
                position,
            })
            .collect();
        return Structure::new(format!("chain{seed}"), atoms);
    }
}

/// `count` sigmas spaced so that expected labels (≈ σ√3) run evenly from
/// `min_label` to `max_label`.
pub fn label_spaced_sigmas(min_label: f64, max_label: f64, count: usize) -> Vec<f64> {
    let scale = 3f64.sqrt();
    if count == 1 {
        return vec![min_label / scale];
    }
    (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            (min_label + t * (max_label - min_label)) / scale
        })
        .collect()
}
