//! End-to-end acceptance checks. Every check prints one `PASS`/`FAIL` line
//! before asserting, so `cargo test --test acceptance -- --nocapture` gives a
//! readable scorecard.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use coordmlp::experiments::{
    cmd_image_sparse, cmd_image_uneven, cmd_spectrum_depth, cmd_toy_fig2, cmd_wave, inversions,
    toy_network, Arch, ExperimentConfig, ExperimentId, Overrides, Setting, Sweep,
};
use coordmlp::models::{
    init_network, ActivationKind, ArchSpec, Family, Layer, Linear, Network, Tap,
};
use coordmlp::numeric::{Matrix, RandomSource};
use coordmlp::regularization::{
    directional_quotient, jacobian_analysis, reg_loss, total_loss, total_loss_grad, RegConfig,
};
use coordmlp::spectrum::{
    derivative_spectrum_bound, dft, project_onto_line, rff_lattice, sample_grid, SpectrumGrid,
};

fn report(id: u32, name: &str, pass: bool, detail: impl AsRef<str>) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} {tag} {name}: {}", detail.as_ref());
    assert!(pass, "criterion {id} ({name}) failed: {}", detail.as_ref());
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn builtin(id: ExperimentId) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::builtin(id).unwrap();
    cfg.resolve_paths(&workspace_root());
    cfg
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Composite Simpson rule on `[lo, hi]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(lo) + f(hi) + inner) * h / 3.0
}

fn single_neuron(w: [f64; 2], act: ActivationKind) -> Network {
    Network::new(
        None,
        vec![Layer {
            weight: Matrix::from_rows(&[w.to_vec()]).unwrap(),
            bias: Matrix::zeros(1, 1),
            activation: act,
        }],
        Linear {
            weight: Matrix::filled(1, 1, 1.0),
            bias: Matrix::zeros(1, 1),
        },
    )
    .unwrap()
}

/// Non-DC spectral energy `Σ|X_k|²` of bins accepted by `keep`.
fn energy(spec: &SpectrumGrid, keep: impl Fn([f64; 2]) -> bool) -> f64 {
    spec.bins()
        .filter(|(f, _)| f[0] != 0.0 || f[1] != 0.0)
        .filter(|(f, _)| keep(*f))
        .map(|(_, m)| m * m)
        .sum()
}

fn random_family(rng: &mut RandomSource) -> Family {
    match rng.below(3) {
        0 => Family::Gaussian {
            sigma: rng.uniform(0.2, 1.0),
        },
        1 => Family::Sine {
            a: rng.uniform(0.3, 2.0),
        },
        _ => Family::Rff {
            sigma: rng.uniform(0.3, 1.5),
            features: 1 + rng.below(8),
        },
    }
}

#[test]
fn c01_gradients_match_finite_differences() {
    let start = Instant::now();
    let mut rng = RandomSource::new(2024);
    let (mut worst_reg, mut worst_mse): (f64, f64) = (0.0, 0.0);
    // Richardson-extrapolated central differences: O(h⁴) truncation
    let h = 2e-6;
    for _ in 0..50 {
        let n = 1 + rng.below(2);
        let spec = ArchSpec {
            family: random_family(&mut rng),
            input_dim: n,
            width: 1 + rng.below(32),
            depth: 2 + rng.below(3),
            output_dim: 1,
        };
        let mut net = init_network(&spec, &mut rng).unwrap();
        // nonzero biases keep ReLU units off their kink, where the loss has no derivative
        for layer in &mut net.hidden {
            for b in layer.bias.as_mut_slice() {
                *b += rng.uniform(-0.1, 0.1);
            }
        }
        let x = Matrix::from_fn(8, n, |_, _| rng.uniform(-1.0, 1.0));
        let y = Matrix::from_fn(8, 1, |_, _| rng.uniform(-1.0, 1.0));
        let seed = rng.below(1 << 30) as u64;
        for (eps, worst) in [(0.0, &mut worst_mse), (0.5, &mut worst_reg)] {
            let cfg = RegConfig {
                n_pairs: 8,
                xi_stddevs: vec![0.05; n],
                ..RegConfig::new(eps, n)
            };
            let (_, grads) =
                total_loss_grad(&net, &x, &y, &cfg, &mut RandomSource::new(seed), None).unwrap();
            let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
            for _ in 0..30 {
                let p = rng.below(sizes.len());
                let k = rng.below(sizes[p]);
                let eval = |delta: f64| {
                    let mut m = net.clone();
                    m.params_mut()[p].as_mut_slice()[k] += delta;
                    total_loss(&m, &x, &y, &cfg, &mut RandomSource::new(seed)).unwrap()
                };
                let d = |s: f64| (eval(s) - eval(-s)) / (2.0 * s);
                let fd = (4.0 * d(h / 2.0) - d(h)) / 3.0;
                let an = grads.params[p].as_slice()[k];
                let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-3);
                *worst = worst.max(err);
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        "gradient check on 50 random networks",
        worst_reg < 1e-4 && worst_mse < 1e-5 && elapsed < Duration::from_secs(60),
        format!(
            "max rel err {worst_reg:.2e} with penalty (< 1e-4), {worst_mse:.2e} pure MSE (< 1e-5), {:.1}s (< 60s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c02_gaussian_lines_match_envelope() {
    let sigma = 0.2;
    let net = toy_network(sigma, [10.0, 10.0]).unwrap();
    let spec = dft(&sample_grid(&net, &[256, 256]).unwrap()).unwrap();
    let d = std::f64::consts::FRAC_1_SQRT_2;
    let dirs = [[1.0, 0.0], [d, d]];

    let mut worst_r: f64 = 1.0;
    for dir in dirs {
        let line = project_onto_line(&spec, dir, 3.0).unwrap();
        // envelope written out independently: exp(-(√2·π·σ·k/|w|)²), scale irrelevant
        let pts: Vec<(f64, f64)> = line.present().into_iter().filter(|(r, _)| *r <= 60.0).collect();
        let emp: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let ana: Vec<f64> = pts
            .iter()
            .map(|(r, _)| (-(2f64.sqrt() * PI * sigma * r / 10.0).powi(2)).exp())
            .collect();
        worst_r = worst_r.min(pearson(&emp, &ana));
    }
    let cos_limit = 3f64.to_radians().cos();
    let on_line = |f: [f64; 2]| {
        let r = f[0].hypot(f[1]);
        dirs.iter().any(|u| (f[0] * u[0] + f[1] * u[1]).abs() / r >= cos_limit - 1e-12)
    };
    let off = energy(&spec, |f| !on_line(f)) / energy(&spec, |_| true);
    report(
        2,
        "Gaussian network spectrum lies on the weight lines",
        worst_r > 0.99 && off < 0.05,
        format!("min line correlation {worst_r:.4} (> 0.99), off-line energy {:.3}% (< 5%)", off * 100.0),
    );
}

#[test]
fn c03_sine_neuron_peak() {
    let net = single_neuron([3.0, 4.0], ActivationKind::Sine { a: 2.0 });
    let spec = dft(&sample_grid(&net, &[256, 256]).unwrap()).unwrap();
    let f = spec.frequency(spec.peak_bin());
    // one bin is 0.5 cycles per unit; the peak may land on either member of the pair
    let dist = [1.0, -1.0]
        .iter()
        .map(|s| ((f[0] - s * 6.0).abs()).max((f[1] - s * 8.0).abs()))
        .fold(f64::INFINITY, f64::min);
    report(
        3,
        "sine neuron peak location",
        dist <= 0.5,
        format!("peak at ({}, {}) cycles/unit, {:.1} bins from ±(6, 8) (≤ 1)", f[0], f[1], dist / 0.5),
    );
}

#[test]
fn c04_rff_energy_on_lattice() {
    let mut rng = RandomSource::new(31);
    let mut net = init_network(
        &ArchSpec {
            family: Family::Rff {
                sigma: 2.0,
                features: 2,
            },
            input_dim: 2,
            width: 32,
            depth: 3,
            output_dim: 1,
        },
        &mut rng,
    )
    .unwrap();
    // frozen frequencies snapped to the bin lattice so each feature is periodic on the grid
    let emb = net.embedding.as_mut().unwrap();
    for v in emb.l.as_mut_slice() {
        *v = (*v / PI).round() * PI;
    }
    let emb = emb.clone();
    let lattice = rff_lattice(&emb, 5).unwrap();
    let spec = dft(&sample_grid(&net, &[128, 128]).unwrap()).unwrap();
    let near = |f: [f64; 2]| {
        lattice
            .points
            .iter()
            .any(|p| (f[0] - p[0]).abs() <= 0.5 + 1e-9 && (f[1] - p[1]).abs() <= 0.5 + 1e-9)
    };
    let frac = energy(&spec, near) / energy(&spec, |_| true);
    let gens: Vec<String> = lattice
        .generators
        .iter()
        .map(|g| format!("({:.1}, {:.1})", g[0] / (2.0 * PI), g[1] / (2.0 * PI)))
        .collect();
    report(
        4,
        "RFF network energy near the frequency lattice",
        frac >= 0.9,
        format!(
            "{:.2}% of non-DC energy within one bin of {} lattice points, generators {} (≥ 90%)",
            frac * 100.0,
            lattice.points.len(),
            gens.join(" ")
        ),
    );
}

#[test]
fn c05_toy_orderings() {
    let cfg = builtin(ExperimentId::ToyFig2);
    let out = tempfile::tempdir().unwrap();
    let r = cmd_toy_fig2(&cfg, out.path()).unwrap();
    let toy = cfg.toy().unwrap();

    // quadrature oracle for each panel's low-band fraction
    let mut worst: f64 = 0.0;
    for p in &r.panels {
        let (mut low, mut total) = (0.0, 0.0);
        for wn in p.w_norms {
            let amp = (2.0 * PI).powf(1.5) * p.sigma / wn;
            let width = wn / (2f64.sqrt() * PI * p.sigma);
            let e = |k: f64| (amp * (-(k / width).powi(2)).exp()).powi(2);
            low += simpson(e, 0.0, toy.cutoff, 4000);
            total += simpson(e, 0.0, 12.0 * width, 40000);
        }
        worst = worst.max((p.low_fraction - low / total).abs());
    }
    let failed: Vec<&str> = r
        .orderings
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(d, _)| d.as_str())
        .collect();
    let lows: Vec<String> = r.panels.iter().map(|p| format!("{}={:.4}", p.name, p.low_fraction)).collect();
    report(
        5,
        "toy spectra orderings",
        r.all_hold() && r.orderings.len() >= 4 && worst < 1e-6,
        format!(
            "{} strict orderings, failing {:?}; low fractions {}; quadrature deviation {worst:.1e}",
            r.orderings.len(),
            failed,
            lows.join(" ")
        ),
    );
}

#[test]
fn c06_wave_regions() {
    let start = Instant::now();
    let cfg = builtin(ExperimentId::WaveFig4);
    let out = tempfile::tempdir().unwrap();
    let r = cmd_wave(&cfg, out.path()).unwrap();
    let elapsed = start.elapsed();
    let [lo, hi, reg] = [Setting::Low, Setting::High, Setting::Regularized].map(|s| r.run(s).unwrap().clone());

    let gain = reg.t_psnr - lo.t_psnr.max(hi.t_psnr);
    let low_fails_right = lo.r_mse.unwrap() > lo.l_mse.unwrap();
    let high_fails_left = hi.l_mse.unwrap() > reg.l_mse.unwrap();
    report(
        6,
        "wave: penalty fixes both regional failures",
        gain >= 1.0 && low_fails_right && high_fails_left && elapsed < Duration::from_secs(600),
        format!(
            "T-PSNR k_low {:.2} k_high {:.2} regularized {:.2} (gain {gain:.2} ≥ 1 dB); \
             k_low MSE right {:.4} > left {:.4}: {low_fails_right}; \
             left MSE k_high {:.4} > regularized {:.4}: {high_fails_left}; {:.0}s (< 600s)",
            lo.t_psnr,
            hi.t_psnr,
            reg.t_psnr,
            lo.r_mse.unwrap(),
            lo.l_mse.unwrap(),
            hi.l_mse.unwrap(),
            reg.l_mse.unwrap(),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c07_uneven_image_table() {
    let start = Instant::now();
    let cfg = builtin(ExperimentId::ImageUneven);
    let out = tempfile::tempdir().unwrap();
    let r = cmd_image_uneven(&cfg, out.path()).unwrap();
    let elapsed = start.elapsed();
    let input = r.runs[0].input.clone();

    let mut pass = elapsed < Duration::from_secs(1800);
    let mut lines = Vec::new();
    for arch in Arch::ALL {
        let get = |s| r.run(&input, arch, s).unwrap();
        let (lo, hi, reg) = (get(Setting::Low), get(Setting::High), get(Setting::Regularized));
        let gain = reg.t_psnr - lo.t_psnr.max(hi.t_psnr);
        let left = hi.l_psnr.unwrap() > lo.l_psnr.unwrap();
        let right = hi.r_psnr.unwrap() < lo.r_psnr.unwrap();
        pass &= gain >= 1.0 && left && right;
        lines.push(format!(
            "{arch} T {:.2}/{:.2}/{:.2} gain {gain:.2}, L k_high>k_low {left}, R k_high<k_low {right}",
            lo.t_psnr, hi.t_psnr, reg.t_psnr
        ));
    }
    report(
        7,
        "uneven sampling table",
        pass,
        format!("{input}: {}; {:.0}s (< 1800s)", lines.join("; "), elapsed.as_secs_f64()),
    );
}

#[test]
fn c08_sparse_image_table() {
    let start = Instant::now();
    let cfg = builtin(ExperimentId::ImageSparse);
    let images = cfg.images().unwrap();
    let out = tempfile::tempdir().unwrap();
    let r = cmd_image_sparse(&cfg, out.path()).unwrap();
    let elapsed = start.elapsed();

    let mut pass = images.paths.len() >= 5
        && (images.rate - 0.1).abs() < 1e-12
        && r.summary.len() == Arch::ALL.len()
        && elapsed < Duration::from_secs(2700);
    let mut lines = Vec::new();
    for s in &r.summary {
        let gain = s.regularized - s.unregularized;
        pass &= s.images >= 5 && gain >= 1.0;
        lines.push(format!(
            "{} {:.2} -> {:.2} (gain {gain:.2})",
            s.arch, s.unregularized, s.regularized
        ));
    }
    report(
        8,
        "sparse sampling table",
        pass,
        format!(
            "{} images at {:.0}%: {}; {:.0}s (< 2700s)",
            images.paths.len(),
            images.rate * 100.0,
            lines.join("; "),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c09_spectrum_shifts_with_depth_and_bandwidth() {
    let start = Instant::now();
    let cfg = builtin(ExperimentId::SpectrumDepth);
    let d = cfg.depth().unwrap();
    let out = tempfile::tempdir().unwrap();
    let r = cmd_spectrum_depth(&cfg, out.path()).unwrap();
    let elapsed = start.elapsed();

    let depth = r.low_fractions(Sweep::Depth);
    let band = r.low_fractions(Sweep::Hyperparameter);
    let depths: Vec<usize> = r.series(Sweep::Depth).iter().map(|x| x.depth).collect();
    let (id, ib) = (inversions(&depth), inversions(&band));
    report(
        9,
        "low-frequency fraction across depth and bandwidth",
        depths == vec![2, 3, 4, 5, 6]
            && (d.cutoff_fraction - 0.25).abs() < 1e-12
            && id <= 1
            && ib <= 1
            && elapsed < Duration::from_secs(1200),
        format!(
            "depths {depths:?}: {depth:.4?} ({id} inversions); k {:?}: {band:.4?} ({ib} inversions); {:.0}s (< 1200s)",
            d.ks,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c10_penalty_properties() {
    // constant features
    let mut flat = init_network(
        &ArchSpec {
            family: Family::Gaussian { sigma: 0.5 },
            input_dim: 2,
            width: 8,
            depth: 2,
            output_dim: 1,
        },
        &mut RandomSource::new(1),
    )
    .unwrap();
    flat.hidden[0].weight = Matrix::zeros(8, 2);
    let zero = reg_loss(&flat, &RegConfig::new(1.0, 2), &mut RandomSource::new(3)).unwrap();

    // g(x) = c·x + 5 on the domain
    let mut slope_err: f64 = 0.0;
    for c in [-3.0, 0.5, 2.0] {
        let net = Network::new(
            None,
            vec![Layer {
                weight: Matrix::filled(1, 1, c),
                bias: Matrix::filled(1, 1, 5.0),
                activation: ActivationKind::Relu,
            }],
            Linear {
                weight: Matrix::filled(1, 1, 1.0),
                bias: Matrix::zeros(1, 1),
            },
        )
        .unwrap();
        let v = reg_loss(&net, &RegConfig::new(1.0, 1), &mut RandomSource::new(9)).unwrap();
        slope_err = slope_err.max((v - c.abs()).abs());
    }

    // eigen-directions and trace on a trained-size random net
    let net = init_network(
        &ArchSpec {
            family: Family::Gaussian { sigma: 0.4 },
            input_dim: 2,
            width: 16,
            depth: 3,
            output_dim: 1,
        },
        &mut RandomSource::new(5),
    )
    .unwrap();
    let (mut worst_q, mut worst_t): (f64, f64) = (0.0, 0.0);
    for x in [[0.3, -0.2], [-0.7, 0.5], [0.0, 0.9]] {
        let an = jacobian_analysis(&net, &x, 1e-5, Tap::Penultimate).unwrap();
        let fro: f64 = an.j.as_slice().iter().map(|v| v * v).sum();
        worst_t = worst_t.max((an.trace - fro).abs());
        for (lam, u) in an.eigenvalues.iter().zip(&an.eigenvectors) {
            let q = directional_quotient(&net, &x, u, 1e-4, Tap::Penultimate).unwrap();
            worst_q = worst_q.max((q / lam.sqrt() - 1.0).abs());
        }
    }
    report(
        10,
        "penalty properties",
        zero == 0.0 && slope_err < 1e-9 && worst_q < 0.05 && worst_t < 1e-10,
        format!(
            "constant {zero}, linear |L - |c|| {slope_err:.1e}, quotient/√λ deviation {:.3}% (< 5%), |tr A - ‖J‖²| {worst_t:.1e} (< 1e-10)",
            worst_q * 100.0
        ),
    );
}

#[test]
fn c11_derivative_bound() {
    let start = Instant::now();
    let mut rng = RandomSource::new(11);
    let n = 256;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        // band-limited: integer multiples of half a cycle per unit below Nyquist
        let modes: Vec<(f64, f64, f64)> = (0..1 + rng.below(8))
            .map(|_| (rng.below(n / 4) as f64 / 2.0, rng.uniform(-1.0, 1.0), rng.uniform(0.0, 2.0 * PI)))
            .collect();
        let f: Vec<f64> = (0..n)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / n as f64;
                modes.iter().map(|&(k, a, p)| a * (2.0 * PI * k * x + p).cos()).sum()
            })
            .collect();
        let b = derivative_spectrum_bound(&f).unwrap();
        worst = worst.max(b.lhs - b.rhs);
    }
    let elapsed = start.elapsed();
    report(
        11,
        "derivative bounded by weighted spectrum",
        worst <= 1e-6 && elapsed < Duration::from_secs(10),
        format!("max(lhs - rhs) {worst:.2e} over 100 signals (≤ 1e-6), {:.2}s", elapsed.as_secs_f64()),
    );
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn c12_reruns_are_bitwise_identical() {
    let mut cfg = builtin(ExperimentId::WaveFig4);
    cfg.apply(&Overrides {
        steps: Some(150),
        ..Overrides::default()
    })
    .unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_wave(&cfg, a.path()).unwrap();
    cmd_wave(&cfg, b.path()).unwrap();
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    let checked = fa
        .iter()
        .filter(|(n, _)| n.ends_with(".ckpt") || n.ends_with(".csv"))
        .count();
    report(
        12,
        "identical config and seed give identical outputs",
        fa == fb && checked >= 5,
        format!("{} files compared ({checked} checkpoints/CSVs), identical: {}", fa.len(), fa == fb),
    );
}
