//! Simulated label-noise generators with full flip provenance and auditing.
//!
//! Four kinds are supported: symmetric (uniform flips over the other
//! classes; self-flips are excluded so the nominal rate equals the realized
//! corruption rate), asymmetric (flips along configured class pairs),
//! pairflip (flip to the next class index, wrapping modularly), and
//! instance-dependent (per-example flip rates from a truncated normal,
//! flip targets scored by random per-class feature projections).

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::Tensor;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Symmetric,
    Asymmetric,
    Pairflip,
    Instance,
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NoiseKind::Symmetric => "symmetric",
            NoiseKind::Asymmetric => "asymmetric",
            NoiseKind::Pairflip => "pairflip",
            NoiseKind::Instance => "instance",
        };
        f.write_str(s)
    }
}

/// One directed (or bidirectional) class-flip rule for asymmetric noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassFlip {
    pub source: usize,
    pub target: usize,
    pub bidirectional: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
    pub class_map: Option<Vec<ClassFlip>>,
    pub num_classes: usize,
    /// Standard deviation of the per-instance flip rate (instance kind).
    pub instance_std: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, rate: f64, num_classes: usize) -> NoiseSpec {
        NoiseSpec {
            kind,
            rate,
            class_map: None,
            num_classes,
            instance_std: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config("noise needs at least 2 classes".into()));
        }
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::Config(format!(
                "noise rate must be in [0, 1], got {}",
                self.rate
            )));
        }
        if self.kind == NoiseKind::Instance && self.rate >= 1.0 {
            return Err(Error::Config(
                "instance noise rate must be in [0, 1)".into(),
            ));
        }
        match (self.kind, &self.class_map) {
            (NoiseKind::Asymmetric, Some(map)) if !map.is_empty() => {
                for flip in map {
                    if flip.source >= self.num_classes || flip.target >= self.num_classes {
                        return Err(Error::Config(format!(
                            "class map entry {}->{} outside [0, {})",
                            flip.source, flip.target, self.num_classes
                        )));
                    }
                    if flip.source == flip.target {
                        return Err(Error::Config(format!(
                            "class {} cannot map to itself",
                            flip.source
                        )));
                    }
                }
            }
            (NoiseKind::Asymmetric, _) => {
                return Err(Error::Config(
                    "asymmetric noise requires a nonempty class map".into(),
                ));
            }
            (_, Some(_)) => {
                return Err(Error::Config(format!(
                    "{} noise does not take a class map",
                    self.kind
                )));
            }
            (_, None) => {}
        }
        if self.instance_std < 0.0 {
            return Err(Error::Config("instance std must be nonnegative".into()));
        }
        Ok(())
    }

    /// Rates above 50% destroy diagonal dominance for the class-targeted
    /// kinds; surfaced as a warning, not an error.
    pub fn high_rate_warning(&self) -> Option<String> {
        match self.kind {
            NoiseKind::Asymmetric | NoiseKind::Pairflip if self.rate > 0.5 => Some(format!(
                "{} noise rate {} exceeds 0.5; clean labels are no longer \
                 the per-class majority",
                self.kind, self.rate
            )),
            _ => None,
        }
    }
}

/// The observable result of corrupting a label vector.
#[derive(Debug, Clone)]
pub struct NoiseOutcome {
    pub noisy_labels: Vec<usize>,
    /// True where the noisy label differs from the clean one.
    pub flip_mask: Vec<bool>,
    /// Row-stochastic empirical flip frequencies, `[k, k]`; rows without
    /// examples stay all-zero.
    pub realized_transition: Tensor,
}

fn check_labels(labels: &[usize], k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Config("need at least 2 classes".into()));
    }
    for (i, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::InvalidLabel {
                index: i,
                label: y,
                num_classes: k,
            });
        }
    }
    Ok(())
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "noise rate must be in [0, 1], got {rate}"
        )));
    }
    Ok(())
}

/// Empirical row-normalized transition matrix from clean to noisy labels.
pub fn transition_from_labels(clean: &[usize], noisy: &[usize], k: usize) -> Tensor {
    let mut counts = vec![0u64; k * k];
    let mut row_totals = vec![0u64; k];
    for (&c, &n) in clean.iter().zip(noisy) {
        counts[c * k + n] += 1;
        row_totals[c] += 1;
    }
    let mut t = Tensor::zeros(&[k, k]);
    for i in 0..k {
        if row_totals[i] == 0 {
            continue;
        }
        let inv = 1.0 / row_totals[i] as f64;
        for j in 0..k {
            t.data_mut()[i * k + j] = counts[i * k + j] as f64 * inv;
        }
    }
    t
}

fn outcome_from(clean: &[usize], noisy: Vec<usize>, k: usize) -> NoiseOutcome {
    let flip_mask = clean.iter().zip(&noisy).map(|(c, n)| c != n).collect();
    let realized_transition = transition_from_labels(clean, &noisy, k);
    NoiseOutcome {
        noisy_labels: noisy,
        flip_mask,
        realized_transition,
    }
}

/// Each label flips with probability `rate`; the replacement is uniform
/// over the other `k - 1` classes.
pub fn apply_symmetric(
    labels: &[usize],
    rate: f64,
    k: usize,
    rng: &mut SeededRng,
) -> Result<NoiseOutcome> {
    check_rate(rate)?;
    check_labels(labels, k)?;
    let noisy = labels
        .iter()
        .map(|&y| {
            if rng.uniform() < rate {
                let j = rng.index(k - 1);
                if j >= y {
                    j + 1
                } else {
                    j
                }
            } else {
                y
            }
        })
        .collect();
    Ok(outcome_from(labels, noisy, k))
}

/// Each label flips to `(y + 1) mod k` with probability `rate`.
pub fn apply_pairflip(
    labels: &[usize],
    rate: f64,
    k: usize,
    rng: &mut SeededRng,
) -> Result<NoiseOutcome> {
    check_rate(rate)?;
    check_labels(labels, k)?;
    let noisy = labels
        .iter()
        .map(|&y| if rng.uniform() < rate { (y + 1) % k } else { y })
        .collect();
    Ok(outcome_from(labels, noisy, k))
}

/// Expand bidirectional entries into directed ones and index by source.
fn directed_map(class_map: &[ClassFlip], k: usize) -> Result<Vec<Option<usize>>> {
    let mut targets: Vec<Option<usize>> = vec![None; k];
    let mut add = |src: usize, dst: usize| -> Result<()> {
        if src >= k || dst >= k {
            return Err(Error::Config(format!(
                "class map entry {src}->{dst} outside [0, {k})"
            )));
        }
        if src == dst {
            return Err(Error::Config(format!("class {src} cannot map to itself")));
        }
        targets[src] = Some(dst);
        Ok(())
    };
    for flip in class_map {
        add(flip.source, flip.target)?;
        if flip.bidirectional {
            add(flip.target, flip.source)?;
        }
    }
    Ok(targets)
}

/// Labels whose class is a map source flip to their target with
/// probability `rate`; unmapped classes never flip.
pub fn apply_asymmetric(
    labels: &[usize],
    rate: f64,
    class_map: &[ClassFlip],
    k: usize,
    rng: &mut SeededRng,
) -> Result<NoiseOutcome> {
    check_rate(rate)?;
    check_labels(labels, k)?;
    let targets = directed_map(class_map, k)?;
    let noisy = labels
        .iter()
        .map(|&y| match targets[y] {
            Some(dst) if rng.uniform() < rate => dst,
            _ => y,
        })
        .collect();
    Ok(outcome_from(labels, noisy, k))
}

/// Normal draw with mean `mean` and deviation `std`, rejected until it
/// lands in `[0, 1]`. With `std == 0` the mean is clamped instead.
fn truncated_normal(mean: f64, std: f64, rng: &mut SeededRng) -> f64 {
    if std == 0.0 {
        return mean.clamp(0.0, 1.0);
    }
    for _ in 0..10_000 {
        let x = mean + std * rng.normal();
        if (0.0..=1.0).contains(&x) {
            return x;
        }
    }
    mean.clamp(0.0, 1.0)
}

/// Feature-dependent noise: instance `i` with clean class `y` keeps its
/// label with probability `1 - q_i` and flips with the remaining mass
/// spread as `q_i * softmax(x_i . W_y)` over the other classes, where each
/// class has its own `d x k` standard-normal projection `W_y` and
/// `q_i ~ N(rate, std^2)` truncated to `[0, 1]`.
pub fn apply_instance(
    features: &Tensor,
    labels: &[usize],
    rate: f64,
    std: f64,
    k: usize,
    rng: &mut SeededRng,
) -> Result<NoiseOutcome> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "instance noise rate must be in [0, 1), got {rate}"
        )));
    }
    if std < 0.0 {
        return Err(Error::Config("instance std must be nonnegative".into()));
    }
    check_labels(labels, k)?;
    let n = features.rows();
    let d = features.cols();
    if labels.len() != n {
        return Err(Error::dim_mismatch(
            "instance noise labels",
            &[labels.len()],
            &[n],
        ));
    }
    if !features.is_finite() {
        return Err(Error::Data("instance noise features must be finite".into()));
    }

    let q: Vec<f64> = (0..n).map(|_| truncated_normal(rate, std, rng)).collect();
    let projections: Vec<Tensor> = (0..k)
        .map(|_| {
            let data = (0..d * k).map(|_| rng.normal()).collect();
            Tensor::from_vec(&[d, k], data).unwrap()
        })
        .collect();

    let mut noisy = Vec::with_capacity(n);
    let mut scores = vec![0.0; k];
    let mut probs = vec![0.0; k];
    for i in 0..n {
        let y = labels[i];
        let x = features.row(i);
        let w = &projections[y];
        for (j, s) in scores.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (dd, &xv) in x.iter().enumerate() {
                acc += xv * w.data()[dd * k + j];
            }
            *s = acc;
        }
        // Masked softmax over the non-clean classes.
        let max = scores
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != y)
            .map(|(_, &s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for j in 0..k {
            if j == y {
                probs[j] = 0.0;
            } else {
                let e = (scores[j] - max).exp();
                probs[j] = e;
                sum += e;
            }
        }
        let qi = q[i];
        for (j, p) in probs.iter_mut().enumerate() {
            *p = if j == y { 1.0 - qi } else { qi * *p / sum };
        }
        // Inverse-CDF draw in class index order.
        let u = rng.uniform();
        let mut cum = 0.0;
        let mut picked = k - 1;
        for (j, &p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                picked = j;
                break;
            }
        }
        noisy.push(picked);
    }
    Ok(outcome_from(labels, noisy, k))
}

/// Apply the configured noise kind; `features` is required for the
/// instance kind only.
pub fn apply(
    spec: &NoiseSpec,
    features: Option<&Tensor>,
    labels: &[usize],
    rng: &mut SeededRng,
) -> Result<NoiseOutcome> {
    spec.validate()?;
    match spec.kind {
        NoiseKind::Symmetric => apply_symmetric(labels, spec.rate, spec.num_classes, rng),
        NoiseKind::Pairflip => apply_pairflip(labels, spec.rate, spec.num_classes, rng),
        NoiseKind::Asymmetric => apply_asymmetric(
            labels,
            spec.rate,
            spec.class_map.as_deref().unwrap_or(&[]),
            spec.num_classes,
            rng,
        ),
        NoiseKind::Instance => {
            let features = features.ok_or_else(|| {
                Error::Config("instance noise requires dataset features".into())
            })?;
            apply_instance(
                features,
                labels,
                spec.rate,
                spec.instance_std,
                spec.num_classes,
                rng,
            )
        }
    }
}

/// Flip statistics and structural conformance of an outcome against its
/// generating spec.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub flip_fraction: f64,
    /// Flip fraction per clean class; empty classes report 0.
    pub per_class_flip: Vec<f64>,
    pub realized_transition: Tensor,
    pub structural_violations: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.structural_violations.is_empty()
    }
}

/// Check mask consistency, row-stochasticity, and the structural support
/// the spec's kind allows (pairflip: neighbors only; asymmetric: mapped
/// cells only).
pub fn audit(
    outcome: &NoiseOutcome,
    clean_labels: &[usize],
    spec: &NoiseSpec,
) -> Result<AuditReport> {
    let n = clean_labels.len();
    if outcome.noisy_labels.len() != n || outcome.flip_mask.len() != n {
        return Err(Error::dim_mismatch(
            "audit lengths",
            &[n],
            &[outcome.noisy_labels.len()],
        ));
    }
    let k = spec.num_classes;
    let mut violations = Vec::new();

    let mut flips = 0usize;
    let mut class_total = vec![0usize; k];
    let mut class_flips = vec![0usize; k];
    for (i, (&c, &y)) in clean_labels.iter().zip(&outcome.noisy_labels).enumerate() {
        let flipped = c != y;
        if flipped != outcome.flip_mask[i] {
            violations.push(format!("flip mask inconsistent at index {i}"));
        }
        class_total[c] += 1;
        if flipped {
            flips += 1;
            class_flips[c] += 1;
        }
    }
    let flip_fraction = if n == 0 { 0.0 } else { flips as f64 / n as f64 };
    let per_class_flip = class_total
        .iter()
        .zip(&class_flips)
        .map(|(&t, &f)| if t == 0 { 0.0 } else { f as f64 / t as f64 })
        .collect();

    let t = transition_from_labels(clean_labels, &outcome.noisy_labels, k);
    for (i, &total) in class_total.iter().enumerate() {
        if total == 0 {
            continue;
        }
        let row_sum: f64 = t.row(i).iter().sum();
        if (row_sum - 1.0).abs() > 1e-12 {
            violations.push(format!("transition row {i} sums to {row_sum}"));
        }
    }

    match spec.kind {
        NoiseKind::Pairflip => {
            for i in 0..k {
                for j in 0..k {
                    if j != i && j != (i + 1) % k && t.at2(i, j) != 0.0 {
                        violations.push(format!(
                            "pairflip mass {} outside neighbor cell ({i}, {j})",
                            t.at2(i, j)
                        ));
                    }
                }
            }
        }
        NoiseKind::Asymmetric => {
            let targets = directed_map(spec.class_map.as_deref().unwrap_or(&[]), k)?;
            for (i, &target) in targets.iter().enumerate() {
                for j in 0..k {
                    if j != i && target != Some(j) && t.at2(i, j) != 0.0 {
                        violations.push(format!(
                            "asymmetric mass {} outside mapped cell ({i}, {j})",
                            t.at2(i, j)
                        ));
                    }
                }
            }
        }
        NoiseKind::Symmetric | NoiseKind::Instance => {}
    }

    Ok(AuditReport {
        flip_fraction,
        per_class_flip,
        realized_transition: t,
        structural_violations: violations,
    })
}

/// Sidecar CSV with one record per example: `index,clean,noisy,flipped`.
pub fn sidecar_csv(clean_labels: &[usize], outcome: &NoiseOutcome) -> String {
    let mut out = String::from("index,clean,noisy,flipped\n");
    for (i, &clean) in clean_labels.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            i, clean, outcome.noisy_labels[i], outcome.flip_mask[i]
        );
    }
    out
}

pub fn write_sidecar_csv(
    path: &Path,
    clean_labels: &[usize],
    outcome: &NoiseOutcome,
) -> Result<()> {
    std::fs::write(path, sidecar_csv(clean_labels, outcome))?;
    Ok(())
}

/// The conventional similar-class map for 10-class digit data:
/// 2->7, 5<->6, 3->8.
pub fn digit_class_map() -> Vec<ClassFlip> {
    vec![
        ClassFlip {
            source: 2,
            target: 7,
            bidirectional: false,
        },
        ClassFlip {
            source: 5,
            target: 6,
            bidirectional: true,
        },
        ClassFlip {
            source: 3,
            target: 8,
            bidirectional: false,
        },
    ]
}
