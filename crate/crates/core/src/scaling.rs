//! Critical-scaling analysis: data collapse, scaling-function fits,
//! exponent grid scans, and noise-induced length extraction.
//!
//! The collapse maps a correlation point (T, x, C) to
//! `X = x * T^-a`, `Y = C * T^b` with `a = nu/(1+z*nu)` and
//! `b = nu*eta/(1+z*nu)`. Collapsed data are fit to a Taylor polynomial
//! times an exponential, `F(X) = (sum_m a_m X^m) * exp(-atilde * X)`,
//! which is linear in the Taylor coefficients for fixed `atilde`; the
//! outer 1D search over `atilde` runs on a log grid refined by golden
//! section, so the whole fit is deterministic.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor for fit weights so exact data (stderr 0) cannot divide by zero.
pub const WEIGHT_FLOOR: f64 = 1e-12;

const ATILDE_RANGE: (f64, f64) = (1e-3, 1e3);
const ATILDE_SEEDS: usize = 61;
const GOLDEN_TOL: f64 = 1e-10;

// ---- rescaling --------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescalingParams {
    pub nu: f64,
    pub z: f64,
    pub eta: f64,
}

impl RescalingParams {
    pub fn new(nu: f64, z: f64, eta: f64) -> Result<Self> {
        if !(nu > 0.0) || !(z > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "exponents must satisfy nu > 0, z > 0, eta finite; got nu={nu} z={z} eta={eta}"
            )));
        }
        Ok(RescalingParams { nu, z, eta })
    }

    /// The transverse-field Ising values: nu = z = 1, eta = 1/4.
    pub fn ising() -> Self {
        RescalingParams { nu: 1.0, z: 1.0, eta: 0.25 }
    }

    /// Length-rescaling exponent `a = nu / (1 + z nu)`.
    pub fn length_exponent(&self) -> f64 {
        self.nu / (1.0 + self.z * self.nu)
    }

    /// Amplitude-rescaling exponent `b = nu eta / (1 + z nu)`.
    pub fn amplitude_exponent(&self) -> f64 {
        self.nu * self.eta / (1.0 + self.z * self.nu)
    }
}

/// One measured correlation point before rescaling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawPoint {
    /// Quench duration T of the drive that produced this point.
    pub drive_time: f64,
    /// Ramp time at which it was measured (0 = at the critical point).
    pub time: f64,
    /// Distance from the central site.
    pub x: f64,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledPoint {
    pub x: f64,
    pub y: f64,
    pub dy: f64,
}

/// Collapses raw points onto the scaling axes. `xi_tilde`, when finite,
/// undoes an exponential noise envelope by multiplying each point (value
/// and error alike) by `exp(+x T / xi_tilde)`.
pub fn rescale(
    points: &[RawPoint],
    params: &RescalingParams,
    xi_tilde: Option<f64>,
) -> Result<Vec<ScaledPoint>> {
    let a = params.length_exponent();
    let b = params.amplitude_exponent();
    let all_exact = points.iter().all(|p| p.std_error == 0.0);
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        if !(p.drive_time > 0.0) || p.x < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "rescaling needs T > 0 and x >= 1, got T={} x={}",
                p.drive_time, p.x
            )));
        }
        let boost = match xi_tilde {
            Some(xt) if xt.is_finite() => {
                if !(xt > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "noise length must be positive, got {xt}"
                    )));
                }
                (p.x * p.drive_time / xt).exp()
            }
            _ => 1.0,
        };
        let tb = p.drive_time.powf(b);
        out.push(ScaledPoint {
            x: p.x * p.drive_time.powf(-a),
            y: p.value * tb * boost,
            dy: if all_exact { 1.0 } else { p.std_error * tb * boost },
        });
    }
    Ok(out)
}

// ---- scaling-function fit ----------------------------------------------------

/// How the exponential decay rate of the scaling function is handled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DecayMode {
    /// `atilde` minimized along with the Taylor coefficients.
    Free,
    /// `atilde` pinned (0 fits a bare polynomial).
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Taylor order M; `coefficients` holds a_0..a_M.
    pub order: usize,
    pub coefficients: Vec<f64>,
    pub a_tilde: f64,
    pub chi2: f64,
    pub n_dof: usize,
}

impl ScalingFit {
    pub fn chi2_per_dof(&self) -> f64 {
        self.chi2 / self.n_dof as f64
    }

    /// Evaluates the fitted scaling function.
    pub fn evaluate(&self, x: f64) -> f64 {
        let mut poly = 0.0;
        for &c in self.coefficients.iter().rev() {
            poly = poly * x + c;
        }
        poly * (-self.a_tilde * x).exp()
    }
}

fn x_span(points: &[ScaledPoint]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        lo = lo.min(p.x);
        hi = hi.max(p.x);
    }
    (lo, hi)
}

/// Weighted linear solve for the Taylor coefficients at a fixed decay rate.
fn solve_at(points: &[ScaledPoint], order: usize, a_tilde: f64) -> Result<(Vec<f64>, f64)> {
    let n = points.len();
    let k = order + 1;
    let mut design = DMatrix::<f64>::zeros(n, k);
    let mut target = DVector::<f64>::zeros(n);
    for (i, p) in points.iter().enumerate() {
        let w = 1.0 / p.dy.abs().max(WEIGHT_FLOOR);
        let envelope = (-a_tilde * p.x).exp();
        let mut pow = 1.0;
        for m in 0..k {
            design[(i, m)] = envelope * pow * w;
            pow *= p.x;
        }
        target[i] = p.y * w;
    }
    let svd = design.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = sigma_max * 1e-12;
    if !(sigma_max > 0.0) || svd.rank(tol) < k {
        let (lo, hi) = x_span(points);
        return Err(Error::RankDeficient { x_min: lo, x_max: hi });
    }
    let coeffs = svd
        .solve(&target, tol)
        .map_err(|e| Error::Fit(format!("linear solve failed: {e}")))?;
    let residual = &design * &coeffs - &target;
    let chi2 = residual.norm_squared();
    Ok((coeffs.iter().copied().collect(), chi2))
}

/// Fits `Y = (sum_m a_m X^m) exp(-atilde X)` by weighted least squares.
pub fn fit_scaling_function(
    points: &[ScaledPoint],
    order: usize,
    mode: DecayMode,
) -> Result<ScalingFit> {
    let n = points.len();
    let free_params = match mode {
        DecayMode::Free => order + 2,
        DecayMode::Fixed(_) => order + 1,
    };
    if n <= free_params {
        return Err(Error::Fit(format!(
            "{n} points cannot constrain {free_params} parameters"
        )));
    }
    for p in points {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::Fit("non-finite point in fit input".into()));
        }
    }

    let (a_tilde, coefficients, chi2) = match mode {
        DecayMode::Fixed(at) => {
            if !(at >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "decay rate must be >= 0, got {at}"
                )));
            }
            let (c, chi2) = solve_at(points, order, at)?;
            (at, c, chi2)
        }
        DecayMode::Free => search_decay(points, order)?,
    };

    Ok(ScalingFit { order, coefficients, a_tilde, chi2, n_dof: n - free_params })
}

/// Log-grid seed plus golden-section refinement of the decay rate;
/// `atilde = 0` competes as an explicit candidate.
fn search_decay(points: &[ScaledPoint], order: usize) -> Result<(f64, Vec<f64>, f64)> {
    let chi2_of = |at: f64| solve_at(points, order, at).map(|(_, c)| c).ok();

    let (lo, hi) = ATILDE_RANGE;
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    let seeds: Vec<f64> = (0..ATILDE_SEEDS)
        .map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / (ATILDE_SEEDS - 1) as f64).exp())
        .collect();
    let mut best: Option<(usize, f64)> = None;
    let chi2s: Vec<Option<f64>> = seeds.iter().map(|&s| chi2_of(s)).collect();
    for (i, c) in chi2s.iter().enumerate() {
        if let Some(c) = c {
            if best.map_or(true, |(_, bc)| *c < bc) {
                best = Some((i, *c));
            }
        }
    }
    let zero = solve_at(points, order, 0.0);

    let refined = best.map(|(i, _)| {
        let a = if i == 0 { ln_lo } else { seeds[i - 1].ln() };
        let b = if i + 1 == seeds.len() { ln_hi } else { seeds[i + 1].ln() };
        golden_min(a, b, |u| chi2_of(u.exp()).unwrap_or(f64::INFINITY)).exp()
    });

    // Pick the better of the refined interior minimum and the zero edge.
    let mut candidates: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    if let Some(at) = refined {
        if let Ok((c, chi2)) = solve_at(points, order, at) {
            candidates.push((at, c, chi2));
        }
    }
    if let Ok((c, chi2)) = zero {
        candidates.push((0.0, c, chi2));
    }
    candidates
        .into_iter()
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .ok_or_else(|| {
            let (x_min, x_max) = x_span(points);
            Error::RankDeficient { x_min, x_max }
        })
}

/// Golden-section minimum of `f` on `[a, b]` (unimodal assumption).
fn golden_min(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > GOLDEN_TOL * (1.0 + a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

// ---- exponent scan -----------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanConfig {
    pub nu_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    pub z: f64,
    pub order: usize,
    pub mode: DecayMode,
    /// Cells with chi2/dof <= factor * min form the confidence region.
    pub region_factor: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            nu_values: linspace(0.5, 1.5, 101),
            eta_values: linspace(0.0, 0.5, 101),
            z: 1.0,
            order: 4,
            mode: DecayMode::Free,
            region_factor: 1.2,
        }
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanResult {
    pub nu_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    /// Row-major over (nu, eta); None marks a failed cell.
    pub chi2_per_dof: Vec<Option<f64>>,
    pub best_nu: f64,
    pub best_eta: f64,
    pub best_chi2_per_dof: f64,
    pub region_factor: f64,
}

impl ScanResult {
    pub fn cell(&self, i_nu: usize, i_eta: usize) -> Option<f64> {
        self.chi2_per_dof[i_nu * self.eta_values.len() + i_eta]
    }

    /// Whether the cell sits inside the near-minimal region.
    pub fn in_region(&self, i_nu: usize, i_eta: usize) -> bool {
        match self.cell(i_nu, i_eta) {
            Some(c) => c <= self.region_factor * self.best_chi2_per_dof,
            None => false,
        }
    }

    /// All (nu, eta) pairs inside the near-minimal region.
    pub fn region_cells(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for i in 0..self.nu_values.len() {
            for j in 0..self.eta_values.len() {
                if self.in_region(i, j) {
                    out.push((self.nu_values[i], self.eta_values[j]));
                }
            }
        }
        out
    }
}

/// Rescale-and-fit over a grid of exponent hypotheses. Cells where the fit
/// fails are flagged rather than failing the scan.
pub fn exponent_scan(points: &[RawPoint], config: &ScanConfig) -> Result<ScanResult> {
    if config.nu_values.is_empty() || config.eta_values.is_empty() {
        return Err(Error::InvalidArgument("empty exponent grid".into()));
    }
    let cells: Vec<(usize, usize)> = (0..config.nu_values.len())
        .flat_map(|i| (0..config.eta_values.len()).map(move |j| (i, j)))
        .collect();
    let chi2_per_dof: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let params = RescalingParams::new(config.nu_values[i], config.z, config.eta_values[j])
                .ok()?;
            let scaled = rescale(points, &params, None).ok()?;
            let fit = fit_scaling_function(&scaled, config.order, config.mode).ok()?;
            Some(fit.chi2_per_dof())
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (k, c) in chi2_per_dof.iter().enumerate() {
        if let Some(c) = c {
            if best.map_or(true, |(_, bc)| *c < bc) {
                best = Some((k, *c));
            }
        }
    }
    let (k, best_chi2) =
        best.ok_or_else(|| Error::Fit("every cell of the exponent scan failed".into()))?;
    Ok(ScanResult {
        best_nu: config.nu_values[k / config.eta_values.len()],
        best_eta: config.eta_values[k % config.eta_values.len()],
        best_chi2_per_dof: best_chi2,
        nu_values: config.nu_values.clone(),
        eta_values: config.eta_values.clone(),
        chi2_per_dof,
        region_factor: config.region_factor,
    })
}

// ---- noise-induced length ------------------------------------------------------

/// One entry of a decay-ratio table: noisy over noiseless correlation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub x: f64,
    pub ratio: f64,
    pub std_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseLengthFit {
    /// Decay length in sites.
    pub xi: f64,
    /// Drive-scaled length `T * xi`.
    pub xi_tilde: f64,
    pub window: (f64, f64),
    pub slope: f64,
    pub slope_std_error: f64,
    pub points_used: usize,
    pub points_dropped: usize,
}

/// Fits `ln(ratio) = intercept + slope * x` inside the window and reads the
/// decay length off the slope (`xi = -1/slope`). Nonpositive ratios are
/// dropped; a nonnegative slope is reported as a no-decay error.
pub fn extract_xi(
    points: &[RatioPoint],
    window: (f64, f64),
    drive_time: f64,
) -> Result<NoiseLengthFit> {
    if !(drive_time > 0.0) {
        return Err(Error::InvalidArgument(format!("drive time must be > 0, got {drive_time}")));
    }
    let in_window: Vec<&RatioPoint> =
        points.iter().filter(|p| p.x >= window.0 && p.x <= window.1).collect();
    let usable: Vec<&RatioPoint> = in_window.iter().copied().filter(|p| p.ratio > 0.0).collect();
    let dropped = in_window.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 positive ratios in the window, have {}",
            usable.len()
        )));
    }

    let weighted = usable.iter().all(|p| p.std_error > 0.0);
    let mut s = 0.0;
    let mut sx = 0.0;
    let mut sxx = 0.0;
    let mut sy = 0.0;
    let mut sxy = 0.0;
    for p in &usable {
        let y = p.ratio.ln();
        // Error of ln(r) is dr/r by linear propagation.
        let w = if weighted { (p.ratio / p.std_error).powi(2) } else { 1.0 };
        s += w;
        sx += w * p.x;
        sxx += w * p.x * p.x;
        sy += w * y;
        sxy += w * p.x * y;
    }
    let denom = s * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::RankDeficient { x_min: window.0, x_max: window.1 });
    }
    let slope = (s * sxy - sx * sy) / denom;
    let intercept = (sxx * sy - sx * sxy) / denom;

    let mut slope_var = s / denom;
    if !weighted {
        let rss: f64 = usable
            .iter()
            .map(|p| {
                let r = p.ratio.ln() - (intercept + slope * p.x);
                r * r
            })
            .sum();
        slope_var *= rss / (usable.len() - 2) as f64;
    }
    if slope >= 0.0 {
        return Err(Error::NoDecay { slope });
    }
    let xi = -1.0 / slope;
    Ok(NoiseLengthFit {
        xi,
        xi_tilde: drive_time * xi,
        window,
        slope,
        slope_std_error: slope_var.sqrt(),
        points_used: usable.len(),
        points_dropped: dropped,
    })
}

// ---- noise-corrected collapse ---------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct XiTildeFit {
    pub xi_tilde: f64,
    pub chi2_per_dof: f64,
    /// (candidate, chi2/dof) pairs over the search grid.
    pub profile: Vec<(f64, f64)>,
    /// True when the profile is flat to within 1% — the data do not fix
    /// the noise length (e.g. noiseless input).
    pub unidentifiable: bool,
    pub fit: ScalingFit,
}

/// Profiles chi2/dof over the drive-scaled noise length, with exponents
/// held fixed. The exponential envelope joins the scaling function on the
/// model side, and the extra parameter is charged to N_dof.
pub fn fit_xi_tilde(
    points: &[RawPoint],
    params: &RescalingParams,
    order: usize,
    mode: DecayMode,
    search: (f64, f64),
) -> Result<XiTildeFit> {
    if !(search.0 > 0.0 && search.1 > search.0) {
        return Err(Error::InvalidArgument(format!(
            "bad noise-length search range [{}, {}]",
            search.0, search.1
        )));
    }
    let mut drive_times: Vec<f64> = points.iter().map(|p| p.drive_time).collect();
    drive_times.sort_by(f64::total_cmp);
    drive_times.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if drive_times.len() < 2 {
        return Err(Error::InvalidArgument(
            "noise-length profiling needs points from at least two drive times".into(),
        ));
    }

    let eval = |xt: f64| -> Result<(f64, ScalingFit)> {
        let scaled = rescale(points, params, Some(xt))?;
        let mut fit = fit_scaling_function(&scaled, order, mode)?;
        if fit.n_dof <= 1 {
            return Err(Error::Fit("too few points to charge the noise length".into()));
        }
        fit.n_dof -= 1; // xi_tilde is a fitted parameter
        Ok((fit.chi2_per_dof(), fit))
    };

    let (ln_lo, ln_hi) = (search.0.ln(), search.1.ln());
    let n_seed = ATILDE_SEEDS;
    let mut profile = Vec::with_capacity(n_seed);
    let mut best: Option<(f64, f64)> = None;
    for i in 0..n_seed {
        let xt = (ln_lo + (ln_hi - ln_lo) * i as f64 / (n_seed - 1) as f64).exp();
        if let Ok((c, _)) = eval(xt) {
            profile.push((xt, c));
            if best.map_or(true, |(_, bc)| c < bc) {
                best = Some((xt, c));
            }
        }
    }
    if profile.len() < n_seed / 2 {
        return Err(Error::Fit("noise-length profile failed over most of the range".into()));
    }
    let (seed_xt, _) = best.unwrap();

    let bracket = |xt: f64| {
        let u = xt.ln();
        let du = (ln_hi - ln_lo) / (n_seed - 1) as f64;
        ((u - du).max(ln_lo), (u + du).min(ln_hi))
    };
    let (a, b) = bracket(seed_xt);
    let refined = golden_min(a, b, |u| eval(u.exp()).map(|(c, _)| c).unwrap_or(f64::INFINITY));
    let xi_tilde = refined.exp();
    let (chi2_per_dof, fit) = eval(xi_tilde)?;

    let lo = profile.iter().map(|&(_, c)| c).fold(f64::INFINITY, f64::min);
    let hi = profile.iter().map(|&(_, c)| c).fold(f64::NEG_INFINITY, f64::max);
    let unidentifiable = hi - lo < 0.01 * lo.max(1e-300);

    Ok(XiTildeFit { xi_tilde, chi2_per_dof, profile, unidentifiable, fit })
}
